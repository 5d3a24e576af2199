use std::path::{Path, PathBuf};
use std::process::Command;

use inorder_cli::{
    analysis_tables, cmd_eval, cmd_oracle, cmd_parse, cmd_train, log_line, resolve_hyperparams,
    CliError, EvalArgs, OracleArgs, ParseArgs, ParseMode, TrainArgs, LOG_HEADER,
};
use inorder_core::eval::EvalConfig;
use inorder_core::model::Hyperparams;
use inorder_core::transition::{read_oracle_file, Action, System};
use tempfile::TempDir;

const TOY: &str = "\
(S (NP (NNP John)) (VP (VBZ likes) (NP (DT the) (NN dog))) (. .))
(S (NP (DT the) (NN cat)) (VP (VBD slept)) (. .))
(S (NP (NNP Mary)) (VP (VBZ sees) (NP (DT a) (JJ red) (NN ball)) (PP (IN in) (NP (DT the) (NN park)))) (. .))
";

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn train_args(dir: &TempDir, system: System, overrides: &[&str]) -> TrainArgs {
    TrainArgs {
        train: file(dir, "train.mrg", TOY),
        dev: None,
        system,
        config: None,
        overrides: overrides.iter().map(|s| s.to_string()).collect(),
        seed: None,
        embeddings: None,
        head_rules: None,
        model: dir.path().join(format!("{system}.model")),
    }
}

const SMALL: [&str; 7] = [
    "word_dim=4",
    "pretrained_dim=3",
    "pos_dim=3",
    "action_dim=3",
    "lstm_input_dim=6",
    "lstm_hidden_dim=5",
    "epochs=2",
];

fn parse_args(model: &Path, input: PathBuf, out: PathBuf, mode: ParseMode) -> ParseArgs {
    ParseArgs {
        model: Some(model.to_path_buf()),
        input,
        out,
        mode,
        system: None,
        from_oracle: false,
        seed: 1,
        jobs: 2,
    }
}

#[test]
fn one_word_oracles() {
    let dir = TempDir::new().unwrap();
    let treebank = file(&dir, "one.mrg", "(NP (NN dogs))\n");
    let want = [
        (System::BottomUp, "SHIFT UNARY_NP FINISH"),
        (System::TopDown, "NT_NP SHIFT REDUCE"),
        (System::InOrder, "SHIFT PJ_NP REDUCE FINISH"),
    ];
    for (system, spelled) in want {
        let out = dir.path().join("one.oracle");
        let n = cmd_oracle(&OracleArgs {
            treebank: treebank.clone(),
            system,
            k: None,
            head_rules: None,
            out: out.clone(),
        })
        .unwrap();
        assert_eq!(n, 1);
        let entries = read_oracle_file(&std::fs::read_to_string(out).unwrap()).unwrap();
        let got: Vec<String> = entries[0].actions.iter().map(Action::to_string).collect();
        assert_eq!(got.join(" "), spelled);
    }
}

#[test]
fn oracle_rejects_underivable_trees() {
    let dir = TempDir::new().unwrap();
    let long_chain = file(&dir, "chain.mrg", "(A (B (C (D (E (X x))))))\n");
    let star = file(&dir, "star.mrg", "(X* (Y y) (Z z))\n");
    let run = |treebank: &PathBuf, system| {
        cmd_oracle(&OracleArgs {
            treebank: treebank.clone(),
            system,
            k: None,
            head_rules: None,
            out: dir.path().join("out.oracle"),
        })
    };
    assert!(matches!(
        run(&long_chain, System::BottomUp),
        Err(CliError::Sentence { index: 0, .. })
    ));
    assert!(matches!(
        run(&star, System::BottomUp),
        Err(CliError::Sentence { index: 0, .. })
    ));
    assert!(run(&star, System::TopDown).is_ok());
    assert!(matches!(
        run(&dir.path().join("missing.mrg"), System::TopDown),
        Err(CliError::Missing(_))
    ));
}

#[test]
fn settings_precedence() {
    let dir = TempDir::new().unwrap();
    let config = file(
        &dir,
        "train.cfg",
        "# overrides\nepochs = 7\nword_dim=8\nseed=9\n",
    );
    let mut args = train_args(&dir, System::InOrder, &["epochs=3"]);
    args.config = Some(config);
    let hyper = resolve_hyperparams(&args).unwrap();
    assert_eq!(hyper.epochs, 3);
    assert_eq!(hyper.word_dim, 8);
    assert_eq!(hyper.seed, 9);
    assert_eq!(
        hyper.lstm_hidden_dim,
        Hyperparams::default().lstm_hidden_dim
    );
    args.seed = Some(4);
    assert_eq!(resolve_hyperparams(&args).unwrap().seed, 4);
    args.overrides.push("no_such_key=1".into());
    assert!(matches!(
        resolve_hyperparams(&args),
        Err(CliError::Usage(_))
    ));
}

#[test]
fn training_log_has_fixed_columns() {
    let dir = TempDir::new().unwrap();
    let mut args = train_args(&dir, System::TopDown, &SMALL);
    args.dev = Some(args.train.clone());
    let mut log = Vec::new();
    let summary = cmd_train(&args, &mut log).unwrap();
    let text = String::from_utf8(log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], LOG_HEADER);
    assert_eq!(lines.len(), 1 + summary.log.len());
    for (line, entry) in lines[1..].iter().zip(&summary.log) {
        assert_eq!(*line, log_line(entry));
        assert_eq!(line.split('\t').count(), 6);
    }
    assert!(args.model.is_file());
}

#[test]
fn parse_and_sample_formats() {
    let dir = TempDir::new().unwrap();
    let args = train_args(&dir, System::InOrder, &SMALL);
    cmd_train(&args, &mut std::io::sink()).unwrap();

    let greedy = dir.path().join("greedy.txt");
    let n = cmd_parse(&parse_args(
        &args.model,
        args.train.clone(),
        greedy.clone(),
        ParseMode::Greedy,
    ))
    .unwrap();
    assert_eq!(n, 3);
    let text = std::fs::read_to_string(&greedy).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with('(')));

    let tagged = file(
        &dir,
        "tagged.txt",
        "the_DT dog_NN slept_VBD ._.\n\nzebras_NNS ran_VBD\n",
    );
    let samples = dir.path().join("samples.txt");
    let mode = ParseMode::Sample {
        alpha: 0.8,
        count: 4,
    };
    assert_eq!(
        cmd_parse(&parse_args(&args.model, tagged, samples.clone(), mode)).unwrap(),
        2
    );
    let text = std::fs::read_to_string(&samples).unwrap();
    let blocks: Vec<&str> = text.split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    for block in blocks {
        let lines: Vec<&str> = block.lines().collect();
        assert_eq!(lines.len(), 4);
        let scores: Vec<f64> = lines
            .iter()
            .map(|l| {
                let (score, tree) = l.split_once('\t').unwrap();
                assert!(tree.starts_with('('));
                score.parse().unwrap()
            })
            .collect();
        assert!(scores.iter().all(|&s| s <= 0.0));
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn empty_input_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    let args = train_args(&dir, System::BottomUp, &SMALL);
    cmd_train(&args, &mut std::io::sink()).unwrap();
    let empty = file(&dir, "empty.txt", "\n");
    let out = dir.path().join("out.txt");
    for mode in [
        ParseMode::Greedy,
        ParseMode::Sample {
            alpha: 0.8,
            count: 3,
        },
    ] {
        assert_eq!(
            cmd_parse(&parse_args(&args.model, empty.clone(), out.clone(), mode)).unwrap(),
            0
        );
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    }
}

#[test]
fn model_system_is_enforced() {
    let dir = TempDir::new().unwrap();
    let args = train_args(&dir, System::BottomUp, &SMALL);
    cmd_train(&args, &mut std::io::sink()).unwrap();
    let mut parse = parse_args(
        &args.model,
        args.train.clone(),
        dir.path().join("o.txt"),
        ParseMode::Greedy,
    );
    parse.system = Some(System::TopDown);
    assert!(matches!(
        cmd_parse(&parse),
        Err(CliError::SystemMismatch {
            model: System::BottomUp,
            requested: System::TopDown
        })
    ));
    let garbage = file(&dir, "garbage.model", "not a model");
    parse.model = Some(garbage);
    parse.system = None;
    assert!(matches!(cmd_parse(&parse), Err(CliError::Input { .. })));
}

#[test]
fn eval_identity_and_label_table() {
    let dir = TempDir::new().unwrap();
    let gold = file(&dir, "gold.mrg", TOY);
    let report = cmd_eval(&EvalArgs {
        gold: gold.clone(),
        pred: gold.clone(),
        config: EvalConfig::default(),
        jobs: 3,
    })
    .unwrap();
    assert_eq!(report.f1(), 100.0);
    assert_eq!(report.exact_match, 3);
    let kv = report.to_key_value();
    for label in ["NP", "VP", "S", "PP"] {
        assert!(kv.contains(&format!("per_label.{label}.f1=")), "{kv}");
    }
    let tables = analysis_tables(&report);
    assert!(tables.contains("NP") && tables.contains("PP"));

    let short = file(&dir, "short.mrg", "(S (NP (NNP John)) (VP (VBD ran)))\n");
    let err = cmd_eval(&EvalArgs {
        gold,
        pred: short,
        config: EvalConfig::default(),
        jobs: 1,
    })
    .unwrap_err();
    assert_eq!(err.kind(), "eval");
}

fn inorder() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inorder"))
}

#[test]
fn binary_reports_one_line_errors() {
    let out = inorder()
        .args([
            "oracle",
            "--treebank",
            "/nonexistent/tb.mrg",
            "--system",
            "in-order",
            "--out",
            "/dev/null",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error[io]: "));

    let out = inorder()
        .args(["oracle", "--system", "sideways"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error[usage]: "));
}

#[test]
fn binary_round_trip_and_seed_fallback() {
    let dir = TempDir::new().unwrap();
    let train = file(&dir, "train.mrg", TOY);
    let oracle = dir.path().join("train.oracle");
    let rebuilt = dir.path().join("rebuilt.mrg");
    let status = inorder()
        .args(["oracle", "--system", "bottom-up", "--treebank"])
        .arg(&train)
        .arg("--out")
        .arg(&oracle)
        .status()
        .unwrap();
    assert!(status.success());
    let status = inorder()
        .args(["parse", "--from-oracle", "--system", "bottom-up", "--input"])
        .arg(&oracle)
        .arg("--out")
        .arg(&rebuilt)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(&rebuilt).unwrap(), TOY);

    let mut models = Vec::new();
    for (name, env_seed, flag_seed) in [
        ("a", Some("5"), None),
        ("b", None, Some("5")),
        ("c", Some("6"), None),
    ] {
        let model = dir.path().join(format!("{name}.model"));
        let mut cmd = inorder();
        cmd.args(["train", "--system", "in-order", "--train"])
            .arg(&train)
            .arg("--model")
            .arg(&model);
        for s in SMALL {
            cmd.args(["--set", s]);
        }
        cmd.env_remove("INORDER_SEED");
        if let Some(s) = env_seed {
            cmd.env("INORDER_SEED", s);
        }
        if let Some(s) = flag_seed {
            cmd.args(["--seed", s]);
        }
        let out = cmd.output().unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let log = String::from_utf8(out.stdout).unwrap();
        assert_eq!(log.lines().next(), Some(LOG_HEADER));
        models.push(std::fs::read(model).unwrap());
    }
    assert_eq!(models[0], models[1]);
    assert_ne!(models[0], models[2]);
}
