//! Batch commands over files: oracle extraction, training, parsing, sampling and scoring.
//!
//! Each `cmd_*` function checks that its input files exist before doing any work, so a
//! misspelled path fails before a long training run starts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use inorder_core::decode::{parse_greedy, sample, sentence_seed, DecodeError, Derivation};
use inorder_core::eval::{score, EvalConfig, EvalError, EvalReport};
use inorder_core::model::{
    load_model, save_model, train, EpochLog, Hyperparams, Model, ModelError, Pretrained,
    TrainOptions,
};
use inorder_core::transition::{
    execute, oracle, read_oracle_file, write_oracle_file, OracleConfig, OracleEntry, System,
    TransitionError, TraversalK,
};
use inorder_core::treebank::{
    read_trees_with, write_tree, HeadRules, ReadOptions, Token, Tree, TreebankError,
};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: no such file", .0.display())]
    Missing(PathBuf),
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("sentence {index}: {message}")]
    Sentence { index: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("model was trained for {model}, not {requested}")]
    SystemMismatch { model: System, requested: System },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Short category used as the prefix of the one-line error report.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } | CliError::Missing(_) => "io",
            CliError::Input { .. } => "input",
            CliError::Sentence { .. } => "sentence",
            CliError::Model(_) => "model",
            CliError::Eval(_) => "eval",
            CliError::SystemMismatch { .. } => "mismatch",
            CliError::Usage(_) => "usage",
        }
    }

    /// `error[kind]: message` on a single line.
    pub fn report(&self) -> String {
        let message = self
            .to_string()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        format!("error[{}]: {message}", self.kind())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn input_error(path: &Path, e: impl ToString) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn require<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Missing(p.to_path_buf()));
        }
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_treebank(path: &Path, strip_function_tags: bool) -> Result<Vec<(Tree, Vec<Token>)>> {
    let options = ReadOptions {
        strip_function_tags,
    };
    read_trees_with(&read_text(path)?, &options).map_err(|e: TreebankError| input_error(path, e))
}

fn load_rules(path: Option<&Path>) -> Result<HeadRules> {
    match path {
        Some(p) => HeadRules::parse(&read_text(p)?).map_err(|e| input_error(p, e)),
        None => Ok(HeadRules::default()),
    }
}

/// Reads a model file and checks it against the system the caller asked for.
pub fn load_model_file(path: &Path, expected: Option<System>) -> Result<Model> {
    require([path])?;
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let model = load_model(&bytes).map_err(|e| input_error(path, e))?;
    match expected {
        Some(requested) if requested != model.system() => Err(CliError::SystemMismatch {
            model: model.system(),
            requested,
        }),
        _ => Ok(model),
    }
}

/// `inf` or a non-negative integer.
pub fn parse_k(text: &str) -> std::result::Result<TraversalK, String> {
    match text {
        "inf" | "infinity" | "∞" => Ok(TraversalK::Infinite),
        n => n
            .parse()
            .map(TraversalK::Finite)
            .map_err(|_| format!("k must be a non-negative integer or inf, not {n:?}")),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

#[derive(Debug, Clone)]
pub struct OracleArgs {
    pub treebank: PathBuf,
    pub system: System,
    /// Defaults to the system's own traversal.
    pub k: Option<TraversalK>,
    pub head_rules: Option<PathBuf>,
    pub out: PathBuf,
}

/// Writes the gold action sequence of every tree; returns how many were written.
///
/// With the system's own traversal every sequence is executed and must rebuild its tree, so
/// trees the system cannot derive (such as over-long unary chains) are reported here.
pub fn cmd_oracle(args: &OracleArgs) -> Result<usize> {
    require(
        [args.treebank.as_path()]
            .into_iter()
            .chain(args.head_rules.as_deref()),
    )?;
    let rules = load_rules(args.head_rules.as_deref())?;
    let config = match args.k {
        Some(k) => {
            OracleConfig::with_k(args.system, k).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => OracleConfig::new(args.system),
    };
    let corpus = read_treebank(&args.treebank, true)?;
    let entries = corpus
        .iter()
        .enumerate()
        .map(|(index, (tree, tokens))| {
            let failed = |e: TransitionError| CliError::Sentence {
                index,
                message: e.to_string(),
            };
            let actions = oracle(tree, tokens, &config, &rules).map_err(failed)?;
            if config == OracleConfig::new(args.system) {
                let back = execute(&actions, tokens.len(), args.system).map_err(failed)?;
                if &back != tree {
                    return Err(CliError::Sentence {
                        index,
                        message: "gold derivation does not rebuild the tree".into(),
                    });
                }
            }
            Ok(OracleEntry {
                tokens: tokens.clone(),
                actions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_bytes(&args.out, write_oracle_file(&entries).as_bytes())?;
    Ok(entries.len())
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub system: System,
    /// `key=value` settings file.
    pub config: Option<PathBuf>,
    /// `key=value` settings that win over the file.
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub embeddings: Option<PathBuf>,
    pub head_rules: Option<PathBuf>,
    pub model: PathBuf,
}

/// Settings from the built-in defaults, then the config file, then the overrides.
pub fn resolve_hyperparams(args: &TrainArgs) -> Result<Hyperparams> {
    let mut hyper = Hyperparams::default();
    if let Some(path) = &args.config {
        hyper = hyper
            .parse_config(&read_text(path)?)
            .map_err(|e| input_error(path, e))?;
    }
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got {item:?}")))?;
        hyper
            .set(key.trim(), value.trim())
            .map_err(CliError::Usage)?;
    }
    if let Some(seed) = args.seed {
        hyper.seed = seed;
    }
    hyper.validate().map_err(CliError::Usage)?;
    Ok(hyper)
}

pub const LOG_HEADER: &str = "epoch\tloss\tLR\tLP\tF1\tlr";

/// One tab-separated log row; dev columns are `-` without a dev set.
pub fn log_line(entry: &EpochLog) -> String {
    let dev = match entry.dev {
        Some((lr, lp, f1)) => format!("{lr:.2}\t{lp:.2}\t{f1:.2}"),
        None => "-\t-\t-".into(),
    };
    format!(
        "{}\t{:.4}\t{dev}\t{:.6}",
        entry.epoch, entry.loss, entry.learning_rate
    )
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub log: Vec<EpochLog>,
    /// Indices of training sentences whose gold derivation could not be executed.
    pub skipped: Vec<usize>,
}

/// Trains a model, writes it to `args.model`, and streams the epoch log to `log`.
pub fn cmd_train(args: &TrainArgs, log: &mut dyn Write) -> Result<TrainSummary> {
    let inputs = [
        Some(&args.train),
        args.dev.as_ref(),
        args.config.as_ref(),
        args.embeddings.as_ref(),
        args.head_rules.as_ref(),
    ];
    require(inputs.into_iter().flatten().map(PathBuf::as_path))?;
    let hyper = resolve_hyperparams(args)?;
    let rules = load_rules(args.head_rules.as_deref())?;
    let corpus = read_treebank(&args.train, true)?;
    let dev = args
        .dev
        .as_deref()
        .map(|p| read_treebank(p, true))
        .transpose()?;
    let pretrained = match &args.embeddings {
        Some(p) => Some(
            Pretrained::parse(&read_text(p)?, hyper.pretrained_dim)
                .map_err(|e| input_error(p, e))?,
        ),
        None => None,
    };
    let options = TrainOptions {
        hyper,
        rules: &rules,
        dev: dev.as_deref(),
        pretrained: pretrained.as_ref(),
        eval: EvalConfig::default(),
    };
    let mut write_err = None;
    let mut emit = |line: &str| {
        if write_err.is_none() {
            if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                write_err = Some(e);
            }
        }
    };
    emit(LOG_HEADER);
    let outcome = train(&corpus, args.system, &options, |entry| {
        emit(&log_line(entry))
    })?;
    if let Some(source) = write_err {
        return Err(CliError::Io {
            path: PathBuf::from("<log>"),
            source,
        });
    }
    write_bytes(&args.model, &save_model(&outcome.model))?;
    Ok(TrainSummary {
        log: outcome.log,
        skipped: outcome.skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParseMode {
    Greedy,
    Sample { alpha: f64, count: usize },
}

#[derive(Debug, Clone)]
pub struct ParseArgs {
    /// Not needed with `from_oracle`.
    pub model: Option<PathBuf>,
    /// Bracketed trees (only their tokens are used), `form_pos` lines, or with
    /// `from_oracle` an oracle file.
    pub input: PathBuf,
    pub out: PathBuf,
    pub mode: ParseMode,
    /// Checked against the model; required with `from_oracle`.
    pub system: Option<System>,
    /// Rebuild trees by executing the actions of an oracle file instead of decoding.
    pub from_oracle: bool,
    pub seed: u64,
    pub jobs: usize,
}

/// Sentences to parse: tokens of bracketed trees, or one `form_pos form_pos ...` line each.
pub fn read_sentences(path: &Path) -> Result<Vec<Vec<Token>>> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('(') {
        return Ok(read_treebank(path, true)?
            .into_iter()
            .map(|(_, tokens)| tokens)
            .collect());
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split_whitespace()
                .map(|w| {
                    let (form, pos) = w
                        .rsplit_once('_')
                        .ok_or_else(|| input_error(path, format!("token {w:?} is not form_pos")))?;
                    Token::new(form, pos).map_err(|e| input_error(path, e))
                })
                .collect()
        })
        .collect()
}

fn render_samples(samples: &[Derivation], tokens: &[Token]) -> String {
    let mut out = String::new();
    for d in samples {
        let _ = writeln!(out, "{}\t{}", d.log_prob, write_tree(&d.tree, tokens));
    }
    out
}

/// Parses or samples every input sentence and returns the number of sentences written.
///
/// Greedy output has one tree per line. Sample output has one `log_prob<TAB>tree` line per
/// sample and a blank line between sentences.
pub fn cmd_parse(args: &ParseArgs) -> Result<usize> {
    require(
        [args.input.as_path()]
            .into_iter()
            .chain(args.model.as_deref()),
    )?;
    if args.from_oracle {
        return parse_from_oracle(args);
    }
    let model_path = args
        .model
        .as_deref()
        .ok_or_else(|| CliError::Usage("parsing needs a model file".into()))?;
    let model = load_model_file(model_path, args.system)?;
    let sentences = read_sentences(&args.input)?;
    let decode = |index: usize, tokens: &Vec<Token>| -> Result<String> {
        let failed = |e: DecodeError| CliError::Sentence {
            index,
            message: e.to_string(),
        };
        match args.mode {
            ParseMode::Greedy => {
                let d = parse_greedy(&model, tokens).map_err(failed)?;
                Ok(write_tree(&d.tree, tokens) + "\n")
            }
            ParseMode::Sample { alpha, count } => {
                let samples = sample(
                    &model,
                    tokens,
                    alpha,
                    count,
                    sentence_seed(args.seed, index),
                )
                .map_err(failed)?;
                Ok(render_samples(&samples, tokens))
            }
        }
    };
    let blocks: Vec<String> = pool(args.jobs)?.install(|| {
        sentences
            .par_iter()
            .enumerate()
            .map(|(i, tokens)| decode(i, tokens))
            .collect::<Result<Vec<_>>>()
    })?;
    let separator = match args.mode {
        ParseMode::Greedy => "",
        ParseMode::Sample { .. } => "\n",
    };
    write_bytes(&args.out, blocks.join(separator).as_bytes())?;
    Ok(blocks.len())
}

fn parse_from_oracle(args: &ParseArgs) -> Result<usize> {
    let system = match (args.system, &args.model) {
        (Some(s), _) => s,
        (None, Some(m)) => load_model_file(m, None)?.system(),
        (None, None) => return Err(CliError::Usage("--from-oracle needs a system".into())),
    };
    let entries =
        read_oracle_file(&read_text(&args.input)?).map_err(|e| input_error(&args.input, e))?;
    let mut out = String::new();
    for (index, entry) in entries.iter().enumerate() {
        let tree = execute(&entry.actions, entry.tokens.len(), system).map_err(|e| {
            CliError::Sentence {
                index,
                message: e.to_string(),
            }
        })?;
        out.push_str(&write_tree(&tree, &entry.tokens));
        out.push('\n');
    }
    write_bytes(&args.out, out.as_bytes())?;
    Ok(entries.len())
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub gold: PathBuf,
    pub pred: PathBuf,
    pub config: EvalConfig,
    pub jobs: usize,
}

/// Scores predicted trees against gold trees, sentence by sentence.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    require([args.gold.as_path(), args.pred.as_path()])?;
    let gold = read_treebank(&args.gold, args.config.strip_function_tags)?;
    let pred: Vec<Tree> = read_treebank(&args.pred, args.config.strip_function_tags)?
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    inorder_core::eval::check_pairs(&gold, &pred)?;
    let reports: Vec<EvalReport> = pool(args.jobs)?.install(|| {
        gold.par_iter()
            .zip(pred.par_iter())
            .map(|((g, tokens), p)| {
                score(
                    &[(g.clone(), tokens.clone())],
                    std::slice::from_ref(p),
                    &args.config,
                )
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    Ok(reports
        .into_iter()
        .fold(EvalReport::default(), EvalReport::merge))
}

/// Per-label, sentence-length and span-length tables.
pub fn analysis_tables(report: &EvalReport) -> String {
    [
        report.label_table(),
        report.length_table(),
        report.span_table(),
    ]
    .join("\n")
}

/// Writes `text` to `out`, or to standard output when `out` is `None`.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}
