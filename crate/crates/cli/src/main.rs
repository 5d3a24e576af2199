use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inorder_cli::{
    analysis_tables, cmd_eval, cmd_oracle, cmd_parse, cmd_train, emit, parse_k, CliError, EvalArgs,
    OracleArgs, ParseArgs, ParseMode, TrainArgs,
};
use inorder_core::decode::{DEFAULT_ALPHA, DEFAULT_SAMPLES};
use inorder_core::eval::EvalConfig;
use inorder_core::transition::{System, TraversalK};

#[derive(Parser)]
#[command(
    name = "inorder",
    version,
    about = "Transition-based constituency parsing"
)]
struct Cli {
    /// Seed for every random choice; training falls back to the config file, then 1.
    #[arg(long, global = true, env = "INORDER_SEED")]
    seed: Option<u64>,
    /// Worker threads for parse, sample and eval (0 = one per core).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write gold action sequences for a treebank.
    Oracle {
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long, value_parser = parse_system)]
        system: System,
        /// Leftmost children visited before their parent (`inf` for post-order).
        #[arg(long, value_parser = parse_k)]
        k: Option<TraversalK>,
        #[arg(long)]
        head_rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and print one log line per epoch.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, value_parser = parse_system)]
        system: System,
        /// key=value settings file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// key=value setting; wins over the config file. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        head_rules: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Epoch log destination; standard output by default.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Parse sentences greedily or draw samples.
    Parse {
        #[command(flatten)]
        common: ParseCommon,
        #[arg(long, value_enum, default_value_t = Mode::Greedy)]
        mode: Mode,
    },
    /// Same as `parse --mode sample`.
    Sample {
        #[command(flatten)]
        common: ParseCommon,
    },
    /// Score predicted trees against gold trees.
    Eval {
        #[command(flatten)]
        scoring: Scoring,
        /// Text report destination; standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write key=value lines here.
        #[arg(long)]
        kv: Option<PathBuf>,
    },
    /// Per-label, sentence-length and span-length breakdown tables.
    Analyze {
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Greedy,
    Sample,
}

#[derive(Args)]
struct ParseCommon {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rejected when it differs from the model's system.
    #[arg(long, value_parser = parse_system)]
    system: Option<System>,
    /// Input is an oracle file; its actions are executed instead of decoding.
    #[arg(long)]
    from_oracle: bool,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    count: usize,
}

#[derive(Args)]
struct Scoring {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Score PRT as ADVP.
    #[arg(long)]
    advp_prt: bool,
    #[arg(long)]
    keep_function_tags: bool,
    /// Comma-separated POS tags removed before scoring.
    #[arg(long, value_delimiter = ',')]
    delete_pos: Option<Vec<String>>,
    /// Comma-separated root labels that are not scored.
    #[arg(long, value_delimiter = ',')]
    root_labels: Option<Vec<String>>,
}

impl Scoring {
    fn args(self, jobs: usize) -> EvalArgs {
        let mut config = EvalConfig {
            advp_prt: self.advp_prt,
            strip_function_tags: !self.keep_function_tags,
            ..EvalConfig::default()
        };
        if let Some(tags) = self.delete_pos {
            config.delete_pos = tags
                .into_iter()
                .filter(|t| !t.is_empty())
                .collect::<HashSet<_>>();
        }
        if let Some(labels) = self.root_labels {
            config.root_labels = labels
                .into_iter()
                .filter(|t| !t.is_empty())
                .collect::<HashSet<_>>();
        }
        EvalArgs {
            gold: self.gold,
            pred: self.pred,
            config,
            jobs,
        }
    }
}

fn parse_system(s: &str) -> Result<System, String> {
    s.parse()
}

fn parse_args(common: ParseCommon, sample: bool, seed: u64, jobs: usize) -> ParseArgs {
    ParseArgs {
        model: common.model,
        input: common.input,
        out: common.out,
        mode: if sample {
            ParseMode::Sample {
                alpha: common.alpha,
                count: common.count,
            }
        } else {
            ParseMode::Greedy
        },
        system: common.system,
        from_oracle: common.from_oracle,
        seed,
        jobs,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(1);
    match cli.command {
        Command::Oracle {
            treebank,
            system,
            k,
            head_rules,
            out,
        } => {
            cmd_oracle(&OracleArgs {
                treebank,
                system,
                k,
                head_rules,
                out,
            })?;
        }
        Command::Train {
            train,
            dev,
            system,
            config,
            overrides,
            embeddings,
            head_rules,
            model,
            log,
        } => {
            let args = TrainArgs {
                train,
                dev,
                system,
                config,
                overrides,
                seed: cli.seed,
                embeddings,
                head_rules,
                model,
            };
            let mut sink: Box<dyn Write> = match &log {
                Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| {
                    CliError::Io {
                        path: p.clone(),
                        source,
                    }
                })?)),
                None => Box::new(std::io::stdout().lock()),
            };
            let summary = cmd_train(&args, &mut sink)?;
            if !summary.skipped.is_empty() {
                eprintln!(
                    "skipped {} training sentences without an executable derivation",
                    summary.skipped.len()
                );
            }
        }
        Command::Parse { common, mode } => {
            cmd_parse(&parse_args(
                common,
                matches!(mode, Mode::Sample),
                seed,
                cli.jobs,
            ))?;
        }
        Command::Sample { common } => {
            cmd_parse(&parse_args(common, true, seed, cli.jobs))?;
        }
        Command::Eval { scoring, out, kv } => {
            let report = cmd_eval(&scoring.args(cli.jobs))?;
            emit(out.as_deref(), &report.to_text())?;
            if let Some(kv) = kv {
                emit(Some(&kv), &report.to_key_value())?;
            }
        }
        Command::Analyze { scoring, out } => {
            let report = cmd_eval(&scoring.args(cli.jobs))?;
            emit(out.as_deref(), &analysis_tables(&report))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("{}", CliError::Usage(first).report());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::FAILURE
        }
    }
}
