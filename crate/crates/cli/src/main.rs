//! `nerboot`: build, train, evaluate and audit NER datasets from the shell.

mod commands;
mod config;
mod run;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "nerboot", version, about = "Bootstrap, train and audit low-resource NER datasets")]
pub struct Cli {
    /// TOML run configuration; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for this run's outputs (default: <runs_dir>/<timestamp>-<config hash>)
    #[arg(long, global = true, value_name = "DIR")]
    pub run_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Target-language vocabulary
    #[command(subcommand)]
    Vocab(VocabCmd),
    /// Preliminary dataset construction
    #[command(subcommand)]
    Bootstrap(BootstrapCmd),
    /// Split, count and validate labeled datasets
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train a model
    Train(TrainArgs),
    /// Score a trained model on a labeled dataset
    Eval(EvalArgs),
    /// Train and score every ablation variant over several seeds
    Ablate(AblateArgs),
    /// Run one audit iteration: merge resolutions, retrain, queue disagreements
    Iterate(IterateArgs),
    /// Serve the audit HTTP API (and optionally the audit UI)
    Serve(ServeArgs),
    /// Generate the synthetic Malay-like corpus
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum VocabCmd {
    /// Collect every distinct token of raw target-language text
    Build {
        /// Raw text files, one sentence or paragraph per line (default: paths.corpus)
        inputs: Vec<PathBuf>,
        /// Output file, one token per line (default: <run dir>/vocab.txt)
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Keep case distinctions instead of lowercasing
        #[arg(long)]
        keep_case: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum BootstrapCmd {
    /// Keep homologous-language sentences whose tokens are all in the vocabulary
    Filter {
        /// Labeled homologous-language data (default: paths.homologous)
        #[arg(long)]
        source: Option<PathBuf>,
        /// Vocabulary file (default: paths.vocab)
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Output dataset; `.jsonl` keeps ids and provenance (default: <run dir>/filtered.jsonl)
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Keep case distinctions instead of lowercasing
        #[arg(long)]
        keep_case: bool,
    },
    /// Tag raw target-language text with gazetteer and trigger rules
    Rules {
        /// Raw text, one sentence per line (default: paths.corpus)
        #[arg(long)]
        input: Option<PathBuf>,
        /// Rule/gazetteer TOML (default: paths.rules)
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Filtered homologous data to merge in front of the rule-tagged sentences
        #[arg(long)]
        homologous: Option<PathBuf>,
        /// Output dataset (default: <run dir>/seed.jsonl)
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Seeded 80/10/10 train/dev/test split
    Split {
        /// Dataset to split (default: paths.dataset)
        #[arg(long)]
        input: Option<PathBuf>,
        /// Shuffle seed (default: hyper.seed)
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for train/dev/test files (default: the run directory)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sentence, token and entity counts
    Stats {
        /// Dataset (default: paths.dataset)
        #[arg(long)]
        input: Option<PathBuf>,
        /// Print JSON instead of a text table
        #[arg(long)]
        json: bool,
    },
    /// Check that a file parses as BIO2 with legal transitions
    Validate {
        /// Dataset (default: paths.dataset)
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// Flags shared by every command that trains.
#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    /// Training epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for initialization, shuffling and revision draws
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mini-batch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Optimizer learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Ablation variant: full, no_bd, no_revision, no_gate or no_random
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data (default: paths.train)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Held-out data scored after training (default: paths.dev)
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory holding model.ckpt and model.json (default: paths.model)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Labeled data to score (default: paths.test)
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training data (default: paths.train)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test data (default: paths.test)
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Comma-separated seeds (default: config seeds)
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Comma-separated variants (default: all five)
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct IterateArgs {
    /// The dataset being audited, before any merges (default: paths.dataset)
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Audit store file (default: paths.audit_store)
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Held-out data scored each iteration (default: paths.dev)
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Audit store file (default: paths.audit_store)
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Address to listen on
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Built audit UI to serve next to the API
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Dataset to retrain on when /api/iterate is called (default: paths.dataset)
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Where /api/iterate writes the merged dataset
    #[arg(long)]
    pub dataset_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of sentences
    #[arg(long, default_value_t = 2000)]
    pub sentences: usize,
    /// Generator seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output dataset (default: <run dir>/synth.bio)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write the matching rule/gazetteer TOML here
    #[arg(long)]
    pub rules_out: Option<PathBuf>,
}

/// How a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let sink = run::LogSink::default();
    run::init_logging(sink.clone());
    match commands::dispatch(cli, &sink) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let cause = match &f {
                Failure::Usage(m) => m.clone(),
                Failure::Data(e) | Failure::Runtime(e) => format!("{e:#}"),
            };
            eprintln!("error: {}", cause.lines().next().unwrap_or_default());
            eprintln!("(set NERBOOT_LOG=debug for more detail; long runs also log to <run dir>/run.log)");
            ExitCode::from(f.code())
        }
    }
}
