use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "factkit", version, about = "Personal-fact classification pipeline")]
pub struct Cli {
    /// TOML run configuration; every key has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonicalize raw annotator output into a labelled facts file.
    Canon(CanonArgs),
    /// Cluster facts by embedding and keep up to `cap` per cluster.
    Sample(SampleArgs),
    /// Write a seeded stratified train/val/test split.
    Split(SplitArgs),
    /// Embed fact texts through the HTTP embedding service.
    #[command(name = "embed-fetch")]
    EmbedFetch(EmbedFetchArgs),
    /// Train one multi-head model per seed and report test macro-F1.
    Train(TrainArgs),
    /// Predict labels for every fact with a trained checkpoint.
    Predict(PredictArgs),
    /// Score prediction files against gold labels.
    Eval(EvalArgs),
    /// TF-IDF + logistic regression baseline over the same seeds and splits.
    Baseline(TrainArgs),
    /// Agreement statistics between two or more label files.
    Agree(AgreeArgs),
    /// Corpus label distribution from seed models, with the overlap audit.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct CanonArgs {
    /// Raw annotation JSONL.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Tab-separated `id  reason` lines for excluded facts [default: <out>.exclusions.tsv].
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub facts: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of clusters [default: 1000].
    #[arg(long)]
    pub k: Option<usize>,
    /// Facts kept per cluster [default: 3].
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub facts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EmbedFetchArgs {
    #[arg(long)]
    pub facts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Service base URL; `/embed` is appended when missing.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub facts: PathBuf,
    /// Fact embeddings (`.emb`); unused by `baseline`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Use this split for every seed instead of a fresh split per seed.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Restrict and order predictions by this facts file.
    #[arg(long)]
    pub facts: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold facts.
    #[arg(long)]
    pub facts: PathBuf,
    /// One predictions file per seed.
    #[arg(long, num_args = 1.., required = true)]
    pub predictions: Vec<PathBuf>,
    /// Score only the test ids of this split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// Two or more facts files labelled by different raters, aligned by id.
    #[arg(long, num_args = 2.., required = true)]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Checkpoints of the seed models.
    #[arg(long, num_args = 1.., required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Embeddings covering every corpus fact.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Training facts for the overlap audit.
    #[arg(long)]
    pub train_facts: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Canon(a) => commands::canon(&config, &a),
        Command::Sample(a) => commands::sample(config, &a),
        Command::Split(a) => commands::split(config, &a),
        Command::EmbedFetch(a) => commands::embed_fetch(config, &a),
        Command::Train(a) => commands::train(config, &a),
        Command::Predict(a) => commands::predict_cmd(&config, &a),
        Command::Eval(a) => commands::eval(&config, &a),
        Command::Baseline(a) => commands::baseline(config, &a),
        Command::Agree(a) => commands::agree(&config, &a),
        Command::Analyze(a) => commands::analyze(&config, &a),
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
