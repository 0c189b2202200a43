//! The `crs` command-line tool and HTTP service.

pub mod commands;
pub mod config;
pub mod data;
pub mod server;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "crs", version, about = "Conversational movie recommendation workbench")]
pub struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run data-parallel stages on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse one raw dataset and write its records as JSONL.
    Ingest(IngestArgs),
    /// Training corpora.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Co-occurrence statistics store.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Matrix factorization baseline.
    #[command(subcommand)]
    Mf(MfCommand),
    /// Probe sets.
    #[command(subcommand)]
    Probes(ProbesCommand),
    /// Dialogue and probe metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Answer every recommender turn of a ReDial file with the chat policy.
    Generate(GenerateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Interactive chat in the terminal.
    Chat(StoreArg),
    /// Write a synthetic raw dataset directory.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    Redial,
    Ratings,
    Movies,
    Genome,
    Reviews,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub dataset: Dataset,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Tag names file (`genome-tags.csv`) for the genome dataset.
    #[arg(long)]
    pub names: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Fail on the first rejected record.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    Build(CorpusBuildArgs),
}

#[derive(Debug, Args)]
pub struct CorpusBuildArgs {
    /// Comma-separated tasks (redial, sequences, tags, reviews) or `all`.
    #[arg(long, default_value = "all")]
    pub tasks: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Raw dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    Build(StatsBuildArgs),
}

#[derive(Debug, Args)]
pub struct StatsBuildArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Probe-eligibility threshold on liked-sequence occurrences.
    #[arg(long, default_value_t = 30)]
    pub eligible_above: u64,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Subcommand)]
pub enum MfCommand {
    Train(MfTrainArgs),
}

#[derive(Debug, Args)]
pub struct MfTrainArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub reg: f64,
}

#[derive(Debug, Subcommand)]
pub enum ProbesCommand {
    Gen(ProbesGenArgs),
}

#[derive(Debug, Args)]
pub struct ProbesGenArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// rec, attr, combo, desc or all.
    #[arg(long, default_value = "all")]
    pub family: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerKind {
    Composite,
    Ngram,
    Remote,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Report timestamp in seconds since the epoch. Defaults to
    /// SOURCE_DATE_EPOCH, then the current time.
    #[arg(long)]
    pub timestamp: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DialogueArgs {
    /// Generated dialogues, JSONL of {"conversation_id", "turns"}.
    #[arg(long)]
    pub generated: PathBuf,
    /// Raw ReDial file with the human dialogues.
    #[arg(long)]
    pub references: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct EvalProbesArgs {
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long, value_enum)]
    pub scorer: Option<ScorerKind>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Remote scorer base URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Composite weights as relation,tag,popularity.
    #[arg(long)]
    pub weights: Option<String>,
    /// Corpus directory for the n-gram backend.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Score without the task label in front of probe inputs.
    #[arg(long)]
    pub no_prefix: bool,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    Bleu(DialogueArgs),
    Recall(DialogueArgs),
    Probes(EvalProbesArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub redial: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scorer: Option<ScorerKind>,
}

#[derive(Debug, Args)]
pub struct StoreArg {
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub dialogues: Option<usize>,
}

pub use commands::run;
