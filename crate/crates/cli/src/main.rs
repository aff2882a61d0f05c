//! `orient`: fit, apply and analyze conversational orientation models.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use settings::ConfigArgs;

#[derive(Debug, Parser)]
#[command(
    name = "orient",
    version,
    about = "Forwards/backwards orientation of conversational utterances"
)]
struct Cli {
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CorpusArgs {
    /// Corpus JSONL, one utterance per line.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Role labels read as the agent side.
    #[arg(long, value_delimiter = ',', default_value = "agent")]
    pub agent_labels: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "client")]
    pub client_labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RoleArg {
    Agent,
    Client,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Analysis {
    /// Mean Ω^min and Ω^max per conversation segment.
    Segments,
    /// Within-counselor Wilcoxon tests of a boolean key per segment.
    SegmentTests,
    /// One row per conversation.
    Summaries,
    /// Length-decile buckets.
    Lengths,
    /// Conversations with a boolean key set versus unset.
    Outcomes,
    /// Counselor tendencies on interleaved conversation subsets.
    Counselors,
    /// Bottom third of counselors by tendency against the rest.
    Terciles,
    /// Naive distance, backwards range and question baselines.
    Baselines,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InspectWhat {
    /// Resolved configuration.
    Config,
    /// Agent vocabulary of a model: id, phrasing, df, uf.
    Vocab,
    /// Model header, diagnostics and the most oriented phrasings.
    Model,
    /// Corpus counts and record errors.
    Corpus,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an orientation model on a corpus.
    Fit {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Model file to write.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Also store central points and the latent space.
        #[arg(long)]
        full: bool,
        /// Diagnostics report; defaults to `<out>.report.json`.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        /// Client tf-idf matrix as (row, col, value) triplets.
        #[arg(long, value_name = "PATH")]
        dump_matrix: Option<PathBuf>,
        /// Singular values and row-embedding norms as JSON.
        #[arg(long, value_name = "PATH")]
        dump_latent: Option<PathBuf>,
    },
    /// Score utterances with a fitted model.
    Score {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Scores JSONL; stdout when absent.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "agent")]
        role: RoleArg,
        /// Required to score the client role.
        #[arg(long)]
        allow_role_override: bool,
    },
    /// Aggregate analyses of scored conversations.
    Analyze {
        #[arg(value_enum)]
        which: Analysis,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Scores JSONL from `orient score`.
        #[arg(long, value_name = "PATH")]
        scores: Option<PathBuf>,
        /// Model file; needed by baselines.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Metadata key to group segment rows by.
        #[arg(long)]
        group_by: Option<String>,
        /// Boolean metadata key for outcome-based analyses.
        #[arg(long, default_value = "helpful")]
        key: String,
        /// Length bucket edges; deciles when absent.
        #[arg(long, value_delimiter = ',')]
        edges: Option<Vec<f64>>,
        /// Skip bootstrap intervals.
        #[arg(long)]
        no_ci: bool,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Baseline measures for every agent utterance.
    Baseline {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Model file for the backwards-range column.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Extractor for the shared tf-idf space.
        #[arg(long, default_value = "unigram")]
        extractor: String,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Generate a planted synthetic corpus with its ground truth.
    Synth {
        /// default, drift or perf.
        #[arg(long, default_value = "default")]
        preset: String,
        /// Falls back to ORIENT_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        conversations: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        drift: Option<f64>,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Ground-truth sidecar; defaults to `<out>.truth.json`.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
    },
    /// Print configurations, vocabularies, model or corpus summaries.
    Inspect {
        #[arg(value_enum)]
        what: InspectWhat,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Phrasings listed at each end of the orientation ranking.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if closed_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn closed_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>().is_some_and(|e| match e.kind() {
                csv::ErrorKind::Io(io) => io.kind() == std::io::ErrorKind::BrokenPipe,
                _ => false,
            })
            || c.downcast_ref::<serde_json::Error>()
                .is_some_and(|e| e.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe))
    })
}
