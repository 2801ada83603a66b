//! `lyriccanvas` command-line entry point.
//!
//! Every subcommand reads and writes the file formats of the library modules.
//! Failures print a single JSON object on stderr:
//! `{"error": {"kind": "...", "message": "..."}}`; configuration problems exit
//! with status 2, everything else with 1.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lyriccanvas::config::ConfigError;
use lyriccanvas::pipeline::PipelineError;

#[derive(Parser, Debug)]
#[command(name = "lyriccanvas", version, about = "Lyric corpus to visual-elaboration datasets, metrics and video plans")]
pub struct Cli {
    /// Pipeline configuration (TOML or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set endpoint.max_inflight=8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse scraped song JSONL into a corpus with per-line word statistics.
    Ingest(IoArgs),
    /// Apply the line, diversity and per-artist filters to a corpus.
    Filter(IoArgs),
    /// Generate visual elaborations for every corpus song (resumable).
    Elaborate(ElaborateArgs),
    /// Emit loss-masked training records for one context size.
    Dataset(DatasetArgs),
    /// Five-interval profanity comparison of source texts and their elaborations.
    ProfanityReport(ProfanityArgs),
    /// Recall@{1,5,10} and mean recall for cross-modal retrieval.
    EvalRetrieval(RetrievalArgs),
    /// Semantic proximity, confusion matrix and visual perceptibility.
    EvalEmotion(EmotionArgs),
    /// Slerp between two token-embedding grids, optionally aligned first.
    Interpolate(InterpolateArgs),
    /// Plan music-video frames from a timestamped transcript.
    Timeline(TimelineArgs),
    /// Embed texts with the deterministic stub embedder.
    Embed(EmbedArgs),
    /// Write a stub token-embedding grid for one text in the binary matrix format.
    EmbedGrid(EmbedGridArgs),
    /// ingest → filter → elaborate → dataset for every configured context size.
    Pipeline,
}

#[derive(Args, Debug)]
pub struct IoArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct ElaborateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Elaboration store; also the checkpoint for resuming.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub elabs: PathBuf,
    #[arg(long)]
    pub context_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ProfanityArgs {
    /// JSONL of `{"source": str, "target": str, "system": str}`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// TSV of `term<TAB>weight`.
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RetrievalArgs {
    /// Precomputed similarity matrix in the binary matrix format.
    #[arg(long, conflicts_with_all = ["queries", "candidates"])]
    pub matrix: Option<PathBuf>,
    /// JSON array of ground-truth candidate indices (default: the diagonal).
    #[arg(long, requires = "matrix")]
    pub ground_truth: Option<PathBuf>,
    /// Query embeddings JSONL (`{"id", "vector"}`).
    #[arg(long, requires = "candidates")]
    pub queries: Option<PathBuf>,
    /// Candidate embeddings JSONL; matched to queries by id.
    #[arg(long, requires = "queries")]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmotionArgs {
    /// JSONL of `{"gold": label, "pred": label}`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Elaboration text embeddings for visual perceptibility.
    #[arg(long, requires = "image_emb")]
    pub text_emb: Option<PathBuf>,
    /// Generated-image embeddings, matched to text embeddings by id.
    #[arg(long, requires = "text_emb")]
    pub image_emb: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub p0: PathBuf,
    #[arg(long)]
    pub p1: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Apply chunked similarity alignment before interpolating.
    #[arg(long)]
    pub align: bool,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct TimelineArgs {
    #[arg(long)]
    pub transcript: PathBuf,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub transition: Option<f64>,
    #[arg(long)]
    pub break_threshold: Option<f64>,
    /// Fill segment elaborations through the configured chat endpoint.
    #[arg(long)]
    pub elaborate: bool,
    /// Write segments.json and plan.jsonl here; without it the plan goes to stdout.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// JSONL of `{"id": str, "text": str}`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EmbedGridArgs {
    #[arg(long)]
    pub text: String,
    #[arg(long, default_value_t = 77)]
    pub rows: usize,
    #[arg(long, default_value_t = 768)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some()
            || matches!(cause.downcast_ref::<PipelineError>(), Some(PipelineError::Config(_)))
        {
            return (2, "config");
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return (2, "usage");
        }
    }
    (1, "runtime")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            let body = serde_json::json!({ "error": { "kind": kind, "message": format!("{err:#}") } });
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
