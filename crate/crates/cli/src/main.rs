use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod stages;

/// Political-leaning classification experiments: ingestion, splits,
/// embeddings, training, evaluation and sweeps.
#[derive(Parser, Debug)]
#[command(name = "newslean", version)]
pub struct Cli {
    /// Experiment configuration (TOML). Flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `paths.out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip stages already completed with an identical configuration.
    #[arg(long, global = true)]
    pub resume: bool,
    /// Seed override (model seed; embedding seed for `train-embeddings`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Resolve every corpus domain to a Wikipedia page and cache it.
    IngestWiki(IngestArgs),
    /// Train skip-gram word vectors on the debates corpus.
    TrainEmbeddings(EmbeddingArgs),
    /// Write train/test splits, one per configured seed.
    Split(SplitArgs),
    /// Train one checkpoint per split.
    Train,
    /// Evaluate the checkpoints and write results.csv plus a chart.
    Evaluate,
    /// Train and evaluate once per beta on the first split.
    Sweep(SweepArgs),
    /// Train and evaluate every matrix variant on every split.
    Matrix,
    /// Write a synthetic corpus, debates, wiki fixtures and a config.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Read pages from a local snapshot instead of the live API.
    #[arg(long)]
    pub offline_fixtures: Option<PathBuf>,
    #[arg(long)]
    pub overrides: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmbeddingArgs {
    #[arg(long)]
    pub debates: Option<PathBuf>,
    /// Model file to write.
    #[arg(long = "out")]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_parser = ["random", "media"])]
    pub kind: Option<String>,
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated beta grid (overrides `sweep.betas`).
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory to write into.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 600)]
    pub articles: usize,
    #[arg(long, default_value_t = 10)]
    pub domains_per_leaning: usize,
    /// Backbone width written into the generated config (small for quick runs).
    #[arg(long)]
    pub backbone_width: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
