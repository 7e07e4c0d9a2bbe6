//! `affect-bench`: feature extraction, training, evaluation, tuning,
//! prediction and analysis for soundscape affect regression.

mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use affect_core::eval::Target;
use affect_core::{Family, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

use exit::{Context, Failure};

#[derive(Debug, Parser)]
#[command(name = "affect-bench", version, about = "Soundscape arousal/valence regression toolkit")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "AFFECT_BENCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides both the estimator seed and the split seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Treat per-clip extraction failures as fatal.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectionKind {
    All,
    Pca,
    Kbest,
    Custom,
    Variance,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the 68-feature table for every clip in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model on the train split and write it to disk.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_target)]
        target: Target,
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long, value_enum, default_value = "all")]
        selection: SelectionKind,
        /// Feature count for `--selection kbest` (config `kbest_k` otherwise).
        #[arg(long)]
        k: Option<usize>,
        /// Variance target for `--selection pca` (config `pca_target` otherwise).
        #[arg(long)]
        pca_target: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full target x feature set x model matrix.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// JSON report; a CSV with the same stem is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive random forest grid search.
    Tune {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_target)]
        target: Target,
        /// CSV table of every evaluated configuration.
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint file (default: `<out>.checkpoint.json`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
        /// Stop after this many new configurations.
        #[arg(long)]
        max_configs: Option<usize>,
    },
    /// Predict with a saved model from a WAV file or a feature CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "features", required_unless_present = "features")]
        wav: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Only this clip id from `--features`.
        #[arg(long, requires = "features")]
        row: Option<String>,
    },
    /// Write scatter, correlation heatmap and arousal-valence Pearson data.
    Analyze {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse().map_err(|e: affect_core::Error| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: affect_core::Error| e.to_string())
}

fn effective_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).with_code(exit::SCHEMA, format!("config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.split.seed = seed;
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    cfg.validate().with_code(exit::SCHEMA, "config")?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = effective_config(&cli)?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::new(exit::IO, format!("thread pool: {e}")))?;
    }
    eprintln!("# effective configuration");
    for line in cfg.to_toml().lines() {
        eprintln!("#   {line}");
    }
    commands::dispatch(&cli.command, &cfg, cli.strict)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
