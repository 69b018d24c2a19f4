use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use loadcast_cli::config::{ImputeMethod, PipelineConfig};
use loadcast_cli::pipeline::{run_pipeline, Stage};
use loadcast_core::preprocess::ScalerMethod;
use loadcast_core::synth::{generate, SynthConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    Standard,
    Minmax,
    Zscore,
}

impl From<NormArg> for ScalerMethod {
    fn from(v: NormArg) -> Self {
        match v {
            NormArg::Standard => ScalerMethod::Standard,
            NormArg::Minmax => ScalerMethod::MinMax,
            NormArg::Zscore => ScalerMethod::ZScore,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ImputeArg {
    Mean,
    Poly,
}

impl From<ImputeArg> for ImputeMethod {
    fn from(v: ImputeArg) -> Self {
        match v {
            ImputeArg::Mean => ImputeMethod::Mean,
            ImputeArg::Poly => ImputeMethod::Poly,
        }
    }
}

/// Day-ahead power-load forecasting with a hybrid BiGRU-LSTM network.
#[derive(Debug, Parser)]
#[command(name = "loadcast", version)]
struct Cli {
    /// TOML run configuration; defaults apply for anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed for weight init and training shuffles.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured normalization scheme.
    #[arg(long, global = true, value_enum)]
    norm: Option<NormArg>,

    /// Overrides the configured imputation method.
    #[arg(long, global = true, value_enum)]
    impute: Option<ImputeArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Downsample to hourly, fit the imputer and scaler, write normalized sets.
    Preprocess,
    /// Train the network on the preprocessed sets and save the weights.
    Train,
    /// Forecast each test day recursively and save per-day predictions.
    Predict,
    /// Score predictions against released ground truth.
    Evaluate,
    /// Render temperature and forecast heatmaps.
    Heatmap,
    /// Generate a seeded synthetic dataset CSV.
    Synth {
        /// Destination CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        days: usize,
        /// Sampling step in seconds; 300 gives the 5-minute cadence.
        #[arg(long, default_value_t = 300)]
        step_seconds: i64,
        #[arg(long, default_value_t = 1_701_388_800)]
        start_timestamp: i64,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_toml_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(norm) = cli.norm {
        cfg.normalization = norm.into();
    }
    if let Some(impute) = cli.impute {
        cfg.imputation = impute.into();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stage = match &cli.command {
        Command::Preprocess => Stage::Preprocess,
        Command::Train => Stage::Train,
        Command::Predict => Stage::Predict,
        Command::Evaluate => Stage::Evaluate,
        Command::Heatmap => Stage::Heatmap,
        Command::Synth {
            out,
            days,
            step_seconds,
            start_timestamp,
        } => {
            let cfg = SynthConfig {
                n_days: *days,
                step_seconds: *step_seconds,
                start_timestamp: *start_timestamp,
                seed: cli.seed.unwrap_or(0),
                ..SynthConfig::default()
            };
            let frame = generate(&cfg);
            loadcast_cli::io::write_frame_csv(out, &frame)?;
            return Ok(());
        }
    };
    let cfg = load_config(&cli)?;
    run_pipeline(&cfg, stage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("loadcast: {err:#}");
            ExitCode::FAILURE
        }
    }
}
