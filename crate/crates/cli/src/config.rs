//! Run description: dataset paths, method selection and hyperparameters.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use loadcast_core::frame::FeatureSpec;
use loadcast_core::preprocess::ScalerMethod;
use loadcast_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeMethod {
    Mean,
    Poly,
}

impl std::fmt::Display for ImputeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImputeMethod::Mean => write!(f, "mean"),
            ImputeMethod::Poly => write!(f, "poly"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    /// Training set, 5-minute cadence CSV.
    pub d1: PathBuf,
    /// Validation set, 5-minute cadence CSV.
    pub d2: PathBuf,
    /// Test temperatures, hourly CSV with columns timestamp,T.
    pub d3_temps: PathBuf,
    /// Optional ground-truth CSV with columns timestamp,P.
    pub d3_truth: Option<PathBuf>,
}

impl Default for DataPaths {
    fn default() -> Self {
        Self {
            d1: PathBuf::from("data/d1.csv"),
            d2: PathBuf::from("data/d2.csv"),
            d3_temps: PathBuf::from("data/d3_temps.csv"),
            d3_truth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub gru_hidden: usize,
    pub lstm_hidden: usize,
    pub dropout_rate: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        // full-size architecture
        Self {
            gru_hidden: 256,
            lstm_hidden: 128,
            dropout_rate: 0.2,
        }
    }
}

/// Everything one end-to-end run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub data: DataPaths,
    pub output_dir: PathBuf,
    pub normalization: ScalerMethod,
    pub imputation: ImputeMethod,
    pub features: FeatureSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    /// Forecast horizon per test day.
    pub horizon: usize,
    /// Samples per aggregation group; 12 maps 5-minute data to hourly.
    pub downsample_group: usize,
    /// When truth is available, reseed each day's window from released
    /// ground truth instead of the model's own predictions.
    pub refresh_with_truth: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: DataPaths::default(),
            output_dir: PathBuf::from("out"),
            normalization: ScalerMethod::Standard,
            imputation: ImputeMethod::Poly,
            features: FeatureSpec::standard(24),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            horizon: 24,
            downsample_group: 12,
            refresh_with_truth: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.features
            .validate()
            .context("invalid feature specification")?;
        self.train.validate().context("invalid training section")?;
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if self.downsample_group == 0 {
            bail!("downsample_group must be at least 1");
        }
        if !(0.0..1.0).contains(&self.network.dropout_rate) {
            bail!("dropout_rate must lie in [0, 1)");
        }
        if self.data.d1.as_os_str().is_empty()
            || self.data.d2.as_os_str().is_empty()
            || self.data.d3_temps.as_os_str().is_empty()
        {
            bail!("dataset paths must be non-empty");
        }
        Ok(())
    }

    pub fn scaler_path(&self) -> PathBuf {
        self.output_dir.join(format!("scaler_{}.json", self.normalization))
    }

    pub fn imputer_path(&self) -> PathBuf {
        self.output_dir.join(format!("imputer_{}.json", self.imputation))
    }

    pub fn weights_path(&self) -> PathBuf {
        self.output_dir.join(format!("weights_{}.json", self.normalization))
    }

    pub fn history_path(&self) -> PathBuf {
        self.output_dir.join(format!("history_{}.csv", self.normalization))
    }

    pub fn hourly_path(&self, which: &str) -> PathBuf {
        self.output_dir
            .join(format!("{which}_hourly_{}.csv", self.normalization))
    }

    pub fn forecast_path(&self, day: usize) -> PathBuf {
        self.output_dir
            .join(format!("forecast_{}_day{day}.csv", self.normalization))
    }

    pub fn latency_path(&self) -> PathBuf {
        self.output_dir.join(format!("latency_{}.csv", self.normalization))
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.output_dir.join(format!("metrics_{}.csv", self.normalization))
    }
}
