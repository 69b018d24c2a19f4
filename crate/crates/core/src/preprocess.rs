//! Resolution matching, test-time imputation and the three normalization
//! schemes with persisted inverse-transform statistics.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::TimeSeriesFrame;

pub const TARGET_CHANNEL: &str = "P";
pub const TEMPERATURE_CHANNEL: &str = "T";

/// Mean aggregation over consecutive groups of `group` samples.
///
/// Output value k is the arithmetic mean of input rows
/// `group*k .. group*k + group - 1`; a trailing partial group is dropped so
/// every output averages exactly `group` samples. Output timestamp k is the
/// first timestamp of its group.
pub fn downsample_hourly(frame: &TimeSeriesFrame, group: usize) -> Result<TimeSeriesFrame> {
    let n = frame.len();
    if n == 0 {
        return Err(CoreError::EmptyFrame);
    }
    if group == 0 || group > n {
        return Err(CoreError::GroupTooLarge { group, n });
    }
    let out_len = n / group;
    let timestamps: Vec<i64> = (0..out_len)
        .map(|k| frame.timestamps()[k * group])
        .collect();
    let channels: Vec<(String, Vec<f64>)> = frame
        .channel_names()
        .map(|name| {
            let values = frame.channel(name).unwrap();
            let means = (0..out_len)
                .map(|k| {
                    let chunk = &values[k * group..(k + 1) * group];
                    chunk.iter().sum::<f64>() / group as f64
                })
                .collect();
            (name.to_string(), means)
        })
        .collect();
    TimeSeriesFrame::new(timestamps, channels)
}

/// Per-channel reconstruction rule for features absent at test time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ImputeRule {
    /// Constant fill with the training-set mean.
    MeanFill { mean: f64 },
    /// Cubic polynomial in temperature: b0 + b1*T + b2*T^2 + b3*T^3.
    PolyFill { coeffs: [f64; 4] },
}

impl ImputeRule {
    pub fn evaluate(&self, temperature: f64) -> f64 {
        match self {
            ImputeRule::MeanFill { mean } => *mean,
            ImputeRule::PolyFill { coeffs: b } => {
                // Horner
                ((b[3] * temperature + b[2]) * temperature + b[1]) * temperature + b[0]
            }
        }
    }
}

/// Rules for every channel the test files are missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub rules: IndexMap<String, ImputeRule>,
}

impl ImputationModel {
    pub fn rule(&self, channel: &str) -> Option<&ImputeRule> {
        self.rules.get(channel)
    }
}

/// Fits constant-mean rules from the training frame.
pub fn fit_mean_imputer(train: &TimeSeriesFrame, channels: &[String]) -> Result<ImputationModel> {
    if train.is_empty() {
        return Err(CoreError::EmptyFrame);
    }
    let mut rules = IndexMap::new();
    for name in channels {
        let values = train
            .channel(name)
            .ok_or_else(|| CoreError::MissingChannel(name.clone()))?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        rules.insert(name.clone(), ImputeRule::MeanFill { mean });
    }
    Ok(ImputationModel { rules })
}

/// Fits cubic-in-temperature rules by least squares on the Vandermonde system.
///
/// Columns are centered and range-scaled internally before solving and the
/// coefficients mapped back analytically; raw T^3 columns condition badly.
pub fn fit_poly_imputer(train: &TimeSeriesFrame, channels: &[String]) -> Result<ImputationModel> {
    let temps = train
        .channel(TEMPERATURE_CHANNEL)
        .ok_or(CoreError::MissingTemperature)?;
    let n = temps.len();
    if n < 4 {
        return Err(CoreError::InsufficientData { got: n, need: 4 });
    }
    let mut sorted = temps.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    if sorted.len() < 4 {
        return Err(CoreError::DegenerateDesign {
            distinct: sorted.len(),
            need: 4,
        });
    }
    let t_min = sorted[0];
    let t_max = *sorted.last().unwrap();
    let mid = 0.5 * (t_min + t_max);
    let half = 0.5 * (t_max - t_min);

    // Design matrix in the scaled variable u = (T - mid) / half.
    let design = DMatrix::from_fn(n, 4, |i, j| {
        let u = (temps[i] - mid) / half;
        u.powi(j as i32)
    });
    let svd = design.svd(true, true);

    let mut rules = IndexMap::new();
    for name in channels {
        let values = train
            .channel(name)
            .ok_or_else(|| CoreError::MissingChannel(name.clone()))?;
        let rhs = DVector::from_column_slice(values);
        // SVD solve yields the minimum-norm least-squares solution.
        let scaled = svd
            .solve(&rhs, 1e-12)
            .map_err(|_| CoreError::DegenerateDesign {
                distinct: sorted.len(),
                need: 4,
            })?;
        let coeffs = rescale_cubic(&[scaled[0], scaled[1], scaled[2], scaled[3]], mid, half);
        rules.insert(name.clone(), ImputeRule::PolyFill { coeffs });
    }
    Ok(ImputationModel { rules })
}

/// Maps coefficients of p(u), u = (T - mid)/half, back to powers of T.
fn rescale_cubic(scaled: &[f64; 4], mid: f64, half: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    // basis holds the expansion of u^k in powers of T
    let mut basis = [1.0, 0.0, 0.0, 0.0];
    let a = 1.0 / half;
    let b = -mid / half;
    for k in 0..4 {
        for j in 0..4 {
            out[j] += scaled[k] * basis[j];
        }
        // basis *= (a*T + b)
        let mut next = [0.0; 4];
        for j in 0..3 {
            next[j] += basis[j] * b;
            next[j + 1] += basis[j] * a;
        }
        next[3] += basis[3] * b;
        basis = next;
    }
    out
}

/// Fills the model's channels from row-wise temperature.
///
/// Absent channels are created whole; channels already present keep their
/// finite values and only NaN cells are reconstructed. Channels not governed
/// by the model are never touched.
pub fn impute(frame: &TimeSeriesFrame, model: &ImputationModel) -> Result<TimeSeriesFrame> {
    let temps = frame
        .channel(TEMPERATURE_CHANNEL)
        .ok_or(CoreError::MissingTemperature)?
        .to_vec();
    let mut out = frame.clone();
    for (name, rule) in &model.rules {
        let values: Vec<f64> = match out.channel(name) {
            Some(existing) => existing
                .iter()
                .zip(&temps)
                .map(|(v, t)| if v.is_nan() { rule.evaluate(*t) } else { *v })
                .collect(),
            None => temps.iter().map(|t| rule.evaluate(*t)).collect(),
        };
        out = out.with_channel(name, values)?;
    }
    Ok(out)
}

/// Normalization scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerMethod {
    /// (x - mu) / sigma with population sigma (divide by N).
    Standard,
    /// (x - min) / (max - min), no clipping outside the training range.
    MinMax,
    /// Same formula as Standard but with sample sigma (divide by N - 1).
    ZScore,
}

impl std::fmt::Display for ScalerMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalerMethod::Standard => write!(f, "standard"),
            ScalerMethod::MinMax => write!(f, "minmax"),
            ScalerMethod::ZScore => write!(f, "zscore"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelStats {
    MeanStd { mean: f64, std: f64 },
    Range { min: f64, max: f64 },
}

/// Per-channel statistics fitted on the training set only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub method: ScalerMethod,
    pub stats: IndexMap<String, ChannelStats>,
}

impl ScalerParams {
    pub fn stats_for(&self, channel: &str) -> Option<&ChannelStats> {
        self.stats.get(channel)
    }

    /// Forward transform of a single value of the named channel.
    pub fn transform_value(&self, channel: &str, x: f64) -> Result<f64> {
        match self
            .stats
            .get(channel)
            .ok_or_else(|| CoreError::UnknownChannel(channel.to_string()))?
        {
            ChannelStats::MeanStd { mean, std } => Ok((x - mean) / std),
            ChannelStats::Range { min, max } => Ok((x - min) / (max - min)),
        }
    }

    /// Exact algebraic inverse of `transform_value`.
    pub fn inverse_value(&self, channel: &str, x: f64) -> Result<f64> {
        match self
            .stats
            .get(channel)
            .ok_or_else(|| CoreError::UnknownChannel(channel.to_string()))?
        {
            ChannelStats::MeanStd { mean, std } => Ok(x * std + mean),
            ChannelStats::Range { min, max } => Ok(x * (max - min) + min),
        }
    }
}

/// Computes per-channel statistics from the training frame.
pub fn fit_scaler(train: &TimeSeriesFrame, method: ScalerMethod) -> Result<ScalerParams> {
    if train.is_empty() {
        return Err(CoreError::EmptyFrame);
    }
    let n = train.len() as f64;
    let mut stats = IndexMap::new();
    for name in train.channel_names() {
        let values = train.channel(name).unwrap();
        let entry = match method {
            ScalerMethod::Standard | ScalerMethod::ZScore => {
                let mean = values.iter().sum::<f64>() / n;
                let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
                let denom = if method == ScalerMethod::ZScore && n > 1.0 {
                    n - 1.0
                } else {
                    n
                };
                let std = (ss / denom).sqrt();
                if std <= 0.0 {
                    return Err(CoreError::ZeroVariance(name.to_string()));
                }
                ChannelStats::MeanStd { mean, std }
            }
            ScalerMethod::MinMax => {
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max <= min {
                    return Err(CoreError::ConstantChannel(name.to_string()));
                }
                ChannelStats::Range { min, max }
            }
        };
        stats.insert(name.to_string(), entry);
    }
    Ok(ScalerParams { method, stats })
}

/// Applies the fitted statistics to every channel of the frame.
pub fn transform(frame: &TimeSeriesFrame, params: &ScalerParams) -> Result<TimeSeriesFrame> {
    let mut out = frame.clone();
    for name in frame.channel_names() {
        let values = frame.channel(name).unwrap();
        let transformed: Result<Vec<f64>> = values
            .iter()
            .map(|v| params.transform_value(name, *v))
            .collect();
        out = out.with_channel(name, transformed?)?;
    }
    Ok(out)
}

/// Inverse transform of the target channel P back to watts.
pub fn inverse_transform_target(values: &[f64], params: &ScalerParams) -> Result<Vec<f64>> {
    if params.stats_for(TARGET_CHANNEL).is_none() {
        return Err(CoreError::MissingTargetStats(TARGET_CHANNEL.to_string()));
    }
    values
        .iter()
        .map(|v| params.inverse_value(TARGET_CHANNEL, *v))
        .collect()
}
