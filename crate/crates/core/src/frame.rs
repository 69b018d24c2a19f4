//! Timestamped multi-channel series and the windowed samples cut from them.

use indexmap::IndexMap;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Name of the derived hour-of-day channel.
pub const HOUR_CHANNEL: &str = "hour";

/// Immutable table of aligned channels over a strictly increasing time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    timestamps: Vec<i64>,
    channels: IndexMap<String, Vec<f64>>,
}

impl TimeSeriesFrame {
    /// Build a validated frame from epoch-second timestamps and named channels.
    pub fn new(
        timestamps: Vec<i64>,
        channels: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        for (i, pair) in timestamps.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(CoreError::NonMonotonicTimestamps { index: i + 1 });
            }
        }
        let n = timestamps.len();
        let mut map = IndexMap::new();
        for (name, values) in channels {
            if values.len() != n {
                return Err(CoreError::LengthMismatch {
                    channel: name,
                    got: values.len(),
                    expected: n,
                });
            }
            if map.insert(name.clone(), values).is_some() {
                return Err(CoreError::DuplicateChannel(name));
            }
        }
        Ok(Self {
            timestamps,
            channels: map,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.channels.contains_key(name)
    }

    /// Returns a copy with `name` set to `values`, replacing any existing channel.
    pub fn with_channel(&self, name: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(CoreError::LengthMismatch {
                channel: name.to_string(),
                got: values.len(),
                expected: self.len(),
            });
        }
        let mut out = self.clone();
        out.channels.insert(name.to_string(), values);
        Ok(out)
    }

    /// Row-contiguous matrix of the named features, one column per feature.
    pub fn feature_matrix(&self, features: &[String]) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((self.len(), features.len()));
        for (j, name) in features.iter().enumerate() {
            let col = self
                .channel(name)
                .ok_or_else(|| CoreError::MissingFeature(name.clone()))?;
            for (i, v) in col.iter().enumerate() {
                m[[i, j]] = *v;
            }
        }
        Ok(m)
    }
}

/// Adds a derived `hour` channel (hour-of-day in UTC, 0..=23).
///
/// Idempotent: re-encoding overwrites `hour` with identical values.
pub fn encode_time_feature(frame: &TimeSeriesFrame) -> TimeSeriesFrame {
    let hours: Vec<f64> = frame
        .timestamps
        .iter()
        .map(|ts| ts.div_euclid(3600).rem_euclid(24) as f64)
        .collect();
    frame
        .with_channel(HOUR_CHANNEL, hours)
        .expect("hour channel length matches frame")
}

/// One supervised sequence-to-one sample: an L x D input window and the
/// next-step power target.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub inputs: Array2<f64>,
    pub target: f64,
}

impl WindowSample {
    pub fn window_len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs_view(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }
}

/// Ordered feature list, target channel and window length for supervision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub features: Vec<String>,
    pub target: String,
    pub window: usize,
}

impl FeatureSpec {
    /// Canonical feature order: hour, P, V, I, PPV, T.
    pub fn standard(window: usize) -> Self {
        Self {
            features: ["hour", "P", "V", "I", "PPV", "T"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            target: "P".to_string(),
            window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(CoreError::TooShort { n: 0, need: 1 });
        }
        if !self.features.contains(&self.target) {
            return Err(CoreError::MissingFeature(self.target.clone()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.features.len()
    }

    pub fn target_index(&self) -> usize {
        self.features
            .iter()
            .position(|f| f == &self.target)
            .expect("validated spec contains target")
    }
}

/// Cuts stride-1 windows of length `spec.window` with the next-step target.
///
/// A frame of N rows yields exactly N - L samples.
pub fn sliding_windows(frame: &TimeSeriesFrame, spec: &FeatureSpec) -> Result<Vec<WindowSample>> {
    spec.validate()?;
    let l = spec.window;
    let n = frame.len();
    if n < l + 1 {
        return Err(CoreError::TooShort { n, need: l + 1 });
    }
    let matrix = frame.feature_matrix(&spec.features)?;
    let target_col = spec.target_index();
    let mut samples = Vec::with_capacity(n - l);
    for k in 0..n - l {
        let inputs = matrix.slice(ndarray::s![k..k + l, ..]).to_owned();
        samples.push(WindowSample {
            inputs,
            target: matrix[[k + l, target_col]],
        });
    }
    Ok(samples)
}
