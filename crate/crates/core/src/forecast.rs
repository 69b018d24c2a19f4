//! Day-ahead recursive forecasting under the asymmetric test protocol:
//! reconstruct missing channels from temperature, normalize, roll the
//! window forward feeding predictions back, inverse-transform.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::{FeatureSpec, TimeSeriesFrame, HOUR_CHANNEL};
use crate::network::{predict, NetworkWeights};
use crate::preprocess::{
    inverse_transform_target, ImputationModel, ScalerParams, TARGET_CHANNEL, TEMPERATURE_CHANNEL,
};

/// Default competition horizon: one day of hourly steps.
pub const DEFAULT_HORIZON: usize = 24;

/// Input to one day-ahead forecast.
///
/// `history` is in normalized space and fully featured; the future is
/// described only by raw temperatures and their timestamps.
#[derive(Debug, Clone)]
pub struct ForecastRequest {
    pub history: TimeSeriesFrame,
    pub future_temps: Vec<f64>,
    pub future_timestamps: Vec<i64>,
}

impl ForecastRequest {
    pub fn horizon(&self) -> usize {
        self.future_temps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Predictions on the original watt scale.
    pub predictions_watts: Vec<f64>,
    /// Per-step normalized predictions, kept for diagnostics.
    pub normalized_predictions: Vec<f64>,
    /// Wall-clock seconds of the compute routine, excluding any I/O.
    pub latency_seconds: f64,
}

/// Builds the normalized future feature rows.
///
/// Row j is `[hour(ts_j), P-placeholder, imputed channels..., T_j]` in the
/// order given by `spec`, each value pushed through the fitted scaler. The
/// P column starts as NaN and is filled during the recursion.
pub fn build_future_rows(
    temps: &[f64],
    timestamps: &[i64],
    imputer: &ImputationModel,
    scaler: &ScalerParams,
    spec: &FeatureSpec,
) -> Result<Array2<f64>> {
    if temps.len() != timestamps.len() {
        return Err(CoreError::MetricLengthMismatch(
            temps.len(),
            timestamps.len(),
        ));
    }
    for name in &spec.features {
        if scaler.stats_for(name).is_none() {
            return Err(CoreError::ScalerMissingChannel(name.clone()));
        }
    }
    let mut rows = Array2::from_elem((temps.len(), spec.features.len()), f64::NAN);
    for (j, (&temp, &ts)) in temps.iter().zip(timestamps).enumerate() {
        for (col, name) in spec.features.iter().enumerate() {
            let raw = if name == TARGET_CHANNEL {
                continue; // pending, filled by the recursion
            } else if name == HOUR_CHANNEL {
                ts.div_euclid(3600).rem_euclid(24) as f64
            } else if name == TEMPERATURE_CHANNEL {
                temp
            } else {
                imputer
                    .rule(name)
                    .ok_or_else(|| CoreError::ImputerMissingChannel(name.clone()))?
                    .evaluate(temp)
            };
            rows[[j, col]] = scaler.transform_value(name, raw)?;
        }
    }
    Ok(rows)
}

/// Rolls a window of the last L normalized rows over the horizon, feeding
/// each one-step prediction back into the P column of the next row.
pub fn recursive_forecast(
    w: &NetworkWeights,
    req: &ForecastRequest,
    imputer: &ImputationModel,
    scaler: &ScalerParams,
    spec: &FeatureSpec,
) -> Result<ForecastResult> {
    spec.validate()?;
    let l = spec.window;
    if w.window != l || w.input_dim != spec.feature_dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "network is {}x{}, spec is {}x{}",
            w.window,
            w.input_dim,
            l,
            spec.feature_dim()
        )));
    }
    let n = req.history.len();
    if n < l {
        return Err(CoreError::TooShort { n, need: l });
    }
    let history = req.history.feature_matrix(&spec.features)?;
    let future = build_future_rows(
        &req.future_temps,
        &req.future_timestamps,
        imputer,
        scaler,
        spec,
    )?;
    let target_col = spec.target_index();
    let horizon = req.horizon();

    let start = std::time::Instant::now();
    let mut window = history.slice(ndarray::s![n - l.., ..]).to_owned();
    let mut normalized = Vec::with_capacity(horizon);
    for j in 0..horizon {
        let yhat = predict(window.view(), w)?;
        if !yhat.is_finite() {
            return Err(CoreError::NonFiniteOutput {
                step: j,
                value: yhat,
            });
        }
        normalized.push(yhat);
        let mut row = future.row(j).to_owned();
        row[target_col] = yhat;
        // drop the oldest row, append the completed future row
        for t in 0..l - 1 {
            let next = window.row(t + 1).to_owned();
            window.row_mut(t).assign(&next);
        }
        window.row_mut(l - 1).assign(&row);
    }
    let predictions_watts = inverse_transform_target(&normalized, scaler)?;
    let latency_seconds = start.elapsed().as_secs_f64();

    Ok(ForecastResult {
        predictions_watts,
        normalized_predictions: normalized,
        latency_seconds,
    })
}

/// Heatmap color convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    Temperature,
    Power,
}

impl Palette {
    fn endpoints(self) -> ([u8; 3], [u8; 3]) {
        match self {
            // low: blue/cyan, high: pink-red
            Palette::Temperature => ([0x2e, 0xb8, 0xf0], [0xf0, 0x3c, 0x78]),
            Palette::Power => ([0x28, 0xa8, 0xe8], [0xe8, 0x28, 0x5a]),
        }
    }
}

/// HTML table plus its CSV twin.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapDocument {
    pub html: String,
    pub csv: String,
}

fn hour_label(slot: usize) -> String {
    // rows run 1:00 AM .. 11:00 PM, 12:00 AM
    let h = slot + 1;
    match h {
        12 => "12:00 PM".to_string(),
        24 => "12:00 AM".to_string(),
        1..=11 => format!("{h}:00 AM"),
        _ => format!("{}:00 PM", h - 12),
    }
}

fn lerp_color(lo: [u8; 3], hi: [u8; 3], t: f64) -> String {
    let c = |a: u8, b: u8| (a as f64 + t * (b as f64 - a as f64)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        c(lo[0], hi[0]),
        c(lo[1], hi[1]),
        c(lo[2], hi[2])
    )
}

/// Renders the 24-rows-by-days heatmap table with cell backgrounds
/// interpolated over the min-max of the supplied values.
pub fn emit_heatmap(days: &[(String, Vec<f64>)], palette: Palette) -> Result<HeatmapDocument> {
    for (i, (_, values)) in days.iter().enumerate() {
        if values.len() != DEFAULT_HORIZON {
            return Err(CoreError::BadLength {
                day: i,
                got: values.len(),
                expected: DEFAULT_HORIZON,
            });
        }
    }
    let all: Vec<f64> = days.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let min = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = palette.endpoints();
    let scale = |v: f64| {
        if max > min {
            (v - min) / (max - min)
        } else {
            0.5 // degenerate range maps everything mid-palette
        }
    };

    let mut html = String::from(
        "<table style=\"border-collapse:collapse;font-family:sans-serif\">\n<tr><th>Time</th>",
    );
    let mut csv = String::from("time");
    for (date, _) in days {
        html.push_str(&format!("<th>{date}</th>"));
        csv.push(',');
        csv.push_str(date);
    }
    html.push_str("</tr>\n");
    csv.push('\n');
    for slot in 0..DEFAULT_HORIZON {
        let label = hour_label(slot);
        html.push_str(&format!("<tr><td>{label}</td>"));
        csv.push_str(&label);
        for (_, values) in days {
            let v = values[slot];
            let color = lerp_color(lo, hi, scale(v));
            html.push_str(&format!(
                "<td style=\"background:{color};padding:2px 8px;text-align:right\">{v:.3}</td>"
            ));
            csv.push_str(&format!(",{v}"));
        }
        html.push_str("</tr>\n");
        csv.push('\n');
    }
    html.push_str("</table>\n");
    Ok(HeatmapDocument { html, csv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{ChannelStats, ImputeRule, ScalerMethod};
    use approx::assert_abs_diff_eq;
    use indexmap::IndexMap;

    fn scaler_with(entries: Vec<(&str, ChannelStats)>) -> ScalerParams {
        ScalerParams {
            method: ScalerMethod::Standard,
            stats: entries
                .into_iter()
                .map(|(n, s)| (n.to_string(), s))
                .collect(),
        }
    }

    fn small_spec() -> FeatureSpec {
        FeatureSpec {
            features: vec![
                "hour".to_string(),
                "P".to_string(),
                "V".to_string(),
                "T".to_string(),
            ],
            target: "P".to_string(),
            window: 3,
        }
    }

    fn identity_stats() -> ChannelStats {
        ChannelStats::MeanStd { mean: 0.0, std: 1.0 }
    }

    #[test]
    fn future_rows_constant_for_mean_fill() {
        let spec = small_spec();
        let mut rules = IndexMap::new();
        rules.insert("V".to_string(), ImputeRule::MeanFill { mean: 231.0 });
        let imputer = ImputationModel { rules };
        let scaler = scaler_with(vec![
            ("hour", identity_stats()),
            ("P", identity_stats()),
            ("V", identity_stats()),
            ("T", identity_stats()),
        ]);
        let temps = vec![10.0, 14.0, 12.0];
        let ts = vec![0, 3600, 7200];
        let rows = build_future_rows(&temps, &ts, &imputer, &scaler, &spec).unwrap();
        for j in 0..3 {
            assert_eq!(rows[[j, 2]], 231.0);
            assert!(rows[[j, 1]].is_nan()); // P pending
        }
        assert_eq!(rows[[1, 0]], 1.0); // hour of 3600
    }

    #[test]
    fn future_rows_constant_for_equal_temps_under_poly() {
        let spec = small_spec();
        let mut rules = IndexMap::new();
        rules.insert(
            "V".to_string(),
            ImputeRule::PolyFill {
                coeffs: [1.0, 2.0, 0.0, 0.0],
            },
        );
        let imputer = ImputationModel { rules };
        let scaler = scaler_with(vec![
            ("hour", identity_stats()),
            ("P", identity_stats()),
            ("V", identity_stats()),
            ("T", identity_stats()),
        ]);
        let rows =
            build_future_rows(&[15.0, 15.0], &[0, 3600], &imputer, &scaler, &spec).unwrap();
        assert_eq!(rows[[0, 2]], rows[[1, 2]]);
        assert_eq!(rows[[0, 2]], 31.0);
    }

    #[test]
    fn future_row_composes_impute_and_transform_by_hand() {
        let spec = small_spec();
        let mut rules = IndexMap::new();
        rules.insert(
            "V".to_string(),
            ImputeRule::PolyFill {
                coeffs: [2.0, 0.5, -0.1, 0.01],
            },
        );
        let imputer = ImputationModel { rules };
        let scaler = scaler_with(vec![
            ("hour", identity_stats()),
            ("P", identity_stats()),
            (
                "V",
                ChannelStats::MeanStd {
                    mean: 20.0,
                    std: 4.0,
                },
            ),
            ("T", identity_stats()),
        ]);
        let rows = build_future_rows(&[16.0], &[0], &imputer, &scaler, &spec).unwrap();
        // cubic at T=16 is 25.36; normalized (25.36 - 20) / 4 = 1.34
        assert_abs_diff_eq!(rows[[0, 2]], 1.34, epsilon = 1e-12);
    }

    #[test]
    fn missing_scaler_channel_is_rejected() {
        let spec = small_spec();
        let imputer = ImputationModel {
            rules: IndexMap::new(),
        };
        let scaler = scaler_with(vec![("P", identity_stats())]);
        assert!(matches!(
            build_future_rows(&[1.0], &[0], &imputer, &scaler, &spec),
            Err(CoreError::ScalerMissingChannel(_))
        ));
    }

    fn zero_weight_request() -> (NetworkWeights, ForecastRequest, ImputationModel, ScalerParams, FeatureSpec)
    {
        let spec = small_spec();
        let mut w = NetworkWeights::init(4, 3, 2, 2, 0.0, 1);
        for s in w.flat_mut() {
            for v in s.iter_mut() {
                *v = 0.0;
            }
        }
        w.dense_b = 0.75;
        let history = TimeSeriesFrame::new(
            (0..3).map(|i| i * 3600).collect(),
            [
                ("hour".to_string(), vec![0.0, 1.0, 2.0]),
                ("P".to_string(), vec![0.1, 0.2, 0.3]),
                ("V".to_string(), vec![0.0, 0.0, 0.0]),
                ("T".to_string(), vec![0.5, 0.5, 0.5]),
            ],
        )
        .unwrap();
        let req = ForecastRequest {
            history,
            future_temps: vec![12.0; 24],
            future_timestamps: (3..27).map(|i| i * 3600).collect(),
        };
        let mut rules = IndexMap::new();
        rules.insert("V".to_string(), ImputeRule::MeanFill { mean: 0.0 });
        let imputer = ImputationModel { rules };
        let scaler = scaler_with(vec![
            ("hour", identity_stats()),
            (
                "P",
                ChannelStats::MeanStd {
                    mean: 1500.0,
                    std: 600.0,
                },
            ),
            ("V", identity_stats()),
            ("T", identity_stats()),
        ]);
        (w, req, imputer, scaler, spec)
    }

    #[test]
    fn zero_weight_network_forecasts_scaled_bias() {
        let (w, req, imputer, scaler, spec) = zero_weight_request();
        let out = recursive_forecast(&w, &req, &imputer, &scaler, &spec).unwrap();
        assert_eq!(out.predictions_watts.len(), 24);
        for (norm, watts) in out
            .normalized_predictions
            .iter()
            .zip(&out.predictions_watts)
        {
            assert_eq!(*norm, 0.75);
            assert_abs_diff_eq!(*watts, 1500.0 + 600.0 * 0.75, epsilon = 1e-9);
        }
        assert!(out.latency_seconds >= 0.0);
    }

    #[test]
    fn forecast_is_deterministic() {
        let (mut w, req, imputer, scaler, spec) = zero_weight_request();
        // give the network nonzero weights so the recursion actually mixes
        w = NetworkWeights::init(4, 3, 2, 2, 0.0, 99);
        let a = recursive_forecast(&w, &req, &imputer, &scaler, &spec).unwrap();
        let b = recursive_forecast(&w, &req, &imputer, &scaler, &spec).unwrap();
        assert_eq!(a.predictions_watts, b.predictions_watts);
    }

    #[test]
    fn normalized_and_raw_predictions_are_consistent() {
        let (mut w, req, imputer, scaler, spec) = zero_weight_request();
        w = NetworkWeights::init(4, 3, 2, 2, 0.0, 7);
        let out = recursive_forecast(&w, &req, &imputer, &scaler, &spec).unwrap();
        for (norm, watts) in out
            .normalized_predictions
            .iter()
            .zip(&out.predictions_watts)
        {
            let back = scaler.transform_value("P", *watts).unwrap();
            assert_abs_diff_eq!(back, *norm, epsilon = 1e-9);
        }
    }

    #[test]
    fn short_history_is_rejected() {
        let (w, mut req, imputer, scaler, spec) = zero_weight_request();
        req.history = TimeSeriesFrame::new(
            vec![0],
            [
                ("hour".to_string(), vec![0.0]),
                ("P".to_string(), vec![0.1]),
                ("V".to_string(), vec![0.0]),
                ("T".to_string(), vec![0.5]),
            ],
        )
        .unwrap();
        assert!(matches!(
            recursive_forecast(&w, &req, &imputer, &scaler, &spec),
            Err(CoreError::TooShort { .. })
        ));
    }

    #[test]
    fn heatmap_uniform_values_mid_palette() {
        let days = vec![
            ("06/01".to_string(), vec![7.0; 24]),
            ("07/01".to_string(), vec![7.0; 24]),
        ];
        let doc = emit_heatmap(&days, Palette::Temperature).unwrap();
        let (lo, hi) = Palette::Temperature.endpoints();
        let mid = lerp_color(lo, hi, 0.5);
        assert!(doc.html.contains(&mid));
        // CSV twin holds exact values
        assert!(doc.csv.lines().nth(1).unwrap().ends_with(",7,7"));
    }

    #[test]
    fn heatmap_layout_and_endpoints() {
        let mut days = Vec::new();
        for d in 0..5 {
            let values: Vec<f64> = (0..24).map(|h| (d * 24 + h) as f64).collect();
            days.push((format!("{:02}/01", 6 + d), values));
        }
        let doc = emit_heatmap(&days, Palette::Power).unwrap();
        // header of dates, 24 data rows
        assert!(doc.csv.starts_with("time,06/01,07/01,08/01,09/01,10/01"));
        assert_eq!(doc.csv.lines().count(), 25);
        assert_eq!(doc.html.matches("<tr>").count(), 25);
        let (lo, hi) = Palette::Power.endpoints();
        assert!(doc.html.contains(&lerp_color(lo, hi, 0.0)));
        assert!(doc.html.contains(&lerp_color(lo, hi, 1.0)));
    }

    #[test]
    fn heatmap_rejects_bad_length() {
        let days = vec![("06/01".to_string(), vec![1.0; 23])];
        assert!(matches!(
            emit_heatmap(&days, Palette::Power),
            Err(CoreError::BadLength { .. })
        ));
    }
}
