//! Stage orchestration: preprocess -> train -> predict -> evaluate, plus
//! heatmap rendering. Stages communicate only through files under the
//! configured output directory, so each can be rerun in isolation.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{TimeZone, Utc};
use loadcast_core::forecast::{emit_heatmap, recursive_forecast, ForecastRequest, Palette};
use loadcast_core::frame::{encode_time_feature, sliding_windows, TimeSeriesFrame, HOUR_CHANNEL};
use loadcast_core::metrics::{aggregate, evaluate_day, MetricReport};
use loadcast_core::network::NetworkWeights;
use loadcast_core::persist;
use loadcast_core::preprocess::{
    downsample_hourly, fit_mean_imputer, fit_poly_imputer, fit_scaler, transform,
    TARGET_CHANNEL, TEMPERATURE_CHANNEL,
};
use loadcast_core::training::fit;

use crate::config::{ImputeMethod, PipelineConfig};
use crate::io;

/// The pipeline's five runnable stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Preprocess,
    Train,
    Predict,
    Evaluate,
    Heatmap,
}

/// Runs one stage against the artifacts in `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, stage: Stage) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output dir {}", cfg.output_dir.display()))?;
    match stage {
        Stage::Preprocess => preprocess(cfg),
        Stage::Train => train(cfg),
        Stage::Predict => predict(cfg),
        Stage::Evaluate => evaluate(cfg),
        Stage::Heatmap => heatmap(cfg),
    }
}

fn require(path: &Path, produced_by: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "missing artifact {}; run `loadcast {produced_by}` first",
            path.display()
        );
    }
    Ok(())
}

/// Channels the test files lack and the imputer must reconstruct:
/// every feature except the derived hour, the target and temperature.
fn imputed_channels(cfg: &PipelineConfig) -> Vec<String> {
    cfg.features
        .features
        .iter()
        .filter(|f| {
            f.as_str() != HOUR_CHANNEL
                && f.as_str() != TARGET_CHANNEL
                && f.as_str() != TEMPERATURE_CHANNEL
        })
        .cloned()
        .collect()
}

fn preprocess(cfg: &PipelineConfig) -> Result<()> {
    let d1 = io::load_csv(&cfg.data.d1)?;
    let d2 = io::load_csv(&cfg.data.d2)?;
    let d1_hourly = encode_time_feature(&downsample_hourly(&d1, cfg.downsample_group)?);
    let d2_hourly = encode_time_feature(&downsample_hourly(&d2, cfg.downsample_group)?);

    let channels = imputed_channels(cfg);
    let imputer = match cfg.imputation {
        ImputeMethod::Mean => fit_mean_imputer(&d1_hourly, &channels)?,
        ImputeMethod::Poly => fit_poly_imputer(&d1_hourly, &channels)?,
    };
    let scaler = fit_scaler(&d1_hourly, cfg.normalization)?;

    io::write_frame_csv(&cfg.hourly_path("d1"), &transform(&d1_hourly, &scaler)?)?;
    io::write_frame_csv(&cfg.hourly_path("d2"), &transform(&d2_hourly, &scaler)?)?;
    persist::save_imputer(cfg.imputer_path(), &imputer)?;
    persist::save_scaler(cfg.scaler_path(), &scaler)?;
    Ok(())
}

fn train(cfg: &PipelineConfig) -> Result<()> {
    require(&cfg.hourly_path("d1"), "preprocess")?;
    require(&cfg.hourly_path("d2"), "preprocess")?;
    let d1 = io::load_csv(&cfg.hourly_path("d1"))?;
    let d2 = io::load_csv(&cfg.hourly_path("d2"))?;
    let train_samples = sliding_windows(&d1, &cfg.features)?;
    let val_samples = sliding_windows(&d2, &cfg.features)?;

    let w0 = NetworkWeights::init(
        cfg.features.feature_dim(),
        cfg.features.window,
        cfg.network.gru_hidden,
        cfg.network.lstm_hidden,
        cfg.network.dropout_rate,
        cfg.seed,
    );
    let mut train_cfg = cfg.train.clone();
    train_cfg.rng_seed = cfg.seed;
    let (weights, state) = fit(&train_samples, &val_samples, &train_cfg, w0)?;

    persist::save_weights(cfg.weights_path(), &weights)?;
    io::write_history_csv(&cfg.history_path(), &state.history)?;
    Ok(())
}

/// Splits hourly test temperatures into full forecast days; a trailing
/// partial day is dropped.
fn day_chunks(frame: &TimeSeriesFrame, horizon: usize) -> Result<Vec<(Vec<i64>, Vec<f64>)>> {
    let temps = frame
        .channel(TEMPERATURE_CHANNEL)
        .ok_or_else(|| anyhow!("test temperature file has no T column"))?;
    let ts = frame.timestamps();
    Ok((0..ts.len() / horizon)
        .map(|d| {
            let r = d * horizon..(d + 1) * horizon;
            (ts[r.clone()].to_vec(), temps[r].to_vec())
        })
        .collect())
}

fn date_label(epoch: i64) -> String {
    Utc.timestamp_opt(epoch, 0)
        .single()
        .expect("valid epoch")
        .format("%d/%m")
        .to_string()
}

/// Appends a finished forecast day to the rolling normalized history.
fn append_day(
    history: &TimeSeriesFrame,
    cfg: &PipelineConfig,
    day_ts: &[i64],
    rows: &ndarray::Array2<f64>,
) -> Result<TimeSeriesFrame> {
    let mut timestamps = history.timestamps().to_vec();
    timestamps.extend_from_slice(day_ts);
    let channels: Vec<(String, Vec<f64>)> = cfg
        .features
        .features
        .iter()
        .enumerate()
        .map(|(col, name)| {
            let mut values = history.channel(name).expect("history is featured").to_vec();
            values.extend(rows.column(col).iter());
            (name.clone(), values)
        })
        .collect();
    Ok(TimeSeriesFrame::new(timestamps, channels)?)
}

fn predict(cfg: &PipelineConfig) -> Result<()> {
    require(&cfg.weights_path(), "train")?;
    require(&cfg.scaler_path(), "preprocess")?;
    require(&cfg.imputer_path(), "preprocess")?;
    require(&cfg.hourly_path("d2"), "preprocess")?;
    let weights = persist::load_weights(cfg.weights_path())?;
    let scaler = persist::load_scaler(cfg.scaler_path())?;
    let imputer = persist::load_imputer(cfg.imputer_path())?;
    let d2 = io::load_csv(&cfg.hourly_path("d2"))?;
    let d3 = io::load_csv(&cfg.data.d3_temps)?;
    let days = day_chunks(&d3, cfg.horizon)?;
    if days.is_empty() {
        bail!(
            "test temperature file {} holds less than one {}-step day",
            cfg.data.d3_temps.display(),
            cfg.horizon
        );
    }

    // Optional released ground truth for reseeding the window day by day.
    let truth_p: Option<TimeSeriesFrame> = match (&cfg.data.d3_truth, cfg.refresh_with_truth) {
        (Some(path), true) => Some(io::load_csv(path)?),
        _ => None,
    };

    let mut history = d2;
    let mut latencies = Vec::with_capacity(days.len());
    for (day, (day_ts, day_temps)) in days.iter().enumerate() {
        let req = ForecastRequest {
            history: history.clone(),
            future_temps: day_temps.clone(),
            future_timestamps: day_ts.clone(),
        };
        let result = recursive_forecast(&weights, &req, &imputer, &scaler, &cfg.features)?;
        io::write_forecast_csv(&cfg.forecast_path(day), day_ts, &result.predictions_watts)?;
        latencies.push(result.latency_seconds);

        // Roll the history forward with this day's completed rows.
        let mut rows = loadcast_core::forecast::build_future_rows(
            day_temps,
            day_ts,
            &imputer,
            &scaler,
            &cfg.features,
        )?;
        let target_col = cfg.features.target_index();
        let day_truth = truth_p.as_ref().map(|t| truth_for_day(t, day_ts)).transpose()?;
        for j in 0..cfg.horizon {
            rows[[j, target_col]] = match &day_truth {
                Some(watts) => scaler.transform_value(TARGET_CHANNEL, watts[j])?,
                None => result.normalized_predictions[j],
            };
        }
        history = append_day(&history, cfg, day_ts, &rows)?;
    }

    let mut latency_csv = String::from("day,latency_seconds\n");
    for (day, secs) in latencies.iter().enumerate() {
        latency_csv.push_str(&format!("{day},{secs}\n"));
    }
    std::fs::write(cfg.latency_path(), latency_csv)
        .with_context(|| format!("writing {}", cfg.latency_path().display()))?;
    Ok(())
}

/// Ground-truth watts for the given timestamps, in order.
fn truth_for_day(truth: &TimeSeriesFrame, day_ts: &[i64]) -> Result<Vec<f64>> {
    let p = truth
        .channel(TARGET_CHANNEL)
        .ok_or_else(|| anyhow!("ground-truth file has no P column"))?;
    day_ts
        .iter()
        .map(|ts| {
            truth
                .timestamps()
                .binary_search(ts)
                .map(|i| p[i])
                .map_err(|_| anyhow!("ground truth has no row at {}", io::format_timestamp(*ts)))
        })
        .collect()
}

/// Forecast day files present on disk, in day order.
fn forecast_days(cfg: &PipelineConfig) -> Result<Vec<(Vec<i64>, Vec<f64>)>> {
    let mut days = Vec::new();
    for day in 0.. {
        let path = cfg.forecast_path(day);
        if !path.exists() {
            break;
        }
        let frame = io::load_csv(&path)?;
        let watts = frame
            .channel("predicted_P_watts")
            .ok_or_else(|| anyhow!("{} has no predicted_P_watts column", path.display()))?
            .to_vec();
        days.push((frame.timestamps().to_vec(), watts));
    }
    if days.is_empty() {
        bail!(
            "missing artifact {}; run `loadcast predict` first",
            cfg.forecast_path(0).display()
        );
    }
    Ok(days)
}

fn load_latencies(cfg: &PipelineConfig, n_days: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_days];
    if let Ok(text) = std::fs::read_to_string(cfg.latency_path()) {
        for line in text.lines().skip(1) {
            if let Some((day, secs)) = line.split_once(',') {
                if let (Ok(day), Ok(secs)) = (day.parse::<usize>(), secs.parse::<f64>()) {
                    if day < n_days {
                        out[day] = secs;
                    }
                }
            }
        }
    }
    out
}

fn evaluate(cfg: &PipelineConfig) -> Result<()> {
    let truth_path = cfg
        .data
        .d3_truth
        .as_ref()
        .ok_or_else(|| anyhow!("evaluate needs data.d3_truth in the config"))?;
    let truth = io::load_csv(truth_path)?;
    let days = forecast_days(cfg)?;
    let latencies = load_latencies(cfg, days.len());

    let mut rows: Vec<(String, MetricReport)> = Vec::with_capacity(days.len());
    let mut reports = Vec::with_capacity(days.len());
    for (day, (ts, watts)) in days.iter().enumerate() {
        let y = truth_for_day(&truth, ts)?;
        let report = evaluate_day(&y, watts, latencies[day])?;
        rows.push((date_label(ts[0]), report));
        reports.push(report);
    }
    let mean = aggregate(&reports)?;
    io::write_metrics_csv(
        &cfg.metrics_path(),
        &cfg.normalization.to_string(),
        &rows,
        &mean,
    )?;
    Ok(())
}

fn write_heatmap(
    out_dir: &Path,
    stem: &str,
    days: &[(String, Vec<f64>)],
    palette: Palette,
) -> Result<()> {
    let doc = emit_heatmap(days, palette)?;
    std::fs::write(out_dir.join(format!("{stem}.html")), &doc.html)
        .with_context(|| format!("writing {stem}.html"))?;
    std::fs::write(out_dir.join(format!("{stem}.csv")), &doc.csv)
        .with_context(|| format!("writing {stem}.csv"))?;
    Ok(())
}

fn heatmap(cfg: &PipelineConfig) -> Result<()> {
    let d3 = io::load_csv(&cfg.data.d3_temps)?;
    let temp_days: Vec<(String, Vec<f64>)> = day_chunks(&d3, cfg.horizon)?
        .into_iter()
        .map(|(ts, temps)| (date_label(ts[0]), temps))
        .collect();
    if temp_days.is_empty() {
        bail!(
            "test temperature file {} holds less than one {}-step day",
            cfg.data.d3_temps.display(),
            cfg.horizon
        );
    }
    write_heatmap(
        &cfg.output_dir,
        "heatmap_temperature",
        &temp_days,
        Palette::Temperature,
    )?;

    let power_days: Vec<(String, Vec<f64>)> = forecast_days(cfg)?
        .into_iter()
        .map(|(ts, watts)| (date_label(ts[0]), watts))
        .collect();
    write_heatmap(
        &cfg.output_dir,
        &format!("heatmap_power_{}", cfg.normalization),
        &power_days,
        Palette::Power,
    )?;
    Ok(())
}
