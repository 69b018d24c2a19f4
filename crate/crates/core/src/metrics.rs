//! The competition's multi-criteria evaluation: RMSE, MAE, MAPE with an
//! epsilon guard, normalized accuracy and latency bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const DEFAULT_MAPE_EPS: f64 = 1e-8;

/// The five per-day scores plus the horizon they cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse_watts: f64,
    pub mae_watts: f64,
    pub mape_percent: f64,
    pub accuracy_percent: f64,
    pub latency_seconds: f64,
    pub horizon: usize,
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() || yhat.is_empty() {
        return Err(CoreError::Empty);
    }
    if y.len() != yhat.len() {
        return Err(CoreError::MetricLengthMismatch(y.len(), yhat.len()));
    }
    Ok(())
}

/// Root mean squared error in watts.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / n).sqrt())
}

/// Mean absolute error in watts.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

/// Mean absolute percentage error; the denominator clamps to `eps`.
pub fn mape(y: &[f64], yhat: &[f64], eps: f64) -> Result<f64> {
    check_pair(y, yhat)?;
    if eps <= 0.0 {
        return Err(CoreError::NonPositiveEps(eps));
    }
    let n = y.len() as f64;
    Ok(100.0 / n
        * y.iter()
            .zip(yhat)
            .map(|(a, b)| (a - b).abs() / a.abs().max(eps))
            .sum::<f64>())
}

/// 100 * (1 - MAE / dynamic range of the ground truth).
///
/// Flat ground truth is refused: the formula is undefined there and a
/// silent 0 or 100 would corrupt cross-day aggregates.
pub fn normalized_accuracy(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= min {
        return Err(CoreError::ZeroRange);
    }
    Ok(100.0 * (1.0 - mae(y, yhat)? / (max - min)))
}

/// Assembles the full per-day report.
pub fn evaluate_day(y: &[f64], yhat: &[f64], latency_seconds: f64) -> Result<MetricReport> {
    Ok(MetricReport {
        rmse_watts: rmse(y, yhat)?,
        mae_watts: mae(y, yhat)?,
        mape_percent: mape(y, yhat, DEFAULT_MAPE_EPS)?,
        accuracy_percent: normalized_accuracy(y, yhat)?,
        latency_seconds,
        horizon: y.len(),
    })
}

/// Unweighted mean of per-day reports (every day has the same horizon).
pub fn aggregate(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(CoreError::Empty);
    }
    let n = reports.len() as f64;
    Ok(MetricReport {
        rmse_watts: reports.iter().map(|r| r.rmse_watts).sum::<f64>() / n,
        mae_watts: reports.iter().map(|r| r.mae_watts).sum::<f64>() / n,
        mape_percent: reports.iter().map(|r| r.mape_percent).sum::<f64>() / n,
        accuracy_percent: reports.iter().map(|r| r.accuracy_percent).sum::<f64>() / n,
        latency_seconds: reports.iter().map(|r| r.latency_seconds).sum::<f64>() / n,
        horizon: reports[0].horizon,
    })
}
