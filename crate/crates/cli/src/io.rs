//! Dataset CSV format and artifact writers.
//!
//! Datasets: header `timestamp,P,V,I,PPV,T` (subsets allowed for test
//! files), ISO-8601 timestamps, UTF-8, LF. Empty cells are explicit
//! missing markers and load as NaN.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use loadcast_core::frame::TimeSeriesFrame;
use loadcast_core::metrics::MetricReport;
use loadcast_core::training::EpochRecord;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: io error: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: csv error: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: parse error at line {line}, column {column}: `{value}`")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        value: String,
    },
    #[error("{path}: missing timestamp header column")]
    MissingTimestampColumn { path: String },
    #[error("{path}: {source}")]
    Frame {
        path: String,
        source: loadcast_core::CoreError,
    },
}

fn parse_timestamp(text: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(Utc.from_utc_datetime(&naive).timestamp());
        }
    }
    None
}

pub fn format_timestamp(epoch: i64) -> String {
    Utc.timestamp_opt(epoch, 0)
        .single()
        .expect("valid epoch")
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

/// Loads a dataset CSV into a frame; empty cells become NaN.
pub fn load_csv(path: &Path) -> Result<TimeSeriesFrame, IoError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| csv_err(&display, source))?;
    let headers = reader
        .headers()
        .map_err(|source| csv_err(&display, source))?
        .clone();
    if headers.get(0) != Some("timestamp") {
        return Err(IoError::MissingTimestampColumn { path: display });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut timestamps = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| csv_err(&display, source))?;
        let line = row_idx + 2; // header occupies line 1
        let ts_text = record.get(0).unwrap_or("");
        let ts = parse_timestamp(ts_text).ok_or_else(|| IoError::Parse {
            path: display.clone(),
            line,
            column: 1,
            value: ts_text.to_string(),
        })?;
        timestamps.push(ts);
        for (col_idx, column) in columns.iter_mut().enumerate() {
            let cell = record.get(col_idx + 1).unwrap_or("");
            let value = if cell.trim().is_empty() {
                f64::NAN
            } else {
                cell.trim().parse::<f64>().map_err(|_| IoError::Parse {
                    path: display.clone(),
                    line,
                    column: col_idx + 2,
                    value: cell.to_string(),
                })?
            };
            column.push(value);
        }
    }

    TimeSeriesFrame::new(
        timestamps,
        names.into_iter().zip(columns),
    )
    .map_err(|source| IoError::Frame {
        path: display,
        source,
    })
}

fn csv_err(path: &str, source: csv::Error) -> IoError {
    IoError::Csv {
        path: path.to_string(),
        source,
    }
}

pub fn write_frame_csv(path: &Path, frame: &TimeSeriesFrame) -> Result<(), IoError> {
    let display = path.display().to_string();
    let names: Vec<&str> = frame.channel_names().collect();
    let mut out = String::from("timestamp");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, ts) in frame.timestamps().iter().enumerate() {
        out.push_str(&format_timestamp(*ts));
        for n in &names {
            let v = frame.channel(n).unwrap()[i];
            out.push(',');
            if v.is_nan() {
                // empty cell marks a missing value
            } else {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| IoError::Io {
        path: display,
        source,
    })
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<(), IoError> {
    let mut out = String::from("epoch,train_loss,val_loss,lr\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.train_loss, r.val_loss, r.lr
        ));
    }
    std::fs::write(path, out).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_forecast_csv(
    path: &Path,
    timestamps: &[i64],
    watts: &[f64],
) -> Result<(), IoError> {
    let mut out = String::from("timestamp,predicted_P_watts\n");
    for (ts, w) in timestamps.iter().zip(watts) {
        out.push_str(&format!("{},{w}\n", format_timestamp(*ts)));
    }
    std::fs::write(path, out).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One metrics row per day plus the cross-day mean, Table-style.
pub fn write_metrics_csv(
    path: &Path,
    norm: &str,
    rows: &[(String, MetricReport)],
    mean: &MetricReport,
) -> Result<(), IoError> {
    let mut out =
        String::from("day,norm,rmse_watts,mae_watts,mape_percent,accuracy_percent,latency_seconds\n");
    for (day, r) in rows {
        out.push_str(&format!(
            "{day},{norm},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            r.rmse_watts, r.mae_watts, r.mape_percent, r.accuracy_percent, r.latency_seconds
        ));
    }
    out.push_str(&format!(
        "mean,{norm},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
        mean.rmse_watts, mean.mae_watts, mean.mape_percent, mean.accuracy_percent,
        mean.latency_seconds
    ));
    std::fs::write(path, out).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("loadcast-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn two_row_file_loads() {
        let path = write_temp(
            "small.csv",
            "timestamp,T\n2025-01-06T00:00:00Z,12.5\n2025-01-06T01:00:00Z,13\n",
        );
        let frame = load_csv(&path).unwrap();
        assert_eq!(frame.len(), 2);
        assert_eq!(frame.channel("T"), Some(&[12.5, 13.0][..]));
        assert_eq!(frame.timestamps()[0], 1736121600);
    }

    #[test]
    fn malformed_number_reports_line_and_column() {
        let mut body = String::from("timestamp,P,T\n");
        for i in 0..6 {
            body.push_str(&format!("2025-01-06T{:02}:00:00Z,100,12\n", i));
        }
        body.push_str("2025-01-06T06:00:00Z,oops,12\n");
        let path = write_temp("bad.csv", &body);
        match load_csv(&path) {
            Err(IoError::Parse { line, column, .. }) => {
                assert_eq!(line, 8);
                assert_eq!(column, 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_cells_become_nan() {
        let path = write_temp(
            "missing.csv",
            "timestamp,P,T\n2025-01-06T00:00:00Z,,12\n2025-01-06T01:00:00Z,5,13\n",
        );
        let frame = load_csv(&path).unwrap();
        let p = frame.channel("P").unwrap();
        assert!(p[0].is_nan());
        assert_eq!(p[1], 5.0);
    }

    #[test]
    fn non_monotonic_timestamps_rejected() {
        let path = write_temp(
            "nonmono.csv",
            "timestamp,T\n2025-01-06T01:00:00Z,12\n2025-01-06T01:00:00Z,13\n",
        );
        assert!(matches!(load_csv(&path), Err(IoError::Frame { .. })));
    }

    #[test]
    fn full_day_of_five_minute_rows() {
        let mut body = String::from("timestamp,P,V,I,PPV,T\n");
        for i in 0..288i64 {
            body.push_str(&format!(
                "{},100,230,0.4,50,12\n",
                format_timestamp(1736121600 + i * 300)
            ));
        }
        let path = write_temp("day.csv", &body);
        let frame = load_csv(&path).unwrap();
        assert_eq!(frame.len(), 288);
        assert_eq!(frame.channel_names().count(), 5);
    }

    #[test]
    fn frame_csv_round_trip() {
        let frame = TimeSeriesFrame::new(
            vec![1736121600, 1736125200],
            [
                ("P".to_string(), vec![1.5, f64::NAN]),
                ("T".to_string(), vec![12.0, 13.0]),
            ],
        )
        .unwrap();
        let dir = std::env::temp_dir().join("loadcast-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        write_frame_csv(&path, &frame).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.timestamps(), frame.timestamps());
        assert_eq!(back.channel("T"), frame.channel("T"));
        assert!(back.channel("P").unwrap()[1].is_nan());
        assert_eq!(back.channel("P").unwrap()[0], 1.5);
    }
}
