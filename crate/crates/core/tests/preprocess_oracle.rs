//! Property checks of the preprocessing stage against brute-force oracles.

use loadcast_core::frame::TimeSeriesFrame;
use loadcast_core::preprocess::{
    downsample_hourly, fit_poly_imputer, fit_scaler, transform, ImputeRule, ScalerMethod,
};
use proptest::prelude::*;

fn frame_from(values: Vec<f64>) -> TimeSeriesFrame {
    TimeSeriesFrame::new(
        (0..values.len() as i64).map(|i| i * 300).collect(),
        [("P".to_string(), values)],
    )
    .unwrap()
}

/// Brute-force downsampling: slice and average explicitly.
fn downsample_oracle(values: &[f64], group: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + group <= values.len() {
        out.push(values[i..i + group].iter().sum::<f64>() / group as f64);
        i += group;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn downsample_matches_bruteforce(
        values in prop::collection::vec(-1e4_f64..1e4, 12..300),
        group in 2usize..=12,
    ) {
        let frame = frame_from(values.clone());
        let got = downsample_hourly(&frame, group).unwrap();
        let want = downsample_oracle(&values, group);
        prop_assert_eq!(got.len(), want.len());
        let got_p = got.channel("P").unwrap();
        for (a, b) in got_p.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn every_scaler_round_trips(
        values in prop::collection::vec(-1e5_f64..1e5, 2..100),
        probe in -1e6_f64..1e6,
    ) {
        for method in [ScalerMethod::Standard, ScalerMethod::MinMax, ScalerMethod::ZScore] {
            let frame = frame_from(values.clone());
            let scaler = match fit_scaler(&frame, method) {
                Ok(s) => s,
                Err(_) => continue, // degenerate constant draw
            };
            let forward = scaler.transform_value("P", probe).unwrap();
            let back = scaler.inverse_value("P", forward).unwrap();
            prop_assert!((back - probe).abs() <= 1e-9 * (1.0 + probe.abs()));
        }
    }

    #[test]
    fn standard_transform_centers_training_data(
        values in prop::collection::vec(-1e3_f64..1e3, 3..80),
    ) {
        let frame = frame_from(values);
        let scaler = match fit_scaler(&frame, ScalerMethod::Standard) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let t = transform(&frame, &scaler).unwrap();
        let v = t.channel("P").unwrap();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn noisy_cubic_fit_stays_within_noise_amplitude() {
    use rand::{Rng, SeedableRng};
    let beta = [3.0, -0.4, 0.05, -0.002];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    let amplitude = 0.5;
    let temps: Vec<f64> = (0..200).map(|i| 5.0 + i as f64 * 0.1).collect();
    let ys: Vec<f64> = temps
        .iter()
        .map(|t| {
            let clean = beta[0] + beta[1] * t + beta[2] * t * t + beta[3] * t * t * t;
            // symmetric zero-mean noise
            clean + rng.gen_range(-amplitude..amplitude)
        })
        .collect();
    let frame = TimeSeriesFrame::new(
        (0..200i64).map(|i| i * 300).collect(),
        [("T".to_string(), temps.clone()), ("V".to_string(), ys)],
    )
    .unwrap();
    let model = fit_poly_imputer(&frame, &["V".to_string()]).unwrap();
    let rule = model.rule("V").unwrap();
    for t in &temps {
        let clean = beta[0] + beta[1] * t + beta[2] * t * t + beta[3] * t * t * t;
        let fitted = match rule {
            ImputeRule::PolyFill { coeffs: b } => {
                b[0] + b[1] * t + b[2] * t * t + b[3] * t * t * t
            }
            other => panic!("unexpected rule {other:?}"),
        };
        assert!(
            (fitted - clean).abs() <= amplitude,
            "fitted curve drifted beyond the noise amplitude at T={t}"
        );
    }
}
