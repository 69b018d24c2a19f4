//! Overfitting sanity run on a tiny noiseless sequence task.

use loadcast_core::frame::WindowSample;
use loadcast_core::network::NetworkWeights;
use loadcast_core::training::{fit, TrainConfig};
use ndarray::Array2;

#[test]
fn sine_next_value_task_overfits() {
    // noiseless sine, window L=8 -> next value
    let series: Vec<f64> = (0..220).map(|i| (i as f64 * 0.3).sin()).collect();
    let l = 8;
    let samples: Vec<WindowSample> = (0..200)
        .map(|k| WindowSample {
            inputs: Array2::from_shape_fn((l, 1), |(t, _)| series[k + t]),
            target: series[k + l],
        })
        .collect();
    let val = samples[..32].to_vec();

    let cfg = TrainConfig {
        max_epochs: 200,
        batch_size: 16,
        lr_initial: 5e-3,
        early_stop_patience: 200, // let it run; this test probes optimization
        rng_seed: 3,
        ..TrainConfig::default()
    };
    let w0 = NetworkWeights::init(1, l, 8, 8, 0.0, 17);
    let (_, state) = fit(&samples, &val, &cfg, w0).unwrap();

    let first = state.history.first().unwrap().train_loss;
    let last = state.history.last().unwrap().train_loss;
    assert!(
        last < 0.01 * first,
        "train loss only fell from {first:.6} to {last:.6}"
    );
}
