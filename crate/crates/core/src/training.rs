//! MSE training of the network by backpropagation through time, with
//! mini-batching, early stopping on external validation loss and plateau
//! learning-rate scheduling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::WindowSample;
use crate::network::{backward_sample, forward, ForwardCache, ForwardMode, Gradients, NetworkWeights};

/// Strict-improvement tolerance for the early-stopping and plateau rules.
const IMPROVE_TOL: f64 = 1e-12;

/// Training hyperparameters. `lr_initial` and `lr_decay_factor` are
/// artifact choices; everything else defaults to the reference protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub early_stop_patience: usize,
    pub lr_plateau_patience: usize,
    pub lr_floor: f64,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    pub grad_clip: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            batch_size: 16,
            early_stop_patience: 5,
            lr_plateau_patience: 3,
            lr_floor: 1e-6,
            lr_initial: 1e-3,
            lr_decay_factor: 0.5,
            grad_clip: 5.0,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_epochs >= 1
            && self.batch_size >= 1
            && self.early_stop_patience >= 1
            && self.lr_plateau_patience >= 1
            && self.lr_floor > 0.0
            && self.lr_floor <= self.lr_initial
            && self.lr_decay_factor > 0.0
            && self.lr_decay_factor < 1.0
            && self.grad_clip > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CoreError::ShapeMismatch("invalid TrainConfig".to_string()))
        }
    }
}

/// One line of the per-epoch training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// Early-stopping bookkeeping and the per-epoch history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
}

/// Mean squared error over a batch.
pub fn mse_loss(yhat: &[f64], y: &[f64]) -> Result<f64> {
    if yhat.is_empty() || y.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    if yhat.len() != y.len() {
        return Err(CoreError::MetricLengthMismatch(yhat.len(), y.len()));
    }
    let n = yhat.len() as f64;
    Ok(yhat
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Gradient of the batch MSE with respect to every parameter tensor.
///
/// `caches` must come from `forward` in Train mode on exactly this batch,
/// paired with the predictions they produced.
pub fn backward(
    batch: &[WindowSample],
    w: &NetworkWeights,
    caches: &[(f64, ForwardCache)],
) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    if batch.len() != caches.len() {
        return Err(CoreError::CacheMismatch(format!(
            "{} samples vs {} caches",
            batch.len(),
            caches.len()
        )));
    }
    let n = batch.len() as f64;
    let mut grads = Gradients::zeros_like(w);
    for (sample, (yhat, cache)) in batch.iter().zip(caches) {
        let dy = 2.0 * (yhat - sample.target) / n;
        backward_sample(w, cache, dy, &mut grads);
    }
    Ok(grads)
}

/// Adam moment estimates; one slot per scalar parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(w: &NetworkWeights) -> Self {
        let n = w.param_count();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One Adam update with bias correction.
pub fn adam_step(
    w: &mut NetworkWeights,
    g: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let g_flat = g.flat_with_bias();
    let total: usize = g_flat.iter().map(|s| s.len()).sum();
    if total != state.m.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "gradient has {} params, optimizer state {}",
            total,
            state.m.len()
        )));
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    let mut offset = 0;
    let mut w_flat = w.flat_mut();
    let mut w_iter = w_flat.iter_mut();
    for gs in g_flat {
        let ws = w_iter.next().expect("weights and gradients share layout");
        if ws.len() != gs.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "tensor length {} vs {}",
                ws.len(),
                gs.len()
            )));
        }
        for (k, (wv, gv)) in ws.iter_mut().zip(gs.iter()).enumerate() {
            let idx = offset + k;
            state.m[idx] = state.beta1 * state.m[idx] + (1.0 - state.beta1) * gv;
            state.v[idx] = state.beta2 * state.v[idx] + (1.0 - state.beta2) * gv * gv;
            let m_hat = state.m[idx] / bc1;
            let v_hat = state.v[idx] / bc2;
            *wv -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        offset += gs.len();
    }
    Ok(())
}

impl Gradients {
    /// All gradient tensors followed by the dense bias, matching
    /// `NetworkWeights::flat_mut` layout.
    fn flat_with_bias(&self) -> Vec<&[f64]> {
        let mut v = self.flat();
        v.push(std::slice::from_ref(&self.dense_b));
        v
    }
}

fn check_samples(samples: &[WindowSample], w: &NetworkWeights, what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(CoreError::EmptySet(what.to_string()));
    }
    for s in samples {
        if s.window_len() != w.window || s.feature_dim() != w.input_dim {
            return Err(CoreError::ShapeMismatch(format!(
                "{what} sample is {}x{}, network expects {}x{}",
                s.window_len(),
                s.feature_dim(),
                w.window,
                w.input_dim
            )));
        }
    }
    Ok(())
}

/// MSE of the network over a sample set, dropout disabled.
pub fn evaluate_mse(samples: &[WindowSample], w: &NetworkWeights) -> Result<f64> {
    if samples.is_empty() {
        return Err(CoreError::EmptySet("evaluation".to_string()));
    }
    let mut sum = 0.0;
    for s in samples {
        let (yhat, _) = forward(s.inputs_view(), w, ForwardMode::Infer)?;
        sum += (yhat - s.target) * (yhat - s.target);
    }
    Ok(sum / samples.len() as f64)
}

/// Trains with early stopping against the held-out validation set.
pub fn fit(
    train: &[WindowSample],
    val: &[WindowSample],
    cfg: &TrainConfig,
    initial: NetworkWeights,
) -> Result<(NetworkWeights, TrainState)> {
    check_samples(val, &initial, "validation")?;
    fit_with_validation(train, cfg, initial, |w, _| {
        evaluate_mse(val, w).expect("validation set already checked")
    })
}

/// Epoch driver with a pluggable validation-loss source.
///
/// Production training passes the real Infer-mode MSE on the validation
/// set; tests can rig the stream to force the stopping and scheduling
/// rules.
pub fn fit_with_validation(
    train: &[WindowSample],
    cfg: &TrainConfig,
    initial: NetworkWeights,
    mut val_loss_fn: impl FnMut(&NetworkWeights, usize) -> f64,
) -> Result<(NetworkWeights, TrainState)> {
    cfg.validate()?;
    check_samples(train, &initial, "training")?;

    let mut w = initial;
    let mut snapshot = w.clone();
    let mut opt = AdamState::new(&w);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut lr = cfg.lr_initial;
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_improve = 0usize;
    let mut since_lr_drop = 0usize;
    let mut history = Vec::new();
    let mut stopped_early = false;

    let mut indices: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut rng);
        let mut sq_err_sum = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch: Vec<WindowSample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let mut caches = Vec::with_capacity(batch.len());
            for s in &batch {
                let seed: u64 = rng.gen();
                let (yhat, cache) =
                    forward(s.inputs_view(), &w, ForwardMode::Train { dropout_seed: seed })?;
                sq_err_sum += (yhat - s.target) * (yhat - s.target);
                caches.push((yhat, cache));
            }
            let mut grads = backward(&batch, &w, &caches)?;
            let norm = grads.global_norm();
            if norm.is_finite() && norm > cfg.grad_clip {
                grads.scale(cfg.grad_clip / norm);
            }
            adam_step(&mut w, &grads, &mut opt, lr)?;
        }
        let train_loss = sq_err_sum / train.len() as f64;
        let val_loss = val_loss_fn(&w, epoch);
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });

        if val_loss < best_val - IMPROVE_TOL {
            best_val = val_loss;
            best_epoch = epoch;
            snapshot = w.clone();
            since_improve = 0;
            since_lr_drop = 0;
        } else {
            since_improve += 1;
            since_lr_drop += 1;
        }
        if since_lr_drop >= cfg.lr_plateau_patience {
            lr = (lr * cfg.lr_decay_factor).max(cfg.lr_floor);
            since_lr_drop = 0;
        }
        if since_improve >= cfg.early_stop_patience {
            stopped_early = true;
            break;
        }
    }

    Ok((
        snapshot,
        TrainState {
            best_val_loss: best_val,
            best_epoch,
            stopped_early,
            history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn sample(l: usize, d: usize, fill: f64, target: f64) -> WindowSample {
        WindowSample {
            inputs: Array2::from_elem((l, d), fill),
            target,
        }
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[2.0], &[0.0]).unwrap(), 4.0);
        assert_eq!(mse_loss(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(matches!(mse_loss(&[], &[]), Err(CoreError::EmptyBatch)));
    }

    #[test]
    fn zero_error_batch_has_zero_dense_gradient() {
        let w = NetworkWeights::init(2, 3, 2, 2, 0.0, 1);
        let mut s = sample(3, 2, 0.5, 0.0);
        let (yhat, _) = forward(s.inputs_view(), &w, ForwardMode::Infer).unwrap();
        s.target = yhat; // make error exactly zero
        let caches =
            vec![forward(s.inputs_view(), &w, ForwardMode::Train { dropout_seed: 0 }).unwrap()];
        let g = backward(&[s], &w, &caches).unwrap();
        assert_eq!(g.dense_b, 0.0);
        assert!(g.dense_w.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn doubling_error_doubles_dense_bias_gradient() {
        let w = NetworkWeights::init(2, 3, 2, 2, 0.0, 2);
        let s1 = sample(3, 2, 0.3, 1.0);
        let (yhat, cache) =
            forward(s1.inputs_view(), &w, ForwardMode::Train { dropout_seed: 0 }).unwrap();
        let g1 = backward(&[s1.clone()], &w, &[(yhat, cache.clone())]).unwrap();
        // y -> 2y - yhat doubles the error yhat - y
        let s2 = WindowSample {
            inputs: s1.inputs.clone(),
            target: 2.0 * s1.target - yhat,
        };
        let g2 = backward(&[s2], &w, &[(yhat, cache)]).unwrap();
        assert_abs_diff_eq!(g2.dense_b, 2.0 * g1.dense_b, epsilon = 1e-12);
    }

    #[test]
    fn cache_count_mismatch_is_rejected() {
        let w = NetworkWeights::init(2, 3, 2, 2, 0.0, 3);
        let s = sample(3, 2, 0.1, 0.0);
        assert!(matches!(
            backward(&[s], &w, &[]),
            Err(CoreError::CacheMismatch(_))
        ));
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut w = NetworkWeights::init(2, 3, 2, 2, 0.0, 4);
        let before = w.clone();
        let g = Gradients::zeros_like(&w);
        let mut st = AdamState::new(&w);
        adam_step(&mut w, &g, &mut st, 0.01).unwrap();
        assert_eq!(w, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // With a single unit gradient the bias-corrected first step is
        // lr * 1 / (1 + eps) to within eps.
        let mut w = NetworkWeights::init(2, 3, 2, 2, 0.0, 5);
        let b_before = w.dense_b;
        let mut g = Gradients::zeros_like(&w);
        g.dense_b = 1.0;
        let mut st = AdamState::new(&w);
        adam_step(&mut w, &g, &mut st, 0.001).unwrap();
        assert_abs_diff_eq!(b_before - w.dense_b, 0.001, epsilon = 1e-6);
    }

    #[test]
    fn adam_constant_gradient_step_approaches_lr() {
        let mut w = NetworkWeights::init(2, 3, 2, 2, 0.0, 6);
        let mut g = Gradients::zeros_like(&w);
        g.dense_b = 0.37;
        let mut st = AdamState::new(&w);
        let lr = 0.01;
        let mut prev = w.dense_b;
        let mut last_step = 0.0;
        for _ in 0..200 {
            adam_step(&mut w, &g, &mut st, lr).unwrap();
            last_step = prev - w.dense_b;
            prev = w.dense_b;
        }
        assert_abs_diff_eq!(last_step, lr, epsilon = 1e-4);
    }

    #[test]
    fn zero_lr_leaves_weights_unchanged() {
        let mut w = NetworkWeights::init(2, 3, 2, 2, 0.0, 7);
        let before = w.clone();
        let mut g = Gradients::zeros_like(&w);
        g.dense_b = 3.0;
        g.dense_w.fill(1.0);
        let mut st = AdamState::new(&w);
        adam_step(&mut w, &g, &mut st, 0.0).unwrap();
        assert_eq!(w, before);
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            max_epochs: 20,
            batch_size: 4,
            lr_initial: 1e-2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn rigged_worsening_stream_stops_after_patience() {
        let cfg = quick_cfg();
        let train: Vec<WindowSample> = (0..8).map(|i| sample(3, 2, i as f64 * 0.1, 0.0)).collect();
        let w0 = NetworkWeights::init(2, 3, 2, 2, 0.0, 8);
        let (_, state) =
            fit_with_validation(&train, &cfg, w0, |_, epoch| 1.0 + epoch as f64).unwrap();
        assert!(state.stopped_early);
        assert_eq!(state.history.len(), 1 + cfg.early_stop_patience);
        assert_eq!(state.best_epoch, 1);
    }

    #[test]
    fn rigged_plateau_decays_lr_once_per_patience() {
        let mut cfg = quick_cfg();
        cfg.max_epochs = 7;
        cfg.early_stop_patience = 100; // keep running through the plateau
        let train: Vec<WindowSample> = (0..8).map(|i| sample(3, 2, i as f64 * 0.1, 0.0)).collect();
        let w0 = NetworkWeights::init(2, 3, 2, 2, 0.0, 9);
        let (_, state) = fit_with_validation(&train, &cfg, w0, |_, _| 1.0).unwrap();
        let lrs: Vec<f64> = state.history.iter().map(|r| r.lr).collect();
        // epoch 1 improves from +inf; plateau counts epochs 2-4, so the
        // decay lands after epoch 4 and is in effect from epoch 5
        assert_eq!(&lrs[..4], &[cfg.lr_initial; 4]);
        let decayed = cfg.lr_initial * cfg.lr_decay_factor;
        assert_eq!(&lrs[4..], &[decayed; 3]);
    }

    #[test]
    fn lr_never_below_floor_and_non_increasing() {
        let mut cfg = quick_cfg();
        cfg.max_epochs = 60;
        cfg.early_stop_patience = 100;
        cfg.lr_initial = 1e-4;
        cfg.lr_floor = 1e-6;
        let train: Vec<WindowSample> = (0..8).map(|i| sample(3, 2, i as f64 * 0.1, 0.0)).collect();
        let w0 = NetworkWeights::init(2, 3, 2, 2, 0.0, 10);
        let (_, state) = fit_with_validation(&train, &cfg, w0, |_, _| 1.0).unwrap();
        let lrs: Vec<f64> = state.history.iter().map(|r| r.lr).collect();
        for pair in lrs.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        assert!(lrs.iter().all(|lr| *lr >= cfg.lr_floor));
        assert_eq!(*lrs.last().unwrap(), cfg.lr_floor);
    }

    #[test]
    fn fit_is_bit_reproducible() {
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 4,
            rng_seed: 21,
            ..TrainConfig::default()
        };
        let train: Vec<WindowSample> = (0..10)
            .map(|i| sample(3, 2, (i as f64 * 0.7).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let val = train[..4].to_vec();
        let w0 = NetworkWeights::init(2, 3, 2, 2, 0.2, 11);
        let (w_a, st_a) = fit(&train, &val, &cfg, w0.clone()).unwrap();
        let (w_b, st_b) = fit(&train, &val, &cfg, w0).unwrap();
        assert_eq!(w_a, w_b);
        assert_eq!(st_a, st_b);
    }

    #[test]
    fn empty_sets_are_rejected() {
        let cfg = quick_cfg();
        let w0 = NetworkWeights::init(2, 3, 2, 2, 0.0, 12);
        assert!(matches!(
            fit(&[], &[sample(3, 2, 0.0, 0.0)], &cfg, w0.clone()),
            Err(CoreError::EmptySet(_))
        ));
        assert!(matches!(
            fit(&[sample(3, 2, 0.0, 0.0)], &[], &cfg, w0),
            Err(CoreError::EmptySet(_))
        ));
    }

    #[test]
    fn early_stopping_returns_best_snapshot() {
        // snapshot must correspond to the minimum of the rigged stream
        let mut cfg = quick_cfg();
        cfg.max_epochs = 10;
        let losses = [5.0, 3.0, 4.0, 2.5, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0];
        let train: Vec<WindowSample> = (0..8).map(|i| sample(3, 2, i as f64 * 0.1, 0.0)).collect();
        let w0 = NetworkWeights::init(2, 3, 2, 2, 0.0, 13);
        let (_, state) =
            fit_with_validation(&train, &cfg, w0, |_, epoch| losses[epoch - 1]).unwrap();
        assert_eq!(state.best_epoch, 4);
        assert_eq!(state.best_val_loss, 2.5);
        let min_seen = state
            .history
            .iter()
            .map(|r| r.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert!(state.best_val_loss <= min_seen);
    }
}
