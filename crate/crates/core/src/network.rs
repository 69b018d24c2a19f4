//! Forward pass of the hybrid stack: bidirectional GRU, dropout,
//! unidirectional LSTM, dropout, single-neuron dense head.
//!
//! Conventions (recorded in every persisted weight file):
//! - GRU blend h = (1-z).n + z.h_prev, reset gate applied after the
//!   recurrent matrix product: n = relu(W_n x + r.(U_n h_prev) + b_n).
//! - ReLU replaces the tanh nonlinearities only (GRU candidate, LSTM
//!   candidate and cell output); gates stay sigmoid.
//! - Dropout is inverted: survivors are scaled by 1/(1-r) at train time.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Subgradient at 0 is taken as 0.
pub fn relu_deriv(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Parameters of one GRU direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_z: Array2<f64>,
    pub w_r: Array2<f64>,
    pub w_n: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_z: Array1<f64>,
    pub b_r: Array1<f64>,
    pub b_n: Array1<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Array2::zeros((hidden, input)),
            w_r: Array2::zeros((hidden, input)),
            w_n: Array2::zeros((hidden, input)),
            u_z: Array2::zeros((hidden, hidden)),
            u_r: Array2::zeros((hidden, hidden)),
            u_n: Array2::zeros((hidden, hidden)),
            b_z: Array1::zeros(hidden),
            b_r: Array1::zeros(hidden),
            b_n: Array1::zeros(hidden),
        }
    }

    pub fn glorot(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input, hidden);
        for w in [&mut p.w_z, &mut p.w_r, &mut p.w_n] {
            glorot_fill(w, rng);
        }
        for u in [&mut p.u_z, &mut p.u_r, &mut p.u_n] {
            glorot_fill(u, rng);
        }
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w_z.ncols()
    }

    pub(crate) fn flat(&self) -> Vec<&[f64]> {
        vec![
            slice2(&self.w_z),
            slice2(&self.w_r),
            slice2(&self.w_n),
            slice2(&self.u_z),
            slice2(&self.u_r),
            slice2(&self.u_n),
            self.b_z.as_slice().unwrap(),
            self.b_r.as_slice().unwrap(),
            self.b_n.as_slice().unwrap(),
        ]
    }

    pub(crate) fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice2_mut(&mut self.w_z),
            slice2_mut(&mut self.w_r),
            slice2_mut(&mut self.w_n),
            slice2_mut(&mut self.u_z),
            slice2_mut(&mut self.u_r),
            slice2_mut(&mut self.u_n),
            self.b_z.as_slice_mut().unwrap(),
            self.b_r.as_slice_mut().unwrap(),
            self.b_n.as_slice_mut().unwrap(),
        ]
    }
}

/// Parameters of the unidirectional LSTM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_i: Array2<f64>,
    pub w_f: Array2<f64>,
    pub w_g: Array2<f64>,
    pub w_o: Array2<f64>,
    pub u_i: Array2<f64>,
    pub u_f: Array2<f64>,
    pub u_g: Array2<f64>,
    pub u_o: Array2<f64>,
    pub b_i: Array1<f64>,
    pub b_f: Array1<f64>,
    pub b_g: Array1<f64>,
    pub b_o: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_i: Array2::zeros((hidden, input)),
            w_f: Array2::zeros((hidden, input)),
            w_g: Array2::zeros((hidden, input)),
            w_o: Array2::zeros((hidden, input)),
            u_i: Array2::zeros((hidden, hidden)),
            u_f: Array2::zeros((hidden, hidden)),
            u_g: Array2::zeros((hidden, hidden)),
            u_o: Array2::zeros((hidden, hidden)),
            b_i: Array1::zeros(hidden),
            b_f: Array1::zeros(hidden),
            b_g: Array1::zeros(hidden),
            b_o: Array1::zeros(hidden),
        }
    }

    pub fn glorot(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input, hidden);
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_g, &mut p.w_o] {
            glorot_fill(w, rng);
        }
        for u in [&mut p.u_i, &mut p.u_f, &mut p.u_g, &mut p.u_o] {
            glorot_fill(u, rng);
        }
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.w_i.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w_i.ncols()
    }

    pub(crate) fn flat(&self) -> Vec<&[f64]> {
        vec![
            slice2(&self.w_i),
            slice2(&self.w_f),
            slice2(&self.w_g),
            slice2(&self.w_o),
            slice2(&self.u_i),
            slice2(&self.u_f),
            slice2(&self.u_g),
            slice2(&self.u_o),
            self.b_i.as_slice().unwrap(),
            self.b_f.as_slice().unwrap(),
            self.b_g.as_slice().unwrap(),
            self.b_o.as_slice().unwrap(),
        ]
    }

    pub(crate) fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice2_mut(&mut self.w_i),
            slice2_mut(&mut self.w_f),
            slice2_mut(&mut self.w_g),
            slice2_mut(&mut self.w_o),
            slice2_mut(&mut self.u_i),
            slice2_mut(&mut self.u_f),
            slice2_mut(&mut self.u_g),
            slice2_mut(&mut self.u_o),
            self.b_i.as_slice_mut().unwrap(),
            self.b_f.as_slice_mut().unwrap(),
            self.b_g.as_slice_mut().unwrap(),
            self.b_o.as_slice_mut().unwrap(),
        ]
    }
}

fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn glorot_fill(m: &mut Array2<f64>, rng: &mut impl Rng) {
    let (fan_out, fan_in) = (m.nrows() as f64, m.ncols() as f64);
    let s = (6.0 / (fan_in + fan_out)).sqrt();
    for v in m.iter_mut() {
        *v = rng.gen_range(-s..s);
    }
}

/// All parameters of the BiGRU/LSTM/dense stack plus architecture
/// hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub gru_fwd: GruParams,
    pub gru_bwd: GruParams,
    pub lstm: LstmParams,
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
    pub dropout_rate: f64,
    pub input_dim: usize,
    pub window: usize,
}

impl NetworkWeights {
    /// Seeded Glorot-uniform initialization, biases zero.
    pub fn init(
        input_dim: usize,
        window: usize,
        gru_hidden: usize,
        lstm_hidden: usize,
        dropout_rate: f64,
        seed: u64,
    ) -> Self {
        assert!((0.0..1.0).contains(&dropout_rate));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gru_fwd = GruParams::glorot(input_dim, gru_hidden, &mut rng);
        let gru_bwd = GruParams::glorot(input_dim, gru_hidden, &mut rng);
        let lstm = LstmParams::glorot(2 * gru_hidden, lstm_hidden, &mut rng);
        let s = (6.0 / (lstm_hidden as f64 + 1.0)).sqrt();
        let dense_w = Array1::from_iter((0..lstm_hidden).map(|_| rng.gen_range(-s..s)));
        Self {
            gru_fwd,
            gru_bwd,
            lstm,
            dense_w,
            dense_b: 0.0,
            dropout_rate,
            input_dim,
            window,
        }
    }

    /// Full-size architecture: BiGRU 256 per direction, LSTM 128.
    pub fn init_full(input_dim: usize, window: usize, dropout_rate: f64, seed: u64) -> Self {
        Self::init(input_dim, window, 256, 128, dropout_rate, seed)
    }

    pub fn gru_hidden(&self) -> usize {
        self.gru_fwd.hidden_size()
    }

    pub fn lstm_hidden(&self) -> usize {
        self.lstm.hidden_size()
    }

    pub fn param_count(&self) -> usize {
        self.flat().iter().map(|s| s.len()).sum::<usize>() + 1
    }

    pub(crate) fn flat(&self) -> Vec<&[f64]> {
        let mut v = self.gru_fwd.flat();
        v.extend(self.gru_bwd.flat());
        v.extend(self.lstm.flat());
        v.push(self.dense_w.as_slice().unwrap());
        v
    }

    /// Every parameter tensor in a fixed order; `dense_b` is the final
    /// single-element slice.
    pub(crate) fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.gru_fwd.flat_mut();
        v.extend(self.gru_bwd.flat_mut());
        v.extend(self.lstm.flat_mut());
        v.push(self.dense_w.as_slice_mut().unwrap());
        v.push(std::slice::from_mut(&mut self.dense_b));
        v
    }

    /// Read-only view of every parameter tensor, `dense_b` last.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.flat();
        v.push(std::slice::from_ref(&self.dense_b));
        v
    }

    /// Mutable view of every parameter tensor, `dense_b` last.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.flat_mut()
    }
}

/// Same tensor layout as the weights; used for BPTT accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub gru_fwd: GruParams,
    pub gru_bwd: GruParams,
    pub lstm: LstmParams,
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
}

impl Gradients {
    pub fn zeros_like(w: &NetworkWeights) -> Self {
        Self {
            gru_fwd: GruParams::zeros(w.input_dim, w.gru_hidden()),
            gru_bwd: GruParams::zeros(w.input_dim, w.gru_hidden()),
            lstm: LstmParams::zeros(2 * w.gru_hidden(), w.lstm_hidden()),
            dense_w: Array1::zeros(w.lstm_hidden()),
            dense_b: 0.0,
        }
    }

    pub(crate) fn flat(&self) -> Vec<&[f64]> {
        let mut v = self.gru_fwd.flat();
        v.extend(self.gru_bwd.flat());
        v.extend(self.lstm.flat());
        v.push(self.dense_w.as_slice().unwrap());
        v
    }

    pub(crate) fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.gru_fwd.flat_mut();
        v.extend(self.gru_bwd.flat_mut());
        v.extend(self.lstm.flat_mut());
        v.push(self.dense_w.as_slice_mut().unwrap());
        v.push(std::slice::from_mut(&mut self.dense_b));
        v
    }

    /// Read-only view of every gradient tensor in weight-file order,
    /// `dense_b` last.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.flat();
        v.push(std::slice::from_ref(&self.dense_b));
        v
    }

    pub fn global_norm(&self) -> f64 {
        let mut ss = self.dense_b * self.dense_b;
        for s in self.flat() {
            ss += s.iter().map(|v| v * v).sum::<f64>();
        }
        ss.sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.flat_mut() {
            for v in s.iter_mut() {
                *v *= factor;
            }
        }
    }
}

/// Whether dropout masks are sampled (with the given seed) or disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train { dropout_seed: u64 },
    Infer,
}

#[derive(Debug, Clone)]
pub(crate) struct GruStepCache {
    pub h_prev: Array1<f64>,
    pub z: Array1<f64>,
    pub r: Array1<f64>,
    pub a_n: Array1<f64>,
    pub n: Array1<f64>,
    pub uh_n: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LstmStepCache {
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub a_g: Array1<f64>,
    pub o: Array1<f64>,
    pub c: Array1<f64>,
}

/// Intermediate activations of one forward call, retained for BPTT.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) seq: Array2<f64>,
    pub(crate) fwd_steps: Vec<GruStepCache>,
    pub(crate) bwd_steps: Vec<GruStepCache>,
    pub(crate) mask1: Option<Array2<f64>>,
    pub(crate) s: Array2<f64>,
    pub(crate) lstm_steps: Vec<LstmStepCache>,
    pub(crate) mask2: Option<Array1<f64>>,
    pub(crate) u: Array1<f64>,
}

fn check_dims(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CoreError::DimensionMismatch(msg()))
    }
}

/// One GRU step: h = (1-z).n + z.h_prev.
pub fn gru_cell(x: ArrayView1<f64>, h_prev: ArrayView1<f64>, p: &GruParams) -> Result<Array1<f64>> {
    check_dims(x.len() == p.input_size() && h_prev.len() == p.hidden_size(), || {
        format!(
            "gru_cell: x len {} vs D {}, h len {} vs H {}",
            x.len(),
            p.input_size(),
            h_prev.len(),
            p.hidden_size()
        )
    })?;
    let (h, _) = gru_step(
        &(p.w_z.dot(&x) + &p.b_z),
        &(p.w_r.dot(&x) + &p.b_r),
        &(p.w_n.dot(&x) + &p.b_n),
        &h_prev.to_owned(),
        p,
    );
    Ok(h)
}

/// Core GRU step given the precomputed input projections Wx + b.
fn gru_step(
    wx_z: &Array1<f64>,
    wx_r: &Array1<f64>,
    wx_n: &Array1<f64>,
    h_prev: &Array1<f64>,
    p: &GruParams,
) -> (Array1<f64>, GruStepCache) {
    let z = (wx_z + &p.u_z.dot(h_prev)).mapv(sigmoid);
    let r = (wx_r + &p.u_r.dot(h_prev)).mapv(sigmoid);
    let uh_n = p.u_n.dot(h_prev);
    let a_n = wx_n + &(&r * &uh_n);
    let n = a_n.mapv(relu);
    let h = (1.0 - &z) * &n + &z * h_prev;
    let cache = GruStepCache {
        h_prev: h_prev.clone(),
        z,
        r,
        a_n,
        n,
        uh_n,
    };
    (h, cache)
}

/// Scans one GRU direction over the sequence.
///
/// Returns hidden states indexed by the original time axis and step caches
/// in processing order (reversed time for the backward direction).
pub(crate) fn gru_scan(
    seq: ArrayView2<f64>,
    p: &GruParams,
    reverse: bool,
) -> (Array2<f64>, Vec<GruStepCache>) {
    let l = seq.nrows();
    let h_size = p.hidden_size();
    // One gemm per gate for the input projections.
    let wx_z = seq.dot(&p.w_z.t()) + &p.b_z;
    let wx_r = seq.dot(&p.w_r.t()) + &p.b_r;
    let wx_n = seq.dot(&p.w_n.t()) + &p.b_n;
    let mut out = Array2::zeros((l, h_size));
    let mut caches = Vec::with_capacity(l);
    let mut h = Array1::zeros(h_size);
    let order: Vec<usize> = if reverse {
        (0..l).rev().collect()
    } else {
        (0..l).collect()
    };
    for t in order {
        let (h_new, cache) = gru_step(
            &wx_z.row(t).to_owned(),
            &wx_r.row(t).to_owned(),
            &wx_n.row(t).to_owned(),
            &h,
            p,
        );
        out.row_mut(t).assign(&h_new);
        caches.push(cache);
        h = h_new;
    }
    (out, caches)
}

/// Bidirectional GRU over the sequence; output row t is
/// concat(h_fwd(t), h_bwd(t)). Both directions start from zero state.
pub fn bigru_forward(
    seq: ArrayView2<f64>,
    fwd: &GruParams,
    bwd: &GruParams,
) -> Result<Array2<f64>> {
    check_dims(
        seq.nrows() >= 1
            && seq.ncols() == fwd.input_size()
            && seq.ncols() == bwd.input_size()
            && fwd.hidden_size() == bwd.hidden_size(),
        || "bigru_forward: inconsistent shapes".to_string(),
    )?;
    let (out, _, _) = bigru_cached(seq, fwd, bwd);
    Ok(out)
}

fn bigru_cached(
    seq: ArrayView2<f64>,
    fwd: &GruParams,
    bwd: &GruParams,
) -> (Array2<f64>, Vec<GruStepCache>, Vec<GruStepCache>) {
    let (h_fwd, fwd_caches) = gru_scan(seq, fwd, false);
    let (h_bwd, bwd_caches) = gru_scan(seq, bwd, true);
    let l = seq.nrows();
    let h = fwd.hidden_size();
    let mut out = Array2::zeros((l, 2 * h));
    out.slice_mut(s![.., ..h]).assign(&h_fwd);
    out.slice_mut(s![.., h..]).assign(&h_bwd);
    (out, fwd_caches, bwd_caches)
}

/// One LSTM step: c = f.c_prev + i.g, h = o.relu(c), with ReLU candidates.
pub fn lstm_cell(
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
    p: &LstmParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_dims(
        x.len() == p.input_size()
            && h_prev.len() == p.hidden_size()
            && c_prev.len() == p.hidden_size(),
        || {
            format!(
                "lstm_cell: x len {} vs D {}, state len {}/{} vs H {}",
                x.len(),
                p.input_size(),
                h_prev.len(),
                c_prev.len(),
                p.hidden_size()
            )
        },
    )?;
    let (h, c, _) = lstm_step(
        &(p.w_i.dot(&x) + &p.b_i),
        &(p.w_f.dot(&x) + &p.b_f),
        &(p.w_g.dot(&x) + &p.b_g),
        &(p.w_o.dot(&x) + &p.b_o),
        &h_prev.to_owned(),
        &c_prev.to_owned(),
        p,
    );
    Ok((h, c))
}

fn lstm_step(
    wx_i: &Array1<f64>,
    wx_f: &Array1<f64>,
    wx_g: &Array1<f64>,
    wx_o: &Array1<f64>,
    h_prev: &Array1<f64>,
    c_prev: &Array1<f64>,
    p: &LstmParams,
) -> (Array1<f64>, Array1<f64>, LstmStepCache) {
    let i = (wx_i + &p.u_i.dot(h_prev)).mapv(sigmoid);
    let f = (wx_f + &p.u_f.dot(h_prev)).mapv(sigmoid);
    let a_g = wx_g + &p.u_g.dot(h_prev);
    let g = a_g.mapv(relu);
    let o = (wx_o + &p.u_o.dot(h_prev)).mapv(sigmoid);
    let c = &f * c_prev + &i * &g;
    let h = &o * &c.mapv(relu);
    let cache = LstmStepCache {
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        i,
        f,
        g,
        a_g,
        o,
        c: c.clone(),
    };
    (h, c, cache)
}

fn lstm_scan(seq: ArrayView2<f64>, p: &LstmParams) -> (Array1<f64>, Vec<LstmStepCache>) {
    let l = seq.nrows();
    let h_size = p.hidden_size();
    let wx_i = seq.dot(&p.w_i.t()) + &p.b_i;
    let wx_f = seq.dot(&p.w_f.t()) + &p.b_f;
    let wx_g = seq.dot(&p.w_g.t()) + &p.b_g;
    let wx_o = seq.dot(&p.w_o.t()) + &p.b_o;
    let mut h = Array1::zeros(h_size);
    let mut c = Array1::zeros(h_size);
    let mut caches = Vec::with_capacity(l);
    for t in 0..l {
        let (h_new, c_new, cache) = lstm_step(
            &wx_i.row(t).to_owned(),
            &wx_f.row(t).to_owned(),
            &wx_g.row(t).to_owned(),
            &wx_o.row(t).to_owned(),
            &h,
            &c,
            p,
        );
        caches.push(cache);
        h = h_new;
        c = c_new;
    }
    (h, caches)
}

fn dropout_mask_1d(len: usize, rate: f64, rng: &mut impl Rng) -> Array1<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array1::from_iter((0..len).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }))
}

fn dropout_mask_2d(rows: usize, cols: usize, rate: f64, rng: &mut impl Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_fn((rows, cols), |_| {
        if rng.gen::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

/// Full forward pass; returns the scalar prediction and the activation
/// cache needed by BPTT.
pub fn forward(
    seq: ArrayView2<f64>,
    w: &NetworkWeights,
    mode: ForwardMode,
) -> Result<(f64, ForwardCache)> {
    check_dims(
        seq.nrows() == w.window && seq.ncols() == w.input_dim,
        || {
            format!(
                "forward: seq {}x{} vs network {}x{}",
                seq.nrows(),
                seq.ncols(),
                w.window,
                w.input_dim
            )
        },
    )?;
    let (bigru_out, fwd_steps, bwd_steps) = bigru_cached(seq, &w.gru_fwd, &w.gru_bwd);

    let mut rng = match mode {
        ForwardMode::Train { dropout_seed } if w.dropout_rate > 0.0 => {
            Some(ChaCha8Rng::seed_from_u64(dropout_seed))
        }
        _ => None,
    };
    let (mask1, s_mat) = match rng.as_mut() {
        Some(r) => {
            let m = dropout_mask_2d(bigru_out.nrows(), bigru_out.ncols(), w.dropout_rate, r);
            let s = &bigru_out * &m;
            (Some(m), s)
        }
        None => (None, bigru_out.clone()),
    };

    let (h_last, lstm_steps) = lstm_scan(s_mat.view(), &w.lstm);

    let (mask2, u) = match rng.as_mut() {
        Some(r) => {
            let m = dropout_mask_1d(h_last.len(), w.dropout_rate, r);
            let u = &h_last * &m;
            (Some(m), u)
        }
        None => (None, h_last),
    };

    let yhat = w.dense_w.dot(&u) + w.dense_b;
    let cache = ForwardCache {
        seq: seq.to_owned(),
        fwd_steps,
        bwd_steps,
        mask1,
        s: s_mat,
        lstm_steps,
        mask2,
        u,
    };
    Ok((yhat, cache))
}

/// Inference-mode prediction without keeping the cache.
pub fn predict(seq: ArrayView2<f64>, w: &NetworkWeights) -> Result<f64> {
    forward(seq, w, ForwardMode::Infer).map(|(y, _)| y)
}

/// Accumulates the gradient of `dy * yhat` for one cached forward call.
pub(crate) fn backward_sample(
    w: &NetworkWeights,
    cache: &ForwardCache,
    dy: f64,
    g: &mut Gradients,
) {
    let l = cache.seq.nrows();
    let gru_h = w.gru_hidden();

    // dense head
    g.dense_b += dy;
    g.dense_w.scaled_add(dy, &cache.u);
    let du = &w.dense_w * dy;
    let dh_last = match &cache.mask2 {
        Some(m) => &du * m,
        None => du,
    };

    // LSTM, reverse time
    let mut dh = dh_last;
    let mut dc = Array1::zeros(w.lstm_hidden());
    let mut ds = Array2::zeros((l, 2 * gru_h));
    for t in (0..l).rev() {
        let st = &cache.lstm_steps[t];
        let relu_c = st.c.mapv(relu);
        let da_o = &dh * &relu_c * &st.o * &(1.0 - &st.o);
        dc = dc + &dh * &st.o * &st.c.mapv(relu_deriv);
        let da_i = &dc * &st.g * &st.i * &(1.0 - &st.i);
        let da_f = &dc * &st.c_prev * &st.f * &(1.0 - &st.f);
        let da_g = &dc * &st.i * &st.a_g.mapv(relu_deriv);

        let x = cache.s.row(t);
        add_outer(&mut g.lstm.w_i, &da_i, x);
        add_outer(&mut g.lstm.w_f, &da_f, x);
        add_outer(&mut g.lstm.w_g, &da_g, x);
        add_outer(&mut g.lstm.w_o, &da_o, x);
        let hp = st.h_prev.view();
        add_outer(&mut g.lstm.u_i, &da_i, hp);
        add_outer(&mut g.lstm.u_f, &da_f, hp);
        add_outer(&mut g.lstm.u_g, &da_g, hp);
        add_outer(&mut g.lstm.u_o, &da_o, hp);
        g.lstm.b_i += &da_i;
        g.lstm.b_f += &da_f;
        g.lstm.b_g += &da_g;
        g.lstm.b_o += &da_o;

        let ds_t = w.lstm.w_i.t().dot(&da_i)
            + w.lstm.w_f.t().dot(&da_f)
            + w.lstm.w_g.t().dot(&da_g)
            + w.lstm.w_o.t().dot(&da_o);
        ds.row_mut(t).assign(&ds_t);

        dh = w.lstm.u_i.t().dot(&da_i)
            + w.lstm.u_f.t().dot(&da_f)
            + w.lstm.u_g.t().dot(&da_g)
            + w.lstm.u_o.t().dot(&da_o);
        dc = &dc * &st.f;
    }

    // first dropout
    let d_bigru = match &cache.mask1 {
        Some(m) => &ds * m,
        None => ds,
    };

    gru_backward_dir(
        w,
        &w.gru_fwd,
        &cache.fwd_steps,
        d_bigru.slice(s![.., ..gru_h]),
        false,
        &mut g.gru_fwd,
        cache,
    );
    gru_backward_dir(
        w,
        &w.gru_bwd,
        &cache.bwd_steps,
        d_bigru.slice(s![.., gru_h..]),
        true,
        &mut g.gru_bwd,
        cache,
    );
}

/// Backprop through one GRU direction.
///
/// `steps` are in processing order; `d_out` is indexed by the original
/// time axis. For the reverse direction processing step k covers time
/// t = L-1-k.
#[allow(clippy::too_many_arguments)]
fn gru_backward_dir(
    _w: &NetworkWeights,
    p: &GruParams,
    steps: &[GruStepCache],
    d_out: ArrayView2<f64>,
    reverse: bool,
    g: &mut GruParams,
    cache: &ForwardCache,
) {
    let l = steps.len();
    let h_size = p.hidden_size();
    let mut dh_carry = Array1::zeros(h_size);
    for k in (0..l).rev() {
        let t = if reverse { l - 1 - k } else { k };
        let st = &steps[k];
        let dh = &d_out.row(t) + &dh_carry;
        let dz = &dh * &(&st.h_prev - &st.n);
        let da_z = &dz * &st.z * &(1.0 - &st.z);
        let dn = &dh * &(1.0 - &st.z);
        let da_n = &dn * &st.a_n.mapv(relu_deriv);
        let dr = &da_n * &st.uh_n;
        let da_r = &dr * &st.r * &(1.0 - &st.r);
        let da_n_r = &da_n * &st.r;

        let x = cache.seq.row(t);
        add_outer(&mut g.w_z, &da_z, x);
        add_outer(&mut g.w_r, &da_r, x);
        add_outer(&mut g.w_n, &da_n, x);
        let hp = st.h_prev.view();
        add_outer(&mut g.u_z, &da_z, hp);
        add_outer(&mut g.u_r, &da_r, hp);
        add_outer(&mut g.u_n, &da_n_r, hp);
        g.b_z += &da_z;
        g.b_r += &da_r;
        g.b_n += &da_n;

        dh_carry = &dh * &st.z
            + p.u_z.t().dot(&da_z)
            + p.u_r.t().dot(&da_r)
            + p.u_n.t().dot(&da_n_r);
    }
}

fn add_outer(m: &mut Array2<f64>, a: &Array1<f64>, b: ArrayView1<f64>) {
    for (i, mut row) in m.axis_iter_mut(Axis(0)).enumerate() {
        row.scaled_add(a[i], &b);
    }
}
