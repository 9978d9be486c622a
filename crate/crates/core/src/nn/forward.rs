use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::params::{DenseLayerParams, LstmLayerParams, ModelParams};
use crate::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Cell and hidden state of one LSTM sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Array1<f64>,
    pub hidden: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self { cell: Array1::zeros(hidden_size), hidden: Array1::zeros(hidden_size) }
    }
}

/// One LSTM update for a single sequence. Returns the new state and its
/// hidden output (identical to `state.hidden` of the result).
pub fn lstm_step(
    params: &LstmLayerParams,
    state: &LstmState,
    x: ArrayView1<f64>,
) -> Result<(LstmState, Array1<f64>)> {
    let h = params.hidden_size();
    if x.len() != params.input_size() || state.cell.len() != h || state.hidden.len() != h {
        return Err(Error::config(format!(
            "lstm_step dimension mismatch: x {}, state {}/{}, layer F={} H={h}",
            x.len(),
            state.cell.len(),
            state.hidden.len(),
            params.input_size()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::input("non-finite LSTM input"));
    }
    let z = params.input_kernel.dot(&x) + params.recurrent_kernel.dot(&state.hidden) + &params.bias;
    let mut cell = Array1::zeros(h);
    let mut hidden = Array1::zeros(h);
    for j in 0..h {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[h + j]);
        let g = z[2 * h + j].tanh();
        let o = sigmoid(z[3 * h + j]);
        cell[j] = f * state.cell[j] + i * g;
        hidden[j] = o * cell[j].tanh();
    }
    let out = hidden.clone();
    Ok((LstmState { cell, hidden }, out))
}

/// A batch of equal-length windows laid out time-major: `steps[t]` is the
/// `[B × F]` matrix of every sequence's features at step `t`.
#[derive(Debug, Clone)]
pub struct SequenceBatch {
    steps: Vec<Array2<f64>>,
}

impl SequenceBatch {
    pub fn from_windows(windows: &[ArrayView2<f64>]) -> Result<Self> {
        let first = windows.first().ok_or_else(|| Error::input("empty batch"))?;
        let (t_len, f) = first.dim();
        if t_len == 0 || f == 0 {
            return Err(Error::input("windows must have at least one step and feature"));
        }
        let mut steps = vec![Array2::zeros((windows.len(), f)); t_len];
        for (b, w) in windows.iter().enumerate() {
            if w.dim() != (t_len, f) {
                return Err(Error::input(format!(
                    "window {b} has shape {:?}, expected {:?}",
                    w.dim(),
                    (t_len, f)
                )));
            }
            for (t, row) in w.rows().into_iter().enumerate() {
                steps[t].row_mut(b).assign(&row);
            }
        }
        if steps.iter().any(|s| !s.iter().all(|v| v.is_finite())) {
            return Err(Error::input("non-finite value in input window"));
        }
        Ok(Self { steps })
    }

    pub fn batch_size(&self) -> usize {
        self.steps[0].nrows()
    }

    pub fn window_len(&self) -> usize {
        self.steps.len()
    }

    pub fn num_features(&self) -> usize {
        self.steps[0].ncols()
    }

    pub(crate) fn step(&self, t: usize) -> &Array2<f64> {
        &self.steps[t]
    }
}

/// Intermediate values kept for backpropagation.
pub(crate) struct ForwardCache {
    /// Activated gates per step, `[B × 4H]` in (i, f, g, o) order.
    pub gates: Vec<Array2<f64>>,
    /// Cell states c_0..c_T.
    pub cells: Vec<Array2<f64>>,
    /// tanh(c_t) for t = 1..T.
    pub cell_tanh: Vec<Array2<f64>>,
    /// Hidden states h_0..h_T.
    pub hiddens: Vec<Array2<f64>>,
    pub dense_pre: Array2<f64>,
    pub dense_out: Array2<f64>,
    pub output_pre: Array2<f64>,
    pub output: Array2<f64>,
}

fn check_batch(params: &ModelParams, batch: &SequenceBatch) -> Result<()> {
    if batch.num_features() != params.input_size() {
        return Err(Error::input(format!(
            "batch has {} features, model expects {}",
            batch.num_features(),
            params.input_size()
        )));
    }
    if batch.window_len() != params.window_len() {
        return Err(Error::input(format!(
            "window has {} steps, model expects {}",
            batch.window_len(),
            params.window_len()
        )));
    }
    Ok(())
}

/// Runs the LSTM over every step; with `keep` the per-step tensors are retained.
fn run_lstm(
    lstm: &LstmLayerParams,
    batch: &SequenceBatch,
    keep: bool,
) -> (Array2<f64>, Option<(Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<Array2<f64>>)>) {
    let b = batch.batch_size();
    let h = lstm.hidden_size();
    let mut cell = Array2::<f64>::zeros((b, h));
    let mut hidden = Array2::<f64>::zeros((b, h));
    let mut gates_all = Vec::new();
    let mut cells = Vec::new();
    let mut tanhs = Vec::new();
    let mut hiddens = Vec::new();
    if keep {
        cells.push(cell.clone());
        hiddens.push(hidden.clone());
    }
    let bias = lstm.bias.view().insert_axis(Axis(0));
    for t in 0..batch.window_len() {
        let mut z = Array2::<f64>::zeros((b, 4 * h));
        z.assign(&bias);
        general_mat_mul(1.0, batch.step(t), &lstm.input_kernel.t(), 1.0, &mut z);
        general_mat_mul(1.0, &hidden, &lstm.recurrent_kernel.t(), 1.0, &mut z);

        let mut c_tanh = Array2::<f64>::zeros((b, h));
        for r in 0..b {
            let zr = z.row_mut(r).into_slice().expect("row-major");
            let (ifz, goz) = zr.split_at_mut(2 * h);
            let (iz, fz) = ifz.split_at_mut(h);
            let (gz, oz) = goz.split_at_mut(h);
            let cr = cell.row_mut(r).into_slice().expect("row-major");
            let hr = hidden.row_mut(r).into_slice().expect("row-major");
            let tr = c_tanh.row_mut(r).into_slice().expect("row-major");
            for j in 0..h {
                let i = sigmoid(iz[j]);
                let f = sigmoid(fz[j]);
                let g = gz[j].tanh();
                let o = sigmoid(oz[j]);
                iz[j] = i;
                fz[j] = f;
                gz[j] = g;
                oz[j] = o;
                cr[j] = f * cr[j] + i * g;
                tr[j] = cr[j].tanh();
                hr[j] = o * tr[j];
            }
        }
        if keep {
            gates_all.push(z);
            cells.push(cell.clone());
            tanhs.push(c_tanh);
            hiddens.push(hidden.clone());
        }
    }
    let cache = keep.then_some((gates_all, cells, tanhs, hiddens));
    (hidden, cache)
}

fn dense(layer: &DenseLayerParams, input: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let mut pre = Array2::<f64>::zeros((input.nrows(), layer.output_size()));
    pre.assign(&layer.bias.view().insert_axis(Axis(0)));
    general_mat_mul(1.0, input, &layer.kernel.t(), 1.0, &mut pre);
    let out = pre.mapv(relu);
    (pre, out)
}

pub(crate) fn forward_cached(params: &ModelParams, batch: &SequenceBatch) -> Result<ForwardCache> {
    check_batch(params, batch)?;
    let (last, cache) = run_lstm(&params.lstm, batch, true);
    let (gates, cells, cell_tanh, hiddens) = cache.expect("kept");
    let (dense_pre, dense_out) = dense(&params.hidden, &last);
    let (output_pre, output) = dense(&params.output, &dense_out);
    Ok(ForwardCache { gates, cells, cell_tanh, hiddens, dense_pre, dense_out, output_pre, output })
}

/// Predictions for a whole batch, `[B × 2]`.
pub fn forward_batch(params: &ModelParams, batch: &SequenceBatch) -> Result<Array2<f64>> {
    check_batch(params, batch)?;
    let (last, _) = run_lstm(&params.lstm, batch, false);
    let (_, dense_out) = dense(&params.hidden, &last);
    Ok(dense(&params.output, &dense_out).1)
}

/// Prediction `(TTLCL, TTLCR)` for one standardized `[T × F]` window.
pub fn forward(params: &ModelParams, window: ArrayView2<f64>) -> Result<[f64; 2]> {
    let out = forward_batch(params, &SequenceBatch::from_windows(&[window])?)?;
    Ok([out[[0, 0]], out[[0, 1]]])
}
