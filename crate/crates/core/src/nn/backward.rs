use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::forward::{forward_cached, SequenceBatch};
use super::params::ModelParams;
use super::NUM_OUTPUTS;
use crate::{Error, Result};

/// d(MSE)/dθ for every trainable tensor, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub lstm_input_kernel: Array2<f64>,
    pub lstm_recurrent_kernel: Array2<f64>,
    pub lstm_bias: Array1<f64>,
    pub hidden_kernel: Array2<f64>,
    pub hidden_bias: Array1<f64>,
    pub output_kernel: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            lstm_input_kernel: Array2::zeros(params.lstm.input_kernel.dim()),
            lstm_recurrent_kernel: Array2::zeros(params.lstm.recurrent_kernel.dim()),
            lstm_bias: Array1::zeros(params.lstm.bias.len()),
            hidden_kernel: Array2::zeros(params.hidden.kernel.dim()),
            hidden_bias: Array1::zeros(params.hidden.bias.len()),
            output_kernel: Array2::zeros(params.output.kernel.dim()),
            output_bias: Array1::zeros(params.output.bias.len()),
        }
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors(&self) -> [&[f64]; 7] {
        [
            self.lstm_input_kernel.as_slice().expect("contiguous"),
            self.lstm_recurrent_kernel.as_slice().expect("contiguous"),
            self.lstm_bias.as_slice().expect("contiguous"),
            self.hidden_kernel.as_slice().expect("contiguous"),
            self.hidden_bias.as_slice().expect("contiguous"),
            self.output_kernel.as_slice().expect("contiguous"),
            self.output_bias.as_slice().expect("contiguous"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 7] {
        [
            self.lstm_input_kernel.as_slice_mut().expect("contiguous"),
            self.lstm_recurrent_kernel.as_slice_mut().expect("contiguous"),
            self.lstm_bias.as_slice_mut().expect("contiguous"),
            self.hidden_kernel.as_slice_mut().expect("contiguous"),
            self.hidden_bias.as_slice_mut().expect("contiguous"),
            self.output_kernel.as_slice_mut().expect("contiguous"),
            self.output_bias.as_slice_mut().expect("contiguous"),
        ]
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Loss and gradients for windows plus `(TTLCL, TTLCR)` targets.
pub fn backward(
    params: &ModelParams,
    windows: &[ArrayView2<f64>],
    targets: &[[f64; 2]],
) -> Result<(f64, Gradients)> {
    let batch = SequenceBatch::from_windows(windows)?;
    backward_batch(params, &batch, targets)
}

/// Same as [`backward`] on a pre-packed batch.
pub fn backward_batch(
    params: &ModelParams,
    batch: &SequenceBatch,
    targets: &[[f64; 2]],
) -> Result<(f64, Gradients)> {
    let n = batch.batch_size();
    if targets.len() != n {
        return Err(Error::input(format!("{} targets for {n} windows", targets.len())));
    }
    let cache = forward_cached(params, batch)?;
    let h = params.lstm.hidden_size();
    let mut grads = Gradients::zeros_like(params);

    // Output layer. loss = Σ (y - t)² / (2B)
    let denom = (n * NUM_OUTPUTS) as f64;
    let mut loss = 0.0;
    let mut d_out_pre = Array2::<f64>::zeros((n, NUM_OUTPUTS));
    for b in 0..n {
        for c in 0..NUM_OUTPUTS {
            let r = cache.output[[b, c]] - targets[b][c];
            loss += r * r;
            if cache.output_pre[[b, c]] > 0.0 {
                d_out_pre[[b, c]] = 2.0 * r / denom;
            }
        }
    }
    loss /= denom;

    general_mat_mul(1.0, &d_out_pre.t(), &cache.dense_out, 0.0, &mut grads.output_kernel);
    grads.output_bias = d_out_pre.sum_axis(Axis(0));

    let mut d_dense = d_out_pre.dot(&params.output.kernel);
    d_dense.zip_mut_with(&cache.dense_pre, |d, &pre| {
        if pre <= 0.0 {
            *d = 0.0;
        }
    });
    let h_last = &cache.hiddens[batch.window_len()];
    general_mat_mul(1.0, &d_dense.t(), h_last, 0.0, &mut grads.hidden_kernel);
    grads.hidden_bias = d_dense.sum_axis(Axis(0));

    // Backpropagation through time.
    let mut dh = d_dense.dot(&params.hidden.kernel);
    let mut dc = Array2::<f64>::zeros((n, h));
    let mut dz = Array2::<f64>::zeros((n, 4 * h));
    for t in (0..batch.window_len()).rev() {
        let gates = &cache.gates[t];
        let c_prev = &cache.cells[t];
        let c_tanh = &cache.cell_tanh[t];
        for b in 0..n {
            let g_row = gates.row(b);
            let g_row = g_row.as_slice().expect("row-major");
            let dz_row = dz.row_mut(b).into_slice().expect("row-major");
            let dc_row = dc.row_mut(b).into_slice().expect("row-major");
            let dh_row = dh.row(b);
            let dh_row = dh_row.as_slice().expect("row-major");
            let cp_row = c_prev.row(b);
            let cp_row = cp_row.as_slice().expect("row-major");
            let tc_row = c_tanh.row(b);
            let tc_row = tc_row.as_slice().expect("row-major");
            for j in 0..h {
                let i = g_row[j];
                let f = g_row[h + j];
                let g = g_row[2 * h + j];
                let o = g_row[3 * h + j];
                let tc = tc_row[j];
                let d_o = dh_row[j] * tc;
                let d_c = dc_row[j] + dh_row[j] * o * (1.0 - tc * tc);
                dz_row[j] = d_c * g * i * (1.0 - i);
                dz_row[h + j] = d_c * cp_row[j] * f * (1.0 - f);
                dz_row[2 * h + j] = d_c * i * (1.0 - g * g);
                dz_row[3 * h + j] = d_o * o * (1.0 - o);
                dc_row[j] = d_c * f;
            }
        }
        general_mat_mul(1.0, &dz.t(), batch.step(t), 1.0, &mut grads.lstm_input_kernel);
        general_mat_mul(1.0, &dz.t(), &cache.hiddens[t], 1.0, &mut grads.lstm_recurrent_kernel);
        grads.lstm_bias += &dz.sum_axis(Axis(0));
        if t > 0 {
            general_mat_mul(1.0, &dz, &params.lstm.recurrent_kernel, 0.0, &mut dh);
        }
    }
    Ok((loss, grads))
}
