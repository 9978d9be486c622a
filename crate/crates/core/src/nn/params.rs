use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::serde_arrays;
use super::NUM_OUTPUTS;
use crate::dataset::FeatureScaler;
use crate::pipeline::Hyperparams;
use crate::rng;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// LSTM weights. Gate blocks are stacked row-wise in the order
/// input, forget, candidate, output; each block has `hidden_size` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    /// `[4H × F]`
    #[serde(with = "serde_arrays::matrix")]
    pub input_kernel: Array2<f64>,
    /// `[4H × H]`
    #[serde(with = "serde_arrays::matrix")]
    pub recurrent_kernel: Array2<f64>,
    /// `[4H]`
    #[serde(with = "serde_arrays::vector")]
    pub bias: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_kernel: Array2::zeros((4 * hidden_size, input_size)),
            recurrent_kernel: Array2::zeros((4 * hidden_size, hidden_size)),
            bias: Array1::zeros(4 * hidden_size),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent_kernel.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.input_kernel.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size();
        if h == 0 || self.input_size() == 0 {
            return Err(Error::config("LSTM layer has a zero dimension"));
        }
        if self.input_kernel.nrows() != 4 * h
            || self.recurrent_kernel.nrows() != 4 * h
            || self.bias.len() != 4 * h
        {
            return Err(Error::config(format!(
                "LSTM shapes inconsistent: input {:?}, recurrent {:?}, bias {}",
                self.input_kernel.dim(),
                self.recurrent_kernel.dim(),
                self.bias.len()
            )));
        }
        check_finite("lstm", [&self.input_kernel, &self.recurrent_kernel].into_iter(), &self.bias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayerParams {
    /// `[out × in]`
    #[serde(with = "serde_arrays::matrix")]
    pub kernel: Array2<f64>,
    #[serde(with = "serde_arrays::vector")]
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayerParams {
    pub fn zeros(input_size: usize, output_size: usize) -> Self {
        Self {
            kernel: Array2::zeros((output_size, input_size)),
            bias: Array1::zeros(output_size),
            activation: Activation::Relu,
        }
    }

    pub fn input_size(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.bias.len() != self.output_size() || self.output_size() == 0 || self.input_size() == 0 {
            return Err(Error::config(format!(
                "{name} layer shapes inconsistent: kernel {:?}, bias {}",
                self.kernel.dim(),
                self.bias.len()
            )));
        }
        check_finite(name, std::iter::once(&self.kernel), &self.bias)
    }
}

fn check_finite<'a>(
    name: &str,
    mats: impl Iterator<Item = &'a Array2<f64>>,
    bias: &Array1<f64>,
) -> Result<()> {
    let mut ok = bias.iter().all(|v| v.is_finite());
    for m in mats {
        ok &= m.iter().all(|v| v.is_finite());
    }
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("{name} layer holds non-finite weights")))
    }
}

/// A complete model: weights, the feature scaler fitted on its training data
/// and the hyperparameters it was built with. This is what gets persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub format_version: u32,
    pub hyper: Hyperparams,
    pub scaler: FeatureScaler,
    pub lstm: LstmLayerParams,
    pub hidden: DenseLayerParams,
    pub output: DenseLayerParams,
}

impl ModelParams {
    /// All-zero weights with the shapes implied by `hyper` and `input_size`.
    pub fn zeros(hyper: Hyperparams, input_size: usize, scaler: FeatureScaler) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            hyper,
            scaler,
            lstm: LstmLayerParams::zeros(input_size, hyper.n_lstm),
            hidden: DenseLayerParams::zeros(hyper.n_lstm, hyper.n_dense),
            output: DenseLayerParams::zeros(hyper.n_dense, NUM_OUTPUTS),
        }
    }

    /// Keras-default initialization: Glorot-uniform input and dense kernels,
    /// orthogonal recurrent kernel, zero biases except a forget-gate bias of 1.
    pub fn init(hyper: Hyperparams, input_size: usize, scaler: FeatureScaler, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let mut rng = rng::rng_from(seed, &[rng::TAG_INIT]);
        let mut m = Self::zeros(hyper, input_size, scaler);
        let h = hyper.n_lstm;

        // Glorot fans follow the Keras [in × out] kernel layout.
        glorot_uniform(&mut m.lstm.input_kernel, input_size, 4 * h, &mut rng);
        m.lstm.recurrent_kernel = orthogonal(4 * h, h, &mut rng);
        m.lstm.bias.slice_mut(s![h..2 * h]).fill(1.0);
        glorot_uniform(&mut m.hidden.kernel, h, hyper.n_dense, &mut rng);
        glorot_uniform(&mut m.output.kernel, hyper.n_dense, NUM_OUTPUTS, &mut rng);
        m.validate()?;
        Ok(m)
    }

    pub fn input_size(&self) -> usize {
        self.lstm.input_size()
    }

    pub fn window_len(&self) -> usize {
        self.hyper.window_len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::config(format!(
                "unsupported model format_version {}",
                self.format_version
            )));
        }
        self.lstm.validate()?;
        self.hidden.validate("hidden")?;
        self.output.validate("output")?;
        let h = self.lstm.hidden_size();
        if self.hidden.input_size() != h {
            return Err(Error::config(format!(
                "hidden layer expects {} inputs, LSTM yields {h}",
                self.hidden.input_size()
            )));
        }
        if self.output.input_size() != self.hidden.output_size() {
            return Err(Error::config("output layer does not chain onto hidden layer"));
        }
        if self.output.output_size() != NUM_OUTPUTS {
            return Err(Error::config(format!(
                "output layer must have {NUM_OUTPUTS} units, found {}",
                self.output.output_size()
            )));
        }
        if h != self.hyper.n_lstm || self.hidden.output_size() != self.hyper.n_dense {
            return Err(Error::config("layer sizes disagree with hyperparameters"));
        }
        if self.scaler.dim() != self.input_size() {
            return Err(Error::config(format!(
                "scaler covers {} features, model expects {}",
                self.scaler.dim(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Trainable tensors in a fixed order, matching [`super::Gradients::tensors`].
    pub fn tensors(&self) -> [&[f64]; 7] {
        [
            as_slice(&self.lstm.input_kernel),
            as_slice(&self.lstm.recurrent_kernel),
            self.lstm.bias.as_slice().expect("contiguous"),
            as_slice(&self.hidden.kernel),
            self.hidden.bias.as_slice().expect("contiguous"),
            as_slice(&self.output.kernel),
            self.output.bias.as_slice().expect("contiguous"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 7] {
        [
            self.lstm.input_kernel.as_slice_mut().expect("contiguous"),
            self.lstm.recurrent_kernel.as_slice_mut().expect("contiguous"),
            self.lstm.bias.as_slice_mut().expect("contiguous"),
            self.hidden.kernel.as_slice_mut().expect("contiguous"),
            self.hidden.bias.as_slice_mut().expect("contiguous"),
            self.output.kernel.as_slice_mut().expect("contiguous"),
            self.output.bias.as_slice_mut().expect("contiguous"),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn as_slice(m: &Array2<f64>) -> &[f64] {
    m.as_slice().expect("contiguous")
}

fn glorot_uniform(m: &mut Array2<f64>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    m.mapv_inplace(|_| dist.sample(rng));
}

/// `rows × cols` matrix (rows ≥ cols) with orthonormal columns, from modified
/// Gram–Schmidt on a Gaussian matrix.
fn orthogonal(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    debug_assert!(rows >= cols);
    let mut q = Array2::<f64>::zeros((rows, cols));
    q.mapv_inplace(|_| StandardNormal.sample(rng));
    for j in 0..cols {
        for i in 0..j {
            let (qi, mut qj) = q.multi_slice_mut((s![.., i], s![.., j]));
            let proj = qi.dot(&qj);
            qj.scaled_add(-proj, &qi);
        }
        let mut col = q.column_mut(j);
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    q
}
