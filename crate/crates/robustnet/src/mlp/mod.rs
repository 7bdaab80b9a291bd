//! Dense feed-forward network with reverse-mode gradient propagation.
//!
//! The model is a stack of affine layers with ReLU hidden activations and a
//! softmax or sigmoid output head. Forward passes record a tape of pre- and
//! post-activations; [`MlpModel::backward`] contracts a supplied output
//! gradient through the tape into per-parameter gradients. Single-sample and
//! batched paths are provided; the batched path is what training uses.
//!
//! A model instance is single-writer: `forward`/`backward`/`step` run
//! sequentially on one instance, while read-only [`MlpModel::infer`] may run
//! concurrently from many threads.

mod checkpoint;
mod optim;

pub use optim::OptimizerConfig;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Output head nonlinearity; encodes the feasible set of the allocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    /// Entries nonnegative and summing to 1 (total-power simplex).
    Softmax,
    /// Entries in [0, 1] (per-link power box).
    Sigmoid,
}

impl OutputActivation {
    pub fn name(self) -> &'static str {
        match self {
            OutputActivation::Softmax => "softmax",
            OutputActivation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(OutputActivation::Softmax),
            "sigmoid" => Ok(OutputActivation::Sigmoid),
            other => Err(Error::Format(format!("unknown output activation {other:?}"))),
        }
    }
}

/// Adam moment accumulators, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub(crate) struct MomentState {
    pub m_weights: Vec<Array2<f64>>,
    pub v_weights: Vec<Array2<f64>>,
    pub m_biases: Vec<Array1<f64>>,
    pub v_biases: Vec<Array1<f64>>,
    pub step_count: u64,
}

/// Dense feed-forward model; houses the parameters the trainer optimizes.
#[derive(Clone, Debug)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    /// Per-layer weight matrices, shape (out, in).
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    output_activation: OutputActivation,
    pub(crate) opt_state: Option<MomentState>,
}

/// Cached activations from one single-sample forward pass.
#[derive(Clone, Debug)]
pub struct GradientTape {
    input: Array1<f64>,
    pre: Vec<Array1<f64>>,
    post: Vec<Array1<f64>>,
}

/// Cached activations from one batched forward pass (rows are samples).
#[derive(Clone, Debug)]
pub struct BatchTape {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

/// Per-parameter gradients, same shapes as the model parameters.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            d_weights: model
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            d_biases: model
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            *a += b;
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.d_weights {
            *a *= factor;
        }
        for a in &mut self.d_biases {
            *a *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights
            .iter()
            .all(|w| w.iter().all(|v| v.is_finite()))
            && self.d_biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// ReLU subgradient; the kink at exactly 0 is taken as 0.
fn relu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn softmax_inplace(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl MlpModel {
    /// Create a model with He-style uniform weights (`+-sqrt(6 / fan_in)`)
    /// and zero biases.
    pub fn new(
        layer_dims: &[usize],
        output_activation: OutputActivation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Config(
                "layer_dims needs at least input and output widths".into(),
            ));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-limit..limit));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            output_activation,
            opt_state: None,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    /// True when both models carry bit-identical parameters.
    pub fn same_parameters(&self, other: &MlpModel) -> bool {
        self.layer_dims == other.layer_dims
            && self.weights == other.weights
            && self.biases == other.biases
    }

    fn check_input_dim(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Config(format!(
                "input length {len} does not match model input width {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Read-only forward pass; safe to call concurrently on a frozen model.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input_dim(input.len())?;
        let mut a = input.to_vec();
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = vec![0.0; w.nrows()];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = w.row(o);
                let mut acc = b[o];
                for (&wv, &av) in row.iter().zip(&a) {
                    acc += wv * av;
                }
                *zo = acc;
            }
            if l < last {
                for v in &mut z {
                    *v = relu(*v);
                }
            } else {
                match self.output_activation {
                    OutputActivation::Softmax => softmax_inplace(&mut z),
                    OutputActivation::Sigmoid => {
                        for v in &mut z {
                            *v = sigmoid(*v);
                        }
                    }
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass recording a tape for [`MlpModel::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, GradientTape)> {
        self.check_input_dim(input.len())?;
        let input = Array1::from_vec(input.to_vec());
        let mut pre = Vec::with_capacity(self.num_layers());
        let mut post = Vec::with_capacity(self.num_layers());
        let mut a = input.clone();
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w.dot(&a) + b;
            let mut act = z.clone();
            if l < last {
                act.mapv_inplace(relu);
            } else {
                match self.output_activation {
                    OutputActivation::Softmax => {
                        softmax_inplace(act.as_slice_mut().unwrap());
                    }
                    OutputActivation::Sigmoid => act.mapv_inplace(sigmoid),
                }
            }
            pre.push(z);
            post.push(act.clone());
            a = act;
        }
        let output = a.to_vec();
        Ok((output, GradientTape { input, pre, post }))
    }

    /// Contract `output_gradient` (du/dx at the model output) through the
    /// tape; returns du/dTheta for every weight and bias.
    pub fn backward(&self, tape: &GradientTape, output_gradient: &[f64]) -> Result<Gradients> {
        if tape.pre.len() != self.num_layers() || tape.input.len() != self.input_dim() {
            return Err(Error::Usage(
                "gradient tape does not match this model".into(),
            ));
        }
        if output_gradient.len() != self.output_dim() {
            return Err(Error::Config(format!(
                "output gradient length {} does not match output width {}",
                output_gradient.len(),
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let last = self.num_layers() - 1;
        let mut upstream = Array1::from_vec(output_gradient.to_vec());
        for l in (0..self.num_layers()).rev() {
            let y = &tape.post[l];
            let dz = if l == last {
                output_delta(self.output_activation, y, &upstream)
            } else {
                let mut dz = upstream.clone();
                for (d, &z) in dz.iter_mut().zip(tape.pre[l].iter()) {
                    *d *= relu_grad(z);
                }
                dz
            };
            let a_prev = if l == 0 { &tape.input } else { &tape.post[l - 1] };
            // dW[o][i] = dz[o] * a_prev[i]
            for (o, &d) in dz.iter().enumerate() {
                let mut row = grads.d_weights[l].row_mut(o);
                for (g, &ap) in row.iter_mut().zip(a_prev.iter()) {
                    *g = d * ap;
                }
            }
            grads.d_biases[l].assign(&dz);
            if l > 0 {
                upstream = self.weights[l].t().dot(&dz);
            }
        }
        Ok(grads)
    }

    /// Batched forward pass; `inputs` rows are samples.
    pub fn forward_batch(&self, inputs: &Array2<f64>) -> Result<(Array2<f64>, BatchTape)> {
        self.check_input_dim(inputs.ncols())?;
        let mut pre = Vec::with_capacity(self.num_layers());
        let mut post = Vec::with_capacity(self.num_layers());
        let mut a = inputs.clone();
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            for mut row in z.rows_mut() {
                row += b;
            }
            let mut act = z.clone();
            if l < last {
                act.mapv_inplace(relu);
            } else {
                match self.output_activation {
                    OutputActivation::Softmax => {
                        for mut row in act.rows_mut() {
                            softmax_inplace(row.as_slice_mut().unwrap());
                        }
                    }
                    OutputActivation::Sigmoid => act.mapv_inplace(sigmoid),
                }
            }
            pre.push(z);
            post.push(act.clone());
            a = act;
        }
        Ok((
            a,
            BatchTape {
                input: inputs.clone(),
                pre,
                post,
            },
        ))
    }

    /// Batched backward pass. `output_gradients` rows are per-sample du/dx;
    /// the returned gradients are summed over the batch.
    pub fn backward_batch(
        &self,
        tape: &BatchTape,
        output_gradients: &Array2<f64>,
    ) -> Result<Gradients> {
        if tape.pre.len() != self.num_layers() || tape.input.ncols() != self.input_dim() {
            return Err(Error::Usage(
                "gradient tape does not match this model".into(),
            ));
        }
        if output_gradients.ncols() != self.output_dim()
            || output_gradients.nrows() != tape.input.nrows()
        {
            return Err(Error::Config(format!(
                "output gradient shape {:?} does not match batch {} x {}",
                output_gradients.dim(),
                tape.input.nrows(),
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let last = self.num_layers() - 1;
        let mut upstream = output_gradients.clone();
        for l in (0..self.num_layers()).rev() {
            let dz = if l == last {
                let y = &tape.post[l];
                let mut dz = Array2::zeros(upstream.raw_dim());
                for (mut dz_row, (y_row, g_row)) in dz
                    .rows_mut()
                    .into_iter()
                    .zip(y.rows().into_iter().zip(upstream.rows()))
                {
                    let delta = output_delta(
                        self.output_activation,
                        &y_row.to_owned(),
                        &g_row.to_owned(),
                    );
                    dz_row.assign(&delta);
                }
                dz
            } else {
                let mut dz = upstream.clone();
                for (d, &z) in dz.iter_mut().zip(tape.pre[l].iter()) {
                    *d *= relu_grad(z);
                }
                dz
            };
            let a_prev = if l == 0 { &tape.input } else { &tape.post[l - 1] };
            grads.d_weights[l] = dz.t().dot(a_prev);
            grads.d_biases[l] = dz.sum_axis(Axis(0));
            if l > 0 {
                upstream = dz.dot(&self.weights[l]);
            }
        }
        Ok(grads)
    }
}

/// dz at the output layer for a head activation, given y = act(z) and du/dy.
fn output_delta(
    activation: OutputActivation,
    y: &Array1<f64>,
    upstream: &Array1<f64>,
) -> Array1<f64> {
    match activation {
        OutputActivation::Softmax => {
            // Jacobian diag(y) - y y^T applied to the upstream gradient.
            let dot = y.dot(upstream);
            let mut dz = Array1::zeros(y.raw_dim());
            for ((d, &yi), &gi) in dz.iter_mut().zip(y.iter()).zip(upstream.iter()) {
                *d = yi * (gi - dot);
            }
            dz
        }
        OutputActivation::Sigmoid => {
            let mut dz = Array1::zeros(y.raw_dim());
            for ((d, &yi), &gi) in dz.iter_mut().zip(y.iter()).zip(upstream.iter()) {
                *d = gi * yi * (1.0 - yi);
            }
            dz
        }
    }
}

#[cfg(test)]
mod tests;
