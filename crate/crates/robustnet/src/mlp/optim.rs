//! Gradient-ascent optimizer step.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Gradients, MlpModel, MomentState};
use crate::error::{Error, Result};

/// Update rule for [`MlpModel::step`]. Both variants take an ascent step
/// (maximization); the percentile objective is maximized directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OptimizerConfig {
    Sgd {
        learning_rate: f64,
    },
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { learning_rate } => learning_rate,
            OptimizerConfig::Adam { learning_rate, .. } => learning_rate,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adam(1e-3)
    }
}

impl MlpModel {
    /// Apply one ascent step. A non-finite gradient aborts the step and
    /// leaves the parameters untouched.
    pub fn step(&mut self, gradients: &Gradients, config: &OptimizerConfig) -> Result<()> {
        if gradients.d_weights.len() != self.num_layers() {
            return Err(Error::Config("gradient layer count mismatch".into()));
        }
        for (l, (dw, db)) in gradients
            .d_weights
            .iter()
            .zip(&gradients.d_biases)
            .enumerate()
        {
            if dw.dim() != self.weights()[l].dim() || db.dim() != self.biases()[l].dim() {
                return Err(Error::Config(format!("gradient shape mismatch at layer {l}")));
            }
        }
        if !gradients.is_finite() {
            let bad = gradients
                .d_weights
                .iter()
                .position(|w| !w.iter().all(|v| v.is_finite()))
                .or_else(|| {
                    gradients
                        .d_biases
                        .iter()
                        .position(|b| !b.iter().all(|v| v.is_finite()))
                });
            return Err(Error::Numerical(format!(
                "non-finite gradient (first bad tensor: layer {bad:?}); step aborted"
            )));
        }

        match *config {
            OptimizerConfig::Sgd { learning_rate } => {
                for (w, dw) in self.weights_mut().iter_mut().zip(&gradients.d_weights) {
                    w.scaled_add(learning_rate, dw);
                }
                for (b, db) in self.biases_mut().iter_mut().zip(&gradients.d_biases) {
                    b.scaled_add(learning_rate, db);
                }
            }
            OptimizerConfig::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                if self.opt_state.is_none() {
                    self.opt_state = Some(MomentState {
                        m_weights: gradients
                            .d_weights
                            .iter()
                            .map(|w| Array2::zeros(w.raw_dim()))
                            .collect(),
                        v_weights: gradients
                            .d_weights
                            .iter()
                            .map(|w| Array2::zeros(w.raw_dim()))
                            .collect(),
                        m_biases: gradients
                            .d_biases
                            .iter()
                            .map(|b| Array1::zeros(b.raw_dim()))
                            .collect(),
                        v_biases: gradients
                            .d_biases
                            .iter()
                            .map(|b| Array1::zeros(b.raw_dim()))
                            .collect(),
                        step_count: 0,
                    });
                }
                let mut state = self.opt_state.take().unwrap();
                state.step_count += 1;
                let t = state.step_count as i32;
                let bias1 = 1.0 - beta1.powi(t);
                let bias2 = 1.0 - beta2.powi(t);
                for l in 0..gradients.d_weights.len() {
                    adam_update(
                        self.weights_mut()[l].as_slice_mut().unwrap(),
                        state.m_weights[l].as_slice_mut().unwrap(),
                        state.v_weights[l].as_slice_mut().unwrap(),
                        gradients.d_weights[l].as_slice().unwrap(),
                        learning_rate,
                        beta1,
                        beta2,
                        epsilon,
                        bias1,
                        bias2,
                    );
                    adam_update(
                        self.biases_mut()[l].as_slice_mut().unwrap(),
                        state.m_biases[l].as_slice_mut().unwrap(),
                        state.v_biases[l].as_slice_mut().unwrap(),
                        gradients.d_biases[l].as_slice().unwrap(),
                        learning_rate,
                        beta1,
                        beta2,
                        epsilon,
                        bias1,
                        bias2,
                    );
                }
                self.opt_state = Some(state);
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    grad: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] += lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}
