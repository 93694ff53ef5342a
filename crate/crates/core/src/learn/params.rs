use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use crate::error::{Error, Result};

/// Named, ordered model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    /// Glorot-uniform initialized weight.
    pub fn glorot(&mut self, name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> usize {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
        self.push(name, Matrix { rows, cols, data })
    }

    pub fn uniform(&mut self, name: &str, rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> usize {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        self.push(name, Matrix { rows, cols, data })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.values[i])
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Matrix> = params.values.iter().map(|p| Matrix::zeros(p.rows, p.cols)).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// First and second moment estimates, in parameter order.
    pub fn moments(&self) -> (&[Matrix], &[Matrix]) {
        (&self.m, &self.v)
    }

    pub fn set_moments(&mut self, m: Vec<Matrix>, v: Vec<Matrix>, step: u64) {
        self.m = m;
        self.v = v;
        self.step = step;
    }

    pub fn update(&mut self, params: &mut ParamSet, grads: &[Matrix]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                op: "adam",
                detail: format!("{} gradients for {} parameters", grads.len(), params.len()),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient {
                    param: params.names[i].clone(),
                });
            }
            if g.shape() != params.values[i].shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam",
                    detail: format!("gradient {:?} for {}", g.shape(), params.names[i]),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let p = &mut params.values[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for k in 0..g.data.len() {
                let gk = g.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * gk;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m.data[k] / c1;
                let vh = v.data[k] / c2;
                p.data[k] -= self.lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * p.data[k]);
            }
        }
        Ok(())
    }
}
