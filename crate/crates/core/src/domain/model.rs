use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Architecture of a [`ScoreModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `f(x) = wᵀx + b`.
    Linear,
    /// One tanh hidden layer of the given width.
    Mlp1 { hidden: usize },
}

impl ModelKind {
    pub fn num_weights(&self, dim: usize) -> usize {
        match *self {
            ModelKind::Linear => dim + 1,
            ModelKind::Mlp1 { hidden } => dim * hidden + hidden + hidden + 1,
        }
    }
}

/// A real-valued logit `f_w(x)`; `σ(f_w(x))` is the modelled `P(Ŷ = 1 | x)`.
///
/// MLP weight layout: `W1` (hidden × dim, row-major), `b1`, `w2`, `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    kind: ModelKind,
    dim: usize,
    weights: Vec<f64>,
}

impl ScoreModel {
    pub fn new(kind: ModelKind, dim: usize, weights: Vec<f64>) -> Result<Self> {
        let expected = kind.num_weights(dim);
        if weights.len() != expected {
            return Err(invalid(format!(
                "{kind:?} over {dim} features needs {expected} weights, got {}",
                weights.len()
            )));
        }
        if let ModelKind::Mlp1 { hidden: 0 } = kind {
            return Err(invalid("hidden width must be positive"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("non-finite weight"));
        }
        Ok(Self { kind, dim, weights })
    }

    /// Zero weights for the linear model; seeded Glorot-uniform hidden layer
    /// (zero output layer) for the MLP.
    pub fn init(kind: ModelKind, dim: usize, seed: u64) -> Self {
        let n = kind.num_weights(dim);
        let mut weights = vec![0.0; n];
        if let ModelKind::Mlp1 { hidden } = kind {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = (6.0 / (dim + hidden) as f64).sqrt();
            for w in weights.iter_mut().take(dim * hidden) {
                *w = rng.random_range(-a..a);
            }
            let a2 = (6.0 / (hidden + 1) as f64).sqrt();
            let off = dim * hidden + hidden;
            for w in weights.iter_mut().skip(off).take(hidden) {
                *w = rng.random_range(-a2..a2) * 0.1;
            }
        }
        Self { kind, dim, weights }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn num_weights(&self) -> usize {
        self.weights.len()
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(invalid("weight vector length changed"));
        }
        self.weights = weights;
        Ok(())
    }

    /// `w ← w − step · grad`.
    pub fn descend(&mut self, grad: &[f64], step: f64) {
        for (w, g) in self.weights.iter_mut().zip(grad) {
            *w -= step * g;
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match self.kind {
            ModelKind::Linear => {
                let (w, b) = self.weights.split_at(self.dim);
                dot(w, x) + b[0]
            }
            ModelKind::Mlp1 { hidden } => {
                let (w1, rest) = self.weights.split_at(self.dim * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut out = b2[0];
                for j in 0..hidden {
                    let a = (dot(&w1[j * self.dim..(j + 1) * self.dim], x) + b1[j]).tanh();
                    out += w2[j] * a;
                }
                out
            }
        }
    }

    /// Adds `scale · ∂f(x)/∂w` into `grad` and returns `f(x)`.
    pub fn accumulate_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        match self.kind {
            ModelKind::Linear => {
                let (w, b) = self.weights.split_at(self.dim);
                let f = dot(w, x) + b[0];
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += scale * xi;
                }
                grad[self.dim] += scale;
                f
            }
            ModelKind::Mlp1 { hidden } => {
                let d = self.dim;
                let (w1, rest) = self.weights.split_at(d * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut out = b2[0];
                let off_b1 = d * hidden;
                let off_w2 = off_b1 + hidden;
                for j in 0..hidden {
                    let a = (dot(&w1[j * d..(j + 1) * d], x) + b1[j]).tanh();
                    out += w2[j] * a;
                    grad[off_w2 + j] += scale * a;
                    let back = scale * w2[j] * (1.0 - a * a);
                    for (g, xi) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += back * xi;
                    }
                    grad[off_b1 + j] += back;
                }
                grad[off_w2 + hidden] += scale;
                out
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
