use alloc::vec;
use alloc::vec::Vec;

use libm::{sqrt, tanh};
use rand::Rng;

use crate::data::{InstanceSample, Label};
use crate::rng::RngSeed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScorerKind {
    #[default]
    Linear,
    Mlp1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => tanh(z),
        }
    }

    #[inline]
    fn deriv(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Architecture of a scorer, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    #[cfg_attr(feature = "serde", serde(default = "default_width"))]
    pub hidden_width: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub activation: Activation,
}

#[cfg(feature = "serde")]
fn default_width() -> usize {
    64
}

impl Default for ScorerSpec {
    fn default() -> Self {
        ScorerSpec {
            kind: ScorerKind::Linear,
            hidden_width: 64,
            activation: Activation::Relu,
        }
    }
}

impl ScorerSpec {
    pub fn mlp(hidden_width: usize) -> Self {
        ScorerSpec {
            kind: ScorerKind::Mlp1,
            hidden_width,
            activation: Activation::Relu,
        }
    }

    pub fn build(&self, dim: usize, seed: RngSeed) -> Scorer {
        match self.kind {
            ScorerKind::Linear => Scorer::linear(dim),
            ScorerKind::Mlp1 => Scorer::mlp1(dim, self.hidden_width, self.activation, seed),
        }
    }
}

/// A scoring function `g: R^d -> R` stored as a flat parameter vector.
///
/// Layouts: linear `[w_0 .. w_{d-1}, b]`; one-hidden-layer MLP
/// `[W1 (h x d, row-major), b1 (h), w2 (h), b2]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scorer {
    pub kind: ScorerKind,
    pub dim: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    params: Vec<f64>,
}

impl Scorer {
    pub fn n_params(kind: ScorerKind, dim: usize, hidden_width: usize) -> usize {
        match kind {
            ScorerKind::Linear => dim + 1,
            ScorerKind::Mlp1 => hidden_width * dim + 2 * hidden_width + 1,
        }
    }

    /// Zero-initialized linear scorer.
    pub fn linear(dim: usize) -> Self {
        Scorer {
            kind: ScorerKind::Linear,
            dim,
            hidden_width: 0,
            activation: Activation::Relu,
            params: vec![0.0; dim + 1],
        }
    }

    pub fn linear_from(weights: &[f64], bias: f64) -> Self {
        let mut params = weights.to_vec();
        params.push(bias);
        Scorer {
            kind: ScorerKind::Linear,
            dim: weights.len(),
            hidden_width: 0,
            activation: Activation::Relu,
            params,
        }
    }

    /// Weights uniform on `+-1/sqrt(fan_in)`, zero biases.
    pub fn mlp1(dim: usize, hidden_width: usize, activation: Activation, seed: RngSeed) -> Self {
        let mut rng = seed.rng();
        let mut params = vec![0.0; Self::n_params(ScorerKind::Mlp1, dim, hidden_width)];
        let r1 = 1.0 / sqrt(dim as f64);
        for p in &mut params[..hidden_width * dim] {
            *p = rng.random_range(-r1..r1);
        }
        let r2 = 1.0 / sqrt(hidden_width as f64);
        let w2 = hidden_width * dim + hidden_width;
        for p in &mut params[w2..w2 + hidden_width] {
            *p = rng.random_range(-r2..r2);
        }
        Scorer {
            kind: ScorerKind::Mlp1,
            dim,
            hidden_width,
            activation,
            params,
        }
    }

    /// Rebuilds a scorer from a flat parameter vector, checking its length.
    pub fn from_params(
        kind: ScorerKind,
        dim: usize,
        hidden_width: usize,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = Self::n_params(kind, dim, hidden_width);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: params.len(),
            });
        }
        let hidden_width = if kind == ScorerKind::Linear { 0 } else { hidden_width };
        Ok(Scorer {
            kind,
            dim,
            hidden_width,
            activation,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_parameters(&self) -> usize {
        self.params.len()
    }

    /// Raw score (no clipping) with a dimension check.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: features.len(),
            });
        }
        Ok(self.score(features))
    }

    /// Raw score; the caller guarantees `features.len() == dim`.
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        match self.kind {
            ScorerKind::Linear => dot(&self.params[..d], x) + self.params[d],
            ScorerKind::Mlp1 => {
                let h = self.hidden_width;
                let (w1, rest) = self.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                let mut out = b2[0];
                for k in 0..h {
                    let z = dot(&w1[k * d..(k + 1) * d], x) + b1[k];
                    out += w2[k] * self.activation.apply(z);
                }
                out
            }
        }
    }

    /// Adds `upstream * d score(x) / d params` into `grad`.
    pub fn accumulate_grad(&self, x: &[f64], upstream: f64, grad: &mut [f64]) {
        if upstream == 0.0 {
            return;
        }
        let d = self.dim;
        match self.kind {
            ScorerKind::Linear => {
                for (g, xi) in grad[..d].iter_mut().zip(x) {
                    *g += upstream * xi;
                }
                grad[d] += upstream;
            }
            ScorerKind::Mlp1 => {
                let h = self.hidden_width;
                let (w1, rest) = self.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let w2 = &rest[..h];
                let (gw1, grest) = grad.split_at_mut(h * d);
                let (gb1, grest) = grest.split_at_mut(h);
                let (gw2, gb2) = grest.split_at_mut(h);
                gb2[0] += upstream;
                for k in 0..h {
                    let z = dot(&w1[k * d..(k + 1) * d], x) + b1[k];
                    let a = self.activation.apply(z);
                    gw2[k] += upstream * a;
                    let delta = upstream * w2[k] * self.activation.deriv(z, a);
                    if delta != 0.0 {
                        for (g, xi) in gw1[k * d..(k + 1) * d].iter_mut().zip(x) {
                            *g += delta * xi;
                        }
                        gb1[k] += delta;
                    }
                }
            }
        }
    }

    pub fn scores(&self, samples: &[InstanceSample]) -> Result<Vec<f64>> {
        samples.iter().map(|s| self.forward(&s.features)).collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `+1` where the score exceeds `threshold`, `-1` otherwise (ties go to
/// the negative class).
pub fn predict_labels(scorer: &Scorer, samples: &[InstanceSample], threshold: f64) -> Result<Vec<Label>> {
    samples
        .iter()
        .map(|s| {
            scorer.forward(&s.features).map(|v| {
                if v > threshold {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_linear_scores_zero() {
        let s = Scorer::linear(3);
        assert_eq!(s.forward(&[1.0, -2.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn linear_dot_product() {
        let s = Scorer::linear_from(&[1.0, -1.0], 0.0);
        assert_eq!(s.forward(&[2.0, 0.5]).unwrap(), 1.5);
        assert!(matches!(s.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn mlp_matches_hand_rolled_forward() {
        // d=2, h=2, tanh
        let params = vec![0.5, -0.25, 1.0, 0.75, 0.1, -0.2, 1.5, -2.0, 0.3];
        let s = Scorer::from_params(ScorerKind::Mlp1, 2, 2, Activation::Tanh, params).unwrap();
        let x = [0.4, -1.2];
        let h0 = libm::tanh(0.5 * 0.4 - 0.25 * -1.2 + 0.1);
        let h1 = libm::tanh(1.0 * 0.4 + 0.75 * -1.2 - 0.2);
        let expect = 1.5 * h0 - 2.0 * h1 + 0.3;
        assert!((s.forward(&x).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn parameter_count_matches_architecture() {
        let s = Scorer::mlp1(5, 7, Activation::Relu, RngSeed(1));
        assert_eq!(s.n_parameters(), 7 * 5 + 7 + 7 + 1);
        assert!(Scorer::from_params(ScorerKind::Linear, 3, 0, Activation::Relu, vec![0.0; 3]).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        for act in [Activation::Relu, Activation::Tanh] {
            let s = Scorer::mlp1(3, 5, act, RngSeed(9));
            let x = [0.3, -0.7, 1.1];
            let mut g = vec![0.0; s.n_parameters()];
            s.accumulate_grad(&x, 1.0, &mut g);
            for i in 0..s.n_parameters() {
                let mut p = s.clone();
                p.params_mut()[i] += 1e-6;
                let mut q = s.clone();
                q.params_mut()[i] -= 1e-6;
                let fd = (p.score(&x) - q.score(&x)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-7, "{act:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn predict_sign_rule_and_ties() {
        let samples: Vec<InstanceSample> = [0.5, -0.2, 0.0]
            .iter()
            .map(|&v| InstanceSample::unlabeled(vec![v]))
            .collect();
        let s = Scorer::linear_from(&[1.0], 0.0);
        assert_eq!(
            predict_labels(&s, &samples, 0.0).unwrap(),
            vec![Label::Positive, Label::Negative, Label::Negative]
        );
        assert!(predict_labels(&s, &samples, 1e300)
            .unwrap()
            .iter()
            .all(|l| *l == Label::Negative));
    }
}
