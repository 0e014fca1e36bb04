use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state for one parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, t: u64, m: Vec<f64>, v: Vec<f64> },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                t: 0,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
            },
        }
    }

    /// In-place descent step.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam { lr, t, m, v } => {
                *t += 1;
                let b1t = 1.0 - libm::pow(ADAM_BETA1, *t as f64);
                let b2t = 1.0 - libm::pow(ADAM_BETA2, *t as f64);
                for i in 0..params.len() {
                    let g = grad[i];
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let mh = m[i] / b1t;
                    let vh = v[i] / b2t;
                    params[i] -= *lr * mh / (sqrt(vh) + ADAM_EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut o = Optimizer::new(OptimizerKind::Sgd, 0.1, 2);
        let mut p = [1.0, -1.0];
        o.step(&mut p, &[2.0, -4.0]);
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] + 0.6).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // bias-corrected first step is lr * g / (|g| + eps)
        let mut o = Optimizer::new(OptimizerKind::Adam, 0.01, 2);
        let mut p = [0.0, 0.0];
        o.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] + 0.01).abs() < 1e-9 && (p[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut o = Optimizer::new(OptimizerKind::Adam, 0.05, 1);
        let mut p = [5.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.5)];
            o.step(&mut p, &g);
        }
        assert!((p[0] - 1.5).abs() < 1e-3);
    }
}
