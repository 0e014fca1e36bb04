//! Margin-form surrogate losses. `phi(t) = l(t, +1)` and `psi(t) = l(t, -1)
//! = phi(-t)`. Scores are clipped to `[-SCORE_CLIP, SCORE_CLIP]` before any
//! loss evaluation, which bounds every loss on the working range.

use crate::special::{log1p_exp, sigmoid};
use crate::{Error, Result};

/// Score clipping radius applied before loss evaluation.
pub const SCORE_CLIP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    /// `ln(1 + e^{-t})`
    Logistic,
    /// `1 / (1 + e^{t})`
    Sigmoid,
    /// `max(0, 1 - t)^2`
    SquaredHinge,
}

/// A surrogate loss together with its Lipschitz constant and upper bound on
/// the clipped score range. `bound_b` doubles as `C_l = max(phi(C), psi(C))`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossSpec {
    pub kind: LossKind,
    pub lipschitz_rho: f64,
    pub bound_b: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec::new(LossKind::Logistic)
    }
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        let c = SCORE_CLIP;
        let (lipschitz_rho, bound_b) = match kind {
            LossKind::Logistic => (1.0, log1p_exp(c)),
            LossKind::Sigmoid => (0.25, 1.0),
            LossKind::SquaredHinge => (2.0 * (1.0 + c), (1.0 + c) * (1.0 + c)),
        };
        LossSpec {
            kind,
            lipschitz_rho,
            bound_b,
        }
    }

    pub fn logistic() -> Self {
        Self::new(LossKind::Logistic)
    }

    pub fn sigmoid() -> Self {
        Self::new(LossKind::Sigmoid)
    }

    /// `phi(clip(score))`, the loss for predicting `score` on a positive.
    #[inline]
    pub fn pos(&self, score: f64) -> f64 {
        raw_value(self.kind, clip(score))
    }

    /// `psi(clip(score)) = phi(-clip(score))`.
    #[inline]
    pub fn neg(&self, score: f64) -> f64 {
        raw_value(self.kind, -clip(score))
    }

    /// Derivative of [`LossSpec::pos`] with respect to the raw score; zero
    /// outside the clipping range.
    #[inline]
    pub fn pos_grad(&self, score: f64) -> f64 {
        if score.abs() > SCORE_CLIP {
            0.0
        } else {
            raw_grad(self.kind, score)
        }
    }

    /// Derivative of [`LossSpec::neg`] with respect to the raw score.
    #[inline]
    pub fn neg_grad(&self, score: f64) -> f64 {
        if score.abs() > SCORE_CLIP {
            0.0
        } else {
            -raw_grad(self.kind, -score)
        }
    }
}

#[inline]
fn clip(t: f64) -> f64 {
    t.clamp(-SCORE_CLIP, SCORE_CLIP)
}

fn raw_value(kind: LossKind, t: f64) -> f64 {
    match kind {
        LossKind::Logistic => log1p_exp(-t),
        LossKind::Sigmoid => sigmoid(-t),
        LossKind::SquaredHinge => {
            let h = (1.0 - t).max(0.0);
            h * h
        }
    }
}

fn raw_grad(kind: LossKind, t: f64) -> f64 {
    match kind {
        LossKind::Logistic => -sigmoid(-t),
        LossKind::Sigmoid => -sigmoid(t) * sigmoid(-t),
        LossKind::SquaredHinge => -2.0 * (1.0 - t).max(0.0),
    }
}

/// `phi(margin)` after clipping the margin.
pub fn loss_value(spec: &LossSpec, margin: f64) -> Result<f64> {
    if !margin.is_finite() {
        return Err(Error::NonFinite("margin"));
    }
    Ok(spec.pos(margin))
}

/// `d phi / dt` at `margin` (inside the clipping range).
pub fn loss_grad(spec: &LossSpec, margin: f64) -> Result<f64> {
    if !margin.is_finite() {
        return Err(Error::NonFinite("margin"));
    }
    Ok(spec.pos_grad(margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KINDS: [LossKind; 3] = [LossKind::Logistic, LossKind::Sigmoid, LossKind::SquaredHinge];

    #[test]
    fn logistic_at_zero_is_ln2() {
        let v = loss_value(&LossSpec::logistic(), 0.0).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(loss_value(&LossSpec::sigmoid(), 0.0).unwrap(), 0.5);
    }

    #[test]
    fn logistic_clipped_tail() {
        // ln(1 + e^-30) evaluated at 50 digits: 9.357622968839737e-14
        let v = loss_value(&LossSpec::logistic(), 30.0).unwrap();
        assert!((v - 9.357622968839737e-14).abs() < 1e-27);
        assert_eq!(loss_value(&LossSpec::logistic(), 1e6).unwrap(), v);
    }

    #[test]
    fn gradients_at_reference_points() {
        assert_eq!(loss_grad(&LossSpec::logistic(), 0.0).unwrap(), -0.5);
        assert_eq!(loss_grad(&LossSpec::sigmoid(), 0.0).unwrap(), -0.25);
        let g = loss_grad(&LossSpec::logistic(), 2.0).unwrap();
        assert!((g + 0.11920292202211755).abs() < 1e-12);
    }

    #[test]
    fn non_finite_margin_rejected() {
        assert_eq!(
            loss_value(&LossSpec::logistic(), f64::NAN),
            Err(Error::NonFinite("margin"))
        );
        assert!(loss_grad(&LossSpec::sigmoid(), f64::INFINITY).is_err());
    }

    #[test]
    fn bounds_hold_on_clip_range() {
        for kind in KINDS {
            let spec = LossSpec::new(kind);
            for i in -600..=600 {
                let t = i as f64 * 0.05;
                let (p, n) = (spec.pos(t), spec.neg(t));
                assert!(p >= 0.0 && p <= spec.bound_b + 1e-12, "{kind:?} {t}");
                assert!(n >= 0.0 && n <= spec.bound_b + 1e-12, "{kind:?} {t}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn grad_matches_central_difference(t in -10.0f64..10.0, k in 0usize..3) {
            let spec = LossSpec::new(KINDS[k]);
            // the squared hinge has a kink at 1
            prop_assume!(KINDS[k] != LossKind::SquaredHinge || (t - 1.0).abs() > 1e-4);
            let h = 1e-5;
            let fd = (spec.pos(t + h) - spec.pos(t - h)) / (2.0 * h);
            let g = loss_grad(&spec, t).unwrap();
            prop_assert!((g - fd).abs() <= 1e-6 * (1.0 + g.abs()), "{} vs {}", g, fd);
            let fdn = (spec.neg(t + h) - spec.neg(t - h)) / (2.0 * h);
            prop_assert!((spec.neg_grad(t) - fdn).abs() <= 1e-6 * (1.0 + fdn.abs()));
        }

        #[test]
        fn sigmoid_loss_symmetry(t in -30.0f64..30.0) {
            let s = LossSpec::sigmoid();
            prop_assert!((s.pos(t) + s.pos(-t) - 1.0).abs() <= 1e-12);
        }
    }
}
