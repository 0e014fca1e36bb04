use libm::exp;

use crate::data::Label;
use crate::special::log1p_exp;
use crate::{Error, Result};

pub const DEFAULT_ECE_BINS: usize = 15;

fn check(probs: &[f64], labels: &[Label]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            found: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::Empty("probabilities"));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Top-label ECE. Each sample's confidence is `max(p, 1 - p)` with predicted
/// class positive iff `p > 0.5`; bins `((m-1)/M, m/M]` with zero in the
/// first bin.
pub fn ece(probs: &[f64], labels: &[Label], bins: usize) -> Result<f64> {
    check(probs, labels)?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let mut count = alloc::vec![0usize; bins];
    let mut conf_sum = alloc::vec![0.0; bins];
    let mut hit = alloc::vec![0usize; bins];
    for (&p, y) in probs.iter().zip(labels) {
        let pred_pos = p > 0.5;
        let conf = if pred_pos { p } else { 1.0 - p };
        let b = (libm::ceil(conf * bins as f64) as usize).clamp(1, bins) - 1;
        count[b] += 1;
        conf_sum[b] += conf;
        if pred_pos == y.is_positive() {
            hit[b] += 1;
        }
    }
    let n = probs.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        if count[b] > 0 {
            let c = count[b] as f64;
            total += (c / n) * (hit[b] as f64 / c - conf_sum[b] / c).abs();
        }
    }
    Ok(total)
}

/// Mean squared error of the positive-class probability.
pub fn brier(probs: &[f64], labels: &[Label]) -> Result<f64> {
    check(probs, labels)?;
    let s: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, y)| {
            let t = if y.is_positive() { 1.0 } else { 0.0 };
            (p - t) * (p - t)
        })
        .sum();
    Ok(s / probs.len() as f64)
}

/// Mean negative log-likelihood of `sigmoid(logit / t)`.
pub fn nll_at_temperature(logits: &[f64], labels: &[Label], t: f64) -> f64 {
    let s: f64 = logits
        .iter()
        .zip(labels)
        .map(|(z, y)| log1p_exp(-y.sign() * z / t))
        .sum();
    s / logits.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    pub value: f64,
    /// False when the validation set has one class and `T = 1` was returned.
    pub fitted: bool,
}

const LOG_T_RANGE: (f64, f64) = (-3.0, 3.0);
const GOLDEN_TOL: f64 = 1e-5;

/// Golden-section search for the NLL-minimizing temperature over
/// `log T in [-3, 3]`.
pub fn temperature_scale(logits: &[f64], labels: &[Label]) -> Result<Temperature> {
    if logits.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            found: labels.len(),
        });
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("logit"));
    }
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    if pos == 0 || pos == labels.len() {
        return Ok(Temperature {
            value: 1.0,
            fitted: false,
        });
    }
    let f = |lt: f64| nll_at_temperature(logits, labels, exp(lt));
    let invphi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = LOG_T_RANGE;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    Ok(Temperature {
        value: exp(0.5 * (a + b)),
        fitted: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use crate::special::sigmoid;
    use alloc::vec::Vec;
    use rand::Rng;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn ece_hand_cases() {
        assert!((ece(&[1.0; 4], &[P, N, P, N], 15).unwrap() - 0.5).abs() < 1e-12);
        assert!((ece(&[0.7], &[P], 15).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(ece(&[1.0, 0.0], &[P, N], 15).unwrap(), 0.0);
        // p = 0 is a confident negative in the top bin
        assert!((ece(&[0.0], &[P], 15).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ece_of_calibrated_sample_is_small() {
        let mut rng = RngSeed(1).rng();
        let (mut p, mut y) = (Vec::new(), Vec::new());
        for _ in 0..100_000 {
            let q: f64 = rng.random();
            p.push(q);
            y.push(if rng.random::<f64>() < q { P } else { N });
        }
        assert!(ece(&p, &y, 15).unwrap() <= 0.01);
    }

    #[test]
    fn brier_hand_cases() {
        assert_eq!(brier(&[1.0, 0.0], &[P, N]).unwrap(), 0.0);
        assert_eq!(brier(&[0.5; 3], &[P, N, P]).unwrap(), 0.25);
        assert!((brier(&[0.8, 0.3], &[P, N]).unwrap() - 0.065).abs() < 1e-12);
    }

    fn calibrated(seed: u64, scale: f64) -> (Vec<f64>, Vec<Label>) {
        let mut rng = RngSeed(seed).rng();
        let (mut z, mut y) = (Vec::new(), Vec::new());
        for _ in 0..50_000 {
            let l: f64 = rng.random_range(-4.0..4.0);
            y.push(if rng.random::<f64>() < sigmoid(l) { P } else { N });
            z.push(scale * l);
        }
        (z, y)
    }

    #[test]
    fn temperature_recovers_scaling() {
        let (z, y) = calibrated(2, 1.0);
        let t = temperature_scale(&z, &y).unwrap();
        assert!(t.fitted && (t.value - 1.0).abs() < 0.05, "{}", t.value);
        let (z, y) = calibrated(3, 2.0);
        let t = temperature_scale(&z, &y).unwrap();
        assert!((t.value - 2.0).abs() < 0.1, "{}", t.value);
    }

    #[test]
    fn single_class_validation_gives_unit_temperature() {
        let t = temperature_scale(&[1.0, 2.0], &[P, P]).unwrap();
        assert_eq!(t, Temperature { value: 1.0, fitted: false });
    }
}
