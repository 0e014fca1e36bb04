use crate::special::clopper_pearson;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLDS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NpBound {
    pub pi_lb: f64,
    pub threshold: f64,
    /// Conservative 95% band from the Clopper-Pearson intervals of TPR and
    /// FPR at the maximizing threshold.
    pub band: (f64, f64),
}

/// `max_tau (TPR(tau) - FPR(tau))_+` over evenly spaced thresholds on the
/// pooled score range, where TPR counts proxy scores above `tau` and FPR
/// unlabeled scores above `tau`.
pub fn np_lower_bound(proxy: &[f64], unlabeled: &[f64], n_thresholds: usize) -> Result<NpBound> {
    if proxy.is_empty() {
        return Err(Error::Empty("proxy scores"));
    }
    if unlabeled.is_empty() {
        return Err(Error::Empty("unlabeled scores"));
    }
    if n_thresholds < 2 {
        return Err(crate::error::invalid("need at least two thresholds"));
    }
    let (lo, hi) = proxy
        .iter()
        .chain(unlabeled)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite("score"));
    }
    let mut p = proxy.to_vec();
    let mut u = unlabeled.to_vec();
    p.sort_by(f64::total_cmp);
    u.sort_by(f64::total_cmp);
    let above = |s: &[f64], t: f64| s.len() - s.partition_point(|v| *v <= t);
    let mut best = (f64::NEG_INFINITY, lo, 0usize, 0usize);
    for k in 0..n_thresholds {
        let t = lo + (hi - lo) * k as f64 / (n_thresholds - 1) as f64;
        let (kp, ku) = (above(&p, t), above(&u, t));
        let d = kp as f64 / p.len() as f64 - ku as f64 / u.len() as f64;
        if d > best.0 {
            best = (d, t, kp, ku);
        }
    }
    let (tp_lo, tp_hi) = clopper_pearson(best.2, p.len(), 0.95);
    let (fp_lo, fp_hi) = clopper_pearson(best.3, u.len(), 0.95);
    Ok(NpBound {
        pi_lb: best.0.clamp(0.0, 1.0),
        threshold: best.1,
        band: ((tp_lo - fp_hi).clamp(0.0, 1.0), (tp_hi - fp_lo).clamp(0.0, 1.0)),
    })
}
