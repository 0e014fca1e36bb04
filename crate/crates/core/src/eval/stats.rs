use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};
use rand::Rng;

use crate::error::invalid;
use crate::rng::RngSeed;
use crate::special::normal_sf;
use crate::{Error, Result};

/// Largest number of nonzero pairs handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 25;
/// Fewer nonzero pairs than this give `p = 1`.
pub const WILCOXON_MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Too few nonzero differences; `p = 1` by convention.
    Insufficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of (mid)ranks of positive differences.
    pub w_plus: f64,
    pub n_nonzero: usize,
    pub method: WilcoxonMethod,
}

fn midranks(abs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..abs.len()).collect();
    idx.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0.0; abs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && abs[idx[j]] == abs[idx[i]] {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = mid;
        }
        i = j;
    }
    ranks
}

/// Two-sided paired signed-rank test on `a - b`. Zero differences are
/// dropped; exact null distribution (ties handled through midranks) up to 25
/// pairs, continuity-corrected normal approximation with tie correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("paired difference"));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| fabs(*v)).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    if n < WILCOXON_MIN_PAIRS {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            w_plus,
            n_nonzero: n,
            method: WilcoxonMethod::Insufficient,
        });
    }
    if n <= WILCOXON_EXACT_MAX {
        // doubled midranks are integers
        let r2: Vec<usize> = ranks.iter().map(|r| (2.0 * r) as usize).collect();
        let total: usize = r2.iter().sum();
        let mut dist = vec![0.0f64; total + 1];
        dist[0] = 1.0;
        for &r in &r2 {
            for s in (r..=total).rev() {
                dist[s] = 0.5 * dist[s] + 0.5 * dist[s - r];
            }
            for s in dist.iter_mut().take(r) {
                *s *= 0.5;
            }
        }
        let w = (2.0 * w_plus) as usize;
        let lower: f64 = dist[..=w].iter().sum();
        let upper: f64 = dist[w..].iter().sum();
        return Ok(WilcoxonResult {
            p_value: (2.0 * lower.min(upper)).min(1.0),
            w_plus,
            n_nonzero: n,
            method: WilcoxonMethod::Exact,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        var -= (t * t * t - t) / 48.0;
        i = j;
    }
    // continuity-corrected
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sqrt(var);
    Ok(WilcoxonResult {
        p_value: (2.0 * normal_sf(fabs(z))).min(1.0),
        w_plus,
        n_nonzero: n,
        method: WilcoxonMethod::Normal,
    })
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("p-values must lie in [0, 1]"));
    }
    let m = p_values.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &i) in idx.iter().enumerate() {
        running = running.max((m - j) as f64 * p_values[i]).min(1.0);
        out[i] = running;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CliffMagnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl CliffMagnitude {
    pub fn of(delta: f64) -> Self {
        let a = fabs(delta);
        if a < 0.147 {
            CliffMagnitude::Negligible
        } else if a < 0.33 {
            CliffMagnitude::Small
        } else if a < 0.474 {
            CliffMagnitude::Medium
        } else {
            CliffMagnitude::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CliffMagnitude::Negligible => "negligible",
            CliffMagnitude::Small => "small",
            CliffMagnitude::Medium => "medium",
            CliffMagnitude::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CliffsDelta {
    pub delta: f64,
    pub magnitude: CliffMagnitude,
}

/// Positive when `ours` tends to exceed `other`.
pub fn cliffs_delta(ours: &[f64], other: &[f64]) -> Result<CliffsDelta> {
    if ours.is_empty() || other.is_empty() {
        return Err(Error::Empty("cliffs_delta input"));
    }
    let mut wins = 0i64;
    for x in ours {
        for y in other {
            if x > y {
                wins += 1;
            } else if x < y {
                wins -= 1;
            }
        }
    }
    let delta = wins as f64 / (ours.len() * other.len()) as f64;
    Ok(CliffsDelta {
        delta,
        magnitude: CliffMagnitude::of(delta),
    })
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, sqrt(ss / (n - 1.0)))
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(values: &[f64], b: usize, level: f64, seed: RngSeed) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientClass {
            class: "bootstrap values",
            needed: 2,
            available: values.len(),
        });
    }
    if b == 0 || !(level > 0.0 && level < 1.0) {
        return Err(invalid("bootstrap needs b >= 1 and level in (0, 1)"));
    }
    let n = values.len();
    let mut rng = seed.rng();
    let mut means: Vec<f64> = (0..b)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..n {
                s += values[rng.random_range(0..n)];
            }
            s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, tail), quantile_sorted(&means, 1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn wilcoxon_examples() {
        let b: Vec<f64> = (0..10).map(|i| i as f64 * 0.37).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, WilcoxonMethod::Exact);
        assert!((r.p_value - 0.001953125).abs() < 1e-12);
        let r = wilcoxon_signed_rank(&b, &b).unwrap();
        assert_eq!((r.p_value, r.method), (1.0, WilcoxonMethod::Insufficient));
        let a: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = wilcoxon_signed_rank(&a, &[0.0; 10]).unwrap();
        assert!(r.p_value > 0.9, "{}", r.p_value);
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn wilcoxon_small_table_values() {
        // frozen from scipy.stats.wilcoxon(..., method="exact")
        let d = [1.0, 2.0, 3.0, -4.0, 5.0, 6.0, 7.0, -8.0];
        let r = wilcoxon_signed_rank(&d, &[0.0; 8]).unwrap();
        assert_eq!(r.w_plus, 24.0);
        assert!((r.p_value - 0.4609375).abs() < 1e-12, "{}", r.p_value);
    }

    #[test]
    fn wilcoxon_exact_and_normal_agree_at_25() {
        let mut rng = RngSeed(11).rng();
        for _ in 0..20 {
            let d: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).map(|v: f64| v + 0.3).collect();
            let exact = wilcoxon_signed_rank(&d, &[0.0; 25]).unwrap();
            let mut d26 = d.clone();
            d26.push(0.0); // zero is dropped: same data through the normal path below
            let nf = 25.0;
            let dev = fabs(exact.w_plus - nf * (nf + 1.0) / 4.0) - 0.5;
            let z = dev.max(0.0) / sqrt(nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0);
            let normal = (2.0 * normal_sf(fabs(z))).min(1.0);
            assert!((exact.p_value - normal).abs() <= 0.01, "{} {}", exact.p_value, normal);
            assert_eq!(wilcoxon_signed_rank(&d26, &[0.0; 26]).unwrap().method, WilcoxonMethod::Exact);
        }
        let d: Vec<f64> = (0..30).map(|i| i as f64 - 10.5).collect();
        assert_eq!(wilcoxon_signed_rank(&d, &[0.0; 30]).unwrap().method, WilcoxonMethod::Normal);
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_adjust(&[0.01, 0.02, 0.04]).unwrap(), vec![0.03, 0.04, 0.04]);
        assert_eq!(holm_adjust(&[0.2]).unwrap(), vec![0.2]);
        assert_eq!(holm_adjust(&[0.5, 0.6]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(holm_adjust(&[0.04, 0.01, 0.02]).unwrap(), vec![0.04, 0.03, 0.04]);
        assert!(holm_adjust(&[1.5]).is_err());
    }

    #[test]
    fn cliffs_examples() {
        assert_eq!(cliffs_delta(&[3.0, 4.0], &[1.0, 2.0]).unwrap().delta, 1.0);
        assert_eq!(cliffs_delta(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap().delta, 0.0);
        assert_eq!(cliffs_delta(&[1.0, 2.0], &[1.5]).unwrap().delta, 0.0);
        assert_eq!(CliffMagnitude::of(0.2), CliffMagnitude::Small);
        assert_eq!(CliffMagnitude::of(-0.4), CliffMagnitude::Medium);
        assert_eq!(CliffMagnitude::of(0.5), CliffMagnitude::Large);
        assert_eq!(CliffMagnitude::of(0.1), CliffMagnitude::Negligible);
    }

    #[test]
    fn bootstrap_examples() {
        assert_eq!(bootstrap_ci(&[2.5; 10], 1000, 0.95, RngSeed(0)).unwrap(), (2.5, 2.5));
        let v: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let (lo, hi) = bootstrap_ci(&v, 10_000, 0.95, RngSeed(1)).unwrap();
        assert!((lo - 0.40).abs() < 0.015 && (hi - 0.60).abs() < 0.015, "{lo} {hi}");
        assert_eq!(bootstrap_ci(&v, 500, 0.95, RngSeed(2)), bootstrap_ci(&v, 500, 0.95, RngSeed(2)));
        assert!(bootstrap_ci(&[1.0], 10, 0.95, RngSeed(0)).is_err());
    }

    #[test]
    fn quantile_and_moments() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 1.0), 4.0);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn cliffs_antisymmetric(x in prop::collection::vec(-5i32..5, 1..20), y in prop::collection::vec(-5i32..5, 1..20)) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            prop_assert_eq!(cliffs_delta(&x, &y).unwrap().delta, -cliffs_delta(&y, &x).unwrap().delta);
        }

        #[test]
        fn holm_dominates_and_is_monotone(p in prop::collection::vec(0.0f64..1.0, 1..12)) {
            let adj = holm_adjust(&p).unwrap();
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, q) in adj.iter().zip(&p) {
                prop_assert!(a >= q && *a <= 1.0);
            }
        }
    }
}
