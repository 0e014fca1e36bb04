//! Gaussian-kernel tail CDFs `F(t) = P(score > t)`.

use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, floor, pow, sqrt};

use crate::eval::quantile_sorted;
use crate::special::normal_sf;
use crate::{Error, Result};

/// `0.9 min(sd, IQR / 1.34) n^(-1/5)`; the IQR term is skipped when it is
/// zero but the spread is not.
pub fn silverman_bandwidth(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::DegenerateBandwidth);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = sqrt(x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0));
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * pow(n, -0.2);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::DegenerateBandwidth);
    }
    Ok(h)
}

/// Direct evaluation, `O(n)` per point.
pub fn tail_cdf_exact(x: &[f64], h: f64, t: f64) -> f64 {
    x.iter().map(|xi| normal_sf((t - xi) / h)).sum::<f64>() / x.len() as f64
}

const LATTICE: usize = 2048;
const KERNEL_REACH: f64 = 6.0;

/// Linear binning of samples onto a fixed lattice, so that smoothed tail
/// CDFs of resamples cost `O(n + grid * window)` instead of `O(n * grid)`.
#[derive(Debug, Clone)]
pub struct Lattice {
    lo: f64,
    step: f64,
    h: f64,
    /// `sf(k * step / h)` for `k` in `-reach..=reach`.
    kernel: Vec<f64>,
    reach: usize,
}

/// Position of one sample on the lattice.
#[derive(Debug, Clone, Copy)]
pub struct Binned {
    pub node: usize,
    pub frac: f64,
}

impl Lattice {
    /// Lattice covering `[lo - 6h, hi + 6h]`.
    pub fn new(lo: f64, hi: f64, h: f64) -> Self {
        let lo = lo - KERNEL_REACH * h;
        let hi = hi + KERNEL_REACH * h;
        let step = ((hi - lo) / (LATTICE - 1) as f64).max(f64::MIN_POSITIVE);
        let reach = (ceil(KERNEL_REACH * h / step) as usize).min(LATTICE);
        let kernel = (0..=2 * reach)
            .map(|i| normal_sf((i as f64 - reach as f64) * step / h))
            .collect();
        Lattice {
            lo,
            step,
            h,
            kernel,
            reach,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn bin(&self, x: f64) -> Binned {
        let pos = ((x - self.lo) / self.step).clamp(0.0, (LATTICE - 1) as f64);
        let node = (floor(pos) as usize).min(LATTICE - 2);
        Binned {
            node,
            frac: pos - node as f64,
        }
    }

    /// Lattice weights of a (re)sample given by indices into `binned`.
    pub fn weights<I: Iterator<Item = usize>>(&self, binned: &[Binned], idx: I) -> Vec<f64> {
        let mut w = vec![0.0; LATTICE];
        let mut n = 0usize;
        for i in idx {
            let b = binned[i];
            w[b.node] += 1.0 - b.frac;
            w[b.node + 1] += b.frac;
            n += 1;
        }
        let inv = 1.0 / n as f64;
        for v in w.iter_mut() {
            *v *= inv;
        }
        w
    }

    /// Smoothed tail CDF at the points `t`, from lattice weights.
    pub fn tail_cdf(&self, weights: &[f64], t: &[f64]) -> Vec<f64> {
        // suffix[k] = sum of weights at nodes >= k
        let mut suffix = vec![0.0; LATTICE + 1];
        for k in (0..LATTICE).rev() {
            suffix[k] = suffix[k + 1] + weights[k];
        }
        let at_node = |k: usize| -> f64 {
            // nodes j > k + reach are fully above, j < k - reach fully below
            let r = self.reach;
            let lo = k.saturating_sub(r);
            let hi = (k + r).min(LATTICE - 1);
            let mut s = suffix[hi + 1];
            for j in lo..=hi {
                // t - x = (k - j) step
                s += weights[j] * self.kernel[r + k - j];
            }
            s
        };
        t.iter()
            .map(|&ti| {
                let pos = ((ti - self.lo) / self.step).clamp(0.0, (LATTICE - 1) as f64);
                let k = (floor(pos) as usize).min(LATTICE - 2);
                let f = pos - k as f64;
                (1.0 - f) * at_node(k) + f * at_node(k + 1)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn silverman_matches_hand_formula() {
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        // sd = sqrt(12.5) = 3.5355, IQR = 2 -> 2 / 1.34 = 1.4925
        let want = 0.9 * (2.0 / 1.34) * pow(5.0, -0.2);
        assert!((silverman_bandwidth(&x).unwrap() - want).abs() < 1e-12);
        assert_eq!(silverman_bandwidth(&[2.0; 10]), Err(Error::DegenerateBandwidth));
        // zero IQR but positive spread
        let x = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0];
        assert!(silverman_bandwidth(&x).unwrap() > 0.0);
    }

    #[test]
    fn binned_matches_exact() {
        let mut rng = RngSeed(3).rng();
        let nd = Normal::new(0.5, 1.3).unwrap();
        let x: Vec<f64> = (0..3000).map(|_| nd.sample(&mut rng)).collect();
        let h = silverman_bandwidth(&x).unwrap();
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let lat = Lattice::new(lo, hi, h);
        let binned: Vec<Binned> = x.iter().map(|v| lat.bin(*v)).collect();
        let w = lat.weights(&binned, 0..x.len());
        let ts: Vec<f64> = (0..50).map(|i| -3.0 + 0.13 * i as f64).collect();
        let approx = lat.tail_cdf(&w, &ts);
        for (t, a) in ts.iter().zip(approx) {
            let e = tail_cdf_exact(&x, h, *t);
            assert!((a - e).abs() < 1e-5, "t={t}: {a} vs {e}");
        }
    }
}
