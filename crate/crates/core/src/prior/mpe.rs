use alloc::vec::Vec;

use rand::Rng;

use super::isotonic::isotonic_nonincreasing;
use super::kde::{silverman_bandwidth, Binned, Lattice};
use super::np_bound::{np_lower_bound, DEFAULT_THRESHOLDS};
use crate::error::invalid;
use crate::eval::quantile_sorted;
use crate::rng::RngSeed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MpeConfig {
    pub quantile_low: f64,
    pub quantile_high: f64,
    pub grid_points: usize,
    pub bootstrap_b: usize,
    pub level: f64,
    pub n_thresholds: usize,
}

impl Default for MpeConfig {
    fn default() -> Self {
        MpeConfig {
            quantile_low: 0.6,
            quantile_high: 0.99,
            grid_points: 200,
            bootstrap_b: 1000,
            level: 0.95,
            n_thresholds: DEFAULT_THRESHOLDS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorEstimate {
    pub pi_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub np_lower_bound: f64,
    pub lb_ci: (f64, f64),
    pub bandwidth: f64,
}

struct Prepared {
    lattice: Lattice,
    grid: Vec<f64>,
    proxy: Vec<Binned>,
    unlabeled: Vec<Binned>,
}

impl Prepared {
    fn estimate<P, U>(&self, p_idx: P, u_idx: U) -> Result<f64>
    where
        P: Iterator<Item = usize>,
        U: Iterator<Item = usize>,
    {
        let fp = self.lattice.tail_cdf(&self.lattice.weights(&self.proxy, p_idx), &self.grid);
        let fu = self.lattice.tail_cdf(&self.lattice.weights(&self.unlabeled, u_idx), &self.grid);
        let mut ratio = Vec::with_capacity(fp.len());
        for (u, p) in fu.iter().zip(&fp) {
            if !(*p > 0.0) {
                return Err(invalid("proxy tail CDF vanishes on the grid"));
            }
            ratio.push(u / p);
        }
        let fitted = isotonic_nonincreasing(&ratio);
        let top = fitted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(top.clamp(f64::MIN_POSITIVE, 1.0))
    }
}

/// Tail-ratio mixture proportion estimate: smoothed tail CDFs of the proxy
/// and unlabeled scores on a quantile grid of the proxy scores, ratio
/// `F_U / F_P` made nonincreasing in `t` by isotonic regression (the shape
/// of the population ratio when positives dominate the upper tail), maximum
/// taken.
/// One bandwidth (Silverman on the proxy scores) and one grid serve the
/// point estimate and every bootstrap resample.
pub fn mpe_estimate(proxy: &[f64], unlabeled: &[f64], cfg: &MpeConfig, seed: RngSeed) -> Result<PriorEstimate> {
    if proxy.is_empty() {
        return Err(Error::Empty("proxy scores"));
    }
    if unlabeled.is_empty() {
        return Err(Error::Empty("unlabeled scores"));
    }
    if proxy.iter().chain(unlabeled).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("score"));
    }
    if !(0.0..1.0).contains(&cfg.quantile_low) || !(cfg.quantile_low < cfg.quantile_high && cfg.quantile_high <= 1.0) {
        return Err(invalid("quantile range must satisfy 0 <= low < high <= 1"));
    }
    if cfg.grid_points < 2 || cfg.bootstrap_b == 0 {
        return Err(invalid("need at least two grid points and one bootstrap resample"));
    }
    let h = silverman_bandwidth(proxy)?;
    let mut sorted = proxy.to_vec();
    sorted.sort_by(f64::total_cmp);
    let grid: Vec<f64> = (0..cfg.grid_points)
        .map(|i| {
            let q = cfg.quantile_low + (cfg.quantile_high - cfg.quantile_low) * i as f64 / (cfg.grid_points - 1) as f64;
            quantile_sorted(&sorted, q)
        })
        .collect();
    let (lo, hi) = proxy
        .iter()
        .chain(unlabeled)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let lattice = Lattice::new(lo, hi, h);
    let prep = Prepared {
        proxy: proxy.iter().map(|v| lattice.bin(*v)).collect(),
        unlabeled: unlabeled.iter().map(|v| lattice.bin(*v)).collect(),
        lattice,
        grid,
    };
    let pi_hat = prep.estimate(0..proxy.len(), 0..unlabeled.len())?;

    let mut rng = seed.rng();
    let (np, nu) = (proxy.len(), unlabeled.len());
    let mut boots = Vec::with_capacity(cfg.bootstrap_b);
    for _ in 0..cfg.bootstrap_b {
        let pi: Vec<usize> = (0..np).map(|_| rng.random_range(0..np)).collect();
        let ui: Vec<usize> = (0..nu).map(|_| rng.random_range(0..nu)).collect();
        boots.push(prep.estimate(pi.into_iter(), ui.into_iter())?);
    }
    boots.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.level) / 2.0;
    let ci_low = quantile_sorted(&boots, tail).min(pi_hat);
    let ci_high = quantile_sorted(&boots, 1.0 - tail).max(pi_hat);

    let nb = np_lower_bound(proxy, unlabeled, cfg.n_thresholds)?;
    Ok(PriorEstimate {
        pi_hat,
        ci_low,
        ci_high,
        np_lower_bound: nb.pi_lb,
        lb_ci: nb.band,
        bandwidth: h,
    })
}
