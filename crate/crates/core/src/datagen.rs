//! Synthetic Gaussian tasks, tuple construction under the exact-count
//! constraint, flattening, and count corruption.

use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{InstanceSample, Label, LabeledPool, TupleAudit, TupleDataset, TupleRecord};
use crate::error::invalid;
use crate::rng::{ChaCha8Rng, RngSeed};
use crate::special::normal_cdf;
use crate::{Error, Result};

/// Two Gaussian classes with a shared diagonal covariance
/// `cov_scale * diag(axis_scale)^2` (isotropic when `axis_scale` is `None`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianTaskSpec {
    pub dim: usize,
    pub prior_pi: f64,
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    pub cov_scale: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub axis_scale: Option<Vec<f64>>,
}

impl GaussianTaskSpec {
    /// Means `+-separation/2` along the first axis, unit isotropic noise.
    pub fn symmetric(dim: usize, prior_pi: f64, separation: f64) -> Self {
        let mut mean_pos = vec![0.0; dim];
        let mut mean_neg = vec![0.0; dim];
        if dim > 0 {
            mean_pos[0] = separation / 2.0;
            mean_neg[0] = -separation / 2.0;
        }
        GaussianTaskSpec {
            dim,
            prior_pi,
            mean_pos,
            mean_neg,
            cov_scale: 1.0,
            axis_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.mean_pos.len() != self.dim || self.mean_neg.len() != self.dim {
            return Err(invalid("mean vectors must have length dim > 0"));
        }
        if !(self.prior_pi > 0.0 && self.prior_pi < 1.0) {
            return Err(invalid("prior_pi must lie in (0, 1)"));
        }
        if !(self.cov_scale > 0.0) {
            return Err(invalid("cov_scale must be positive"));
        }
        if let Some(a) = &self.axis_scale {
            if a.len() != self.dim || a.iter().any(|v| !(*v > 0.0)) {
                return Err(invalid("axis_scale must hold dim positive entries"));
            }
        }
        if self.mean_pos == self.mean_neg {
            return Err(invalid("class means coincide: task is not learnable"));
        }
        Ok(())
    }

    fn variance(&self, j: usize) -> f64 {
        let a = self.axis_scale.as_ref().map_or(1.0, |a| a[j]);
        self.cov_scale * a * a
    }

    /// Posterior log-odds `ln p(+|x)/p(-|x)`, the Bayes-optimal scorer.
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        let (w, b) = self.bayes_linear();
        w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b
    }

    /// Weights and bias of the (linear) Bayes log-odds.
    pub fn bayes_linear(&self) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; self.dim];
        let mut b = log(self.prior_pi / (1.0 - self.prior_pi));
        for j in 0..self.dim {
            let v = self.variance(j);
            w[j] = (self.mean_pos[j] - self.mean_neg[j]) / v;
            b -= 0.5 * (self.mean_pos[j] * self.mean_pos[j] - self.mean_neg[j] * self.mean_neg[j]) / v;
        }
        (w, b)
    }

    /// Mahalanobis distance between the class means.
    pub fn mahalanobis(&self) -> f64 {
        let mut d2 = 0.0;
        for j in 0..self.dim {
            let d = self.mean_pos[j] - self.mean_neg[j];
            d2 += d * d / self.variance(j);
        }
        sqrt(d2)
    }

    /// Accuracy of the Bayes rule in closed form.
    pub fn bayes_accuracy(&self) -> f64 {
        let delta = self.mahalanobis();
        let k = log(self.prior_pi / (1.0 - self.prior_pi)) / delta;
        self.prior_pi * normal_cdf(delta / 2.0 + k) + (1.0 - self.prior_pi) * normal_cdf(delta / 2.0 - k)
    }

    /// Distribution of a linear score `w.x + b` under one class: `(mean, sd)`.
    pub fn linear_score_moments(&self, w: &[f64], b: f64, label: Label) -> (f64, f64) {
        let mean = if label.is_positive() { &self.mean_pos } else { &self.mean_neg };
        let mut mu = b;
        let mut var = 0.0;
        for j in 0..self.dim {
            mu += w[j] * mean[j];
            var += w[j] * w[j] * self.variance(j);
        }
        (mu, sqrt(var))
    }

    /// One draw from the class-conditional distribution.
    pub fn sample_class(&self, label: Label, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mean = if label.is_positive() { &self.mean_pos } else { &self.mean_neg };
        (0..self.dim)
            .map(|j| {
                let z: f64 = rng.sample(StandardNormal);
                mean[j] + sqrt(self.variance(j)) * z
            })
            .collect()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> InstanceSample {
        let label = if rng.random::<f64>() < self.prior_pi {
            Label::Positive
        } else {
            Label::Negative
        };
        InstanceSample::labeled(self.sample_class(label, rng), label)
    }
}

/// Labels drawn Bernoulli(prior), features from the matching class.
pub fn gen_gaussian_pool(spec: &GaussianTaskSpec, n_samples: usize, seed: RngSeed) -> Result<LabeledPool> {
    spec.validate()?;
    if n_samples < 2 {
        return Err(invalid("n_samples must be at least 2"));
    }
    let mut rng = seed.rng();
    LabeledPool::new((0..n_samples).map(|_| spec.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Replacement {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

/// One `(n, m)` configuration and the fraction of tuples drawn from it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TupleConfig {
    pub n: usize,
    pub m: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TupleBuildSpec {
    pub n: usize,
    pub m: usize,
    pub n_tuples: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub replacement: Replacement,
    #[cfg_attr(feature = "serde", serde(default))]
    pub variable_nm: Option<Vec<TupleConfig>>,
}

impl TupleBuildSpec {
    pub fn fixed(n: usize, m: usize, n_tuples: usize) -> Self {
        TupleBuildSpec {
            n,
            m,
            n_tuples,
            replacement: Replacement::WithoutReplacement,
            variable_nm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tuples == 0 {
            return Err(invalid("n_tuples must be positive"));
        }
        match &self.variable_nm {
            None => check_nm(self.n, self.m),
            Some(cfgs) => {
                if cfgs.is_empty() {
                    return Err(invalid("variable_nm must not be empty"));
                }
                for c in cfgs {
                    check_nm(c.n, c.m)?;
                    if !(c.weight >= 0.0) {
                        return Err(invalid("configuration weights must be nonnegative"));
                    }
                }
                let total: f64 = cfgs.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(alloc::format!("configuration weights sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// The `(n, m)` of every tuple to build, in build order. Weighted
    /// configurations are allocated by largest remainder so the realized
    /// fractions are exact up to one tuple.
    pub fn layout(&self) -> Vec<(usize, usize)> {
        match &self.variable_nm {
            None => vec![(self.n, self.m); self.n_tuples],
            Some(cfgs) => {
                let raw: Vec<f64> = cfgs.iter().map(|c| c.weight * self.n_tuples as f64).collect();
                let mut counts: Vec<usize> = raw.iter().map(|r| *r as usize).collect();
                let mut left = self.n_tuples - counts.iter().sum::<usize>();
                let mut order: Vec<usize> = (0..cfgs.len()).collect();
                order.sort_by(|&a, &b| {
                    let fa = raw[a] - counts[a] as f64;
                    let fb = raw[b] - counts[b] as f64;
                    fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
                });
                for &i in order.iter().cycle() {
                    if left == 0 {
                        break;
                    }
                    counts[i] += 1;
                    left -= 1;
                }
                cfgs.iter()
                    .zip(counts)
                    .flat_map(|(c, k)| core::iter::repeat((c.n, c.m)).take(k))
                    .collect()
            }
        }
    }
}

fn check_nm(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("tuple length n must be positive"));
    }
    if m > n {
        return Err(invalid(alloc::format!("positive count m={m} exceeds tuple length n={n}")));
    }
    Ok(())
}

/// Builds tuples with exactly `m` hidden positives each, shuffling positions
/// within every tuple. Returns the label-free dataset and the audit sidecar.
pub fn build_tuples(
    pool: &LabeledPool,
    spec: &TupleBuildSpec,
    seed: RngSeed,
) -> Result<(TupleDataset, TupleAudit)> {
    spec.validate()?;
    let mut rng = seed.rng();
    let mut layout = spec.layout();
    layout.shuffle(&mut rng);

    let mut pos_idx: Vec<usize> = (0..pool.len()).filter(|&i| pool.label(i).is_positive()).collect();
    let mut neg_idx: Vec<usize> = (0..pool.len()).filter(|&i| !pool.label(i).is_positive()).collect();
    let need_pos: usize = layout.iter().map(|c| c.1).sum();
    let need_neg: usize = layout.iter().map(|c| c.0 - c.1).sum();

    match spec.replacement {
        Replacement::WithoutReplacement => {
            if pos_idx.len() < need_pos {
                return Err(Error::InsufficientClass {
                    class: "positive",
                    needed: need_pos,
                    available: pos_idx.len(),
                });
            }
            if neg_idx.len() < need_neg {
                return Err(Error::InsufficientClass {
                    class: "negative",
                    needed: need_neg,
                    available: neg_idx.len(),
                });
            }
            pos_idx.shuffle(&mut rng);
            neg_idx.shuffle(&mut rng);
        }
        Replacement::WithReplacement => {
            let max_m = layout.iter().map(|c| c.1).max().unwrap_or(0);
            let max_neg = layout.iter().map(|c| c.0 - c.1).max().unwrap_or(0);
            if max_m > 0 && pos_idx.is_empty() {
                return Err(Error::InsufficientClass {
                    class: "positive",
                    needed: 1,
                    available: 0,
                });
            }
            if max_neg > 0 && neg_idx.is_empty() {
                return Err(Error::InsufficientClass {
                    class: "negative",
                    needed: 1,
                    available: 0,
                });
            }
        }
    }

    let (mut next_pos, mut next_neg) = (0usize, 0usize);
    let mut tuples = Vec::with_capacity(layout.len());
    let mut audit = TupleAudit::default();
    for &(n, m) in &layout {
        let mut members: Vec<(usize, Label)> = Vec::with_capacity(n);
        for k in 0..n {
            let positive = k < m;
            let idx = match (spec.replacement, positive) {
                (Replacement::WithoutReplacement, true) => {
                    next_pos += 1;
                    pos_idx[next_pos - 1]
                }
                (Replacement::WithoutReplacement, false) => {
                    next_neg += 1;
                    neg_idx[next_neg - 1]
                }
                (Replacement::WithReplacement, true) => pos_idx[rng.random_range(0..pos_idx.len())],
                (Replacement::WithReplacement, false) => neg_idx[rng.random_range(0..neg_idx.len())],
            };
            let label = if positive { Label::Positive } else { Label::Negative };
            members.push((idx, label));
        }
        members.shuffle(&mut rng);
        let instances = members
            .iter()
            .map(|&(i, _)| InstanceSample::unlabeled(pool.samples()[i].features.clone()))
            .collect();
        let indices = members.iter().map(|&(i, _)| i).collect();
        tuples.push(TupleRecord::with_indices(instances, m, indices)?);
        audit.labels.push(members.iter().map(|&(_, l)| l).collect());
    }
    Ok((TupleDataset::new(tuples)?, audit))
}

/// All tuple instances as one multiset, with the mixing weight of the
/// flattened marginal (`sum m / sum n`).
pub fn flatten(dataset: &TupleDataset) -> (Vec<InstanceSample>, f64) {
    let instances = dataset
        .tuples()
        .iter()
        .flat_map(|t| t.instances().iter().cloned())
        .collect();
    (instances, dataset.effective_alpha())
}

/// With probability `flip_prob` per tuple, moves the declared count one step
/// up or down (uniformly; clamped to `[0, n]`). Instances are untouched.
pub fn corrupt_counts(dataset: &TupleDataset, flip_prob: f64, seed: RngSeed) -> Result<TupleDataset> {
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(invalid("flip_prob must lie in [0, 1]"));
    }
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(dataset.len());
    for t in dataset.tuples() {
        let flip = rng.random::<f64>() < flip_prob;
        let up = rng.random::<bool>();
        if !flip {
            out.push(t.clone());
            continue;
        }
        let m = if up { (t.m() + 1).min(t.n()) } else { t.m().saturating_sub(1) };
        out.push(t.with_declared_m(m)?);
    }
    TupleDataset::new(out)
}
