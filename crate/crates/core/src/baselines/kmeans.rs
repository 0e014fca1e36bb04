use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};
use rand::Rng;

use crate::data::{InstanceSample, Label};
use crate::loss::LossSpec;
use crate::model::{dot, train_supervised, Scorer, ScorerSpec, TrainConfig};
use crate::rng::RngSeed;
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KMeansInit {
    #[default]
    Forgy,
    PlusPlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<Label>,
    pub positive_centroid: Vec<f64>,
    pub negative_centroid: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    /// Nearest-centroid rule as a linear scorer:
    /// `|x - c_-|^2 - |x - c_+|^2`.
    pub fn scorer(&self) -> Scorer {
        let (p, n) = (&self.positive_centroid, &self.negative_centroid);
        let w: Vec<f64> = p.iter().zip(n).map(|(a, b)| 2.0 * (a - b)).collect();
        Scorer::linear_from(&w, dot(n, n) - dot(p, p))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check(samples: &[InstanceSample]) -> Result<usize> {
    let first = samples.first().ok_or(Error::Empty("k-means input"))?;
    let d = first.dim();
    if samples.iter().any(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: 0 });
    }
    if samples.iter().all(|s| s.features == first.features) {
        return Err(Error::InsufficientClass {
            class: "distinct points",
            needed: 2,
            available: 1,
        });
    }
    Ok(d)
}

fn init_centroids(samples: &[InstanceSample], init: KMeansInit, seed: RngSeed) -> [Vec<f64>; 2] {
    let mut rng = seed.rng();
    let n = samples.len();
    let a = rng.random_range(0..n);
    let c0 = samples[a].features.clone();
    let c1 = match init {
        KMeansInit::Forgy => loop {
            let b = rng.random_range(0..n);
            if samples[b].features != c0 {
                break samples[b].features.clone();
            }
        },
        KMeansInit::PlusPlus => {
            let d: Vec<f64> = samples.iter().map(|s| dist2(&s.features, &c0)).collect();
            let total: f64 = d.iter().sum();
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, v) in d.iter().enumerate() {
                if *v > 0.0 && r < *v {
                    pick = i;
                    break;
                }
                r -= v;
            }
            if d[pick] == 0.0 {
                pick = d.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|x| x.0).unwrap_or(0);
            }
            samples[pick].features.clone()
        }
    };
    [c0, c1]
}

/// First principal direction (power iteration on the covariance), oriented
/// so that its largest-magnitude coordinate is positive.
pub fn principal_direction(samples: &[InstanceSample]) -> Vec<f64> {
    let d = samples[0].dim();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(&s.features) {
            *m += x / n;
        }
    }
    let mut cov = vec![0.0; d * d];
    for s in samples {
        for i in 0..d {
            let a = s.features[i] - mean[i];
            for j in 0..d {
                cov[i * d + j] += a * (s.features[j] - mean[j]) / n;
            }
        }
    }
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 / (i + 1) as f64).collect();
    for _ in 0..500 {
        let mut next = vec![0.0; d];
        for i in 0..d {
            next[i] = (0..d).map(|j| cov[i * d + j] * v[j]).sum();
        }
        let norm = sqrt(dot(&next, &next));
        if norm == 0.0 {
            break;
        }
        for x in next.iter_mut() {
            *x /= norm;
        }
        v = next;
    }
    let big = v.iter().copied().fold(0.0f64, |a, x| if fabs(x) > fabs(a) { x } else { a });
    if big < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    v
}

/// Lloyd iterations from given centroids, then prior-matched labeling: the
/// cluster whose size fraction is nearer `declared_prior` becomes positive;
/// on a tie, the cluster with the larger mean projection on the first
/// principal direction does.
pub fn kmeans_from_centroids(samples: &[InstanceSample], start: [Vec<f64>; 2], declared_prior: f64) -> Result<KMeansResult> {
    let d = check(samples)?;
    let mut c = start;
    let mut assign = vec![0usize; samples.len()];
    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        for (a, s) in assign.iter_mut().zip(samples) {
            *a = if dist2(&s.features, &c[1]) < dist2(&s.features, &c[0]) { 1 } else { 0 };
        }
        let mut sums = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        for (a, s) in assign.iter().zip(samples) {
            counts[*a] += 1;
            for (t, x) in sums[*a].iter_mut().zip(&s.features) {
                *t += x;
            }
        }
        let mut shift = 0.0f64;
        for k in 0..2 {
            let next: Vec<f64> = if counts[k] == 0 {
                // empty cluster: restart at the point farthest from the other centroid
                let other = &c[1 - k];
                samples
                    .iter()
                    .max_by(|a, b| dist2(&a.features, other).total_cmp(&dist2(&b.features, other)))
                    .map(|s| s.features.clone())
                    .unwrap_or_else(|| c[k].clone())
            } else {
                sums[k].iter().map(|t| t / counts[k] as f64).collect()
            };
            shift = shift.max(sqrt(dist2(&next, &c[k])));
            c[k] = next;
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    let n1 = assign.iter().filter(|a| **a == 1).count() as f64 / samples.len() as f64;
    let n0 = 1.0 - n1;
    let (g0, g1) = (fabs(n0 - declared_prior), fabs(n1 - declared_prior));
    let pos = if g1 < g0 {
        1
    } else if g0 < g1 {
        0
    } else {
        let v = principal_direction(samples);
        if dot(&c[1], &v) > dot(&c[0], &v) {
            1
        } else {
            0
        }
    };
    let [c0, c1] = c;
    let (positive_centroid, negative_centroid) = if pos == 1 { (c1, c0) } else { (c0, c1) };
    Ok(KMeansResult {
        labels: assign
            .iter()
            .map(|a| if *a == pos { Label::Positive } else { Label::Negative })
            .collect(),
        positive_centroid,
        negative_centroid,
        iterations,
    })
}

pub fn kmeans_prior_matched(
    samples: &[InstanceSample],
    init: KMeansInit,
    declared_prior: f64,
    seed: RngSeed,
) -> Result<KMeansResult> {
    check(samples)?;
    kmeans_from_centroids(samples, init_centroids(samples, init, seed), declared_prior)
}

/// k-means pseudo-labels fed to the supervised linear logistic trainer.
pub fn cluster_then_classify(
    samples: &[InstanceSample],
    init: KMeansInit,
    declared_prior: f64,
    tcfg: &TrainConfig,
    seed: RngSeed,
) -> Result<Scorer> {
    let km = kmeans_prior_matched(samples, init, declared_prior, seed)?;
    let pseudo: Vec<InstanceSample> = samples
        .iter()
        .zip(&km.labels)
        .map(|(s, l)| InstanceSample::labeled(s.features.clone(), *l))
        .collect();
    let cfg = TrainConfig {
        scorer: ScorerSpec::default(),
        ..tcfg.clone()
    };
    Ok(train_supervised(&pseudo, &LossSpec::logistic(), &cfg, None)?.0)
}
