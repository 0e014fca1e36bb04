//! Domain types: instances, labeled and unlabeled pools, tuples and the
//! audit sidecar that keeps tuple ground truth away from training code.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstanceSample {
    pub features: Vec<f64>,
    pub label: Option<Label>,
}

impl InstanceSample {
    pub fn unlabeled(features: Vec<f64>) -> Self {
        InstanceSample {
            features,
            label: None,
        }
    }

    pub fn labeled(features: Vec<f64>, label: Label) -> Self {
        InstanceSample {
            features,
            label: Some(label),
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    fn stripped(&self) -> Self {
        InstanceSample::unlabeled(self.features.clone())
    }
}

fn common_dim(samples: &[InstanceSample]) -> Result<usize> {
    let dim = samples.first().ok_or(Error::Empty("samples"))?.dim();
    if dim == 0 {
        return Err(invalid("feature dimension must be positive"));
    }
    for s in samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature"));
        }
    }
    Ok(dim)
}

/// Fully labeled samples. The prior is the empirical positive fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    samples: Vec<InstanceSample>,
    prior: f64,
    dim: usize,
}

impl LabeledPool {
    pub fn new(samples: Vec<InstanceSample>) -> Result<Self> {
        let dim = common_dim(&samples)?;
        let mut pos = 0usize;
        for s in &samples {
            match s.label {
                Some(Label::Positive) => pos += 1,
                Some(Label::Negative) => {}
                None => return Err(Error::MissingLabel),
            }
        }
        let prior = pos as f64 / samples.len() as f64;
        Ok(LabeledPool {
            samples,
            prior,
            dim,
        })
    }

    pub fn samples(&self) -> &[InstanceSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<InstanceSample> {
        self.samples
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label(&self, i: usize) -> Label {
        // constructor guarantees every label is present
        self.samples[i].label.unwrap_or(Label::Negative)
    }

    pub fn labels(&self) -> Vec<Label> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    pub fn positives(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.label == Some(Label::Positive))
            .count()
    }

    /// Drops the labels, declaring the pool prior as known by construction.
    pub fn to_unlabeled(&self) -> Result<UnlabeledPool> {
        UnlabeledPool::new(
            self.samples.iter().map(InstanceSample::stripped).collect(),
            self.prior,
            PriorSource::KnownByConstruction,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PriorSource {
    KnownByConstruction,
    Estimated,
}

/// Unlabeled reference pool with the prior the estimator should assume.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledPool {
    samples: Vec<InstanceSample>,
    declared_prior: f64,
    prior_source: PriorSource,
    dim: usize,
}

impl UnlabeledPool {
    pub fn new(
        samples: Vec<InstanceSample>,
        declared_prior: f64,
        prior_source: PriorSource,
    ) -> Result<Self> {
        let dim = common_dim(&samples)?;
        check_prior(declared_prior)?;
        let samples = samples
            .into_iter()
            .map(|mut s| {
                s.label = None;
                s
            })
            .collect();
        Ok(UnlabeledPool {
            samples,
            declared_prior,
            prior_source,
            dim,
        })
    }

    /// Same samples, different assumed prior.
    pub fn with_prior(&self, declared_prior: f64, prior_source: PriorSource) -> Result<Self> {
        check_prior(declared_prior)?;
        Ok(UnlabeledPool {
            samples: self.samples.clone(),
            declared_prior,
            prior_source,
            dim: self.dim,
        })
    }

    pub fn samples(&self) -> &[InstanceSample] {
        &self.samples
    }

    pub fn declared_prior(&self) -> f64 {
        self.declared_prior
    }

    pub fn prior_source(&self) -> PriorSource {
        self.prior_source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn check_prior(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(invalid(alloc::format!("prior must lie in (0, 1), got {p}")))
    }
}

/// One tuple: `n` instances of which exactly `m` are (declared) positive.
/// `alpha = m / n` is derived from the integer pair, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleRecord {
    instances: Vec<InstanceSample>,
    m: usize,
    indices: Vec<usize>,
}

impl TupleRecord {
    pub fn new(instances: Vec<InstanceSample>, m: usize) -> Result<Self> {
        Self::with_indices(instances, m, Vec::new())
    }

    /// `indices` locate each instance in a source pool (used by the file
    /// format); pass an empty vector when there is no source pool.
    pub fn with_indices(
        instances: Vec<InstanceSample>,
        m: usize,
        indices: Vec<usize>,
    ) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Empty("tuple instances"));
        }
        if m > instances.len() {
            return Err(invalid(alloc::format!(
                "positive count {m} exceeds tuple length {}",
                instances.len()
            )));
        }
        if !indices.is_empty() && indices.len() != instances.len() {
            return Err(invalid("index list length differs from tuple length"));
        }
        let instances = instances
            .into_iter()
            .map(|mut s| {
                s.label = None;
                s
            })
            .collect();
        Ok(TupleRecord {
            instances,
            m,
            indices,
        })
    }

    pub fn instances(&self) -> &[InstanceSample] {
        &self.instances
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.instances.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n() as f64
    }

    /// Same instances with a different declared count.
    pub fn with_declared_m(&self, m: usize) -> Result<Self> {
        if m > self.n() {
            return Err(invalid("positive count exceeds tuple length"));
        }
        Ok(TupleRecord {
            instances: self.instances.clone(),
            m,
            indices: self.indices.clone(),
        })
    }
}

/// A nonempty collection of tuples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleDataset {
    tuples: Vec<TupleRecord>,
    effective_alpha: f64,
    dim: usize,
}

impl TupleDataset {
    pub fn new(tuples: Vec<TupleRecord>) -> Result<Self> {
        let first = tuples.first().ok_or(Error::Empty("tuple dataset"))?;
        let dim = first.instances[0].dim();
        let (mut pos, mut total) = (0usize, 0usize);
        for t in &tuples {
            for s in &t.instances {
                if s.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: s.dim(),
                    });
                }
            }
            pos += t.m;
            total += t.n();
        }
        Ok(TupleDataset {
            tuples,
            effective_alpha: pos as f64 / total as f64,
            dim,
        })
    }

    pub fn tuples(&self) -> &[TupleRecord] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Instance-weighted mean of the per-tuple rates, `sum m / sum n`.
    pub fn effective_alpha(&self) -> f64 {
        self.effective_alpha
    }

    pub fn total_instances(&self) -> usize {
        self.tuples.iter().map(TupleRecord::n).sum()
    }

    /// `Some((n, m))` when every tuple shares one configuration.
    pub fn fixed_config(&self) -> Option<(usize, usize)> {
        let first = (self.tuples[0].n(), self.tuples[0].m());
        self.tuples
            .iter()
            .all(|t| (t.n(), t.m()) == first)
            .then_some(first)
    }

    /// Subset by tuple index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<TupleDataset> {
        TupleDataset::new(idx.iter().map(|&i| self.tuples[i].clone()).collect())
    }
}

/// Ground-truth labels of tuple instances, parallel to a [`TupleDataset`].
/// Only oracle tests and evaluation read this.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TupleAudit {
    pub labels: Vec<Vec<Label>>,
}

impl TupleAudit {
    pub fn true_positives(&self, tuple: usize) -> usize {
        self.labels[tuple].iter().filter(|l| l.is_positive()).count()
    }

    pub fn flattened(&self) -> Vec<Label> {
        self.labels.iter().flatten().copied().collect()
    }
}
