use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::optim::{Optimizer, OptimizerKind};
use super::scorer::{predict_labels, Scorer, ScorerSpec};
use crate::data::{InstanceSample, Label, TupleDataset, TupleRecord, UnlabeledPool};
use crate::error::invalid;
use crate::loss::LossSpec;
use crate::risk::{
    margin_weight, tuple_instances, two_sample_gradient, ure_coefficients, ClampKind, InTupleWeights,
    MixConfig, RiskComponents, TrainingPlan, UreCoefficients,
};
use crate::rng::RngSeed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_tuples: usize,
    /// `None` means `n * batch_tuples`, so both sides see as many instances.
    pub batch_unlabeled: Option<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub clamp_kind: ClampKind,
    pub seed: RngSeed,
    pub margin_epsilon: f64,
    pub weight_decay: f64,
    pub scorer: ScorerSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_tuples: 64,
            batch_unlabeled: None,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-4,
            clamp_kind: ClampKind::Abs,
            seed: RngSeed(0),
            margin_epsilon: crate::risk::DEFAULT_MARGIN,
            weight_decay: 0.0,
            scorer: ScorerSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_tuples == 0 || self.batch_unlabeled == Some(0) {
            return Err(invalid("batch sizes must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0) || !(self.margin_epsilon >= 0.0) {
            return Err(invalid("weight_decay and margin_epsilon must be nonnegative"));
        }
        Ok(())
    }

    fn unlabeled_batch(&self, tuple_len: usize) -> usize {
        self.batch_unlabeled.unwrap_or(tuple_len * self.batch_tuples).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub risk_unclamped: f64,
    pub risk_clamped: f64,
    pub audit_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Accuracy of `sign(g)` against labeled samples.
pub fn accuracy(scorer: &Scorer, samples: &[InstanceSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let pred = predict_labels(scorer, samples, 0.0)?;
    let mut correct = 0usize;
    for (p, s) in pred.iter().zip(samples) {
        if Some(*p) == s.label {
            correct += 1;
        } else if s.label.is_none() {
            return Err(Error::MissingLabel);
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Cycles through a shuffled index set, reshuffling whenever it runs out.
#[derive(Debug, Clone)]
pub struct Cursor {
    order: Vec<usize>,
    pos: usize,
}

impl Cursor {
    pub fn new(items: Vec<usize>, rng: &mut ChaCha8Rng) -> Self {
        let mut order = items;
        order.shuffle(rng);
        Cursor { order, pos: 0 }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn take(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Generic mini-batch loop. `step` returns the batch risk and the gradient of
/// the objective; the loop adds weight decay, applies the optimizer and
/// records one trace row per epoch (mean of the batch risks).
pub fn train_with<F>(
    init: Scorer,
    tcfg: &TrainConfig,
    steps_per_epoch: usize,
    audit: Option<&[InstanceSample]>,
    rng: &mut ChaCha8Rng,
    mut step: F,
) -> Result<(Scorer, TrainTrace)>
where
    F: FnMut(&Scorer, &mut ChaCha8Rng) -> Result<(RiskComponents, Vec<f64>)>,
{
    tcfg.validate()?;
    let mut scorer = init;
    let mut opt = Optimizer::new(tcfg.optimizer, tcfg.learning_rate, scorer.n_parameters());
    let mut trace = TrainTrace::default();
    let steps = steps_per_epoch.max(1);
    for epoch in 0..tcfg.epochs {
        let (mut ru, mut rc) = (0.0, 0.0);
        for _ in 0..steps {
            let (comps, mut grad) = step(&scorer, rng)?;
            if !comps.total_unclamped.is_finite() || !comps.total_clamped.is_finite() {
                return Err(Error::Diverged { epoch, what: "risk" });
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, what: "gradient" });
            }
            if tcfg.weight_decay > 0.0 {
                for (g, p) in grad.iter_mut().zip(scorer.params()) {
                    *g += tcfg.weight_decay * p;
                }
            }
            opt.step(scorer.params_mut(), &grad);
            ru += comps.total_unclamped;
            rc += comps.total_clamped;
        }
        if scorer.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, what: "parameters" });
        }
        let audit_accuracy = match audit {
            Some(a) => Some(accuracy(&scorer, a)?),
            None => None,
        };
        trace.epochs.push(EpochRecord {
            epoch,
            risk_unclamped: ru / steps as f64,
            risk_clamped: rc / steps as f64,
            audit_accuracy,
        });
    }
    Ok((scorer, trace))
}

fn features<'a>(samples: &'a [InstanceSample], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| samples[i].features.as_slice()).collect()
}

fn batch_alpha(tuples: &[TupleRecord]) -> f64 {
    let m: usize = tuples.iter().map(TupleRecord::m).sum();
    let n: usize = tuples.iter().map(TupleRecord::n).sum();
    m as f64 / n as f64
}

fn scale(mut comps: RiskComponents, mut grad: Vec<f64>, w: f64) -> (RiskComponents, Vec<f64>) {
    if w != 1.0 {
        for g in grad.iter_mut() {
            *g *= w;
        }
        comps.total_clamped *= w;
    }
    (comps, grad)
}

struct StratumStream<'a> {
    tuples: Vec<&'a TupleRecord>,
    cursor: Cursor,
    coef: UreCoefficients,
    pi: f64,
    weight: f64,
    batch: usize,
}

impl<'a> StratumStream<'a> {
    /// Batch gradient of this stratum's clamped objective, scaled by the
    /// margin rule evaluated on the batch's own mixing rate.
    fn step(
        &mut self,
        scorer: &Scorer,
        loss: &LossSpec,
        tcfg: &TrainConfig,
        u_feats: &[&[f64]],
        rng: &mut ChaCha8Rng,
    ) -> Result<(RiskComponents, Vec<f64>)> {
        let idx = self.cursor.take(self.batch, rng);
        let batch: Vec<TupleRecord> = idx.iter().map(|&i| self.tuples[i].clone()).collect();
        let (tf, tw) = tuple_instances(&batch, &InTupleWeights::Uniform)?;
        let (c, g) = two_sample_gradient(scorer, loss, &self.coef, tcfg.clamp_kind, &tf, &tw, u_feats, None);
        let w = margin_weight(self.pi, batch_alpha(&batch), tcfg.margin_epsilon);
        Ok(scale(c, g, w * self.weight))
    }
}

fn check_sizes(tuples: &TupleDataset, pool: &UnlabeledPool, tcfg: &TrainConfig) -> Result<usize> {
    if tuples.dim() != pool.dim() {
        return Err(Error::DimensionMismatch {
            expected: tuples.dim(),
            found: pool.dim(),
        });
    }
    let n_max = tuples.tuples().iter().map(TupleRecord::n).max().unwrap_or(1);
    let bu = tcfg.unlabeled_batch(n_max);
    if tuples.len() < tcfg.batch_tuples || pool.len() < bu {
        return Err(invalid(format!(
            "dataset smaller than batch: {} tuples / batch {}, {} unlabeled / batch {}",
            tuples.len(),
            tcfg.batch_tuples,
            pool.len(),
            bu
        )));
    }
    Ok(bu)
}

/// Minimizes the clamped empirical unbiased risk over mixed mini-batches.
/// `audit` (labeled held-out samples) only feeds the per-epoch accuracy.
pub fn train_ntmp(
    tuples: &TupleDataset,
    pool: &UnlabeledPool,
    cfg: &MixConfig,
    loss: &LossSpec,
    tcfg: &TrainConfig,
    audit: Option<&[InstanceSample]>,
) -> Result<(Scorer, TrainTrace)> {
    let coef = ure_coefficients(cfg)?;
    tcfg.validate()?;
    let bu = check_sizes(tuples, pool, tcfg)?;
    let init = tcfg.scorer.build(tuples.dim(), tcfg.seed.derive(0));
    let mut rng = tcfg.seed.derive(1).rng();
    let mut stream = StratumStream {
        tuples: tuples.tuples().iter().collect(),
        cursor: Cursor::new((0..tuples.len()).collect(), &mut rng),
        coef,
        pi: cfg.pi,
        weight: 1.0,
        batch: tcfg.batch_tuples,
    };
    let mut pool_cursor = Cursor::new((0..pool.len()).collect(), &mut rng);
    let steps = tuples.len().div_ceil(tcfg.batch_tuples);
    train_with(init, tcfg, steps, audit, &mut rng, |scorer, rng| {
        let u_idx = pool_cursor.take(bu, rng);
        let uf = features(pool.samples(), &u_idx);
        stream.step(scorer, loss, tcfg, &uf, rng)
    })
}

/// Trains on a stratified plan: each stratum gets its own coefficients
/// (its own mixing rate against the shared prior), is clamped separately,
/// and enters the objective with its instance share times its margin weight.
pub fn train_plan(
    tuples: &TupleDataset,
    pool: &UnlabeledPool,
    plan: &TrainingPlan,
    loss: &LossSpec,
    tcfg: &TrainConfig,
    audit: Option<&[InstanceSample]>,
) -> Result<(Scorer, TrainTrace)> {
    tcfg.validate()?;
    let bu = check_sizes(tuples, pool, tcfg)?;
    let init = tcfg.scorer.build(tuples.dim(), tcfg.seed.derive(0));
    let mut rng = tcfg.seed.derive(1).rng();
    let mut streams = Vec::new();
    for s in &plan.strata {
        if s.aggregation_weight() <= 0.0 {
            continue;
        }
        let coef = ure_coefficients(&MixConfig::new(plan.pi_hat, s.alpha))?;
        let recs: Vec<&TupleRecord> = s.tuple_indices.iter().map(|&i| &tuples.tuples()[i]).collect();
        let batch = (libm::round(tcfg.batch_tuples as f64 * s.instance_share) as usize).clamp(1, recs.len());
        streams.push(StratumStream {
            cursor: Cursor::new((0..recs.len()).collect(), &mut rng),
            tuples: recs,
            coef,
            pi: plan.pi_hat,
            weight: s.aggregation_weight(),
            batch,
        });
    }
    if streams.is_empty() {
        return Err(Error::UnsplittableDegenerate);
    }
    let mut pool_cursor = Cursor::new((0..pool.len()).collect(), &mut rng);
    let steps = tuples.len().div_ceil(tcfg.batch_tuples);
    let n_params = init.n_parameters();
    train_with(init, tcfg, steps, audit, &mut rng, |scorer, rng| {
        let u_idx = pool_cursor.take(bu, rng);
        let uf = features(pool.samples(), &u_idx);
        let mut grad = alloc::vec![0.0; n_params];
        let mut total = RiskComponents::new(0.0, 0.0);
        total.clamp_kind = tcfg.clamp_kind;
        for st in streams.iter_mut() {
            let (c, g) = st.step(scorer, loss, tcfg, &uf, rng)?;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
            // components reported on the aggregate scale
            total.r_tuple += st.weight * c.r_tuple;
            total.r_unlabeled += st.weight * c.r_unlabeled;
            total.total_unclamped += st.weight * c.total_unclamped;
            total.total_clamped += c.total_clamped;
        }
        Ok((total, grad))
    })
}

/// Ordinary supervised ERM on labeled samples with the class prior of the
/// sample: `pi E+[phi] + (1 - pi) E-[psi]`. Used as the trainer oracle.
pub fn train_supervised(
    samples: &[InstanceSample],
    loss: &LossSpec,
    tcfg: &TrainConfig,
    audit: Option<&[InstanceSample]>,
) -> Result<(Scorer, TrainTrace)> {
    tcfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match s.label {
            Some(Label::Positive) => pos.push(i),
            Some(Label::Negative) => neg.push(i),
            None => return Err(Error::MissingLabel),
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InsufficientClass {
            class: if pos.is_empty() { "positive" } else { "negative" },
            needed: 1,
            available: 0,
        });
    }
    let pi = pos.len() as f64 / samples.len() as f64;
    // positives on the "unlabeled" side scored with phi, negatives on the
    // "tuple" side scored with psi
    let coef = UreCoefficients {
        c_u_pos: pi,
        c_t_pos: 0.0,
        c_u_neg: 0.0,
        c_t_neg: 1.0 - pi,
    };
    let batch = tcfg.batch_unlabeled.unwrap_or(tcfg.batch_tuples).min(samples.len());
    let bp = (libm::round(batch as f64 * pi) as usize).max(1);
    let bn = batch.saturating_sub(bp).max(1);
    let dim = samples[0].dim();
    let init = tcfg.scorer.build(dim, tcfg.seed.derive(0));
    let mut rng = tcfg.seed.derive(1).rng();
    let mut pc = Cursor::new(pos, &mut rng);
    let mut nc = Cursor::new(neg, &mut rng);
    let steps = samples.len().div_ceil(batch);
    train_with(init, tcfg, steps, audit, &mut rng, |scorer, rng| {
        let pf = features(samples, &pc.take(bp, rng));
        let nf = features(samples, &nc.take(bn, rng));
        let nw = alloc::vec![1.0 / nf.len() as f64; nf.len()];
        Ok(two_sample_gradient(scorer, loss, &coef, ClampKind::None, &nf, &nw, &pf, None))
    })
}
