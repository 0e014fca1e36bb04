use alloc::vec;
use alloc::vec::Vec;

use libm::log;

use crate::data::{InstanceSample, TupleDataset, TupleRecord};
use crate::model::{train_with, Cursor, Scorer, TrainConfig, TrainTrace};
use crate::risk::RiskComponents;
use crate::special::sigmoid;
use crate::{Error, Result};

pub const DEFAULT_ENTROPY_WEIGHT: f64 = 0.01;
pub const P_BAR_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LlpKind {
    BagCe,
    JensenShannon,
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * log(x)
    } else {
        0.0
    }
}

/// Entropy of Bernoulli(p) in nats.
pub fn binary_entropy(p: f64) -> f64 {
    -xlogx(p) - xlogx(1.0 - p)
}

/// Jensen-Shannon divergence between Bernoulli(p) and Bernoulli(q), nats.
pub fn js_bernoulli(p: f64, q: f64) -> f64 {
    let m = 0.5 * (p + q);
    (binary_entropy(m) - 0.5 * binary_entropy(p) - 0.5 * binary_entropy(q)).max(0.0)
}

/// Loss and its derivative in the bag mean `p_bar` (already clipped).
fn bag_term(kind: LlpKind, p_bar: f64, q: f64) -> (f64, f64) {
    match kind {
        LlpKind::BagCe => (
            -(q * log(p_bar) + (1.0 - q) * log(1.0 - p_bar)),
            -q / p_bar + (1.0 - q) / (1.0 - p_bar),
        ),
        LlpKind::JensenShannon => {
            let m = 0.5 * (p_bar + q);
            (
                js_bernoulli(p_bar, q),
                0.5 * (log(p_bar / m) - log((1.0 - p_bar) / (1.0 - m))),
            )
        }
    }
}

/// Mean bag loss plus `lambda` times the mean instance entropy, and
/// optionally its gradient.
pub fn llp_objective(
    scorer: &Scorer,
    tuples: &[&TupleRecord],
    kind: LlpKind,
    lambda: f64,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if tuples.is_empty() {
        return Err(Error::Empty("tuples"));
    }
    let n_bags = tuples.len() as f64;
    let n_inst: usize = tuples.iter().map(|t| t.n()).sum();
    let mut grad = if want_grad { Some(vec![0.0; scorer.n_parameters()]) } else { None };
    let (mut bag_loss, mut ent) = (0.0, 0.0);
    for t in tuples {
        let scores: Vec<f64> = t.instances().iter().map(|s| scorer.score(&s.features)).collect();
        let probs: Vec<f64> = scores.iter().map(|s| sigmoid(*s)).collect();
        let raw = probs.iter().sum::<f64>() / t.n() as f64;
        let p_bar = raw.clamp(P_BAR_CLIP, 1.0 - P_BAR_CLIP);
        let (l, dl) = bag_term(kind, p_bar, t.alpha());
        bag_loss += l;
        for p in &probs {
            ent += binary_entropy(*p);
        }
        if let Some(g) = grad.as_mut() {
            let active = raw == p_bar;
            for ((x, s), p) in t.instances().iter().zip(&scores).zip(&probs) {
                let dp = p * (1.0 - p);
                let mut up = 0.0;
                if active {
                    up += dl * dp / (t.n() as f64 * n_bags);
                }
                // d H(sigmoid(s)) / ds = -s p (1 - p)
                up += lambda * (-s * dp) / n_inst as f64;
                scorer.accumulate_grad(&x.features, up, g);
            }
        }
    }
    Ok((bag_loss / n_bags + lambda * ent / n_inst as f64, grad))
}

pub fn llp_bagce_loss(scorer: &Scorer, tuples: &TupleDataset, lambda: f64) -> Result<f64> {
    let refs: Vec<&TupleRecord> = tuples.tuples().iter().collect();
    Ok(llp_objective(scorer, &refs, LlpKind::BagCe, lambda, false)?.0)
}

pub fn llp_js_loss(scorer: &Scorer, tuples: &TupleDataset, lambda: f64) -> Result<f64> {
    let refs: Vec<&TupleRecord> = tuples.tuples().iter().collect();
    Ok(llp_objective(scorer, &refs, LlpKind::JensenShannon, lambda, false)?.0)
}

/// Mini-batch training on tuples alone (the unlabeled pool is not used).
/// The trace reports the objective in both risk columns.
pub fn train_llp(
    tuples: &TupleDataset,
    kind: LlpKind,
    lambda: f64,
    tcfg: &TrainConfig,
    audit: Option<&[InstanceSample]>,
) -> Result<(Scorer, TrainTrace)> {
    tcfg.validate()?;
    if tuples.len() < tcfg.batch_tuples {
        return Err(crate::error::invalid("fewer tuples than the batch size"));
    }
    let init = tcfg.scorer.build(tuples.dim(), tcfg.seed.derive(0));
    let mut rng = tcfg.seed.derive(1).rng();
    let mut cursor = Cursor::new((0..tuples.len()).collect(), &mut rng);
    let steps = tuples.len().div_ceil(tcfg.batch_tuples);
    train_with(init, tcfg, steps, audit, &mut rng, |s, rng| {
        let batch: Vec<&TupleRecord> = cursor
            .take(tcfg.batch_tuples, rng)
            .into_iter()
            .map(|i| &tuples.tuples()[i])
            .collect();
        let (loss, g) = llp_objective(s, &batch, kind, lambda, true)?;
        let mut c = RiskComponents::new(loss, 0.0);
        c.total_clamped = loss;
        Ok((c, g.unwrap_or_default()))
    })
}
