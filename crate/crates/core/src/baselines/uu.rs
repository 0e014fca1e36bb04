use alloc::vec::Vec;

use crate::data::InstanceSample;
use crate::loss::LossSpec;
use crate::model::{train_with, Cursor, Scorer, TrainConfig, TrainTrace};
use crate::risk::{clamp, ure_coefficients, two_sample_components, two_sample_gradient, ClampKind, MixConfig, RiskComponents};
use crate::{Error, Result};

/// Two unlabeled sets with known, distinct class priors. `prior_1` belongs
/// to the set playing the unlabeled-pool role, `prior_2` to the other.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UuConfig {
    pub prior_1: f64,
    pub prior_2: f64,
    pub clamp_kind: ClampKind,
}

impl UuConfig {
    fn mix(&self) -> MixConfig {
        MixConfig::new(self.prior_1, self.prior_2)
    }
}

fn feats(s: &[InstanceSample]) -> Vec<&[f64]> {
    s.iter().map(|x| x.features.as_slice()).collect()
}

/// UU risk; `clamp_kind = Abs` gives the corrected (UUcor) variant.
pub fn uu_risk(
    scorer: &Scorer,
    pool_1: &[InstanceSample],
    pool_2: &[InstanceSample],
    cfg: &UuConfig,
    loss: &LossSpec,
) -> Result<RiskComponents> {
    let coef = ure_coefficients(&cfg.mix())?;
    if pool_1.is_empty() || pool_2.is_empty() {
        return Err(Error::Empty("uu pool"));
    }
    let f2 = feats(pool_2);
    let w2 = alloc::vec![1.0 / f2.len() as f64; f2.len()];
    let (c, _) = two_sample_components(scorer, loss, &coef, &f2, &w2, &feats(pool_1), None);
    Ok(clamp(c, cfg.clamp_kind))
}

/// Mini-batch training of the UU objective; both sides draw `batch` i.i.d.
/// points per step (`batch_unlabeled`, or `batch_tuples` when unset).
pub fn train_uu(
    pool_1: &[InstanceSample],
    pool_2: &[InstanceSample],
    cfg: &UuConfig,
    loss: &LossSpec,
    tcfg: &TrainConfig,
    audit: Option<&[InstanceSample]>,
) -> Result<(Scorer, TrainTrace)> {
    let coef = ure_coefficients(&cfg.mix())?;
    tcfg.validate()?;
    let batch = tcfg.batch_unlabeled.unwrap_or(tcfg.batch_tuples);
    if pool_1.len() < batch || pool_2.len() < batch {
        return Err(crate::error::invalid("uu pools smaller than the batch"));
    }
    let (f1, f2) = (feats(pool_1), feats(pool_2));
    let init = tcfg.scorer.build(f1[0].len(), tcfg.seed.derive(0));
    let mut rng = tcfg.seed.derive(1).rng();
    let mut c1 = Cursor::new((0..f1.len()).collect(), &mut rng);
    let mut c2 = Cursor::new((0..f2.len()).collect(), &mut rng);
    let w = alloc::vec![1.0 / batch as f64; batch];
    let steps = f2.len().div_ceil(batch);
    train_with(init, tcfg, steps, audit, &mut rng, |s, rng| {
        let b1: Vec<&[f64]> = c1.take(batch, rng).into_iter().map(|i| f1[i]).collect();
        let b2: Vec<&[f64]> = c2.take(batch, rng).into_iter().map(|i| f2[i]).collect();
        Ok(two_sample_gradient(s, loss, &coef, cfg.clamp_kind, &b2, &w, &b1, None))
    })
}
