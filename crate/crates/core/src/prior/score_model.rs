use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::mpe::{mpe_estimate, MpeConfig, PriorEstimate};
use crate::data::{InstanceSample, TupleDataset, UnlabeledPool};
use crate::loss::LossSpec;
use crate::model::{train_ntmp, train_with, Cursor, OptimizerKind, Scorer, ScorerSpec, TrainConfig};
use crate::risk::{two_sample_gradient, ClampKind, MixConfig, UreCoefficients};
use crate::rng::RngSeed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ScoreModelConfig {
    pub hidden_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub validation_min: usize,
    pub validation_fraction: f64,
    pub folds: usize,
}

impl Default for ScoreModelConfig {
    fn default() -> Self {
        ScoreModelConfig {
            hidden_width: 256,
            epochs: 20,
            batch_size: 128,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            validation_min: 5000,
            validation_fraction: 0.1,
            folds: 10,
        }
    }
}

/// Held-out scores of the proxy and unlabeled samples. Indices refer to the
/// inputs of [`fit_score_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePair {
    pub proxy_scores: Vec<f64>,
    pub proxy_indices: Vec<usize>,
    pub unlabeled_scores: Vec<f64>,
    pub unlabeled_indices: Vec<usize>,
    pub cross_validated: bool,
}

fn train_one(
    proxy: &[&[f64]],
    unlabeled: &[&[f64]],
    cfg: &ScoreModelConfig,
    seed: RngSeed,
) -> Result<Scorer> {
    let dim = proxy[0].len();
    let tcfg = TrainConfig {
        epochs: cfg.epochs,
        batch_tuples: cfg.batch_size,
        batch_unlabeled: Some(cfg.batch_size),
        optimizer: OptimizerKind::Adam,
        learning_rate: cfg.learning_rate,
        clamp_kind: ClampKind::None,
        seed,
        margin_epsilon: 0.0,
        weight_decay: cfg.weight_decay,
        scorer: ScorerSpec::mlp(cfg.hidden_width),
    };
    // class-balanced logistic: proxy as +1 (phi), unlabeled as -1 (psi)
    let coef = UreCoefficients {
        c_u_pos: 0.5,
        c_t_pos: 0.0,
        c_u_neg: 0.0,
        c_t_neg: 0.5,
    };
    let loss = LossSpec::logistic();
    let init = tcfg.scorer.build(dim, seed.derive(0));
    let mut rng = seed.derive(1).rng();
    let mut pc = Cursor::new((0..proxy.len()).collect(), &mut rng);
    let mut uc = Cursor::new((0..unlabeled.len()).collect(), &mut rng);
    let bp = cfg.batch_size.min(proxy.len());
    let bu = cfg.batch_size.min(unlabeled.len());
    let steps = unlabeled.len().div_ceil(cfg.batch_size);
    let w = vec![1.0 / bu as f64; bu];
    let (scorer, _) = train_with(init, &tcfg, steps, None, &mut rng, |s, rng| {
        let pf: Vec<&[f64]> = pc.take(bp, rng).into_iter().map(|i| proxy[i]).collect();
        let uf: Vec<&[f64]> = uc.take(bu, rng).into_iter().map(|i| unlabeled[i]).collect();
        Ok(two_sample_gradient(s, &loss, &coef, ClampKind::None, &uf, &w, &pf, None))
    })?;
    Ok(scorer)
}

fn split_folds(n: usize, k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut folds = vec![Vec::new(); k];
    for (j, i) in idx.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    folds
}

/// Trains a one-hidden-layer MLP to separate proxy positives (+1) from the
/// unlabeled pool (-1) and returns scores on data it did not train on: a
/// validation split of `max(validation_min, validation_fraction * |U|)`
/// unlabeled samples (and the same fraction of the proxy), or out-of-fold
/// scores from stratified k-fold cross-validation when that split would
/// exceed half of the pool.
pub fn fit_score_model(
    proxy: &[InstanceSample],
    unlabeled: &[InstanceSample],
    cfg: &ScoreModelConfig,
    seed: RngSeed,
) -> Result<ScorePair> {
    if proxy.len() < 2 {
        return Err(Error::InsufficientClass {
            class: "proxy",
            needed: 2,
            available: proxy.len(),
        });
    }
    if unlabeled.len() < 2 {
        return Err(Error::InsufficientClass {
            class: "unlabeled",
            needed: 2,
            available: unlabeled.len(),
        });
    }
    if proxy[0].dim() != unlabeled[0].dim() {
        return Err(Error::DimensionMismatch {
            expected: proxy[0].dim(),
            found: unlabeled[0].dim(),
        });
    }
    let pf: Vec<&[f64]> = proxy.iter().map(|s| s.features.as_slice()).collect();
    let uf: Vec<&[f64]> = unlabeled.iter().map(|s| s.features.as_slice()).collect();
    let mut rng = seed.derive(100).rng();
    let n_val = cfg
        .validation_min
        .max(libm::ceil(cfg.validation_fraction * unlabeled.len() as f64) as usize);

    if 2 * n_val <= unlabeled.len() {
        let mut ui: Vec<usize> = (0..unlabeled.len()).collect();
        let mut pi: Vec<usize> = (0..proxy.len()).collect();
        ui.shuffle(&mut rng);
        pi.shuffle(&mut rng);
        let frac = n_val as f64 / unlabeled.len() as f64;
        let p_val = (libm::round(frac * proxy.len() as f64) as usize).clamp(1, proxy.len() - 1);
        let (u_val, u_tr) = ui.split_at(n_val);
        let (p_val, p_tr) = pi.split_at(p_val);
        let tr_p: Vec<&[f64]> = p_tr.iter().map(|&i| pf[i]).collect();
        let tr_u: Vec<&[f64]> = u_tr.iter().map(|&i| uf[i]).collect();
        let model = train_one(&tr_p, &tr_u, cfg, seed)?;
        return Ok(ScorePair {
            proxy_scores: p_val.iter().map(|&i| model.score(pf[i])).collect(),
            proxy_indices: p_val.to_vec(),
            unlabeled_scores: u_val.iter().map(|&i| model.score(uf[i])).collect(),
            unlabeled_indices: u_val.to_vec(),
            cross_validated: false,
        });
    }

    let k = cfg.folds.clamp(2, proxy.len());
    let p_folds = split_folds(proxy.len(), k, &mut rng);
    let u_folds = split_folds(unlabeled.len(), k, &mut rng);
    let mut proxy_scores = vec![0.0; proxy.len()];
    let mut unlabeled_scores = vec![0.0; unlabeled.len()];
    for f in 0..k {
        let tr_p: Vec<&[f64]> = (0..k).filter(|&g| g != f).flat_map(|g| p_folds[g].iter().map(|&i| pf[i])).collect();
        let tr_u: Vec<&[f64]> = (0..k).filter(|&g| g != f).flat_map(|g| u_folds[g].iter().map(|&i| uf[i])).collect();
        let model = train_one(&tr_p, &tr_u, cfg, seed.derive(1000 + f as u64))?;
        for &i in &p_folds[f] {
            proxy_scores[i] = model.score(pf[i]);
        }
        for &i in &u_folds[f] {
            unlabeled_scores[i] = model.score(uf[i]);
        }
    }
    Ok(ScorePair {
        proxy_scores,
        proxy_indices: (0..proxy.len()).collect(),
        unlabeled_scores,
        unlabeled_indices: (0..unlabeled.len()).collect(),
        cross_validated: true,
    })
}

/// High-precision positive proxy: tuples are ranked by their predicted
/// margin (the score gap between the `m`-th and `(m+1)`-th best member) and
/// the top-`m` members of the best `ceil(fraction * n_tuples)` tuples are
/// kept. Ranking on a within-tuple gap rather than on raw scores keeps the
/// proxy from collapsing onto the far tail of the positive class.
pub fn positive_proxy(scorer: &Scorer, tuples: &TupleDataset, fraction: f64) -> Result<Vec<InstanceSample>> {
    let mut ranked: Vec<(f64, Vec<&InstanceSample>)> = Vec::new();
    for t in tuples.tuples() {
        if t.m() == 0 {
            continue;
        }
        let mut members: Vec<(f64, &InstanceSample)> =
            t.instances().iter().map(|s| (scorer.score(&s.features), s)).collect();
        members.sort_by(|a, b| b.0.total_cmp(&a.0));
        let margin = if t.m() == t.n() {
            f64::INFINITY
        } else {
            members[t.m() - 1].0 - members[t.m()].0
        };
        ranked.push((margin, members[..t.m()].iter().map(|(_, s)| *s).collect()));
    }
    let k = libm::ceil(fraction * tuples.len() as f64) as usize;
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = Vec::new();
    for (i, (_, members)) in ranked.iter().enumerate() {
        if i >= k && out.len() >= 2 {
            break;
        }
        out.extend(members.iter().map(|s| InstanceSample::unlabeled(s.features.clone())));
    }
    if out.len() < 2 {
        return Err(Error::InsufficientClass {
            class: "positive proxy",
            needed: 2,
            available: out.len(),
        });
    }
    Ok(out)
}

pub const PROXY_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorProtocolConfig {
    pub pi_init: f64,
    pub train: TrainConfig,
    pub score_model: ScoreModelConfig,
    pub mpe: MpeConfig,
    pub proxy_fraction: f64,
}

/// The full protocol on tuple data: train with an initial prior guess, take
/// the highest-margin tuple instances as the positive proxy, fit the score
/// model against the pool and estimate the proportion; then refresh the
/// proxy once using a model trained at the first estimate.
pub fn estimate_prior(
    tuples: &TupleDataset,
    pool: &UnlabeledPool,
    loss: &LossSpec,
    cfg: &PriorProtocolConfig,
    seed: RngSeed,
) -> Result<PriorEstimate> {
    let alpha = tuples.effective_alpha();
    let run = |pi: f64, stream: u64| -> Result<PriorEstimate> {
        let tcfg = TrainConfig {
            seed: seed.derive(stream),
            ..cfg.train.clone()
        };
        let (scorer, _) = train_ntmp(tuples, pool, &MixConfig::new(pi, alpha), loss, &tcfg, None)?;
        let proxy = positive_proxy(&scorer, tuples, cfg.proxy_fraction)?;
        let pair = fit_score_model(&proxy, pool.samples(), &cfg.score_model, seed.derive(stream + 1))?;
        mpe_estimate(&pair.proxy_scores, &pair.unlabeled_scores, &cfg.mpe, seed.derive(stream + 2))
    };
    let first = run(cfg.pi_init, 10)?;
    let refined = if (first.pi_hat - alpha).abs() >= crate::risk::HARD_GAP && first.pi_hat < 1.0 {
        run(first.pi_hat, 20)?
    } else {
        first
    };
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_gaussian_pool, GaussianTaskSpec};
    use crate::eval::auroc;

    fn small() -> ScoreModelConfig {
        ScoreModelConfig {
            hidden_width: 32,
            epochs: 5,
            validation_min: 500,
            ..ScoreModelConfig::default()
        }
    }

    #[test]
    fn separable_proxy_gives_high_auroc() {
        let task = GaussianTaskSpec::symmetric(2, 0.5, 6.0);
        let u = gen_gaussian_pool(&task, 4000, RngSeed(1)).unwrap();
        let mut rng = RngSeed(2).rng();
        let proxy: Vec<InstanceSample> = (0..400)
            .map(|_| InstanceSample::unlabeled(task.sample_class(crate::data::Label::Positive, &mut rng)))
            .collect();
        let pair = fit_score_model(&proxy, u.samples(), &small(), RngSeed(3)).unwrap();
        assert!(!pair.cross_validated);
        let labels: Vec<_> = pair.unlabeled_indices.iter().map(|&i| u.label(i)).collect();
        assert!(auroc(&pair.unlabeled_scores, &labels).unwrap() >= 0.95);
    }

    #[test]
    fn indistinguishable_proxy_near_chance_and_cv_fallback() {
        let task = GaussianTaskSpec::symmetric(2, 0.5, 2.0);
        let u = gen_gaussian_pool(&task, 600, RngSeed(4)).unwrap();
        let proxy = gen_gaussian_pool(&task, 300, RngSeed(5)).unwrap().into_samples();
        let pair = fit_score_model(&proxy, u.samples(), &small(), RngSeed(6)).unwrap();
        assert!(pair.cross_validated);
        assert_eq!(pair.unlabeled_scores.len(), 600);
        let mut scores = pair.proxy_scores.clone();
        scores.extend(&pair.unlabeled_scores);
        let mut labels = vec![crate::data::Label::Positive; 300];
        labels.extend(vec![crate::data::Label::Negative; 600]);
        let a = auroc(&scores, &labels).unwrap();
        assert!((a - 0.5).abs() <= 0.05, "{a}");
    }

    #[test]
    fn empty_proxy_rejected() {
        let task = GaussianTaskSpec::symmetric(2, 0.5, 2.0);
        let u = gen_gaussian_pool(&task, 50, RngSeed(4)).unwrap();
        assert!(fit_score_model(&[], u.samples(), &small(), RngSeed(0)).is_err());
    }
}
