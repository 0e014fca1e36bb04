use ntmp_core::data::{InstanceSample, PriorSource, UnlabeledPool};
use ntmp_core::datagen::{build_tuples, gen_gaussian_pool, GaussianTaskSpec, TupleBuildSpec};
use ntmp_core::loss::{LossKind, LossSpec};
use ntmp_core::model::Scorer;
use ntmp_core::risk::*;
use ntmp_core::rng::RngSeed;
use rand::Rng;

/// A discrete two-class world on `k` support points with a fixed scorer, so
/// every expectation is a finite sum.
struct Discrete {
    p_pos: Vec<f64>,
    p_neg: Vec<f64>,
    scores: Vec<f64>,
}

impl Discrete {
    fn random(k: usize, rng: &mut impl Rng) -> Self {
        let mut draw = || {
            let v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let p_pos = draw();
        let p_neg = draw();
        let scores = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
        Discrete { p_pos, p_neg, scores }
    }

    fn class_means(&self, loss: &LossSpec) -> (f64, f64, f64, f64) {
        let mut m = (0.0, 0.0, 0.0, 0.0);
        for k in 0..self.scores.len() {
            let s = self.scores[k];
            m.0 += self.p_pos[k] * loss.pos(s);
            m.1 += self.p_pos[k] * loss.neg(s);
            m.2 += self.p_neg[k] * loss.pos(s);
            m.3 += self.p_neg[k] * loss.neg(s);
        }
        m
    }
}

#[test]
fn identification_inverts_forward_mixing() {
    let mut rng = RngSeed(11).rng();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 10_000 {
        let pi: f64 = rng.random_range(0.01..0.99);
        let alpha = rng.random_range(0.0..1.0);
        if (pi - alpha).abs() < 0.05 {
            continue;
        }
        let (pp, pn): (f64, f64) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
        let pu = pi * pp + (1.0 - pi) * pn;
        let pt = alpha * pp + (1.0 - alpha) * pn;
        let (rp, rn) = identify_conditionals(pu, pt, &MixConfig::new(pi, alpha)).unwrap();
        worst = worst.max((rp - pp).abs()).max((rn - pn).abs());
        done += 1;
    }
    assert!(worst <= 1e-10, "max reconstruction error {worst}");
}

#[test]
fn prior_misspecification_stays_inside_bound() {
    // sigmoid loss lies in [0, 1], so B = 1
    let loss = LossSpec::new(LossKind::Sigmoid);
    let mut rng = RngSeed(12).rng();
    let (pi, alpha) = (0.6, 0.25);
    let mut checked = 0;
    for _ in 0..10 {
        let w = Discrete::random(8, &mut rng);
        let (pp, ppsi, np, npsi) = w.class_means(&loss);
        let e = ComponentExpectations::from_class_means(pp, ppsi, np, npsi, pi, alpha);
        let truth = pi * pp + (1.0 - pi) * npsi;
        for k in 0..=40 {
            let pi_hat = 0.05 + 0.9 * k as f64 / 40.0;
            if prior_gamma(pi, pi_hat, alpha) < 0.1 {
                continue;
            }
            let tilde = plug_in_risk(&e, pi, pi_hat, alpha).unwrap();
            let bound = prior_bias_bound(1.0, (pi_hat - pi).abs(), pi, pi_hat, alpha);
            // 1e-12 absorbs round-off at zero misspecification
            assert!(bound.holds((tilde - truth).abs() - 1e-12), "pi_hat={pi_hat}: {} vs {bound:?}", (tilde - truth).abs());
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn count_misspecification_stays_inside_bound() {
    let loss = LossSpec::new(LossKind::Sigmoid);
    let mut rng = RngSeed(13).rng();
    let (pi, alpha) = (0.5, 6.0 / 30.0);
    for _ in 0..10 {
        let w = Discrete::random(6, &mut rng);
        let (pp, ppsi, np, npsi) = w.class_means(&loss);
        let e = ComponentExpectations::from_class_means(pp, ppsi, np, npsi, pi, alpha);
        let truth = pi * pp + (1.0 - pi) * npsi;
        for k in 0..=30 {
            let alpha_hat = k as f64 / 30.0;
            let eta = count_eta(pi, alpha, alpha_hat);
            if eta < 0.1 {
                continue;
            }
            let tilde = plug_in_risk(&e, pi, pi, alpha_hat).unwrap();
            let bound = count_bias_bound(1.0, (alpha_hat - alpha).abs(), eta);
            assert!(bound.holds((tilde - truth).abs() - 1e-12), "alpha_hat={alpha_hat}");
        }
    }
}

#[test]
fn correct_prior_plug_in_is_exact() {
    let loss = LossSpec::logistic();
    let mut rng = RngSeed(14).rng();
    for _ in 0..50 {
        let w = Discrete::random(5, &mut rng);
        let (pp, ppsi, np, npsi) = w.class_means(&loss);
        let (pi, alpha): (f64, f64) = (rng.random_range(0.1..0.9), rng.random_range(0.0..1.0));
        if (pi - alpha).abs() < 0.05 {
            continue;
        }
        let e = ComponentExpectations::from_class_means(pp, ppsi, np, npsi, pi, alpha);
        let r = plug_in_risk(&e, pi, pi, alpha).unwrap();
        let direct = ure_coefficients(&MixConfig::new(pi, alpha)).unwrap().combine(&e).total_unclamped;
        let truth = pi * pp + (1.0 - pi) * npsi;
        assert!((r - truth).abs() < 1e-10 && (direct - truth).abs() < 1e-10);
    }
}

#[test]
fn uniform_in_tuple_weights_have_lowest_variance() {
    let task = GaussianTaskSpec::symmetric(2, 0.5, 2.0);
    let scorer = Scorer::linear_from(&[0.8, -0.3], 0.1);
    let loss = LossSpec::logistic();
    let cfg = MixConfig::new(0.5, 1.0 / 3.0);
    let u = gen_gaussian_pool(&task, 50, RngSeed(0)).unwrap().to_unlabeled().unwrap();
    let weightings = [
        InTupleWeights::Uniform,
        InTupleWeights::Custom(vec![0.5, 0.5, 0.0]),
        InTupleWeights::Custom(vec![1.0, 0.0, 0.0]),
    ];
    let mut vals: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for r in 0..2000u64 {
        let src = gen_gaussian_pool(&task, 40, RngSeed(100 + r)).unwrap();
        let (tuples, _) = build_tuples(&src, &TupleBuildSpec::fixed(3, 1, 5), RngSeed(5000 + r)).unwrap();
        for (k, w) in weightings.iter().enumerate() {
            vals[k].push(empirical_ure(&scorer, &tuples, &u, &cfg, &loss, w).unwrap().r_tuple);
        }
    }
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (v0, v1, v2) = (var(&vals[0]), var(&vals[1]), var(&vals[2]));
    assert!(v0 <= v1 && v1 <= v2, "{v0} {v1} {v2}");
    assert!(v0 / v2 < 0.6, "{}", v0 / v2);
}

#[test]
fn empirical_ure_is_unbiased_for_a_fixed_scorer() {
    let task = GaussianTaskSpec::symmetric(2, 0.5, 2.0);
    let scorer = Scorer::linear_from(&[1.1, 0.4], -0.2);
    let loss = LossSpec::logistic();
    let cfg = MixConfig::new(0.5, 1.0 / 3.0);
    let reps = 300;
    let mut est = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let src = gen_gaussian_pool(&task, 700, RngSeed(2 * r)).unwrap();
        let (tuples, _) = build_tuples(&src, &TupleBuildSpec::fixed(3, 1, 100), RngSeed(2 * r + 1)).unwrap();
        let u: Vec<InstanceSample> = gen_gaussian_pool(&task, 300, RngSeed(10_000 + r)).unwrap().into_samples();
        let pool = UnlabeledPool::new(u, 0.5, PriorSource::KnownByConstruction).unwrap();
        est.push(empirical_ure(&scorer, &tuples, &pool, &cfg, &loss, &InTupleWeights::Uniform).unwrap().total_unclamped);
    }
    let mean = est.iter().sum::<f64>() / reps as f64;
    let sd = (est.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let se = sd / (reps as f64).sqrt();
    let audit = gen_gaussian_pool(&task, 200_000, RngSeed(77)).unwrap();
    let losses: Vec<f64> = audit
        .samples()
        .iter()
        .map(|s| {
            let g = scorer.score(&s.features);
            if s.label.unwrap().is_positive() { loss.pos(g) } else { loss.neg(g) }
        })
        .collect();
    let n = losses.len() as f64;
    let truth = losses.iter().sum::<f64>() / n;
    let audit_se = (losses.iter().map(|x| (x - truth) * (x - truth)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let tol = 3.0 * (se * se + audit_se * audit_se).sqrt();
    assert!((mean - truth).abs() <= tol, "mean {mean} truth {truth} tol {tol}");
}
