//! Identification of the class-conditionals from the unlabeled marginal and
//! the flattened tuple marginal, the unbiased risk estimator built on it,
//! the stability clamp, heterogeneous-tuple stratification, and the
//! misspecification bias bounds.
//!
//! With unlabeled prior `pi` and tuple mixing rate `alpha`:
//!
//! ```text
//! p_U = pi p+ + (1 - pi) p-        p_T = alpha p+ + (1 - alpha) p-
//! ```
//!
//! and for `pi != alpha` the system inverts in closed form. The risk
//! `pi E+[phi] + (1 - pi) E-[psi]` then becomes a signed combination of four
//! observable expectations, split into a tuple part `r_tuple` and an
//! unlabeled part `r_unlabeled`.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{InstanceSample, TupleDataset, TupleRecord, UnlabeledPool};
use crate::error::invalid;
use crate::loss::LossSpec;
use crate::model::Scorer;
use crate::{Error, Result};

/// Gaps `|pi - alpha|` below this are a hard error.
pub const HARD_GAP: f64 = 1e-9;

/// Default design margin for `|pi - alpha|`.
pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixConfig {
    pub pi: f64,
    pub alpha: f64,
    pub min_gap_epsilon: f64,
}

impl MixConfig {
    pub fn new(pi: f64, alpha: f64) -> Self {
        MixConfig {
            pi,
            alpha,
            min_gap_epsilon: DEFAULT_MARGIN,
        }
    }

    pub fn gap(&self) -> f64 {
        (self.pi - self.alpha).abs()
    }

    /// Hard identifiability check.
    pub fn check(&self) -> Result<()> {
        if !(self.pi > 0.0 && self.pi < 1.0) || !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("pi must lie in (0, 1) and alpha in [0, 1]"));
        }
        if self.gap() < HARD_GAP {
            return Err(Error::IllConditioned { gap: self.gap() });
        }
        Ok(())
    }

    /// True when the gap is admissible but below the design margin.
    pub fn below_margin(&self) -> bool {
        self.gap() < self.min_gap_epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ClampKind {
    None,
    Relu,
    #[default]
    Abs,
}

impl ClampKind {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ClampKind::None => z,
            ClampKind::Relu => z.max(0.0),
            ClampKind::Abs => z.abs(),
        }
    }

    /// Derivative used for training. At exactly zero: 0 for ReLU, +1 for Abs.
    pub fn slope(self, z: f64) -> f64 {
        match self {
            ClampKind::None => 1.0,
            ClampKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ClampKind::Abs => {
                if z < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskComponents {
    pub r_tuple: f64,
    pub r_unlabeled: f64,
    pub total_unclamped: f64,
    pub total_clamped: f64,
    pub clamp_kind: ClampKind,
}

impl RiskComponents {
    pub fn new(r_tuple: f64, r_unlabeled: f64) -> Self {
        let total = r_tuple + r_unlabeled;
        RiskComponents {
            r_tuple,
            r_unlabeled,
            total_unclamped: total,
            total_clamped: total,
            clamp_kind: ClampKind::None,
        }
    }
}

/// `total_clamped = f(r_tuple) + f(r_unlabeled)`; unclamped fields kept.
pub fn clamp(components: RiskComponents, kind: ClampKind) -> RiskComponents {
    RiskComponents {
        total_clamped: kind.apply(components.r_tuple) + kind.apply(components.r_unlabeled),
        clamp_kind: kind,
        ..components
    }
}

/// Signed weights of `E_U[phi]`, `E_T[phi]`, `E_U[psi]`, `E_T[psi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UreCoefficients {
    pub c_u_pos: f64,
    pub c_t_pos: f64,
    pub c_u_neg: f64,
    pub c_t_neg: f64,
}

impl UreCoefficients {
    pub fn sum(&self) -> f64 {
        self.c_u_pos + self.c_t_pos + self.c_u_neg + self.c_t_neg
    }

    /// Evaluates the estimator on the four expectations.
    pub fn combine(&self, e: &ComponentExpectations) -> RiskComponents {
        RiskComponents::new(
            self.c_t_pos * e.t_pos + self.c_t_neg * e.t_neg,
            self.c_u_pos * e.u_pos + self.c_u_neg * e.u_neg,
        )
    }
}

/// Expected (or empirical mean) losses under the unlabeled marginal and the
/// flattened tuple marginal: `u_pos = E_U[phi(g)]`, `t_neg = E_T[psi(g)]`...
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentExpectations {
    pub u_pos: f64,
    pub u_neg: f64,
    pub t_pos: f64,
    pub t_neg: f64,
}

impl ComponentExpectations {
    /// Expectations implied by class-conditional means `E+[phi]`, `E+[psi]`,
    /// `E-[phi]`, `E-[psi]` and the two mixing weights.
    pub fn from_class_means(pos_phi: f64, pos_psi: f64, neg_phi: f64, neg_psi: f64, pi: f64, alpha: f64) -> Self {
        ComponentExpectations {
            u_pos: pi * pos_phi + (1.0 - pi) * neg_phi,
            u_neg: pi * pos_psi + (1.0 - pi) * neg_psi,
            t_pos: alpha * pos_phi + (1.0 - alpha) * neg_phi,
            t_neg: alpha * pos_psi + (1.0 - alpha) * neg_psi,
        }
    }
}

/// Recovers `(p+(x), p-(x))` from `p_U(x)` and `p_T(x)`.
pub fn identify_conditionals(p_u_val: f64, p_t_val: f64, cfg: &MixConfig) -> Result<(f64, f64)> {
    cfg.check()?;
    if !(p_u_val >= 0.0 && p_t_val >= 0.0) {
        return Err(invalid("densities must be nonnegative"));
    }
    let (pi, a) = (cfg.pi, cfg.alpha);
    let det = pi - a;
    let p_pos = ((1.0 - a) * p_u_val - (1.0 - pi) * p_t_val) / det;
    let p_neg = (-a * p_u_val + pi * p_t_val) / det;
    Ok((p_pos, p_neg))
}

pub fn ure_coefficients(cfg: &MixConfig) -> Result<UreCoefficients> {
    cfg.check()?;
    Ok(coefficients_unchecked(cfg.pi, cfg.alpha))
}

fn coefficients_unchecked(pi: f64, alpha: f64) -> UreCoefficients {
    let det = pi - alpha;
    UreCoefficients {
        c_u_pos: pi * (1.0 - alpha) / det,
        c_t_pos: -pi * (1.0 - pi) / det,
        c_u_neg: -(1.0 - pi) * alpha / det,
        c_t_neg: (1.0 - pi) * pi / det,
    }
}

/// Plug-in population risk when the inversion uses `(inversion_pi,
/// inversion_alpha)` while the class weights of the risk use `outer_pi`.
/// With all three equal to the truth this is the exact risk.
pub fn plug_in_risk(
    e: &ComponentExpectations,
    outer_pi: f64,
    inversion_pi: f64,
    inversion_alpha: f64,
) -> Result<f64> {
    MixConfig::new(inversion_pi, inversion_alpha).check()?;
    let det = inversion_pi - inversion_alpha;
    let pos_phi = ((1.0 - inversion_alpha) * e.u_pos - (1.0 - inversion_pi) * e.t_pos) / det;
    let neg_psi = (-inversion_alpha * e.u_neg + inversion_pi * e.t_neg) / det;
    Ok(outer_pi * pos_phi + (1.0 - outer_pi) * neg_psi)
}

/// How positions inside a tuple are weighted when estimating `E_T`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InTupleWeights {
    /// `1/n` per position.
    #[default]
    Uniform,
    /// One nonnegative weight per position, summing to one; every tuple must
    /// have exactly this many instances.
    Custom(Vec<f64>),
}

impl InTupleWeights {
    fn validate(&self) -> Result<()> {
        if let InTupleWeights::Custom(w) = self {
            if w.iter().any(|v| !(*v >= 0.0)) {
                return Err(invalid("in-tuple weights must be nonnegative"));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(invalid("in-tuple weights must sum to 1"));
            }
        }
        Ok(())
    }
}

/// Tuple-side instances with their weights in the flattened mean.
pub(crate) fn tuple_instances<'a>(
    tuples: &'a [TupleRecord],
    weighting: &InTupleWeights,
) -> Result<(Vec<&'a [f64]>, Vec<f64>)> {
    weighting.validate()?;
    let total: usize = tuples.iter().map(TupleRecord::n).sum();
    if total == 0 {
        return Err(Error::Empty("tuple batch"));
    }
    let mut feats = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for t in tuples {
        let share = t.n() as f64 / total as f64;
        match weighting {
            InTupleWeights::Uniform => {
                for s in t.instances() {
                    feats.push(s.features.as_slice());
                    weights.push(share / t.n() as f64);
                }
            }
            InTupleWeights::Custom(a) => {
                if a.len() != t.n() {
                    return Err(Error::DimensionMismatch {
                        expected: a.len(),
                        found: t.n(),
                    });
                }
                for (s, w) in t.instances().iter().zip(a) {
                    feats.push(s.features.as_slice());
                    weights.push(share * w);
                }
            }
        }
    }
    Ok((feats, weights))
}

/// Empirical estimator evaluated on two weighted samples: the "tuple" side
/// and the "unlabeled" side. Weights of each side sum to one.
pub(crate) fn two_sample_components(
    scorer: &Scorer,
    loss: &LossSpec,
    coef: &UreCoefficients,
    t_feats: &[&[f64]],
    t_weights: &[f64],
    u_feats: &[&[f64]],
    u_weights: Option<&[f64]>,
) -> (RiskComponents, ComponentExpectations) {
    let (mut t_pos, mut t_neg) = (0.0, 0.0);
    for (x, w) in t_feats.iter().zip(t_weights) {
        let s = scorer.score(x);
        t_pos += w * loss.pos(s);
        t_neg += w * loss.neg(s);
    }
    let (mut u_pos, mut u_neg) = (0.0, 0.0);
    let nu = u_feats.len() as f64;
    for (i, x) in u_feats.iter().enumerate() {
        let w = u_weights.map_or(1.0 / nu, |w| w[i]);
        let s = scorer.score(x);
        u_pos += w * loss.pos(s);
        u_neg += w * loss.neg(s);
    }
    let e = ComponentExpectations {
        u_pos,
        u_neg,
        t_pos,
        t_neg,
    };
    (coef.combine(&e), e)
}

/// Components plus the gradient of the clamped total with respect to the
/// scorer parameters.
pub(crate) fn two_sample_gradient(
    scorer: &Scorer,
    loss: &LossSpec,
    coef: &UreCoefficients,
    clamp_kind: ClampKind,
    t_feats: &[&[f64]],
    t_weights: &[f64],
    u_feats: &[&[f64]],
    u_weights: Option<&[f64]>,
) -> (RiskComponents, Vec<f64>) {
    let t_scores: Vec<f64> = t_feats.iter().map(|x| scorer.score(x)).collect();
    let u_scores: Vec<f64> = u_feats.iter().map(|x| scorer.score(x)).collect();
    let nu = u_feats.len() as f64;
    let uw = |i: usize| u_weights.map_or(1.0 / nu, |w| w[i]);
    let mut e = ComponentExpectations {
        u_pos: 0.0,
        u_neg: 0.0,
        t_pos: 0.0,
        t_neg: 0.0,
    };
    for (s, w) in t_scores.iter().zip(t_weights) {
        e.t_pos += w * loss.pos(*s);
        e.t_neg += w * loss.neg(*s);
    }
    for (i, s) in u_scores.iter().enumerate() {
        e.u_pos += uw(i) * loss.pos(*s);
        e.u_neg += uw(i) * loss.neg(*s);
    }
    let comps = clamp(coef.combine(&e), clamp_kind);
    let ft = clamp_kind.slope(comps.r_tuple);
    let fu = clamp_kind.slope(comps.r_unlabeled);
    let mut grad = vec![0.0; scorer.n_parameters()];
    if ft != 0.0 {
        for ((x, s), w) in t_feats.iter().zip(&t_scores).zip(t_weights) {
            let up = ft * w * (coef.c_t_pos * loss.pos_grad(*s) + coef.c_t_neg * loss.neg_grad(*s));
            scorer.accumulate_grad(x, up, &mut grad);
        }
    }
    if fu != 0.0 {
        for (i, (x, s)) in u_feats.iter().zip(&u_scores).enumerate() {
            let up = fu * uw(i) * (coef.c_u_pos * loss.pos_grad(*s) + coef.c_u_neg * loss.neg_grad(*s));
            scorer.accumulate_grad(x, up, &mut grad);
        }
    }
    (comps, grad)
}

fn check_dims(scorer: &Scorer, dim: usize) -> Result<()> {
    if scorer.dim != dim {
        return Err(Error::DimensionMismatch {
            expected: scorer.dim,
            found: dim,
        });
    }
    Ok(())
}

/// The plug-in empirical unbiased risk, unclamped (`clamp_kind = None`).
pub fn empirical_ure(
    scorer: &Scorer,
    tuples: &TupleDataset,
    pool: &UnlabeledPool,
    cfg: &MixConfig,
    loss: &LossSpec,
    weighting: &InTupleWeights,
) -> Result<RiskComponents> {
    let coef = ure_coefficients(cfg)?;
    check_dims(scorer, tuples.dim())?;
    check_dims(scorer, pool.dim())?;
    let (tf, tw) = tuple_instances(tuples.tuples(), weighting)?;
    let uf: Vec<&[f64]> = pool.samples().iter().map(|s| s.features.as_slice()).collect();
    Ok(two_sample_components(scorer, loss, &coef, &tf, &tw, &uf, None).0)
}

/// Gradient of the clamped objective on one mini-batch (uniform in-tuple
/// weights). Returns the batch components alongside.
pub fn ure_gradient(
    scorer: &Scorer,
    batch_tuples: &[TupleRecord],
    batch_pool: &[InstanceSample],
    cfg: &MixConfig,
    loss: &LossSpec,
    clamp_kind: ClampKind,
) -> Result<(RiskComponents, Vec<f64>)> {
    let coef = ure_coefficients(cfg)?;
    if batch_pool.is_empty() {
        return Err(Error::Empty("unlabeled batch"));
    }
    let (tf, tw) = tuple_instances(batch_tuples, &InTupleWeights::Uniform)?;
    if let Some(x) = tf.first() {
        check_dims(scorer, x.len())?;
    }
    let uf: Vec<&[f64]> = batch_pool.iter().map(|s| s.features.as_slice()).collect();
    check_dims(scorer, uf[0].len())?;
    Ok(two_sample_gradient(scorer, loss, &coef, clamp_kind, &tf, &tw, &uf, None))
}

/// `sum m_t / sum n_t`.
pub fn effective_alpha(tuples: &TupleDataset) -> f64 {
    tuples.effective_alpha()
}

/// Batch weight for the design-margin rule: `min(1, (gap / eps)^2)`.
pub fn margin_weight(pi: f64, alpha: f64, epsilon: f64) -> f64 {
    if epsilon <= 0.0 {
        return 1.0;
    }
    let r = (pi - alpha).abs() / epsilon;
    (r * r).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub tuple_indices: Vec<usize>,
    /// Instance-weighted rate of the stratum.
    pub alpha: f64,
    /// Fraction of all tuple instances that fall in this stratum.
    pub instance_share: f64,
    /// Margin-rule weight; zero marks a stratum that cannot be solved.
    pub down_weight: f64,
}

impl Stratum {
    pub fn aggregation_weight(&self) -> f64 {
        self.instance_share * self.down_weight
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pub pi_hat: f64,
    pub strata: Vec<Stratum>,
}

impl TrainingPlan {
    /// One stratum holding every tuple.
    pub fn single(tuples: &TupleDataset, pi_hat: f64, margin: f64) -> Self {
        let alpha = tuples.effective_alpha();
        TrainingPlan {
            pi_hat,
            strata: vec![Stratum {
                tuple_indices: (0..tuples.len()).collect(),
                alpha,
                instance_share: 1.0,
                down_weight: solvable_weight(pi_hat, alpha, margin),
            }],
        }
    }

    pub fn is_stratified(&self) -> bool {
        self.strata.len() > 1
    }
}

fn solvable_weight(pi: f64, alpha: f64, margin: f64) -> f64 {
    if (pi - alpha).abs() < HARD_GAP {
        0.0
    } else {
        margin_weight(pi, alpha, margin)
    }
}

fn stratum(tuples: &TupleDataset, idx: Vec<usize>, total: usize, pi_hat: f64, tau: f64) -> Stratum {
    let (mut m, mut n) = (0usize, 0usize);
    for &i in &idx {
        m += tuples.tuples()[i].m();
        n += tuples.tuples()[i].n();
    }
    let alpha = m as f64 / n as f64;
    Stratum {
        tuple_indices: idx,
        alpha,
        instance_share: n as f64 / total as f64,
        down_weight: solvable_weight(pi_hat, alpha, tau),
    }
}

/// Single stratum when `|alpha_bar - pi_hat| >= tau`; otherwise two strata
/// with distinct rates. Tuples are split first on their own rate `m/n`
/// (choosing the cut between distinct rates that maximizes the rate gap),
/// then on the median tuple length. Strata still inside the margin carry
/// the margin-rule weight.
pub fn stratify_and_solve(tuples: &TupleDataset, pi_hat: f64, tau: f64) -> Result<TrainingPlan> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    if !(pi_hat > 0.0 && pi_hat < 1.0) {
        return Err(invalid("pi_hat must lie in (0, 1)"));
    }
    let alpha_bar = tuples.effective_alpha();
    if (alpha_bar - pi_hat).abs() >= tau {
        return Ok(TrainingPlan::single(tuples, pi_hat, tau));
    }
    let total = tuples.total_instances();
    let ts = tuples.tuples();

    // distinct per-tuple rates, compared exactly as rationals
    let mut rates: Vec<(usize, usize)> = Vec::new();
    for t in ts {
        if !rates.iter().any(|&(m, n)| m * t.n() == t.m() * n) {
            rates.push((t.m(), t.n()));
        }
    }
    rates.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));

    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for cut in 1..rates.len() {
        let (cm, cn) = rates[cut - 1];
        let (lo, hi): (Vec<usize>, Vec<usize>) = (0..ts.len()).partition(|&i| ts[i].m() * cn <= cm * ts[i].n());
        let a1 = stratum(tuples, lo.clone(), total, pi_hat, tau).alpha;
        let a2 = stratum(tuples, hi.clone(), total, pi_hat, tau).alpha;
        let spread = (a1 - a2).abs();
        if best.as_ref().map_or(true, |b| spread > b.0) {
            best = Some((spread, lo, hi));
        }
    }
    if best.is_none() {
        let mut lens: Vec<usize> = ts.iter().map(TupleRecord::n).collect();
        lens.sort_unstable();
        let median = lens[lens.len() / 2];
        let (lo, hi): (Vec<usize>, Vec<usize>) = (0..ts.len()).partition(|&i| ts[i].n() < median);
        if !lo.is_empty() && !hi.is_empty() {
            let a1 = stratum(tuples, lo.clone(), total, pi_hat, tau).alpha;
            let a2 = stratum(tuples, hi.clone(), total, pi_hat, tau).alpha;
            if (a1 - a2).abs() > 0.0 {
                best = Some(((a1 - a2).abs(), lo, hi));
            }
        }
    }
    match best {
        Some((_, lo, hi)) => {
            let strata = vec![
                stratum(tuples, lo, total, pi_hat, tau),
                stratum(tuples, hi, total, pi_hat, tau),
            ];
            if strata.iter().all(|s| s.down_weight == 0.0) {
                return Err(Error::UnsplittableDegenerate);
            }
            Ok(TrainingPlan { pi_hat, strata })
        }
        None => {
            if (alpha_bar - pi_hat).abs() < HARD_GAP {
                Err(Error::UnsplittableDegenerate)
            } else {
                // one shared rate near, but not at, pi_hat
                Ok(TrainingPlan::single(tuples, pi_hat, tau))
            }
        }
    }
}

/// A bias bound, or `Unbounded` when the conditioning margin vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    pub fn holds(self, observed: f64) -> bool {
        match self {
            Bound::Finite(v) => observed <= v,
            Bound::Unbounded => true,
        }
    }
}

/// `gamma = min |xi - alpha|` over `xi` between `pi` and `pi_hat`.
pub fn prior_gamma(pi: f64, pi_hat: f64, alpha: f64) -> f64 {
    let (lo, hi) = if pi <= pi_hat { (pi, pi_hat) } else { (pi_hat, pi) };
    if alpha >= lo && alpha <= hi {
        0.0
    } else {
        (lo - alpha).abs().min((hi - alpha).abs())
    }
}

/// `2 B |delta| / gamma^2` for a misspecified class prior.
pub fn prior_bias_bound(b: f64, delta_abs: f64, pi: f64, pi_hat: f64, alpha: f64) -> Bound {
    let gamma = prior_gamma(pi, pi_hat, alpha);
    if delta_abs == 0.0 {
        return Bound::Finite(0.0);
    }
    if gamma <= 0.0 {
        return Bound::Unbounded;
    }
    Bound::Finite(2.0 * b * delta_abs / (gamma * gamma))
}

/// Companion excess-risk bound `4 B |delta| / gamma^2`.
pub fn prior_excess_risk_bound(b: f64, delta_abs: f64, pi: f64, pi_hat: f64, alpha: f64) -> Bound {
    match prior_bias_bound(b, delta_abs, pi, pi_hat, alpha) {
        Bound::Finite(v) => Bound::Finite(2.0 * v),
        u => u,
    }
}

/// `(2 B / eta^2) E|alpha_hat - alpha|` for random count misspecification.
pub fn count_bias_bound(b: f64, expected_abs_alpha_err: f64, eta_lower: f64) -> Bound {
    if !(eta_lower > 0.0) {
        return Bound::Unbounded;
    }
    Bound::Finite(2.0 * b * expected_abs_alpha_err / (eta_lower * eta_lower))
}

/// Variance form: `E|alpha_hat - alpha| <= sigma_alpha`.
pub fn count_bias_bound_sigma(b: f64, sigma_alpha: f64, eta_lower: f64) -> Bound {
    count_bias_bound(b, sigma_alpha, eta_lower)
}

/// `eta = min |pi - zeta|` over `zeta` between `alpha` and `alpha_hat`.
pub fn count_eta(pi: f64, alpha: f64, alpha_hat: f64) -> f64 {
    prior_gamma(alpha, alpha_hat, pi)
}
