//! Class-prior estimation: NP-style lower bound, tail-ratio mixture
//! proportion estimate with bootstrap interval, the score model feeding
//! both, and the prior sweep driver.

mod isotonic;
mod kde;
mod mpe;
mod np_bound;
mod score_model;
mod sweep;

pub use isotonic::{isotonic_nondecreasing, isotonic_nonincreasing};
pub use kde::{silverman_bandwidth, tail_cdf_exact, Lattice};
pub use mpe::{mpe_estimate, MpeConfig, PriorEstimate};
pub use np_bound::{np_lower_bound, NpBound, DEFAULT_THRESHOLDS};
pub use score_model::{
    estimate_prior, fit_score_model, positive_proxy, PriorProtocolConfig, ScoreModelConfig, ScorePair, PROXY_FRACTION,
};
pub use sweep::{default_deltas, delta_sweep, SweepSpec};
