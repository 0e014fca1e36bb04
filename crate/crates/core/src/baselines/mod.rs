//! Comparison methods: UU risk reconstruction, prior-matched k-means and
//! the two proportion-matching LLP objectives.

mod kmeans;
mod llp;
mod uu;

pub use kmeans::{cluster_then_classify, kmeans_from_centroids, kmeans_prior_matched, principal_direction, KMeansInit, KMeansResult};
pub use llp::{
    binary_entropy, js_bernoulli, llp_bagce_loss, llp_js_loss, llp_objective, train_llp, LlpKind, DEFAULT_ENTROPY_WEIGHT,
    P_BAR_CLIP,
};
pub use uu::{train_uu, uu_risk, UuConfig};
