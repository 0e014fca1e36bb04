use alloc::string::String;
use alloc::vec::Vec;

use libm::fabs;

use crate::error::invalid;
use crate::Result;

/// One training run at one grid prior.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub pi: f64,
    pub delta: f64,
    pub seed: u64,
    pub metric: f64,
}

/// Aggregate over seeds at one grid prior. Ill-conditioned points carry no
/// statistics (NaN fields).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub pi: f64,
    pub delta: f64,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ill_conditioned: bool,
}

impl SweepPoint {
    pub fn ci_width(&self) -> f64 {
        if self.ill_conditioned {
            f64::INFINITY
        } else {
            self.ci_high - self.ci_low
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub pi_center: f64,
    pub metric_name: String,
    pub rows: Vec<SweepRow>,
    /// Sorted by `delta`.
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustWindow {
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_crit: Option<f64>,
    pub epsilon: f64,
    pub w_star: f64,
}

pub const DEFAULT_WINDOW_EPSILON: f64 = 0.02;
pub const DEFAULT_W_STAR: f64 = 0.05;

/// A point is robust when its mean stays within `epsilon` of the center mean
/// and its CI is narrower than `w_star`. The window is the contiguous run of
/// robust points around the center (the center itself always belongs to
/// it). `delta_crit` is the smallest `|delta|` whose CI width reaches
/// `w_star`; ill-conditioned points count as infinitely wide.
pub fn robustness_window(sweep: &SweepResult, epsilon: f64, w_star: f64) -> Result<RobustWindow> {
    let mut pts: Vec<&SweepPoint> = sweep.points.iter().collect();
    pts.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let c = pts
        .iter()
        .position(|p| p.delta == 0.0)
        .ok_or_else(|| invalid("sweep has no center point (delta = 0)"))?;
    if pts[c].ill_conditioned {
        return Err(crate::Error::IllConditioned { gap: 0.0 });
    }
    let m0 = pts[c].mean;
    let robust = |p: &SweepPoint| !p.ill_conditioned && fabs(m0 - p.mean) <= epsilon && p.ci_width() <= w_star;
    let mut lo = c;
    while lo > 0 && robust(pts[lo - 1]) {
        lo -= 1;
    }
    let mut hi = c;
    while hi + 1 < pts.len() && robust(pts[hi + 1]) {
        hi += 1;
    }
    let delta_crit = pts
        .iter()
        .filter(|p| p.ci_width() >= w_star)
        .map(|p| fabs(p.delta))
        .min_by(f64::total_cmp);
    Ok(RobustWindow {
        delta_min: pts[lo].delta,
        delta_max: pts[hi].delta,
        delta_crit,
        epsilon,
        w_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn point(delta: f64, mean: f64, width: f64) -> SweepPoint {
        SweepPoint {
            pi: 0.5 + delta,
            delta,
            mean,
            std: 0.0,
            ci_low: mean - width / 2.0,
            ci_high: mean + width / 2.0,
            ill_conditioned: false,
        }
    }

    fn sweep(points: Vec<SweepPoint>) -> SweepResult {
        SweepResult {
            pi_center: 0.5,
            metric_name: "accuracy".into(),
            rows: vec![],
            points,
        }
    }

    #[test]
    fn three_point_example() {
        let s = sweep(vec![point(0.0, 0.90, 0.03), point(0.05, 0.89, 0.03), point(0.10, 0.86, 0.06)]);
        let w = robustness_window(&s, 0.02, 0.05).unwrap();
        assert_eq!((w.delta_min, w.delta_max, w.delta_crit), (0.0, 0.05, Some(0.10)));
    }

    #[test]
    fn all_robust_spans_grid() {
        let s = sweep(vec![point(-0.1, 0.9, 0.01), point(0.0, 0.9, 0.01), point(0.1, 0.91, 0.01)]);
        let w = robustness_window(&s, 0.02, 0.05).unwrap();
        assert_eq!((w.delta_min, w.delta_max, w.delta_crit), (-0.1, 0.1, None));
    }

    #[test]
    fn failing_center_is_degenerate() {
        let s = sweep(vec![point(-0.1, 0.9, 0.01), point(0.0, 0.9, 0.08), point(0.1, 0.9, 0.01)]);
        let w = robustness_window(&s, 0.02, 0.05).unwrap();
        assert!(w.delta_min <= w.delta_max);
        assert_eq!(w.delta_crit, Some(0.0));
    }

    #[test]
    fn missing_center_and_ill_conditioned_points() {
        assert!(robustness_window(&sweep(vec![point(0.1, 0.9, 0.01)]), 0.02, 0.05).is_err());
        let mut bad = point(-0.1, f64::NAN, 0.0);
        bad.ill_conditioned = true;
        let s = sweep(vec![bad, point(0.0, 0.9, 0.01), point(0.1, 0.9, 0.01)]);
        let w = robustness_window(&s, 0.02, 0.05).unwrap();
        assert_eq!((w.delta_min, w.delta_max, w.delta_crit), (0.0, 0.1, Some(0.1)));
    }
}
