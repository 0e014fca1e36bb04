use alloc::string::String;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::eval::{bootstrap_ci, mean_std, SweepPoint, SweepResult, SweepRow};
use crate::rng::RngSeed;
use crate::{Error, Result};

/// `{-0.30, -0.28, ..., 0.30}`.
pub fn default_deltas() -> Vec<f64> {
    (-15..=15).map(|k| k as f64 / 50.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub n_seeds: usize,
    pub bootstrap_b: usize,
    pub metric_name: String,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            deltas: default_deltas(),
            n_seeds: 5,
            bootstrap_b: 10_000,
            metric_name: "accuracy".into(),
        }
    }
}

/// Retrains at every grid prior `pi_center + delta` inside `(0, 1)`.
///
/// `run(pi, seed)` trains and evaluates once; seed `s` is
/// `base_seed.derive(s)` at every grid point, so `delta = 0` reproduces a
/// plain run with that seed exactly. An `IllConditioned` error marks the
/// point instead of aborting.
pub fn delta_sweep<F>(pi_center: f64, spec: &SweepSpec, base_seed: RngSeed, mut run: F) -> Result<SweepResult>
where
    F: FnMut(f64, RngSeed) -> Result<f64>,
{
    if spec.n_seeds == 0 {
        return Err(invalid("sweep needs at least one seed"));
    }
    let mut deltas: Vec<f64> = spec
        .deltas
        .iter()
        .copied()
        .filter(|d| {
            let p = pi_center + d;
            p > 0.0 && p < 1.0
        })
        .collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    if deltas.is_empty() {
        return Err(invalid("no grid prior inside (0, 1)"));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (g, &delta) in deltas.iter().enumerate() {
        let pi = pi_center + delta;
        let mut values = Vec::with_capacity(spec.n_seeds);
        let mut ill = false;
        for s in 0..spec.n_seeds {
            let seed = base_seed.derive(s as u64);
            match run(pi, seed) {
                Ok(v) => {
                    values.push(v);
                    rows.push(SweepRow {
                        pi,
                        delta,
                        seed: seed.0,
                        metric: v,
                    });
                }
                Err(Error::IllConditioned { .. }) => {
                    ill = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ill {
            rows.retain(|r| r.delta != delta);
            points.push(SweepPoint {
                pi,
                delta,
                mean: f64::NAN,
                std: f64::NAN,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
                ill_conditioned: true,
            });
            continue;
        }
        let (mean, std) = mean_std(&values);
        let (ci_low, ci_high) = if values.len() >= 2 {
            bootstrap_ci(&values, spec.bootstrap_b, 0.95, base_seed.derive(1_000_000 + g as u64))?
        } else {
            (mean, mean)
        };
        points.push(SweepPoint {
            pi,
            delta,
            mean,
            std,
            ci_low,
            ci_high,
            ill_conditioned: false,
        });
    }
    Ok(SweepResult {
        pi_center,
        metric_name: spec.metric_name.clone(),
        rows,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_grid() {
        let d = default_deltas();
        assert_eq!(d.len(), 31);
        assert_eq!((d[0], d[15], d[30]), (-0.3, 0.0, 0.3));
        assert_eq!(d[18], 0.06);
    }

    #[test]
    fn ill_conditioned_point_is_marked() {
        let spec = SweepSpec {
            deltas: vec![0.0],
            n_seeds: 3,
            bootstrap_b: 100,
            metric_name: "accuracy".into(),
        };
        let r = delta_sweep(0.5, &spec, RngSeed(0), |pi, _| {
            if (pi - 0.5f64).abs() < 1e-9 {
                Err(Error::IllConditioned { gap: 0.0 })
            } else {
                Ok(1.0)
            }
        })
        .unwrap();
        assert_eq!(r.points.len(), 1);
        assert!(r.points[0].ill_conditioned && r.rows.is_empty());
    }

    #[test]
    fn grid_clipped_and_seeds_shared() {
        let spec = SweepSpec {
            deltas: vec![-0.3, 0.0, 0.2, 0.6],
            n_seeds: 2,
            bootstrap_b: 100,
            metric_name: "accuracy".into(),
        };
        let r = delta_sweep(0.2, &spec, RngSeed(7), |pi, s| Ok(pi + s.0 as f64 * 0.0)).unwrap();
        assert_eq!(r.points.len(), 3);
        let seeds_at = |d: f64| r.rows.iter().filter(|x| x.delta == d).map(|x| x.seed).collect::<Vec<_>>();
        assert_eq!(seeds_at(0.0), seeds_at(0.2));
        let err = delta_sweep(0.5, &SweepSpec { deltas: vec![0.6], ..spec }, RngSeed(0), |_, _| Ok(0.0));
        assert!(err.is_err());
    }
}
