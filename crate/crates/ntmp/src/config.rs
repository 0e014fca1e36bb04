//! Experiment configuration (TOML). See `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use ntmp_core::baselines::DEFAULT_ENTROPY_WEIGHT;
use ntmp_core::datagen::{GaussianTaskSpec, TupleBuildSpec};
use ntmp_core::eval::{DEFAULT_WINDOW_EPSILON, DEFAULT_W_STAR};
use ntmp_core::loss::{LossKind, LossSpec};
use ntmp_core::model::TrainConfig;
use ntmp_core::prior::{default_deltas, MpeConfig, ScoreModelConfig, PROXY_FRACTION};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable that relative output directories are joined onto.
pub const OUTPUT_ROOT_ENV: &str = "NTMP_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ntmp-ure")]
    NtmpUre,
    #[serde(rename = "ntmp-abs")]
    NtmpAbs,
    #[serde(rename = "ntmp-relu")]
    NtmpRelu,
    #[serde(rename = "uu")]
    Uu,
    #[serde(rename = "uucor")]
    UuCor,
    #[serde(rename = "km")]
    Km,
    #[serde(rename = "km++")]
    KmPlusPlus,
    #[serde(rename = "llp-bagce")]
    LlpBagCe,
    #[serde(rename = "llp-js")]
    LlpJs,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::NtmpUre,
        Method::NtmpAbs,
        Method::NtmpRelu,
        Method::Uu,
        Method::UuCor,
        Method::Km,
        Method::KmPlusPlus,
        Method::LlpBagCe,
        Method::LlpJs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::NtmpUre => "ntmp-ure",
            Method::NtmpAbs => "ntmp-abs",
            Method::NtmpRelu => "ntmp-relu",
            Method::Uu => "uu",
            Method::UuCor => "uucor",
            Method::Km => "km",
            Method::KmPlusPlus => "km++",
            Method::LlpBagCe => "llp-bagce",
            Method::LlpJs => "llp-js",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn is_ntmp(self) -> bool {
        matches!(self, Method::NtmpUre | Method::NtmpAbs | Method::NtmpRelu)
    }
}

/// Gaussian task: either `separation` (symmetric means on the first axis)
/// or explicit `mean_pos`/`mean_neg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianTask {
    pub dim: usize,
    pub prior_pi: f64,
    #[serde(default)]
    pub separation: Option<f64>,
    #[serde(default)]
    pub mean_pos: Option<Vec<f64>>,
    #[serde(default)]
    pub mean_neg: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub cov_scale: f64,
    #[serde(default)]
    pub axis_scale: Option<Vec<f64>>,
    /// Labeled pool the tuples are drawn from; sized automatically if unset.
    #[serde(default)]
    pub n_source: Option<usize>,
    /// Defaults to `n * n_tuples`.
    #[serde(default)]
    pub n_unlabeled: Option<usize>,
    #[serde(default = "default_test")]
    pub n_test: usize,
    #[serde(default = "default_val")]
    pub n_val: usize,
}

fn one() -> f64 {
    1.0
}
fn default_test() -> usize {
    5000
}
fn default_val() -> usize {
    1000
}

impl GaussianTask {
    pub fn spec(&self) -> Result<GaussianTaskSpec> {
        let mut s = match (&self.separation, &self.mean_pos, &self.mean_neg) {
            (Some(sep), None, None) => GaussianTaskSpec::symmetric(self.dim, self.prior_pi, *sep),
            (None, Some(p), Some(n)) => GaussianTaskSpec {
                dim: self.dim,
                prior_pi: self.prior_pi,
                mean_pos: p.clone(),
                mean_neg: n.clone(),
                cov_scale: 1.0,
                axis_scale: None,
            },
            _ => {
                return Err(Error::Config(
                    "gaussian task needs either `separation` or both `mean_pos` and `mean_neg`".into(),
                ))
            }
        };
        s.cov_scale = self.cov_scale;
        s.axis_scale = self.axis_scale.clone();
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Gaussian(GaussianTask),
    /// Labeled source CSV that tuples are built from, plus pools.
    Csv {
        source: PathBuf,
        unlabeled: PathBuf,
        test: PathBuf,
        #[serde(default)]
        val: Option<PathBuf>,
    },
    /// A directory written by `gen`.
    Files { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    /// `pi` defaults to the Gaussian task prior.
    Known {
        #[serde(default)]
        pi: Option<f64>,
    },
    Estimated {
        #[serde(default = "half")]
        pi_init: f64,
        #[serde(default = "proxy_fraction")]
        proxy_fraction: f64,
        #[serde(default)]
        score_model: ScoreModelConfig,
        #[serde(default)]
        mpe: MpeConfig,
    },
}

fn logistic() -> LossKind {
    LossKind::Logistic
}

fn half() -> f64 {
    0.5
}
fn proxy_fraction() -> f64 {
    PROXY_FRACTION
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::Known { pi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub llp_lambda: f64,
    /// Per-side batch of the UU trainer; falls back to the train config.
    pub uu_batch: Option<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            llp_lambda: DEFAULT_ENTROPY_WEIGHT,
            uu_batch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub bootstrap_b: usize,
    pub metric: String,
    pub method: Method,
    pub epsilon: f64,
    pub w_star: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            deltas: default_deltas(),
            bootstrap_b: 10_000,
            metric: "accuracy".into(),
            method: Method::NtmpAbs,
            epsilon: DEFAULT_WINDOW_EPSILON,
            w_star: DEFAULT_W_STAR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    /// Relative prior errors: the trainer uses `pi * (1 + e)`.
    pub prior_noise: Vec<f64>,
    pub flip_probs: Vec<f64>,
    /// True pool priors for the conditioning family (Gaussian tasks only).
    pub pi_grid: Vec<f64>,
    pub method: Method,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            prior_noise: (-3..=3).map(|k| k as f64 / 10.0).collect(),
            flip_probs: (0..=5).map(|k| k as f64 / 10.0).collect(),
            pi_grid: vec![0.2, 0.25, 0.3, 1.0 / 3.0, 0.35, 0.4, 0.5],
            method: Method::NtmpAbs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub tuples: TupleBuildSpec,
    #[serde(default)]
    pub prior: PriorConfig,
    pub methods: Vec<Method>,
    #[serde(default = "logistic")]
    pub loss: LossKind,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub perturb: Option<PerturbConfig>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.task.resolve_paths(base);
            cfg.base_dir = Some(base.to_path_buf());
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.methods.is_empty() {
            return bad("methods must not be empty");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("methods must not repeat");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must not repeat");
        }
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.tuples.validate().map_err(|e| Error::Infeasible(e.to_string()))?;
        if let TaskConfig::Gaussian(g) = &self.task {
            g.spec()?;
        }
        match self.prior {
            PriorConfig::Known { pi: Some(p) } if !(p > 0.0 && p < 1.0) => return bad("prior.pi must lie in (0, 1)"),
            PriorConfig::Known { pi: None } if !matches!(self.task, TaskConfig::Gaussian(_)) => {
                return bad("prior.pi is required unless the task is gaussian")
            }
            PriorConfig::Estimated {
                pi_init,
                proxy_fraction,
                ..
            } if !(pi_init > 0.0 && pi_init < 1.0 && proxy_fraction > 0.0 && proxy_fraction <= 1.0) => {
                return bad("prior.pi_init must lie in (0, 1) and proxy_fraction in (0, 1]")
            }
            _ => {}
        }
        if let Some(s) = &self.sweep {
            if s.deltas.is_empty() || !(s.epsilon >= 0.0 && s.w_star > 0.0) {
                return bad("sweep needs deltas, epsilon >= 0 and w_star > 0");
            }
            if !s.method.is_ntmp() {
                return bad("sweep.method must be an ntmp method");
            }
        }
        if let Some(p) = &self.perturb {
            if !p.method.is_ntmp() {
                return bad("perturb.method must be an ntmp method");
            }
            if p.flip_probs.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return bad("flip_probs must lie in [0, 1]");
            }
            if p.prior_noise.iter().any(|e| !(*e > -1.0)) {
                return bad("prior_noise entries must exceed -1");
            }
        }
        Ok(())
    }

    pub fn loss(&self) -> LossSpec {
        LossSpec::new(self.loss)
    }

    /// Hex SHA-256 of the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// `output_dir`; a relative one is joined onto `$NTMP_OUTPUT_ROOT` when
    /// set, otherwise onto the config file's directory.
    pub fn output_dir(&self) -> PathBuf {
        if self.output_dir.is_absolute() {
            return self.output_dir.clone();
        }
        match (std::env::var_os(OUTPUT_ROOT_ENV), &self.base_dir) {
            (Some(root), _) => PathBuf::from(root).join(&self.output_dir),
            (None, Some(base)) => base.join(&self.output_dir),
            (None, None) => self.output_dir.clone(),
        }
    }

    pub fn seeds_label(&self) -> String {
        self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    }
}

impl TaskConfig {
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            TaskConfig::Gaussian(_) => {}
            TaskConfig::Csv {
                source,
                unlabeled,
                test,
                val,
            } => {
                fix(source);
                fix(unlabeled);
                fix(test);
                if let Some(v) = val {
                    fix(v);
                }
            }
            TaskConfig::Files { dir } => fix(dir),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
methods = ["ntmp-abs", "km++"]
seeds = [0, 1]
output_dir = "out"

[task]
kind = "gaussian"
dim = 2
prior_pi = 0.5
separation = 2.0

[tuples]
n = 3
m = 1
n_tuples = 200
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.methods, vec![Method::NtmpAbs, Method::KmPlusPlus]);
        assert_eq!(c.prior, PriorConfig::Known { pi: None });
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.hash().len(), 64);
        assert_eq!(c.hash(), ExperimentConfig::from_toml(MINIMAL).unwrap().hash());
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let cases = [
            MINIMAL.replace(r#"["ntmp-abs", "km++"]"#, "[]"),
            MINIMAL.replace("[0, 1]", "[]"),
            MINIMAL.replace("ntmp-abs", "svm"),
            MINIMAL.replace("separation = 2.0", ""),
            MINIMAL.replace("seeds", "seedz"),
        ];
        for c in cases {
            let e = ExperimentConfig::from_toml(&c).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{e}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
    }
}
