//! The subcommands. Every command is a deterministic function of the config
//! (seeds included) and writes its outputs under the output directory.

use std::path::{Path, PathBuf};

use ntmp_core::baselines::{kmeans_prior_matched, train_llp, train_uu, KMeansInit, LlpKind, UuConfig};
use ntmp_core::data::{InstanceSample, Label, PriorSource, TupleAudit, TupleDataset, UnlabeledPool};
use ntmp_core::datagen::{build_tuples, corrupt_counts, flatten, gen_gaussian_pool, GaussianTaskSpec};
use ntmp_core::eval::{metric_report, robustness_window, MetricReport, RobustWindow, SweepResult};
use ntmp_core::model::{train_ntmp, train_plan, Scorer, TrainConfig, TrainTrace};
use ntmp_core::prior::{delta_sweep, estimate_prior, PriorEstimate, PriorProtocolConfig, SweepSpec};
use ntmp_core::risk::{stratify_and_solve, ClampKind, MixConfig};
use ntmp_core::rng::RngSeed;

use crate::config::{ExperimentConfig, Method, PriorConfig, TaskConfig};
use crate::error::{Error, Result};
use crate::io::{self, fmt_f64, Provenance};
use crate::report::{self, PerturbRun, RunRecord};

pub const TUPLES_FILE: &str = "tuples.jsonl";
pub const TUPLE_INSTANCES_FILE: &str = "tuple_instances.csv";
pub const AUDIT_FILE: &str = "tuples_audit.jsonl";
pub const UNLABELED_FILE: &str = "unlabeled.csv";
pub const TEST_FILE: &str = "test.csv";
pub const VAL_FILE: &str = "val.csv";

// RNG streams under each experiment seed
const STREAM_SOURCE: u64 = 1;
const STREAM_TUPLES: u64 = 2;
const STREAM_UNLABELED: u64 = 3;
const STREAM_TEST: u64 = 4;
const STREAM_VAL: u64 = 5;
const STREAM_TRAIN: u64 = 100;
const STREAM_KMEANS: u64 = 101;
const STREAM_PRIOR: u64 = 200;
const STREAM_FLIP: u64 = 300;

/// Everything one seed trains and evaluates on.
#[derive(Debug, Clone)]
pub struct Data {
    pub tuples: TupleDataset,
    pub audit: Option<TupleAudit>,
    pub unlabeled: Vec<InstanceSample>,
    pub test: Vec<InstanceSample>,
    pub val: Vec<InstanceSample>,
    pub task: Option<GaussianTaskSpec>,
}

fn require_labels(samples: &[InstanceSample], path: &Path) -> Result<()> {
    let pos = samples.iter().filter(|s| s.label == Some(Label::Positive)).count();
    if pos == 0 || pos == samples.len() {
        return Err(Error::Infeasible(format!("{}: evaluation data needs both classes", path.display())));
    }
    Ok(())
}

fn gaussian_pools(task: &GaussianTaskSpec, n_u: usize, n_test: usize, n_val: usize, s: RngSeed) -> Result<[Vec<InstanceSample>; 3]> {
    let strip = |v: Vec<InstanceSample>| -> Vec<InstanceSample> {
        v.into_iter().map(|x| InstanceSample::unlabeled(x.features)).collect()
    };
    Ok([
        strip(gen_gaussian_pool(task, n_u, s.derive(STREAM_UNLABELED))?.into_samples()),
        gen_gaussian_pool(task, n_test, s.derive(STREAM_TEST))?.into_samples(),
        gen_gaussian_pool(task, n_val, s.derive(STREAM_VAL))?.into_samples(),
    ])
}

/// Builds or loads the data of one seed.
pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Data> {
    let s = RngSeed(seed);
    match &cfg.task {
        TaskConfig::Gaussian(g) => {
            let task = g.spec()?;
            let layout = cfg.tuples.layout();
            let need_pos: usize = layout.iter().map(|c| c.1).sum();
            let need_neg: usize = layout.iter().map(|c| c.0 - c.1).sum();
            let auto = (need_pos as f64 / task.prior_pi).max(need_neg as f64 / (1.0 - task.prior_pi));
            let n_source = g.n_source.unwrap_or((1.25 * auto).ceil() as usize + 50);
            let source = gen_gaussian_pool(&task, n_source, s.derive(STREAM_SOURCE))?;
            let (tuples, audit) = build_tuples(&source, &cfg.tuples, s.derive(STREAM_TUPLES)).map_err(infeasible)?;
            let n_u = g.n_unlabeled.unwrap_or(tuples.total_instances());
            let [unlabeled, test, val] = gaussian_pools(&task, n_u, g.n_test, g.n_val, s)?;
            Ok(Data {
                tuples,
                audit: Some(audit),
                unlabeled,
                test,
                val,
                task: Some(task),
            })
        }
        TaskConfig::Csv {
            source,
            unlabeled,
            test,
            val,
        } => {
            let src = ntmp_core::data::LabeledPool::new(io::read_pool_csv(source, true)?)?;
            let (tuples, audit) = build_tuples(&src, &cfg.tuples, s.derive(STREAM_TUPLES)).map_err(infeasible)?;
            let unlabeled = io::read_pool_csv(unlabeled, false)?;
            let mut test_s = io::read_pool_csv(test, true)?;
            let val_s = match val {
                Some(v) => io::read_pool_csv(v, true)?,
                None => {
                    // first fifth of the test file serves as validation
                    let k = test_s.len().div_ceil(5);
                    let rest = test_s.split_off(k);
                    std::mem::replace(&mut test_s, rest)
                }
            };
            require_labels(&test_s, test)?;
            Ok(Data {
                tuples,
                audit: Some(audit),
                unlabeled,
                test: test_s,
                val: val_s,
                task: None,
            })
        }
        TaskConfig::Files { dir } => {
            let tuples = io::read_tuples(&dir.join(TUPLES_FILE), &dir.join(TUPLE_INSTANCES_FILE))?;
            let audit_path = dir.join(AUDIT_FILE);
            let audit = if audit_path.exists() { Some(io::read_audit(&audit_path)?) } else { None };
            let test = io::read_pool_csv(&dir.join(TEST_FILE), true)?;
            require_labels(&test, &dir.join(TEST_FILE))?;
            Ok(Data {
                tuples,
                audit,
                unlabeled: io::read_pool_csv(&dir.join(UNLABELED_FILE), false)?,
                test,
                val: io::read_pool_csv(&dir.join(VAL_FILE), true)?,
                task: None,
            })
        }
    }
}

fn infeasible(e: ntmp_core::Error) -> Error {
    match e {
        ntmp_core::Error::InsufficientClass { .. } | ntmp_core::Error::InvalidArgument(_) => {
            Error::Infeasible(e.to_string())
        }
        other => Error::Core(other),
    }
}

pub fn pool(data: &Data, pi: f64, source: PriorSource) -> ntmp_core::Result<UnlabeledPool> {
    UnlabeledPool::new(data.unlabeled.clone(), pi, source)
}

/// A trained scorer with its trace and the number of strata it used.
#[derive(Debug, Clone)]
pub struct Fit {
    pub scorer: Scorer,
    pub trace: TrainTrace,
    pub strata: usize,
}

fn clamp_of(method: Method) -> ClampKind {
    match method {
        Method::NtmpUre | Method::Uu => ClampKind::None,
        Method::NtmpRelu => ClampKind::Relu,
        _ => ClampKind::Abs,
    }
}

/// Trains one method at prior `pi` on `tuples` (which may differ from
/// `data.tuples` under count perturbation).
pub fn fit(
    cfg: &ExperimentConfig,
    method: Method,
    tuples: &TupleDataset,
    data: &Data,
    pi: f64,
    seed: RngSeed,
) -> ntmp_core::Result<Fit> {
    let tcfg = TrainConfig {
        seed: seed.derive(STREAM_TRAIN),
        clamp_kind: clamp_of(method),
        ..cfg.train.clone()
    };
    let loss = cfg.loss();
    let source = match cfg.prior {
        PriorConfig::Known { .. } => PriorSource::KnownByConstruction,
        PriorConfig::Estimated { .. } => PriorSource::Estimated,
    };
    let (scorer, trace, strata) = match method {
        Method::NtmpUre | Method::NtmpAbs | Method::NtmpRelu => {
            let plan = stratify_and_solve(tuples, pi, tcfg.margin_epsilon)?;
            let pool = pool(data, pi, source)?;
            let k = plan.strata.len();
            let (s, t) = if plan.is_stratified() {
                train_plan(tuples, &pool, &plan, &loss, &tcfg, None)?
            } else {
                train_ntmp(tuples, &pool, &MixConfig::new(pi, plan.strata[0].alpha), &loss, &tcfg, None)?
            };
            (s, t, k)
        }
        Method::Uu | Method::UuCor => {
            let (flat, alpha) = flatten(tuples);
            let ucfg = UuConfig {
                prior_1: pi,
                prior_2: alpha,
                clamp_kind: clamp_of(method),
            };
            let tcfg = TrainConfig {
                batch_unlabeled: cfg.baselines.uu_batch.or(tcfg.batch_unlabeled),
                ..tcfg
            };
            let (s, t) = train_uu(&data.unlabeled, &flat, &ucfg, &loss, &tcfg, None)?;
            (s, t, 1)
        }
        Method::Km | Method::KmPlusPlus => {
            let init = if method == Method::Km { KMeansInit::Forgy } else { KMeansInit::PlusPlus };
            let km = kmeans_prior_matched(&data.unlabeled, init, pi, seed.derive(STREAM_KMEANS))?;
            (km.scorer(), TrainTrace::default(), 1)
        }
        Method::LlpBagCe | Method::LlpJs => {
            let kind = if method == Method::LlpBagCe { LlpKind::BagCe } else { LlpKind::JensenShannon };
            let (s, t) = train_llp(tuples, kind, cfg.baselines.llp_lambda, &tcfg, None)?;
            (s, t, 1)
        }
    };
    Ok(Fit { scorer, trace, strata })
}

fn labels(samples: &[InstanceSample]) -> ntmp_core::Result<Vec<Label>> {
    samples.iter().map(|s| s.label.ok_or(ntmp_core::Error::MissingLabel)).collect()
}

pub fn evaluate(scorer: &Scorer, test: &[InstanceSample], val: &[InstanceSample]) -> ntmp_core::Result<MetricReport> {
    metric_report(&scorer.scores(test)?, &labels(test)?, &scorer.scores(val)?, &labels(val)?)
}

fn protocol(cfg: &ExperimentConfig) -> Option<PriorProtocolConfig> {
    match &cfg.prior {
        PriorConfig::Known { .. } => None,
        PriorConfig::Estimated {
            pi_init,
            proxy_fraction,
            score_model,
            mpe,
        } => Some(PriorProtocolConfig {
            pi_init: *pi_init,
            train: cfg.train.clone(),
            score_model: *score_model,
            mpe: *mpe,
            proxy_fraction: *proxy_fraction,
        }),
    }
}

/// The prior the trainers use for one seed, with the estimate when the
/// regime is `estimated`.
pub fn resolve_prior(cfg: &ExperimentConfig, data: &Data, seed: u64) -> Result<(f64, Option<PriorEstimate>)> {
    match (&cfg.prior, protocol(cfg)) {
        (PriorConfig::Known { pi: Some(p) }, _) => Ok((*p, None)),
        (PriorConfig::Known { pi: None }, _) => match &cfg.task {
            TaskConfig::Gaussian(g) => Ok((g.prior_pi, None)),
            _ => Err(Error::Config("prior.pi is required unless the task is gaussian".into())),
        },
        (_, Some(proto)) => {
            let pool = pool(data, proto.pi_init, PriorSource::Estimated)?;
            let est = estimate_prior(&data.tuples, &pool, &cfg.loss(), &proto, RngSeed(seed).derive(STREAM_PRIOR))?;
            Ok((est.pi_hat, Some(est)))
        }
        _ => unreachable!("estimated regime always has a protocol"),
    }
}

fn provenance(cfg: &ExperimentConfig, seed: impl ToString) -> Provenance {
    Provenance::new(&cfg.hash(), seed)
}

/// Writes tuple files, the audit sidecar and the pools of every seed to
/// `<out>/data/seed-<s>/`. Gaussian and CSV tasks only.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    if matches!(cfg.task, TaskConfig::Files { .. }) {
        return Err(Error::Config("gen needs a gaussian or csv task".into()));
    }
    let mut all = Vec::new();
    for &seed in &cfg.seeds {
        all.push((seed, prepare(cfg, seed)?));
    }
    let mut written = Vec::new();
    for (seed, d) in all {
        let dir = cfg.output_dir().join("data").join(format!("seed-{seed}"));
        let prov = provenance(cfg, seed);
        let audit = d.audit.clone().unwrap_or_default();
        let files = [
            dir.join(TUPLES_FILE),
            dir.join(TUPLE_INSTANCES_FILE),
            dir.join(AUDIT_FILE),
            dir.join(UNLABELED_FILE),
            dir.join(TEST_FILE),
            dir.join(VAL_FILE),
        ];
        io::write_tuple_files(&d.tuples, &audit, &prov, &files[0], &files[1], &files[2])?;
        io::write_text(&files[3], &io::pool_csv_string(&d.unlabeled, false, &prov))?;
        io::write_text(&files[4], &io::pool_csv_string(&d.test, true, &prov))?;
        io::write_text(&files[5], &io::pool_csv_string(&d.val, true, &prov))?;
        written.extend(files);
    }
    Ok(written)
}

/// All (method, seed) runs in config order, with their traces and scorers.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<(RunRecord, Fit)>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let data = prepare(cfg, seed)?;
        let (pi, _) = resolve_prior(cfg, &data, seed)?;
        for &method in &cfg.methods {
            let f = fit(cfg, method, &data.tuples, &data, pi, RngSeed(seed))?;
            let report = evaluate(&f.scorer, &data.test, &data.val)?;
            out.push((
                RunRecord {
                    method,
                    seed,
                    pi,
                    alpha: data.tuples.effective_alpha(),
                    strata: f.strata,
                    report,
                },
                f,
            ));
        }
    }
    // canonical order: method as listed, then seed as listed
    let rank = |m: Method| cfg.methods.iter().position(|x| *x == m).unwrap_or(usize::MAX);
    out.sort_by_key(|(r, _)| (rank(r.method), cfg.seeds.iter().position(|s| *s == r.seed)));
    Ok(out)
}

fn traces_csv(runs: &[(RunRecord, Fit)], prov: &Provenance) -> String {
    let mut rows = Vec::new();
    for (r, f) in runs {
        for e in &f.trace.epochs {
            rows.push(vec![
                r.method.name().to_string(),
                r.seed.to_string(),
                e.epoch.to_string(),
                fmt_f64(e.risk_unclamped),
                fmt_f64(e.risk_clamped),
            ]);
        }
    }
    io::csv_string(prov, &["method", "seed", "epoch", "risk_unclamped", "risk_clamped"], &rows)
}

/// Trains every method for every seed; writes `metrics.csv`, `reports.json`,
/// `traces.csv`, `summary.csv`, `significance.csv` and one scorer per run.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let runs = run_all(cfg)?;
    let out = cfg.output_dir();
    let prov = provenance(cfg, cfg.seeds_label());
    let records: Vec<RunRecord> = runs.iter().map(|(r, _)| r.clone()).collect();
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let p = out.join(name);
        io::write_text(&p, &text)?;
        written.push(p);
        Ok(())
    };
    put("metrics.csv", report::metrics_csv(&records, &prov))?;
    put("summary.csv", report::summary_csv(&records, &prov))?;
    put("significance.csv", report::significance_csv(&records, &prov)?)?;
    put("traces.csv", traces_csv(&runs, &prov))?;
    let json: Vec<serde_json::Value> = records
        .iter()
        .map(|r| {
            serde_json::json!({
                "method": r.method.name(),
                "seed": r.seed,
                "pi": r.pi,
                "alpha": r.alpha,
                "strata": r.strata,
                "report": r.report,
            })
        })
        .collect();
    put("reports.json", serde_json::to_string_pretty(&json).expect("json values") + "\n")?;
    for (r, f) in &runs {
        let name = format!("scorers/{}-seed{}.json", r.method.name(), r.seed);
        put(&name, serde_json::to_string_pretty(&f.scorer).expect("scorer") + "\n")?;
    }
    Ok(written)
}

/// Regenerates `summary.csv` and `significance.csv` from `metrics.csv`.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = cfg.output_dir();
    let path = out.join("metrics.csv");
    let text = std::fs::read_to_string(&path).map_err(crate::error::io_err(&path))?;
    let (prov, records) = report::parse_metrics_csv(&text, &path)?;
    let s = out.join("summary.csv");
    let g = out.join("significance.csv");
    io::write_text(&s, &report::summary_csv(&records, &prov))?;
    io::write_text(&g, &report::significance_csv(&records, &prov)?)?;
    Ok(vec![s, g])
}

/// Runs the prior protocol for every seed; writes `prior_estimates.csv`.
pub fn cmd_estimate_prior(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let proto = protocol(cfg).ok_or_else(|| Error::Config("estimate-prior needs prior.regime = \"estimated\"".into()))?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let data = prepare(cfg, seed)?;
        let pool = pool(&data, proto.pi_init, PriorSource::Estimated)?;
        let e = estimate_prior(&data.tuples, &pool, &cfg.loss(), &proto, RngSeed(seed).derive(STREAM_PRIOR))?;
        rows.push(vec![
            seed.to_string(),
            fmt_f64(e.pi_hat),
            fmt_f64(e.ci_low),
            fmt_f64(e.ci_high),
            fmt_f64(e.np_lower_bound),
            fmt_f64(e.lb_ci.0),
            fmt_f64(e.lb_ci.1),
            fmt_f64(e.bandwidth),
            io::fmt_opt(data.task.as_ref().map(|t| t.prior_pi)),
        ]);
    }
    let header = [
        "seed",
        "pi_hat",
        "ci_low",
        "ci_high",
        "np_lower_bound",
        "np_lb_ci_low",
        "np_lb_ci_high",
        "bandwidth",
        "pi_true",
    ];
    let p = cfg.output_dir().join("prior_estimates.csv");
    io::write_csv(&p, &provenance(cfg, cfg.seeds_label()), &header, &rows)?;
    Ok(vec![p])
}

fn as_ill(e: ntmp_core::Error) -> ntmp_core::Error {
    match e {
        ntmp_core::Error::UnsplittableDegenerate => ntmp_core::Error::IllConditioned { gap: 0.0 },
        other => other,
    }
}

fn is_ill(e: &ntmp_core::Error) -> bool {
    matches!(e, ntmp_core::Error::IllConditioned { .. } | ntmp_core::Error::UnsplittableDegenerate)
}

/// The sweep and its window on the data of the first seed; every grid point
/// trains with `len(seeds)` seeds.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(SweepResult, RobustWindow)> {
    let sc = cfg.sweep.clone().ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    if !MetricReport::COLUMNS.contains(&sc.metric.as_str()) {
        return Err(Error::Config(format!("unknown sweep metric {:?}", sc.metric)));
    }
    let seed0 = cfg.seeds[0];
    let data = prepare(cfg, seed0)?;
    let (center, _) = resolve_prior(cfg, &data, seed0)?;
    let spec = SweepSpec {
        deltas: sc.deltas.clone(),
        n_seeds: cfg.seeds.len(),
        bootstrap_b: sc.bootstrap_b,
        metric_name: sc.metric.clone(),
    };
    let sweep = delta_sweep(center, &spec, RngSeed(seed0), |pi, seed| {
        let f = fit(cfg, sc.method, &data.tuples, &data, pi, seed).map_err(as_ill)?;
        let r = evaluate(&f.scorer, &data.test, &data.val)?;
        Ok(r.get(&sc.metric).expect("metric checked above"))
    })?;
    let window = robustness_window(&sweep, sc.epsilon, sc.w_star)?;
    Ok((sweep, window))
}

/// Writes `sweep_rows.csv`, `sweep_aggregate.csv` and `window.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (sweep, window) = run_sweep(cfg)?;
    let prov = provenance(cfg, cfg.seeds_label());
    let out = cfg.output_dir();
    let files = [out.join("sweep_rows.csv"), out.join("sweep_aggregate.csv"), out.join("window.json")];
    io::write_text(&files[0], &report::sweep_rows_csv(&sweep, &prov))?;
    io::write_text(&files[1], &report::sweep_aggregate_csv(&sweep, &window, &prov))?;
    io::write_text(&files[2], &report::window_json(&window))?;
    Ok(files.to_vec())
}

fn perturb_run(
    family: &'static str,
    param: f64,
    seed: u64,
    r: ntmp_core::Result<MetricReport>,
) -> Result<PerturbRun> {
    match r {
        Ok(rep) => Ok(PerturbRun {
            family,
            param,
            seed,
            report: Some(rep),
        }),
        Err(e) if is_ill(&e) => Ok(PerturbRun {
            family,
            param,
            seed,
            report: None,
        }),
        Err(e) => Err(e.into()),
    }
}

/// The three perturbation families: relative prior error, count flips, and
/// (Gaussian tasks) the true pool prior swept across the tuple rate.
pub fn run_perturb(cfg: &ExperimentConfig) -> Result<Vec<PerturbRun>> {
    let pc = cfg.perturb.clone().ok_or_else(|| Error::Config("perturb needs a [perturb] section".into()))?;
    let method = pc.method;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let s = RngSeed(seed);
        let data = prepare(cfg, seed)?;
        let (pi, _) = resolve_prior(cfg, &data, seed)?;
        for &e in &pc.prior_noise {
            let p = pi * (1.0 + e);
            if !(p > 0.0 && p < 1.0) {
                continue;
            }
            let r = fit(cfg, method, &data.tuples, &data, p, s).and_then(|f| evaluate(&f.scorer, &data.test, &data.val));
            runs.push(perturb_run("prior_noise", e, seed, r)?);
        }
        for (k, &q) in pc.flip_probs.iter().enumerate() {
            let noisy = corrupt_counts(&data.tuples, q, s.derive(STREAM_FLIP + k as u64))?;
            let r = fit(cfg, method, &noisy, &data, pi, s).and_then(|f| evaluate(&f.scorer, &data.test, &data.val));
            runs.push(perturb_run("count_flip", q, seed, r)?);
        }
        if let TaskConfig::Gaussian(g) = &cfg.task {
            for &p in &pc.pi_grid {
                if !(p > 0.0 && p < 1.0) {
                    continue;
                }
                let mut task = g.spec()?;
                task.prior_pi = p;
                let n_u = g.n_unlabeled.unwrap_or(data.tuples.total_instances());
                let [unlabeled, test, val] = gaussian_pools(&task, n_u, g.n_test, g.n_val, s)?;
                let shifted = Data {
                    unlabeled,
                    test,
                    val,
                    task: Some(task),
                    ..data.clone()
                };
                let r = fit(cfg, method, &shifted.tuples, &shifted, p, s)
                    .and_then(|f| evaluate(&f.scorer, &shifted.test, &shifted.val));
                runs.push(perturb_run("pi_grid", p, seed, r)?);
            }
        }
    }
    // canonical order: family, then parameter as configured, then seed
    let fam = |f: &str| ["prior_noise", "count_flip", "pi_grid"].iter().position(|x| *x == f);
    runs.sort_by(|a, b| {
        fam(a.family)
            .cmp(&fam(b.family))
            .then(param_rank(&pc, a).cmp(&param_rank(&pc, b)))
            .then(cfg.seeds.iter().position(|s| *s == a.seed).cmp(&cfg.seeds.iter().position(|s| *s == b.seed)))
    });
    Ok(runs)
}

fn param_rank(pc: &crate::config::PerturbConfig, r: &PerturbRun) -> Option<usize> {
    let list = match r.family {
        "prior_noise" => &pc.prior_noise,
        "count_flip" => &pc.flip_probs,
        _ => &pc.pi_grid,
    };
    list.iter().position(|v| *v == r.param)
}

/// Writes `perturb.csv` (aggregates) and `perturb_runs.csv`.
pub fn cmd_perturb(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let runs = run_perturb(cfg)?;
    let prov = provenance(cfg, cfg.seeds_label());
    let out = cfg.output_dir();
    let files = [out.join("perturb.csv"), out.join("perturb_runs.csv")];
    io::write_text(&files[0], &report::perturb_csv(&runs, &prov))?;
    io::write_text(&files[1], &report::perturb_runs_csv(&runs, &prov))?;
    Ok(files.to_vec())
}
