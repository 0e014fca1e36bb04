//! Pure table builders shared by `train`, `sweep`, `perturb` and `report`.

use std::path::Path;

use ntmp_core::eval::{
    cliffs_delta, holm_adjust, mean_std, wilcoxon_signed_rank, MetricReport, RobustWindow, SweepResult,
};

use crate::config::Method;
use crate::error::{Error, Result};
use crate::io::{csv_string, fmt_f64, Provenance};

/// One (method, seed) training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub pi: f64,
    pub alpha: f64,
    pub strata: usize,
    pub report: MetricReport,
}

pub const RUN_KEYS: [&str; 5] = ["method", "seed", "pi", "alpha", "strata"];

pub const SIGNIFICANCE_COLUMNS: [&str; 7] = ["method", "AP", "AUROC", "ECE_TS", "Brier_TS", "p_Holm", "Cliff's δ"];

/// Reference row of the significance table.
pub const REFERENCE: Method = Method::NtmpUre;

pub fn metrics_csv(records: &[RunRecord], prov: &Provenance) -> String {
    let mut header: Vec<&str> = RUN_KEYS.to_vec();
    header.extend(MetricReport::COLUMNS);
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.method.name().to_string(),
                r.seed.to_string(),
                fmt_f64(r.pi),
                fmt_f64(r.alpha),
                r.strata.to_string(),
            ];
            row.extend(r.report.values().iter().map(|v| fmt_f64(*v)));
            row
        })
        .collect();
    csv_string(prov, &header, &rows)
}

fn cell(v: &str) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.parse().unwrap_or(f64::NAN)
    }
}

/// Inverse of [`metrics_csv`]; also returns the provenance line it carried.
pub fn parse_metrics_csv(text: &str, path: &Path) -> Result<(Provenance, Vec<RunRecord>)> {
    let perr = |row: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        msg,
    };
    let first = text.lines().next().unwrap_or_default();
    let prov = first
        .strip_prefix("# config_sha256=")
        .and_then(|rest| rest.split_once(" seed="))
        .map(|(h, s)| Provenance::new(h, s))
        .ok_or_else(|| perr(1, "missing provenance line".into()))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| perr(2, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected: Vec<&str> = RUN_KEYS.iter().chain(MetricReport::COLUMNS.iter()).copied().collect();
    if header != expected {
        return Err(perr(2, "unexpected metrics header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let method = Method::parse(&rec[0]).ok_or_else(|| perr(row, format!("unknown method {:?}", &rec[0])))?;
        let seed = rec[1].parse().map_err(|_| perr(row, "bad seed".into()))?;
        let strata = rec[4].parse().map_err(|_| perr(row, "bad strata".into()))?;
        let v: Vec<f64> = (5..18).map(|i| cell(&rec[i])).collect();
        out.push(RunRecord {
            method,
            seed,
            pi: cell(&rec[2]),
            alpha: cell(&rec[3]),
            strata,
            report: MetricReport {
                accuracy: v[0],
                tpr: v[1],
                fpr: v[2],
                precision: v[3],
                f1: v[4],
                macro_f1: v[5],
                ap: v[6],
                auroc: v[7],
                ece: v[8],
                brier: v[9],
                ece_ts: v[10],
                brier_ts: v[11],
                temperature: v[12],
            },
        });
    }
    if out.is_empty() {
        return Err(Error::NoRows { path: path.to_path_buf() });
    }
    Ok((prov, out))
}

fn methods_in_order(records: &[RunRecord]) -> Vec<Method> {
    let mut ms: Vec<Method> = Vec::new();
    for r in records {
        if !ms.contains(&r.method) {
            ms.push(r.method);
        }
    }
    ms
}

fn column(records: &[RunRecord], m: Method, f: fn(&MetricReport) -> f64) -> Vec<(u64, f64)> {
    records.iter().filter(|r| r.method == m).map(|r| (r.seed, f(&r.report))).collect()
}

fn mean_of(v: &[(u64, f64)]) -> f64 {
    let xs: Vec<f64> = v.iter().map(|p| p.1).collect();
    mean_std(&xs).0
}

/// Per-method means of the ranking and calibrated metrics, with the
/// Holm-adjusted paired Wilcoxon p-value (on AP, paired by seed) and Cliff's
/// delta (positive favors the row method) against the URE row. Returns the
/// rows and, when there is nothing to compare, a note.
pub fn significance_rows(records: &[RunRecord]) -> Result<(Vec<Vec<String>>, Option<String>)> {
    let methods = methods_in_order(records);
    if methods.len() < 2 {
        return Ok((Vec::new(), Some("single method, nothing to compare".into())));
    }
    if !methods.contains(&REFERENCE) {
        return Ok((Vec::new(), Some(format!("no {} runs to compare against", REFERENCE.name()))));
    }
    let ref_ap = column(records, REFERENCE, |r| r.ap);
    let others: Vec<Method> = methods.iter().copied().filter(|m| *m != REFERENCE).collect();
    let mut raw_p = Vec::new();
    let mut deltas = Vec::new();
    for &m in &others {
        let ap = column(records, m, |r| r.ap);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (seed, v) in &ap {
            if let Some((_, r)) = ref_ap.iter().find(|(s, _)| s == seed) {
                a.push(*v);
                b.push(*r);
            }
        }
        raw_p.push(if a.is_empty() { 1.0 } else { wilcoxon_signed_rank(&a, &b)?.p_value });
        let xs: Vec<f64> = ap.iter().map(|p| p.1).collect();
        let ys: Vec<f64> = ref_ap.iter().map(|p| p.1).collect();
        deltas.push(cliffs_delta(&xs, &ys)?.delta);
    }
    let holm = holm_adjust(&raw_p)?;
    let rows = methods
        .iter()
        .map(|&m| {
            let mut row = vec![
                m.name().to_string(),
                fmt_f64(mean_of(&column(records, m, |r| r.ap))),
                fmt_f64(mean_of(&column(records, m, |r| r.auroc))),
                fmt_f64(mean_of(&column(records, m, |r| r.ece_ts))),
                fmt_f64(mean_of(&column(records, m, |r| r.brier_ts))),
            ];
            match others.iter().position(|o| *o == m) {
                Some(k) => {
                    row.push(fmt_f64(holm[k]));
                    row.push(fmt_f64(deltas[k]));
                }
                None => {
                    row.push("--".into());
                    row.push("--".into());
                }
            }
            row
        })
        .collect();
    Ok((rows, None))
}

pub fn significance_csv(records: &[RunRecord], prov: &Provenance) -> Result<String> {
    let (rows, note) = significance_rows(records)?;
    let body = csv_string(prov, &SIGNIFICANCE_COLUMNS, &rows);
    Ok(match note {
        Some(n) => {
            let (first, rest) = body.split_once('\n').expect("provenance line");
            format!("{first}\n# note: {n}\n{rest}")
        }
        None => body,
    })
}

/// Mean and standard deviation of every metric per method.
pub fn summary_csv(records: &[RunRecord], prov: &Provenance) -> String {
    let mut rows = Vec::new();
    for m in methods_in_order(records) {
        let reps: Vec<&MetricReport> = records.iter().filter(|r| r.method == m).map(|r| &r.report).collect();
        for (k, name) in MetricReport::COLUMNS.iter().enumerate() {
            let xs: Vec<f64> = reps.iter().map(|r| r.values()[k]).collect();
            let (mean, std) = mean_std(&xs);
            rows.push(vec![
                m.name().to_string(),
                name.to_string(),
                xs.len().to_string(),
                fmt_f64(mean),
                fmt_f64(std),
            ]);
        }
    }
    csv_string(prov, &["method", "metric", "n", "mean", "std"], &rows)
}

pub const AGGREGATE_COLUMNS: [&str; 10] = [
    "delta",
    "pi",
    "mean",
    "std",
    "ci_low",
    "ci_high",
    "ci_width",
    "ill_conditioned",
    "in_window",
    "delta_crit",
];

/// Aggregate sweep table with the robustness window and the critical
/// offset flagged per row.
pub fn sweep_aggregate_csv(sweep: &SweepResult, window: &RobustWindow, prov: &Provenance) -> String {
    let rows: Vec<Vec<String>> = sweep
        .points
        .iter()
        .map(|p| {
            let in_window = p.delta >= window.delta_min && p.delta <= window.delta_max;
            let crit = window.delta_crit.is_some_and(|c| p.delta.abs() == c);
            vec![
                fmt_f64(p.delta),
                fmt_f64(p.pi),
                fmt_f64(p.mean),
                fmt_f64(p.std),
                fmt_f64(p.ci_low),
                fmt_f64(p.ci_high),
                fmt_f64(p.ci_width()),
                p.ill_conditioned.to_string(),
                in_window.to_string(),
                crit.to_string(),
            ]
        })
        .collect();
    csv_string(prov, &AGGREGATE_COLUMNS, &rows)
}

pub fn sweep_rows_csv(sweep: &SweepResult, prov: &Provenance) -> String {
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| vec![fmt_f64(r.delta), fmt_f64(r.pi), r.seed.to_string(), fmt_f64(r.metric)])
        .collect();
    csv_string(prov, &["delta", "pi", "seed", sweep.metric_name.as_str()], &rows)
}

pub fn window_json(window: &RobustWindow) -> String {
    let mut s = serde_json::to_string_pretty(window).expect("plain struct");
    s.push('\n');
    s
}

/// One perturbation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbRun {
    pub family: &'static str,
    pub param: f64,
    pub seed: u64,
    /// `None` when the mixing system was ill-conditioned.
    pub report: Option<MetricReport>,
}

pub const PERTURB_COLUMNS: [&str; 12] = [
    "family",
    "param",
    "n_runs",
    "cor",
    "cor_std",
    "tpr",
    "tpr_std",
    "fpr",
    "fpr_std",
    "f1",
    "f1_std",
    "ill_conditioned",
];

/// Mean and std of COR (accuracy), TPR, FPR and F1 per (family, param), in
/// run order.
pub fn perturb_csv(runs: &[PerturbRun], prov: &Provenance) -> String {
    let mut keys: Vec<(&'static str, f64)> = Vec::new();
    for r in runs {
        if !keys.iter().any(|k| k.0 == r.family && k.1 == r.param) {
            keys.push((r.family, r.param));
        }
    }
    let rows: Vec<Vec<String>> = keys
        .iter()
        .map(|&(fam, param)| {
            let group: Vec<&PerturbRun> = runs.iter().filter(|r| r.family == fam && r.param == param).collect();
            let ok: Vec<&MetricReport> = group.iter().filter_map(|r| r.report.as_ref()).collect();
            let ill = ok.len() < group.len();
            let mut row = vec![fam.to_string(), fmt_f64(param), ok.len().to_string()];
            for f in [
                |r: &MetricReport| r.accuracy,
                |r: &MetricReport| r.tpr,
                |r: &MetricReport| r.fpr,
                |r: &MetricReport| r.f1,
            ] {
                if ok.is_empty() {
                    row.push(String::new());
                    row.push(String::new());
                } else {
                    let xs: Vec<f64> = ok.iter().map(|r| f(r)).collect();
                    let (m, s) = mean_std(&xs);
                    row.push(fmt_f64(m));
                    row.push(fmt_f64(s));
                }
            }
            row.push(ill.to_string());
            row
        })
        .collect();
    csv_string(prov, &PERTURB_COLUMNS, &rows)
}

pub fn perturb_runs_csv(runs: &[PerturbRun], prov: &Provenance) -> String {
    let mut header = vec!["family", "param", "seed", "ill_conditioned"];
    header.extend(MetricReport::COLUMNS);
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let mut row = vec![
                r.family.to_string(),
                fmt_f64(r.param),
                r.seed.to_string(),
                r.report.is_none().to_string(),
            ];
            match &r.report {
                Some(rep) => row.extend(rep.values().iter().map(|v| fmt_f64(*v))),
                None => row.extend(std::iter::repeat(String::new()).take(MetricReport::COLUMNS.len())),
            }
            row
        })
        .collect();
    csv_string(prov, &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(ap: f64) -> MetricReport {
        MetricReport {
            accuracy: 0.8,
            tpr: 0.8,
            fpr: 0.2,
            precision: 0.8,
            f1: 0.8,
            macro_f1: 0.8,
            ap,
            auroc: 0.9,
            ece: 0.05,
            brier: 0.1,
            ece_ts: 0.04,
            brier_ts: 0.09,
            temperature: 1.1,
        }
    }

    fn records(methods: &[Method], seeds: u64) -> Vec<RunRecord> {
        let mut out = Vec::new();
        for (k, &m) in methods.iter().enumerate() {
            for s in 0..seeds {
                out.push(RunRecord {
                    method: m,
                    seed: s,
                    pi: 0.5,
                    alpha: 1.0 / 3.0,
                    strata: 1,
                    report: rep(0.7 + 0.05 * k as f64 + 0.001 * s as f64),
                });
            }
        }
        out
    }

    #[test]
    fn two_methods_five_seeds() {
        let recs = records(&[Method::NtmpUre, Method::NtmpAbs], 5);
        let (rows, note) = significance_rows(&recs).unwrap();
        assert!(note.is_none());
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][5], "--");
        // five all-positive differences: exact p = 2/32, one comparison
        assert_eq!(rows[1][5], "0.0625");
        assert_eq!(rows[1][6], "1");
        let prov = Provenance::new("h", "0,1,2,3,4");
        let text = metrics_csv(&recs, &prov);
        assert_eq!(text.lines().count(), 12);
        let (p, back) = parse_metrics_csv(&text, Path::new("m.csv")).unwrap();
        assert_eq!(p, prov);
        assert_eq!(back, recs);
    }

    #[test]
    fn single_method_table_is_empty_with_note() {
        let recs = records(&[Method::NtmpAbs], 3);
        let text = significance_csv(&recs, &Provenance::new("h", "0")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("# note:"));
        assert_eq!(lines[2], "method,AP,AUROC,ECE_TS,Brier_TS,p_Holm,Cliff's δ");
    }
}
