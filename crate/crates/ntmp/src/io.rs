//! On-disk formats: instance CSVs, tuple JSON-lines with an instance
//! sidecar, the audit sidecar, and provenance-stamped result tables.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use ntmp_core::data::{InstanceSample, Label, TupleAudit, TupleDataset, TupleRecord};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// Provenance stamped as the first line of every CSV we write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: String,
}

impl Provenance {
    pub fn new(config_hash: &str, seed: impl ToString) -> Self {
        Provenance {
            config_hash: config_hash.to_string(),
            seed: seed.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!("# config_sha256={} seed={}", self.config_hash, self.seed)
    }
}

/// Shortest round-trip decimal; NaN becomes an empty cell.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Serializes a table to CSV text: provenance comment, header, rows.
pub fn csv_string(prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells");
    format!("{}\n{body}", prov.line())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &csv_string(prov, header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn open(path: &Path) -> Result<String> {
    let mut s = String::new();
    fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_string(&mut s)
        .map_err(io_err(path))?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    PlusMinus,
    ZeroOne,
}

fn parse_label(raw: &str) -> Option<(Label, Option<Encoding>)> {
    match raw.trim() {
        "+1" | "1" | "1.0" | "+1.0" => Some((Label::Positive, None)),
        "-1" | "-1.0" => Some((Label::Negative, Some(Encoding::PlusMinus))),
        "0" | "0.0" => Some((Label::Negative, Some(Encoding::ZeroOne))),
        _ => None,
    }
}

/// Parses an instance CSV. The header row is optional and detected by a
/// non-numeric first record; when labels are expected, the last column
/// holds them (named `label` if there is a header) as `+1/-1` or `1/0`.
/// Lines starting with `#` are comments. Row numbers in errors are 1-based
/// file lines.
pub fn parse_pool_csv(text: &str, has_labels: bool, path: &Path) -> Result<Vec<InstanceSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    let mut arity: Option<usize> = None;
    let mut encoding: Option<Encoding> = None;
    let perr = |row: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        msg,
    };
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let row = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let fields: Vec<&str> = rec.iter().collect();
        let n_feat = if has_labels { fields.len().saturating_sub(1) } else { fields.len() };
        let feats: std::result::Result<Vec<f64>, _> = fields[..n_feat].iter().map(|c| c.parse::<f64>()).collect();
        let is_first = samples.is_empty() && arity.is_none();
        if is_first && (feats.is_err() || (has_labels && parse_label(fields[fields.len() - 1]).is_none())) {
            // header row
            if has_labels && fields.last().map(|c| c.to_ascii_lowercase()) != Some("label".into()) {
                return Err(perr(row, "label column must be last and named \"label\"".into()));
            }
            arity = Some(fields.len());
            continue;
        }
        match arity {
            Some(a) if a != fields.len() => {
                return Err(perr(row, format!("expected {a} columns, found {}", fields.len())));
            }
            None => arity = Some(fields.len()),
            _ => {}
        }
        if n_feat == 0 {
            return Err(perr(row, "no feature columns".into()));
        }
        let feats = feats.map_err(|_| {
            let bad = fields[..n_feat].iter().find(|c| c.parse::<f64>().is_err()).unwrap();
            perr(row, format!("non-numeric feature {bad:?}"))
        })?;
        if feats.iter().any(|v| !v.is_finite()) {
            return Err(perr(row, "non-finite feature".into()));
        }
        if has_labels {
            let raw = fields[fields.len() - 1];
            let (label, enc) = parse_label(raw).ok_or_else(|| perr(row, format!("unknown label {raw:?}")))?;
            if let Some(e) = enc {
                if encoding.is_some_and(|prev| prev != e) {
                    return Err(perr(row, "labels mix the -1 and 0 encodings".into()));
                }
                encoding = Some(e);
            }
            samples.push(InstanceSample::labeled(feats, label));
        } else {
            samples.push(InstanceSample::unlabeled(feats));
        }
    }
    if samples.is_empty() {
        return Err(Error::NoRows { path: path.to_path_buf() });
    }
    Ok(samples)
}

pub fn read_pool_csv(path: &Path, has_labels: bool) -> Result<Vec<InstanceSample>> {
    parse_pool_csv(&open(path)?, has_labels, path)
}

/// Header `x0..x{d-1}` plus `label` when every sample carries one.
pub fn pool_csv_string(samples: &[InstanceSample], with_labels: bool, prov: &Provenance) -> String {
    let d = samples.first().map_or(0, InstanceSample::dim);
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    if with_labels {
        header.push("label".into());
    }
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            let mut r: Vec<String> = s.features.iter().map(|v| fmt_f64(*v)).collect();
            if with_labels {
                r.push(match s.label {
                    Some(Label::Positive) => "1".into(),
                    Some(Label::Negative) => "-1".into(),
                    None => String::new(),
                });
            }
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_string(prov, &h, &rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleLine {
    pub n: usize,
    pub m: usize,
    pub instance_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLine {
    pub tuple: usize,
    pub labels: Vec<i8>,
}

/// Tuple files as text: `(tuples.jsonl, instances.csv, audit.jsonl)`.
/// Instance indices are renumbered in order of first use so each distinct
/// source instance is stored once.
pub fn tuple_files(dataset: &TupleDataset, audit: &TupleAudit, prov: &Provenance) -> (String, String, String) {
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut stored: Vec<InstanceSample> = Vec::new();
    let mut lines = String::new();
    for t in dataset.tuples() {
        let idx: Vec<usize> = t
            .indices()
            .iter()
            .zip(t.instances())
            .map(|(&src, inst)| {
                *remap.entry(src).or_insert_with(|| {
                    stored.push(InstanceSample::unlabeled(inst.features.clone()));
                    stored.len() - 1
                })
            })
            .collect();
        let line = TupleLine {
            n: t.n(),
            m: t.m(),
            instance_indices: idx,
        };
        lines.push_str(&serde_json::to_string(&line).expect("plain struct"));
        lines.push('\n');
    }
    let mut audit_text = String::new();
    for (i, labels) in audit.labels.iter().enumerate() {
        let line = AuditLine {
            tuple: i,
            labels: labels.iter().map(|l| if l.is_positive() { 1 } else { -1 }).collect(),
        };
        audit_text.push_str(&serde_json::to_string(&line).expect("plain struct"));
        audit_text.push('\n');
    }
    (lines, pool_csv_string(&stored, false, prov), audit_text)
}

pub fn write_tuple_files(
    dataset: &TupleDataset,
    audit: &TupleAudit,
    prov: &Provenance,
    tuples_path: &Path,
    instances_path: &Path,
    audit_path: &Path,
) -> Result<()> {
    let (t, i, a) = tuple_files(dataset, audit, prov);
    write_text(tuples_path, &t)?;
    write_text(instances_path, &i)?;
    write_text(audit_path, &a)
}

pub fn parse_tuples(text: &str, instances: &[InstanceSample], path: &Path) -> Result<TupleDataset> {
    let mut tuples = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let row = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            msg,
        };
        let t: TupleLine = serde_json::from_str(line).map_err(|e| perr(e.to_string()))?;
        if t.instance_indices.len() != t.n {
            return Err(perr(format!("n = {} but {} indices", t.n, t.instance_indices.len())));
        }
        if t.m > t.n {
            return Err(perr(format!("m = {} exceeds n = {}", t.m, t.n)));
        }
        let mut inst = Vec::with_capacity(t.n);
        for &i in &t.instance_indices {
            let s = instances
                .get(i)
                .ok_or_else(|| perr(format!("instance index {i} out of range ({} stored)", instances.len())))?;
            inst.push(InstanceSample::unlabeled(s.features.clone()));
        }
        tuples.push(TupleRecord::with_indices(inst, t.m, t.instance_indices).map_err(|e| perr(e.to_string()))?);
    }
    if tuples.is_empty() {
        return Err(Error::NoRows { path: path.to_path_buf() });
    }
    Ok(TupleDataset::new(tuples)?)
}

pub fn read_tuples(tuples_path: &Path, instances_path: &Path) -> Result<TupleDataset> {
    let instances = read_pool_csv(instances_path, false)?;
    parse_tuples(&open(tuples_path)?, &instances, tuples_path)
}

pub fn read_audit(path: &Path) -> Result<TupleAudit> {
    let text = open(path)?;
    let mut audit = TupleAudit::default();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let a: AuditLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: k + 1,
            msg: e.to_string(),
        })?;
        audit.labels.push(a.labels.iter().map(|&v| if v > 0 { Label::Positive } else { Label::Negative }).collect());
    }
    Ok(audit)
}
