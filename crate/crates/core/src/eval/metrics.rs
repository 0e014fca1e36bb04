use alloc::vec::Vec;

use crate::data::Label;
use crate::special::sigmoid;
use crate::{Error, Result};

use super::calibration::{brier, ece, temperature_scale, DEFAULT_ECE_BINS};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub f1: f64,
    pub macro_f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    if a == 0 {
        return Err(Error::Empty("evaluation set"));
    }
    Ok(())
}

/// Zero denominators give 0 (precision without predicted positives, F1 with
/// zero precision and recall, rates of an absent class).
pub fn confusion_metrics(predictions: &[Label], labels: &[Label]) -> Result<Confusion> {
    check_lengths(predictions.len(), labels.len())?;
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (p, y) in predictions.iter().zip(labels) {
        match (p.is_positive(), y.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    let tpr = ratio(tp, tp + fneg);
    let precision = ratio(tp, tp + fp);
    let f1 = f1_of(precision, tpr);
    let f1_neg = f1_of(ratio(tn, tn + fneg), ratio(tn, tn + fp));
    Ok(Confusion {
        accuracy: ratio(tp + tn, labels.len()),
        tpr,
        fpr: ratio(fp, fp + tn),
        precision,
        f1,
        macro_f1: 0.5 * (f1 + f1_neg),
    })
}

fn descending(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(idx)
}

/// Step-wise average precision over the descending-score sweep; tied scores
/// enter as one group.
pub fn average_precision(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    if n_pos == 0 {
        return Err(Error::InsufficientClass {
            class: "positive",
            needed: 1,
            available: 0,
        });
    }
    let idx = descending(scores)?;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        let mut group_tp = 0;
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == s {
            if labels[idx[j]].is_positive() {
                group_tp += 1;
            }
            j += 1;
        }
        seen += j - i;
        tp += group_tp;
        if group_tp > 0 {
            ap += (group_tp as f64 / n_pos as f64) * (tp as f64 / seen as f64);
        }
        i = j;
    }
    Ok(ap)
}

/// Mann-Whitney AUROC with ties counted one half.
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InsufficientClass {
            class: if n_pos == 0 { "positive" } else { "negative" },
            needed: 1,
            available: 0,
        });
    }
    let mut idx = descending(scores)?;
    idx.reverse();
    // midranks, 1-based, ascending
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            if labels[k].is_positive() {
                rank_sum_pos += mid;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub f1: f64,
    pub macro_f1: f64,
    pub ap: f64,
    pub auroc: f64,
    pub ece: f64,
    pub brier: f64,
    pub ece_ts: f64,
    pub brier_ts: f64,
    pub temperature: f64,
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 13] = [
        "accuracy",
        "tpr",
        "fpr",
        "precision",
        "f1",
        "macro_f1",
        "ap",
        "auroc",
        "ece",
        "brier",
        "ece_ts",
        "brier_ts",
        "temperature",
    ];

    pub fn values(&self) -> [f64; 13] {
        [
            self.accuracy,
            self.tpr,
            self.fpr,
            self.precision,
            self.f1,
            self.macro_f1,
            self.ap,
            self.auroc,
            self.ece,
            self.brier,
            self.ece_ts,
            self.brier_ts,
            self.temperature,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::COLUMNS.iter().position(|c| *c == name).map(|i| self.values()[i])
    }
}

/// Full report for margin scores on a labeled test set. The temperature is
/// fitted on the validation scores; probabilities are `sigmoid(score / T)`.
/// Ranking metrics of a single-class test set are reported as NaN.
pub fn metric_report(
    test_scores: &[f64],
    test_labels: &[Label],
    val_scores: &[f64],
    val_labels: &[Label],
) -> Result<MetricReport> {
    check_lengths(test_scores.len(), test_labels.len())?;
    let preds: Vec<Label> = test_scores
        .iter()
        .map(|&s| if s > 0.0 { Label::Positive } else { Label::Negative })
        .collect();
    let c = confusion_metrics(&preds, test_labels)?;
    let probs: Vec<f64> = test_scores.iter().map(|&s| sigmoid(s)).collect();
    let t = temperature_scale(val_scores, val_labels)?.value;
    let probs_ts: Vec<f64> = test_scores.iter().map(|&s| sigmoid(s / t)).collect();
    Ok(MetricReport {
        accuracy: c.accuracy,
        tpr: c.tpr,
        fpr: c.fpr,
        precision: c.precision,
        f1: c.f1,
        macro_f1: c.macro_f1,
        ap: average_precision(test_scores, test_labels).unwrap_or(f64::NAN),
        auroc: auroc(test_scores, test_labels).unwrap_or(f64::NAN),
        ece: ece(&probs, test_labels, DEFAULT_ECE_BINS)?,
        brier: brier(&probs, test_labels)?,
        ece_ts: ece(&probs_ts, test_labels, DEFAULT_ECE_BINS)?,
        brier_ts: brier(&probs_ts, test_labels)?,
        temperature: t,
    })
}
