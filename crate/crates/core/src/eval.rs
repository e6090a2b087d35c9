//! Binary classification metrics with `is_spammed = true` as the positive
//! class.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(y_true: &[bool], y_pred: &[bool]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::validation(format!(
            "truth has {} rows but predictions have {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::validation("cannot evaluate zero predictions"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Rows `false` and `true` per class, then accuracy and the two averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    #[serde(rename = "false")]
    pub negative: ClassMetrics,
    #[serde(rename = "true")]
    pub positive: ClassMetrics,
    pub accuracy: f64,
    pub macro_avg: AverageMetrics,
    pub weighted_avg: AverageMetrics,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn class_metrics(correct: usize, predicted: usize, actual: usize) -> ClassMetrics {
    let precision = ratio(correct, predicted);
    let recall = ratio(correct, actual);
    ClassMetrics {
        precision,
        recall,
        f1: f1(precision, recall),
        support: actual,
    }
}

/// Zero denominators yield 0 rather than an error.
pub fn report(cm: &ConfusionMatrix) -> ClassificationReport {
    let positive = class_metrics(cm.tp, cm.tp + cm.fp, cm.tp + cm.fn_);
    let negative = class_metrics(cm.tn, cm.tn + cm.fn_, cm.tn + cm.fp);
    let n = cm.total();
    let macro_avg = AverageMetrics {
        precision: (negative.precision + positive.precision) / 2.0,
        recall: (negative.recall + positive.recall) / 2.0,
        f1: (negative.f1 + positive.f1) / 2.0,
    };
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            (f(&negative) * negative.support as f64 + f(&positive) * positive.support as f64) / n as f64
        }
    };
    let weighted_avg = AverageMetrics {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
    };
    ClassificationReport {
        negative,
        positive,
        accuracy: ratio(cm.tp + cm.tn, n),
        macro_avg,
        weighted_avg,
        support: n,
    }
}

/// Positive-class F1 of a predictor that flags every article, for a positive
/// share `prevalence`: precision is the prevalence and recall is 1.
pub fn constant_positive_f1(prevalence: f64) -> f64 {
    f1(prevalence, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
}

/// Sweeps the threshold down through the distinct scores. Rows sharing a
/// score enter together as one step, so ties never depend on row order.
pub fn roc_points(y_true: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if y_true.len() != scores.len() {
        return Err(Error::validation(format!(
            "truth has {} rows but scores have {}",
            y_true.len(),
            scores.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::validation(format!("score {s} is not a number")));
    }
    let pos = y_true.iter().filter(|&&t| t).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::validation("ROC needs both classes in the truth labels"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if y_true[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in &curve.points {
        out.push_str(&format!("{fpr},{tpr}\n"));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
