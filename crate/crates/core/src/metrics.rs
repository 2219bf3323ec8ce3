//! Confusion counts, classification reports, ROC curves and operating-point selection.
//!
//! Labels are `+1` (positive) and `-1` (negative). A score is predicted positive iff
//! `score >= threshold`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }
    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.positives()).0
    }
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.negatives()).0
    }
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp).0
    }
    pub fn recall(&self) -> f64 {
        self.tpr()
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn check_inputs(scores: &[f64], labels: &[i8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores"));
    }
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "scores vs labels",
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidParameter(format!("label {bad} is not +1 or -1")));
    }
    Ok(())
}

pub fn confusion_at(scores: &[f64], labels: &[i8], threshold: f64) -> Result<Confusion> {
    check_inputs(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when any of the three ratios had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Negative class first, then positive.
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: u64,
    pub confusion: Confusion,
}

fn class_metrics(label: &str, hit: u64, false_alarm: u64, miss: u64) -> ClassMetrics {
    let (precision, zp) = ratio(hit, hit + false_alarm);
    let (recall, zr) = ratio(hit, hit + miss);
    let (f1, zf) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    ClassMetrics {
        label: label.to_string(),
        precision,
        recall,
        f1,
        support: hit + miss,
        zero_division: zp || zr || zf,
    }
}

impl ClassificationReport {
    pub fn from_confusion(c: Confusion) -> Result<Self> {
        let total = c.total();
        if total == 0 {
            return Err(Error::EmptyInput("confusion counts"));
        }
        let neg = class_metrics("0.0", c.tn, c.fn_, c.fp);
        let pos = class_metrics("1.0", c.tp, c.fp, c.fn_);
        let n = total as f64;
        let avg = |f: fn(&ClassMetrics) -> f64| (f(&neg) + f(&pos)) / 2.0;
        let wavg = |f: fn(&ClassMetrics) -> f64| {
            (f(&neg) * neg.support as f64 + f(&pos) * pos.support as f64) / n
        };
        Ok(Self {
            accuracy: (c.tp + c.tn) as f64 / n,
            macro_avg: Averages {
                precision: avg(|m| m.precision),
                recall: avg(|m| m.recall),
                f1: avg(|m| m.f1),
            },
            weighted_avg: Averages {
                precision: wavg(|m| m.precision),
                recall: wavg(|m| m.recall),
                f1: wavg(|m| m.f1),
            },
            classes: [neg, pos],
            total,
            confusion: c,
        })
    }

    pub fn negative(&self) -> &ClassMetrics {
        &self.classes[0]
    }

    pub fn positive(&self) -> &ClassMetrics {
        &self.classes[1]
    }

    /// Aligned text table with four-decimal cells.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>12} {:>10} {:>10} {:>10} {:>10}",
            "", "precision", "recall", "f1-score", "support"
        );
        out.push('\n');
        for m in &self.classes {
            let _ = writeln!(
                out,
                "{:>12} {:>10.4} {:>10.4} {:>10.4} {:>10}",
                m.label, m.precision, m.recall, m.f1, m.support
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:>12} {:>10} {:>10} {:>10.4} {:>10}",
            "accuracy", "", "", self.accuracy, self.total
        );
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:>12} {:>10.4} {:>10.4} {:>10.4} {:>10}",
                name, a.precision, a.recall, a.f1, self.total
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn classification_report(
    scores: &[f64],
    labels: &[i8],
    threshold: f64,
) -> Result<ClassificationReport> {
    ClassificationReport::from_confusion(confusion_at(scores, labels, threshold)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From threshold `+inf` at (0,0) down to `-inf` at (1,1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        out
    }
}

/// Unique scores in descending order.
fn descending_unique(scores: &[f64]) -> Vec<f64> {
    let mut u = scores.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    u.dedup();
    u
}

pub fn roc_curve(scores: &[f64], labels: &[i8]) -> Result<RocCurve> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("ROC/AUC is undefined"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(RocCurve { points, auc })
}

pub fn auc(scores: &[f64], labels: &[i8]) -> Result<f64> {
    Ok(roc_curve(scores, labels)?.auc)
}

/// Pair-counting AUC: fraction of (positive, negative) pairs ranked correctly, ties counted half.
pub fn auc_pair_counting(scores: &[f64], labels: &[i8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != -1 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::SingleClass("ROC/AUC is undefined"));
    }
    Ok(wins / pairs as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Maximize precision subject to `recall >= min_recall`.
    RecallFirst { min_recall: f64 },
    /// Maximize recall subject to `precision >= min_precision`.
    PrecisionFirst { min_precision: f64 },
    /// Maximize `TPR - FPR`.
    Youden,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Value to compare scores against with the `>=` rule.
    pub threshold: f64,
    /// The score group at which the positive region starts.
    pub cut_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub confusion: Confusion,
}

/// Candidate operating points: one per unique score, predicting positive from that score up.
pub fn operating_points(scores: &[f64], labels: &[i8]) -> Result<Vec<OperatingPoint>> {
    check_inputs(scores, labels)?;
    let unique = descending_unique(scores);
    unique
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let c = confusion_at(scores, labels, s)?;
            let threshold = match unique.get(k + 1) {
                Some(&lower) => s + (lower - s) / 2.0,
                None => s,
            };
            Ok(OperatingPoint {
                threshold,
                cut_score: s,
                precision: c.precision(),
                recall: c.recall(),
                fpr: c.fpr(),
                confusion: c,
            })
        })
        .collect()
}

fn frontier(points: &[OperatingPoint]) -> String {
    points
        .iter()
        .map(|p| format!("(t={:.4}, P={:.4}, R={:.4})", p.cut_score, p.precision, p.recall))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Picks an operating point under `policy`. Ties on the objective are broken by the
/// secondary metric (recall for recall-first, precision for precision-first), then toward
/// the higher threshold.
pub fn select_threshold(
    curve: &RocCurve,
    scores: &[f64],
    labels: &[i8],
    policy: ThresholdPolicy,
) -> Result<OperatingPoint> {
    if curve.points.len() < 2 {
        return Err(Error::InvalidParameter("ROC curve has no points".into()));
    }
    let points = operating_points(scores, labels)?;
    let key = |p: &OperatingPoint| -> Option<(f64, f64)> {
        match policy {
            ThresholdPolicy::RecallFirst { min_recall } => {
                (p.recall >= min_recall).then_some((p.precision, p.recall))
            }
            ThresholdPolicy::PrecisionFirst { min_precision } => {
                (p.precision >= min_precision).then_some((p.recall, p.precision))
            }
            ThresholdPolicy::Youden => Some((p.recall - p.fpr, 0.0)),
        }
    };
    // points run from the highest threshold down, so strict improvement keeps the higher one
    let mut best: Option<(usize, (f64, f64))> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(k) = key(p) {
            let better = match best {
                None => true,
                Some((_, b)) => k.0 > b.0 || (k.0 == b.0 && k.1 > b.1),
            };
            if better {
                best = Some((i, k));
            }
        }
    }
    match best {
        Some((i, _)) => Ok(points[i]),
        None => Err(Error::Infeasible {
            floor: match policy {
                ThresholdPolicy::RecallFirst { min_recall } => min_recall,
                ThresholdPolicy::PrecisionFirst { min_precision } => min_precision,
                ThresholdPolicy::Youden => f64::NAN,
            },
            frontier: frontier(&points),
        }),
    }
}

/// Min-max scales scores into [0,1] using `(lo, hi)`; a degenerate range maps everything to 0.5.
pub fn normalize_scores(scores: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|s| (s - lo) / (hi - lo)).collect()
}

pub fn score_range(scores: &[f64]) -> (f64, f64) {
    scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)))
}
