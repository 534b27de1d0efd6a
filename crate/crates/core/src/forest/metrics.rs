//! Classification metrics over probability/label pairs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub threshold: f64,
    pub benign: ClassMetrics,
    pub confusion: ClassMetrics,
    pub weighted: ClassMetrics,
    pub accuracy: f64,
    pub fpr: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// (tp, fp, tn, fn) for the confusion class, positive iff `p > threshold`.
fn confusion_counts(probs: &[f64], labels: &[u8], threshold: f64) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&p, &y) in probs.iter().zip(labels) {
        match (p > threshold, y == 1) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    c
}

/// F1 of the confusion class when predicting positive iff `p > threshold`.
pub fn f1_at(probs: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let (tp, fp, _, fn_) = confusion_counts(probs, labels, threshold);
    f1_from_counts(tp, fp, fn_)
}

/// Rank-statistic AUC: the chance a random positive outscores a random
/// negative, ties counting one half. Computed from integer pair counts.
pub fn auc(probs: &[f64], labels: &[u8]) -> Option<f64> {
    let mut pairs: Vec<(f64, u8)> = probs.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pos = pairs.iter().filter(|p| p.1 == 1).count() as u128;
    let neg = pairs.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    // twice the Mann-Whitney U so tied pairs stay integral
    let mut doubled: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let group_pos = pairs[i..j].iter().filter(|p| p.1 == 1).count() as u128;
        let group_neg = (j - i) as u128 - group_pos;
        doubled += group_pos * (2 * neg_below + group_neg);
        neg_below += group_neg;
        i = j;
    }
    Some(doubled as f64 / (2 * pos * neg) as f64)
}

/// One ROC point per distinct probability (positive iff `p >= value`),
/// plus the origin.
fn roc_points(probs: &[f64], labels: &[u8]) -> Vec<RocPoint> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    let mut pairs: Vec<(f64, u8)> = probs.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < pairs.len() {
        let value = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == value {
            if pairs[i].1 == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint { threshold: value, fpr: ratio(fp, neg), tpr: ratio(tp, pos) });
    }
    out
}

pub fn evaluate(probs: &[f64], labels: &[u8], threshold: f64) -> Metrics {
    let (tp, fp, tn, fn_) = confusion_counts(probs, labels, threshold);
    let confusion = ClassMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: f1_from_counts(tp, fp, fn_),
        support: tp + fn_,
    };
    let benign = ClassMetrics {
        precision: ratio(tn, tn + fn_),
        recall: ratio(tn, tn + fp),
        f1: f1_from_counts(tn, fn_, fp),
        support: tn + fp,
    };
    let n = labels.len();
    let w = |a: f64, b: f64| {
        if n == 0 {
            0.0
        } else {
            (a * benign.support as f64 + b * confusion.support as f64) / n as f64
        }
    };
    let weighted = ClassMetrics {
        precision: w(benign.precision, confusion.precision),
        recall: w(benign.recall, confusion.recall),
        f1: w(benign.f1, confusion.f1),
        support: n,
    };
    Metrics {
        threshold,
        benign,
        confusion,
        weighted,
        accuracy: ratio(tp + tn, n),
        fpr: ratio(fp, fp + tn),
        auc: auc(probs, labels),
        roc: roc_points(probs, labels),
    }
}
