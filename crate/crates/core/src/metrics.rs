//! Regression, classification and information-coefficient metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgraph::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
}

pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<RegressionMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Contract("regression metrics need at least one value".into()));
    }
    let n = pred.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let e = p - t;
        se += e * e;
        ae += e.abs();
    }
    Ok(RegressionMetrics {
        rmse: (se / n).sqrt(),
        mae: ae / n,
    })
}

/// Hard labels or a row-stochastic `n x c` score matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassPredictions {
    Labels(Vec<usize>),
    Scores(Matrix),
}

impl ClassPredictions {
    fn labels(&self) -> Vec<usize> {
        match self {
            ClassPredictions::Labels(l) => l.clone(),
            ClassPredictions::Scores(s) => (0..s.rows())
                .map(|i| {
                    // First maximum wins ties.
                    let row = s.row(i);
                    let mut best = 0;
                    for (j, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = j;
                        }
                    }
                    best
                })
                .collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            ClassPredictions::Labels(l) => l.len(),
            ClassPredictions::Scores(s) => s.rows(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub acc: f64,
    /// Macro averages over the classes present in the truth.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Macro one-vs-rest ROC area; `None` without scores.
    pub auc: Option<f64>,
    pub per_class: Vec<ClassStats>,
    /// Classes left out of the macro averages because the truth lacks them.
    pub skipped_classes: usize,
}

/// Accuracy, macro precision/recall/F1 and (with scores) macro one-vs-rest AUC.
///
/// A class with no predicted members has precision 0; F1 is 0 when both
/// precision and recall are 0.
pub fn classification_metrics(pred: &ClassPredictions, truth: &[usize], classes: usize) -> Result<ClassificationMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if truth.is_empty() || classes == 0 {
        return Err(Error::Contract("classification metrics need labels and classes".into()));
    }
    if let ClassPredictions::Scores(s) = pred {
        if s.cols() != classes {
            return Err(Error::dim("classification_metrics", format!("{} score columns for {classes} classes", s.cols())));
        }
    }
    let labels = pred.labels();
    if let Some(&bad) = truth.iter().chain(&labels).find(|&&l| l >= classes) {
        return Err(Error::Contract(format!("label {bad} outside 0..{classes}")));
    }
    let n = truth.len();
    let acc = labels.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / n as f64;

    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (&p, &t) in labels.iter().zip(truth) {
            match (p == c, t == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassStats {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        });
    }
    let present: Vec<usize> = (0..classes).filter(|&c| truth.contains(&c)).collect();
    let skipped = classes - present.len();
    if skipped > 0 {
        log::warn!("{skipped} class(es) absent from the truth were left out of macro averages");
    }
    let macro_of = |f: fn(&ClassStats) -> f64| present.iter().map(|&c| f(&per_class[c])).sum::<f64>() / present.len() as f64;

    let auc = match pred {
        ClassPredictions::Scores(s) => {
            let aucs: Vec<f64> = present
                .iter()
                .filter_map(|&c| {
                    let scores: Vec<f64> = (0..n).map(|i| s.get(i, c)).collect();
                    let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
                    roc_auc(&scores, &positive)
                })
                .collect();
            (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
        }
        ClassPredictions::Labels(_) => None,
    };

    Ok(ClassificationMetrics {
        acc,
        precision: macro_of(|s| s.precision),
        recall: macro_of(|s| s.recall),
        f1: macro_of(|s| s.f1),
        auc,
        per_class,
        skipped_classes: skipped,
    })
}

/// Trapezoidal area under the ROC curve; tied scores form one diagonal
/// segment. `None` when either class is missing.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Some(area)
}

/// Prediction records keyed by evaluation group (e.g. a date).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupedPredictions {
    pub records: Vec<(String, f64, f64)>,
}

impl GroupedPredictions {
    pub fn push(&mut self, group: impl Into<String>, predicted: f64, actual: f64) {
        self.records.push((group.into(), predicted, actual));
    }

    /// Groups in key order, each as `(predicted, actual)` vectors.
    pub fn groups(&self) -> BTreeMap<&str, (Vec<f64>, Vec<f64>)> {
        let mut out: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (g, p, a) in &self.records {
            let e = out.entry(g.as_str()).or_default();
            e.0.push(*p);
            e.1.push(*a);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationCoefficients {
    pub ic: f64,
    pub rank_ic: f64,
    /// `None` when the per-group ICs have zero spread.
    pub icir: Option<f64>,
    pub rank_icir: Option<f64>,
    /// Groups skipped for zero variance or fewer than two records.
    pub skipped_groups: usize,
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn mean_and_ir(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, (std > 0.0).then(|| mean / std))
}

/// Per-group Pearson (IC) and Spearman (RankIC) correlations, their means,
/// and mean over population standard deviation (ICIR, RankICIR).
pub fn information_coefficients(data: &GroupedPredictions) -> Result<InformationCoefficients> {
    let groups = data.groups();
    if groups.len() < 2 {
        return Err(Error::Contract(format!("need at least 2 groups, got {}", groups.len())));
    }
    if data.records.iter().any(|(_, p, a)| !p.is_finite() || !a.is_finite()) {
        return Err(Error::Data("non-finite prediction or outcome".into()));
    }
    let mut ics = Vec::new();
    let mut rank_ics = Vec::new();
    let mut skipped = 0;
    for (p, a) in groups.values() {
        match (pearson(p, a), spearman(p, a)) {
            (Some(ic), Some(ric)) => {
                ics.push(ic);
                rank_ics.push(ric);
            }
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} group(s) with zero variance skipped");
    }
    if ics.is_empty() {
        return Err(Error::Data("no group has defined correlations".into()));
    }
    let (ic, icir) = mean_and_ir(&ics);
    let (rank_ic, rank_icir) = mean_and_ir(&rank_ics);
    Ok(InformationCoefficients {
        ic,
        rank_ic,
        icir,
        rank_icir,
        skipped_groups: skipped,
    })
}

/// Information ratio `IC · √BR` for breadth `br`.
pub fn ir(ic: f64, br: f64) -> f64 {
    ic * br.sqrt()
}
