//! Classification metrics, stratified cross-validation and annotator
//! agreement.

mod agreement;

pub use agreement::{cohen_kappa, fleiss_kappa, m_index, AgreementTable, FleissKappa};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, seeded};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("label {label} is out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("too few items: {0}")]
    TooFewItems(String),
    #[error("invalid agreement table: {0}")]
    InvalidTable(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self { k, counts: vec![vec![0; k]; k] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        (0..self.k).map(|i| self.counts[i][i]).sum::<u64>() as f64 / t as f64
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if let Some(&label) = [t, p].iter().find(|&&l| l >= k) {
            return Err(MetricsError::LabelOutOfRange { label, k });
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and macro-averaged precision, recall and F1. Undefined ratios
/// are 0.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.k;
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let predicted: u64 = (0..k).map(|r| cm.counts[r][c]).sum();
            let support: u64 = cm.counts[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics { precision, recall, f1, support }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| if k == 0 { 0.0 } else { per_class.iter().map(f).sum::<f64>() / k as f64 };
    MetricsReport {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: cm.accuracy(),
        per_class,
        confusion: cm.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// `(train, test)` index lists for one fold, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        self.fold_of.iter().for_each(|&f| s[f] += 1);
        s
    }
}

/// Shuffles each class with the seed and deals its items round-robin over
/// the folds. The deal continues across classes, so fold sizes stay within
/// one of each other overall as well as per class.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(MetricsError::TooFewItems(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(MetricsError::TooFewItems(format!("{} items cannot fill {k} folds", labels.len())));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some(c) = by_class.iter().position(|v| v.is_empty()) {
        return Err(MetricsError::TooFewItems(format!("class {c} has no items")));
    }
    let mut rng = seeded(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for items in &mut by_class {
        items.shuffle(&mut rng);
        for &i in items.iter() {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Metrics over the union of all held-out predictions.
    pub pooled: MetricsReport,
    pub folds: Vec<MetricsReport>,
    /// Held-out prediction for every item, by item index.
    pub predictions: Vec<usize>,
}

/// Stratified k-fold cross-validation. `fit_predict(train, test, seed)` must
/// return one prediction per test index. Folds run in parallel; each gets
/// its own seed derived from `seed` and the fold number.
pub fn cross_validate<F, E>(labels: &[usize], classes: usize, k: usize, seed: u64, fit_predict: F) -> Result<CvReport>
where
    F: Fn(&[usize], &[usize], u64) -> std::result::Result<Vec<usize>, E> + Sync,
    E: std::fmt::Display,
{
    let folds = stratified_kfold(labels, k, seed)?;
    let outcomes: Vec<Result<(Vec<usize>, Vec<usize>)>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = folds.split(fold);
            let preds = fit_predict(&train, &test, derive_seed(seed, fold as u64))
                .map_err(|e| MetricsError::Fold { fold, message: e.to_string() })?;
            if preds.len() != test.len() {
                return Err(MetricsError::Fold {
                    fold,
                    message: format!("{} predictions for {} test items", preds.len(), test.len()),
                });
            }
            Ok((test, preds))
        })
        .collect();
    let mut predictions = vec![0; labels.len()];
    let mut reports = Vec::with_capacity(k);
    for outcome in outcomes {
        let (test, preds) = outcome?;
        let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        reports.push(precision_recall_f1(&confusion(&truth, &preds, classes)?));
        for (&i, &p) in test.iter().zip(&preds) {
            predictions[i] = p;
        }
    }
    let pooled = precision_recall_f1(&confusion(labels, &predictions, classes)?);
    Ok(CvReport { pooled, folds: reports, predictions })
}
