use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use memeforge_core::baselines::{rf_predict, rf_train, standardize, svm_predict, svm_train};
use memeforge_core::metrics::{cross_validate, CvReport, MetricsReport};
use memeforge_core::nn::{predict, Example};
use memeforge_core::{FeatureFamily, MemeClass, ModelKind, RfConfig};
use serde::{Deserialize, Serialize};

use super::features::compute_features;
use super::train::{fit, text_inputs};
use crate::config::{RunConfig, FOREST_STREAM};
use crate::error::{CliError, Result};
use crate::manifest::{write_atomic, Manifest};
use crate::pipeline::{model_config, prepare_examples};

pub const REPORT_SCHEMA: &str = include_str!("../../schema/eval_report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    Fusion,
    Cnn,
    Lstm,
    Svm,
    Rf,
}

impl EvalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalKind::Fusion => "fusion",
            EvalKind::Cnn => "cnn",
            EvalKind::Lstm => "lstm",
            EvalKind::Svm => "svm",
            EvalKind::Rf => "rf",
        }
    }

    fn model_kind(self) -> Option<ModelKind> {
        match self {
            EvalKind::Fusion => Some(ModelKind::Fusion),
            EvalKind::Cnn => Some(ModelKind::CnnOnly),
            EvalKind::Lstm => Some(ModelKind::LstmOnly),
            EvalKind::Svm | EvalKind::Rf => None,
        }
    }

    fn layout(self) -> Layout {
        match self {
            EvalKind::Fusion => Layout::Embeddings,
            EvalKind::Cnn | EvalKind::Lstm => Layout::DeepModels,
            EvalKind::Svm | EvalKind::Rf => Layout::Baselines,
        }
    }
}

impl FromStr for EvalKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fusion" => EvalKind::Fusion,
            "cnn" | "cnn_only" => EvalKind::Cnn,
            "lstm" | "lstm_only" => EvalKind::Lstm,
            "svm" => EvalKind::Svm,
            "rf" => EvalKind::Rf,
            _ => return Err(CliError::Usage(format!("unknown eval kind {s:?}"))),
        })
    }
}

/// Which published table the report mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Metric rows, one column per feature family.
    Baselines,
    /// Metric rows, one column per network.
    DeepModels,
    /// One row per embedding variant, metric columns.
    Embeddings,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: MemeClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl From<&MetricsReport> for Scores {
    fn from(r: &MetricsReport) -> Self {
        Self {
            precision: round4(r.macro_precision),
            recall: round4(r.macro_recall),
            f1: round4(r.macro_f1),
            accuracy: round4(r.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub fold: usize,
    pub size: u64,
    #[serde(flatten)]
    pub scores: Scores,
}

/// One evaluated configuration (a feature family, a network or an
/// embedding variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub name: String,
    /// Macro averages over the pooled held-out predictions.
    pub pooled: Scores,
    pub per_class: Vec<ClassScores>,
    pub confusion: Vec<Vec<u64>>,
    pub folds: Vec<FoldScores>,
    #[serde(skip)]
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub layout: Layout,
    pub classifier: String,
    pub k: usize,
    pub seed: u64,
    pub items: usize,
    pub entries: Vec<EvalEntry>,
    #[serde(skip)]
    pub ids: Vec<String>,
    #[serde(skip)]
    pub labels: Vec<usize>,
}

fn entry(name: String, cv: &CvReport) -> EvalEntry {
    EvalEntry {
        name,
        pooled: Scores::from(&cv.pooled),
        per_class: MemeClass::ALL
            .iter()
            .zip(&cv.pooled.per_class)
            .map(|(&class, m)| ClassScores {
                class,
                precision: round4(m.precision),
                recall: round4(m.recall),
                f1: round4(m.f1),
                support: m.support,
            })
            .collect(),
        confusion: cv.pooled.confusion.counts.clone(),
        folds: cv
            .folds
            .iter()
            .enumerate()
            .map(|(fold, r)| FoldScores { fold, size: r.confusion.total(), scores: Scores::from(r) })
            .collect(),
        predictions: cv.predictions.clone(),
    }
}

fn check_k(labels: &[usize], k: usize) -> Result<()> {
    for c in MemeClass::ALL {
        let n = labels.iter().filter(|&&l| l == c.index()).count();
        if n < k {
            return Err(CliError::Data(format!(
                "too few items: class {} has {n} labelled records, fewer than k = {k}",
                c.as_str()
            )));
        }
    }
    Ok(())
}

fn subset(data: &[Example], idx: &[usize]) -> Vec<Example> {
    idx.iter().map(|&i| data[i].clone()).collect()
}

fn eval_network(manifest: &Manifest, cfg: &RunConfig, kind: ModelKind, variant: Option<&str>, k: usize) -> Result<CvReport> {
    let (_, text) = text_inputs(cfg, kind, variant)?;
    let m = model_config(cfg, kind, text.as_ref().map(|t| &t.1))?;
    let data = prepare_examples(manifest, kind, &m, &cfg.ocr_preprocess, text.as_ref().map(|(l, t)| (l, t)))?;
    let labels: Vec<usize> = data.iter().map(|e| e.label).collect();
    Ok(cross_validate(&labels, MemeClass::ALL.len(), k, cfg.seed, |train, test, seed| -> Result<Vec<usize>> {
        let (model, _) = fit(kind, &m, cfg, seed, &subset(&data, train))?;
        test.iter()
            .map(|&i| {
                let p = predict(&model, &data[i].image, &data[i].sequence)?;
                Ok(p.iter().enumerate().fold(0, |b, (j, v)| if *v > p[b] { j } else { b }))
            })
            .collect()
    })?)
}

fn eval_baseline(x: &[Vec<f64>], labels: &[usize], cfg: &RunConfig, kind: EvalKind, k: usize) -> Result<CvReport> {
    Ok(cross_validate(labels, MemeClass::ALL.len(), k, cfg.seed, |train, test, seed| -> Result<Vec<usize>> {
        let rows: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let (scaled, scaler) = standardize(&rows)?;
        let test_rows = test.iter().map(|&i| scaler.apply(&x[i])).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(match kind {
            EvalKind::Svm => {
                let model = svm_train(&scaled, &y, &cfg.svm)?;
                test_rows.iter().map(|r| svm_predict(&model, r)).collect::<std::result::Result<_, _>>()?
            }
            _ => {
                let rf = RfConfig { seed: memeforge_core::derive_seed(seed, FOREST_STREAM), ..cfg.rf.clone() };
                let model = rf_train(&scaled, &y, &rf)?;
                test_rows.iter().map(|r| rf_predict(&model, r)).collect::<std::result::Result<_, _>>()?
            }
        })
    })?)
}

/// Runs stratified k-fold cross-validation for one classifier.
///
/// * `fusion`: one entry per configured embedding variant.
/// * `cnn` / `lstm`: one entry; `lstm` uses the first embedding variant.
/// * `svm` / `rf`: one entry per feature family in `families` (all four by
///   default); records whose features cannot be computed are left out.
pub fn run_eval(manifest: &Manifest, cfg: &RunConfig, kind: EvalKind, families: &[FeatureFamily], k: usize) -> Result<EvalReport> {
    cfg.validate()?;
    let mut report = EvalReport {
        layout: kind.layout(),
        classifier: kind.as_str().to_string(),
        k,
        seed: cfg.seed,
        items: 0,
        entries: Vec::new(),
        ids: Vec::new(),
        labels: Vec::new(),
    };
    match kind.model_kind() {
        Some(mk) => {
            let labels = manifest.labels()?;
            check_k(&labels, k)?;
            let variants: Vec<Option<String>> = match kind {
                EvalKind::Fusion => {
                    let v = cfg.embedding_variants();
                    if v.is_empty() {
                        return Err(CliError::Config("fusion evaluation needs at least one embedding table".into()));
                    }
                    v.into_iter().map(Some).collect()
                }
                EvalKind::Lstm => vec![cfg.embedding_variants().into_iter().next()],
                _ => vec![None],
            };
            for v in variants {
                let cv = eval_network(manifest, cfg, mk, v.as_deref(), k)?;
                let name = match (&v, kind) {
                    (Some(set), EvalKind::Fusion) => set.clone(),
                    _ => mk.as_str().to_string(),
                };
                report.entries.push(entry(name, &cv));
            }
            report.ids = manifest.records.iter().map(|r| r.id.clone()).collect();
            report.labels = labels;
        }
        None => {
            let families = if families.is_empty() { FeatureFamily::ALL.to_vec() } else { families.to_vec() };
            let table = compute_features(manifest, &families);
            let label_of: std::collections::BTreeMap<&str, Option<usize>> =
                manifest.records.iter().map(|r| (r.id.as_str(), r.label.map(MemeClass::index))).collect();
            let labels = table
                .rows
                .iter()
                .map(|(id, _)| label_of[id.as_str()].ok_or_else(|| CliError::Data(format!("record {id:?} has no label"))))
                .collect::<Result<Vec<_>>>()?;
            check_k(&labels, k)?;
            let mut offset = 0;
            for fam in &families {
                let x: Vec<Vec<f64>> = table.rows.iter().map(|(_, v)| v[offset..offset + fam.dim()].to_vec()).collect();
                offset += fam.dim();
                let cv = eval_baseline(&x, &labels, cfg, kind, k)?;
                report.entries.push(entry(fam.as_str().to_string(), &cv));
            }
            report.ids = table.rows.iter().map(|(id, _)| id.clone()).collect();
            report.labels = labels;
        }
    }
    report.items = report.ids.len();
    Ok(report)
}

fn column_title(layout: Layout, name: &str) -> String {
    match (layout, name) {
        (Layout::Baselines, "glcm") => "GLCM".into(),
        (Layout::Baselines, "colorfulness") => "Colorfulness".into(),
        (Layout::Baselines, "tamura") => "Tamura".into(),
        (Layout::Baselines, "face") => "Human Face".into(),
        (Layout::DeepModels, "cnn_only") => "CNN Model".into(),
        (Layout::DeepModels, "lstm_only") => "LSTM Model".into(),
        _ => name.to_string(),
    }
}

impl EvalReport {
    /// Aligned plain-text rendering. Numbers are the JSON values at four
    /// decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} | {}-fold stratified CV | seed {} | {} items | pooled macro averages",
            self.classifier, self.k, self.seed, self.items
        );
        let metrics: [(&str, fn(&Scores) -> f64); 3] =
            [("Precision", |s| s.precision), ("Recall", |s| s.recall), ("F1-Score", |s| s.f1)];
        match self.layout {
            Layout::Baselines | Layout::DeepModels => {
                let head = if self.layout == Layout::Baselines { "Feature" } else { "Result" };
                let titles: Vec<String> = self.entries.iter().map(|e| column_title(self.layout, &e.name)).collect();
                let widths: Vec<usize> = titles.iter().map(|t| t.len().max(6)).collect();
                let _ = write!(out, "{head:<10}");
                for (t, w) in titles.iter().zip(&widths) {
                    let _ = write!(out, "  {t:>w$}");
                }
                out.push('\n');
                for (label, get) in metrics {
                    let _ = write!(out, "{label:<10}");
                    for (e, w) in self.entries.iter().zip(&widths) {
                        let _ = write!(out, "  {:>w$.4}", get(&e.pooled));
                    }
                    out.push('\n');
                }
            }
            Layout::Embeddings => {
                let w = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(0).max(8);
                let _ = writeln!(out, "{:<w$}  {:>9}  {:>6}  {:>8}", "Features", "Precision", "Recall", "F1-Score");
                for e in &self.entries {
                    let _ = writeln!(out, "{:<w$}  {:>9.4}  {:>6.4}  {:>8.4}", e.name, e.pooled.precision, e.pooled.recall, e.pooled.f1);
                }
            }
        }
        for e in &self.entries {
            let _ = writeln!(out, "\n[{}] accuracy {:.4}", e.name, e.pooled.accuracy);
            let _ = writeln!(out, "{:<14}  {:>9}  {:>6}  {:>8}  {:>7}", "class", "precision", "recall", "f1", "support");
            for c in &e.per_class {
                let _ = writeln!(
                    out,
                    "{:<14}  {:>9.4}  {:>6.4}  {:>8.4}  {:>7}",
                    c.class.display_name(),
                    c.precision,
                    c.recall,
                    c.f1,
                    c.support
                );
            }
            let _ = writeln!(out, "{:<6}  {:>5}  {:>9}  {:>6}  {:>8}  {:>8}", "fold", "size", "precision", "recall", "f1", "accuracy");
            for f in &e.folds {
                let s = &f.scores;
                let _ = writeln!(
                    out,
                    "{:<6}  {:>5}  {:>9.4}  {:>6.4}  {:>8.4}  {:>8.4}",
                    f.fold, f.size, s.precision, s.recall, s.f1, s.accuracy
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// `id,label,<entry>...` with the held-out prediction of every entry.
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("id,label");
        for e in &self.entries {
            out.push(',');
            out.push_str(&e.name);
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            let _ = write!(out, "{id},{}", MemeClass::ALL[self.labels[i]].as_str());
            for e in &self.entries {
                let _ = write!(out, ",{}", MemeClass::ALL[e.predictions[i]].as_str());
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates and writes `report.json`, `report.txt` and `predictions.csv`
/// into `out_dir`.
pub fn cmd_eval(
    manifest_path: &Path,
    cfg: &RunConfig,
    kind: EvalKind,
    families: &[FeatureFamily],
    k: Option<usize>,
    out_dir: &Path,
) -> Result<EvalReport> {
    let manifest = Manifest::load(manifest_path)?;
    let report = run_eval(&manifest, cfg, kind, families, k.unwrap_or(cfg.folds))?;
    write_atomic(&out_dir.join("report.json"), report.to_json()?.as_bytes())?;
    write_atomic(&out_dir.join("report.txt"), report.to_text().as_bytes())?;
    write_atomic(&out_dir.join("predictions.csv"), report.predictions_csv().as_bytes())?;
    Ok(report)
}
