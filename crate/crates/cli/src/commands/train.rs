use std::path::{Path, PathBuf};

use memeforge_core::nn::{build_model, checkpoint_to_bytes, predict, train, Checkpoint, EpochStats, Example};
use memeforge_core::{EmbeddingTable, FusionModelConfig, LexiconSet, Model, ModelKind, TrainConfig};

use crate::config::{RunConfig, INIT_STREAM, TRAIN_STREAM};
use crate::error::{CliError, Result};
use crate::manifest::{write_atomic, Manifest};
use crate::pipeline::{model_config, needs_text, prepare_examples, PipelineMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub embedding_set: Option<String>,
    pub epochs: usize,
    pub final_loss: Option<f64>,
    /// Accuracy on the training set with dropout off.
    pub train_accuracy: f64,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
}

/// `model.ckpt` -> `model.history.csv`.
pub fn history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("history.csv")
}

/// Text inputs for a kind: the lexicon and the chosen embedding set.
pub(crate) fn text_inputs(
    cfg: &RunConfig,
    kind: ModelKind,
    set: Option<&str>,
) -> Result<(Option<String>, Option<(LexiconSet, EmbeddingTable)>)> {
    if !needs_text(kind) {
        return Ok((None, None));
    }
    let set = match set {
        Some(s) => s.to_string(),
        None => cfg.embedding_variants().into_iter().next().ok_or_else(|| {
            CliError::Config(format!("model kind {} needs an embedding table; none configured", kind.as_str()))
        })?,
    };
    let table = cfg.load_embedding_set(&set)?;
    Ok((Some(set), Some((cfg.lexicon()?, table))))
}

/// Builds and trains one model from the run's seeds.
pub fn fit(kind: ModelKind, m: &FusionModelConfig, cfg: &RunConfig, seed: u64, data: &[Example]) -> Result<(Model, Vec<EpochStats>)> {
    let model = build_model(kind, m, memeforge_core::derive_seed(seed, INIT_STREAM))?;
    let tcfg = TrainConfig { seed: memeforge_core::derive_seed(seed, TRAIN_STREAM), ..cfg.train.clone() };
    Ok(train(model, data, &tcfg)?)
}

pub fn accuracy(model: &Model, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for ex in data {
        let p = predict(model, &ex.image, &ex.sequence)?;
        let best = p.iter().enumerate().fold(0, |b, (i, v)| if *v > p[b] { i } else { b });
        correct += usize::from(best == ex.label);
    }
    Ok(correct as f64 / data.len() as f64)
}

fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.epoch, h.loss, h.accuracy));
    }
    out
}

/// Trains `kind` on the whole manifest and writes the checkpoint plus a
/// per-epoch history CSV next to it.
pub fn cmd_train(
    manifest_path: &Path,
    cfg: &RunConfig,
    kind: ModelKind,
    embedding_set: Option<&str>,
    out: &Path,
) -> Result<TrainSummary> {
    cfg.validate()?;
    let manifest = Manifest::load(manifest_path)?;
    manifest.labels()?;
    let (set, text) = text_inputs(cfg, kind, embedding_set)?;
    let m = model_config(cfg, kind, text.as_ref().map(|t| &t.1))?;
    let examples = prepare_examples(&manifest, kind, &m, &cfg.ocr_preprocess, text.as_ref().map(|(l, t)| (l, t)))?;
    let (model, history) = fit(kind, &m, cfg, cfg.seed, &examples)?;
    let train_accuracy = accuracy(&model, &examples)?;

    let embedding_files = set
        .iter()
        .flat_map(|s| s.split('+'))
        .map(|n| (n.to_string(), cfg.embeddings[n].clone()))
        .collect();
    let meta = PipelineMeta {
        embedding_set: set.clone(),
        embedding_files,
        lexicon_dir: cfg.lexicon_dir.clone(),
        ocr_preprocess: cfg.ocr_preprocess,
        seed: cfg.seed,
        train: cfg.train.clone(),
        records: examples.len(),
    };
    let ckpt = Checkpoint { model, meta: serde_json::to_value(&meta)? };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_atomic(out, &checkpoint_to_bytes(&ckpt))?;
    let history_file = history_path(out);
    write_atomic(&history_file, history_csv(&history).as_bytes())?;
    log::info!("trained {} for {} epochs, train accuracy {train_accuracy:.4}", kind.as_str(), history.len());
    Ok(TrainSummary {
        kind,
        embedding_set: set,
        epochs: history.len(),
        final_loss: history.last().map(|h| h.loss),
        train_accuracy,
        checkpoint: out.to_path_buf(),
        history: history_file,
    })
}
