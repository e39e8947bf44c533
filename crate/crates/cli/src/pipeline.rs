//! Turning manifest records into model inputs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use memeforge_core::nn::{CnnInput, Example};
use memeforge_core::text::{embed_sequence, normalize_caption};
use memeforge_core::vision::{load_image, preprocess_for_ocr, OcrPreprocessConfig};
use memeforge_core::{
    EmbeddingTable, FusionModelConfig, ImageRgb, LexiconSet, ModelKind, SequenceMatrix, Tensor, TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

pub(crate) fn needs_text(kind: ModelKind) -> bool {
    kind != ModelKind::CnnOnly
}

/// How a checkpoint's inputs were produced; stored in the checkpoint so
/// `predict` can rebuild them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMeta {
    pub embedding_set: Option<String>,
    pub embedding_files: BTreeMap<String, PathBuf>,
    pub lexicon_dir: Option<PathBuf>,
    pub ocr_preprocess: OcrPreprocessConfig,
    pub seed: u64,
    pub train: TrainConfig,
    pub records: usize,
}

/// The model config actually used: the embedding width follows the table.
pub fn model_config(cfg: &RunConfig, kind: ModelKind, table: Option<&EmbeddingTable>) -> Result<FusionModelConfig> {
    let mut m = cfg.model.clone();
    match table {
        Some(t) => m.embed_dim = t.dim(),
        None if needs_text(kind) => {
            return Err(CliError::Config(format!("model kind {} needs an embedding table; none configured", kind.as_str())))
        }
        None => {}
    }
    m.validate()?;
    Ok(m)
}

/// Rescaled HWC tensor in [0, 1] in the rendition the CNN channel expects.
pub fn image_tensor(img: &ImageRgb, m: &FusionModelConfig, pre: &OcrPreprocessConfig) -> Result<Tensor> {
    let shape = [m.img_h, m.img_w, m.img_channels];
    let data: Vec<f64> = match (m.cnn_input, m.img_channels) {
        (CnnInput::Thresholded, _) => {
            let binary = preprocess_for_ocr(img, pre)?.rescale(m.img_w, m.img_h)?;
            binary.data().iter().map(|&v| f64::from(v) / 255.0).collect()
        }
        (CnnInput::Rgb, 1) => img.to_grayscale().rescale(m.img_w, m.img_h)?.data().iter().map(|&v| f64::from(v) / 255.0).collect(),
        (CnnInput::Rgb, 3) => img.rescale(m.img_w, m.img_h)?.data().iter().map(|&v| f64::from(v) / 255.0).collect(),
        (_, c) => return Err(CliError::Config(format!("img_channels must be 1 or 3, got {c}"))),
    };
    Ok(Tensor::from_vec(&shape, data)?)
}

pub fn caption_matrix(caption: &str, lex: &LexiconSet, table: &EmbeddingTable, max_len: usize) -> SequenceMatrix {
    let norm = normalize_caption(caption, lex);
    embed_sequence(&norm.tokens, table, max_len)
}

/// Decodes every record into an [`Example`], in manifest order.
pub fn prepare_examples(
    manifest: &Manifest,
    kind: ModelKind,
    m: &FusionModelConfig,
    pre: &OcrPreprocessConfig,
    text: Option<(&LexiconSet, &EmbeddingTable)>,
) -> Result<Vec<Example>> {
    if needs_text(kind) && text.is_none() {
        return Err(CliError::Config(format!("model kind {} needs captions and an embedding table", kind.as_str())));
    }
    manifest
        .records
        .par_iter()
        .map(|rec| {
            let label = rec.label.ok_or_else(|| CliError::Data("record has no label".into()))?.index();
            let img = load_image(&manifest.image_path(rec))?;
            let image = image_tensor(&img, m, pre)?;
            let sequence = match text.filter(|_| needs_text(kind)) {
                Some((lex, table)) => {
                    let caption = rec
                        .caption_raw
                        .as_deref()
                        .ok_or_else(|| CliError::Data("no caption; run `memeforge ocr` first".into()))?;
                    caption_matrix(caption, lex, table, m.max_len)
                }
                None => SequenceMatrix::zeros(m.max_len, m.embed_dim),
            };
            Ok(Example { image, sequence, label })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .zip(&manifest.records)
        .map(|(r, rec)| r.map_err(|e: CliError| e.for_record(&rec.id)))
        .collect()
}
