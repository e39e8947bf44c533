use std::path::Path;

use memeforge_core::nn::{load_checkpoint, predict};
use memeforge_core::ocr_client::{extract_remote, OcrMode, OfflineCaptions};
use memeforge_core::text::{combine_tables, parse_embedding_table};
use memeforge_core::vision::{load_image, preprocess_for_ocr};
use memeforge_core::{MemeClass, SequenceMatrix};

use crate::config::{load_lexicon, RunConfig};
use crate::error::{CliError, Result};
use crate::pipeline::{caption_matrix, image_tensor, needs_text, PipelineMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// In class-index order.
    pub probabilities: Vec<f64>,
    pub label: MemeClass,
    pub caption: Option<String>,
}

impl Prediction {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, p) in MemeClass::ALL.iter().zip(&self.probabilities) {
            out.push_str(&format!("{:<14} {p:.6}\n", c.as_str()));
        }
        out.push_str(&format!("label: {}\n", self.label.display_name()));
        out
    }
}

/// Where the caption comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptionInput<'a> {
    Text(&'a str),
    /// Run OCR as configured; offline captions are looked up by file stem.
    Ocr,
}

fn ocr_caption(image_path: &Path, cfg: &RunConfig) -> Result<String> {
    let id = image_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let rec = match cfg.ocr.mode {
        OcrMode::Offline => {
            let path = cfg
                .offline_captions
                .as_deref()
                .ok_or_else(|| CliError::Config("offline OCR needs offline_captions in the config".into()))?;
            OfflineCaptions::load(path)?.get(&id)?
        }
        OcrMode::Remote => {
            let img = load_image(image_path)?;
            extract_remote(&id, &preprocess_for_ocr(&img, &cfg.ocr_preprocess)?.encode_png(), &cfg.ocr)?
        }
    };
    if let Some(w) = &rec.warning {
        log::warn!("{id}: {w}");
    }
    Ok(rec.raw_text)
}

/// Classifies one image. The text pipeline is rebuilt from the settings the
/// checkpoint was trained with.
pub fn cmd_predict(checkpoint: &Path, image_path: &Path, caption: Option<CaptionInput<'_>>, cfg: &RunConfig) -> Result<Prediction> {
    let caption = caption.ok_or_else(|| CliError::Usage("give a caption or --ocr".into()))?;
    let ckpt = load_checkpoint(checkpoint, None)?;
    let meta: PipelineMeta = serde_json::from_value(ckpt.meta.clone())
        .map_err(|e| CliError::Data(format!("{}: checkpoint metadata: {e}", checkpoint.display())))?;
    let m = &ckpt.model.config;
    let img = load_image(image_path)?;
    let image = image_tensor(&img, m, &meta.ocr_preprocess)?;

    let text = match caption {
        CaptionInput::Text(t) => t.to_string(),
        CaptionInput::Ocr => ocr_caption(image_path, cfg)?,
    };
    let sequence = if needs_text(ckpt.model.kind) {
        let mut table = None;
        let set = meta.embedding_set.as_deref().unwrap_or_default();
        for name in set.split('+').filter(|n| !n.is_empty()) {
            let path = meta
                .embedding_files
                .get(name)
                .ok_or_else(|| CliError::Data(format!("checkpoint has no file for embedding table {name:?}")))?;
            let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let t = parse_embedding_table(name, &raw)?;
            table = Some(match table {
                None => t,
                Some(prev) => combine_tables(&prev, &t),
            });
        }
        let table = table.ok_or_else(|| CliError::Data("checkpoint records no embedding tables".into()))?;
        caption_matrix(&text, &load_lexicon(meta.lexicon_dir.as_deref())?, &table, m.max_len)
    } else {
        SequenceMatrix::zeros(m.max_len, m.embed_dim)
    };
    let probabilities = predict(&ckpt.model, &image, &sequence)?;
    let best = probabilities.iter().enumerate().fold(0, |b, (i, v)| if *v > probabilities[b] { i } else { b });
    Ok(Prediction { label: MemeClass::ALL[best], probabilities, caption: Some(text) })
}
