use std::path::Path;

use memeforge_core::ocr_client::{extract_remote, OcrMode, OfflineCaptions};
use memeforge_core::vision::{load_image, preprocess_for_ocr};
use memeforge_core::CaptionRecord;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcrSummary {
    pub records: usize,
    pub filled: usize,
    /// `(id, message)` for every record left without a caption or flagged.
    pub warnings: Vec<(String, String)>,
}

fn remote_caption(manifest: &Manifest, idx: usize, cfg: &RunConfig) -> Result<CaptionRecord> {
    let rec = &manifest.records[idx];
    let img = load_image(&manifest.image_path(rec))?;
    let prepared = preprocess_for_ocr(&img, &cfg.ocr_preprocess)?;
    Ok(extract_remote(&rec.id, &prepared.encode_png(), &cfg.ocr)?)
}

/// Fills `caption_raw` for every record. Per-record failures become
/// `ocr_warning`s and the batch carries on; only an unreadable manifest or
/// captions file is fatal. Writes to `out`, or back to the manifest.
pub fn cmd_ocr(manifest_path: &Path, cfg: &RunConfig, offline: Option<&Path>, out: Option<&Path>) -> Result<OcrSummary> {
    let mut manifest = Manifest::load(manifest_path)?;
    let outcomes: Vec<Result<CaptionRecord>> = match (offline, cfg.ocr.mode) {
        (Some(_), _) | (None, OcrMode::Offline) => {
            let path = offline
                .or(cfg.offline_captions.as_deref())
                .ok_or_else(|| CliError::Config("offline OCR needs a captions file (--offline or offline_captions)".into()))?;
            let captions = OfflineCaptions::load(path)?;
            manifest.records.iter().map(|r| Ok(captions.get(&r.id)?)).collect()
        }
        (None, OcrMode::Remote) => {
            cfg.ocr.validate()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.ocr.workers.max(1))
                .build()
                .map_err(|e| CliError::Internal(e.to_string()))?;
            let m = &manifest;
            pool.install(|| (0..m.records.len()).into_par_iter().map(|i| remote_caption(m, i, cfg)).collect())
        }
    };

    let mut summary = OcrSummary { records: manifest.records.len(), filled: 0, warnings: Vec::new() };
    for (rec, outcome) in manifest.records.iter_mut().zip(outcomes) {
        match outcome {
            Ok(c) => {
                rec.caption_raw = Some(c.raw_text);
                rec.ocr_warning = c.warning;
                summary.filled += 1;
            }
            Err(e) => {
                rec.caption_raw = None;
                rec.ocr_warning = Some(e.to_string());
            }
        }
        if let Some(w) = &rec.ocr_warning {
            log::warn!("{}: {w}", rec.id);
            summary.warnings.push((rec.id.clone(), w.clone()));
        }
    }
    manifest.save(out.unwrap_or(manifest_path))?;
    Ok(summary)
}
