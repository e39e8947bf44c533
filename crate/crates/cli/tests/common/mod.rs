#![allow(dead_code)]

use std::path::{Path, PathBuf};

use memeforge_cli::{cmd_ingest, cmd_ocr, cmd_synth, RunConfig};
use memeforge_core::synth::SynthConfig;
use memeforge_core::FusionModelConfig;

pub struct Corpus {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
    pub config: PathBuf,
}

impl Corpus {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig::load(&self.config).unwrap()
    }
}

/// A network small enough to train in well under a second per epoch.
pub fn small_model() -> FusionModelConfig {
    FusionModelConfig {
        img_h: 32,
        img_w: 32,
        conv1_filters: 6,
        conv2_filters: 4,
        cnn_dense: 8,
        standalone_cnn_dense: 8,
        max_len: 8,
        lstm_units: 8,
        lstm_dense1: 8,
        lstm_dense2: 8,
        fuse_dense1: 8,
        ..Default::default()
    }
}

/// Synthesises, ingests and captions `per_class * 3` memes, and rewrites
/// the generated config with the small model and `epochs`.
pub fn corpus(per_class: usize, seed: u64, epochs: usize) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { per_class, width: 64, height: 64, font_scale: 1, seed, ..Default::default() };
    let s = cmd_synth(dir.path(), &cfg).unwrap();
    let manifest = dir.path().join("manifest.jsonl");
    cmd_ingest(&dir.path().join("images"), &s.labels_csv, &manifest).unwrap();

    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&s.config).unwrap()).unwrap();
    v["model"] = serde_json::to_value(small_model()).unwrap();
    v["train"]["epochs"] = epochs.into();
    std::fs::write(&s.config, serde_json::to_string_pretty(&v).unwrap()).unwrap();

    let run = RunConfig::load(&s.config).unwrap();
    let summary = cmd_ocr(&manifest, &run, None, None).unwrap();
    assert_eq!(summary.filled, per_class * 3);
    Corpus { dir, manifest, config: s.config }
}
