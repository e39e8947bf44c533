use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use memeforge_core::synth::{class_embeddings, generate_memes, SynthConfig};
use memeforge_core::text::normalize_caption;
use memeforge_core::vision::sidecar_path;
use memeforge_core::{derive_seed, EmbeddingTable};
use serde_json::json;

use crate::config::builtin_lexicon;
use crate::error::Result;
use crate::manifest::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub memes: usize,
    pub labels_csv: PathBuf,
    pub captions: PathBuf,
    pub config: PathBuf,
}

/// Names and widths of the generated embedding tables.
pub const SYNTH_TABLES: [(&str, usize); 2] = [("glove", 16), ("fasttext", 8)];

pub fn embedding_text(table: &EmbeddingTable) -> String {
    let mut out = String::new();
    for tok in table.tokens() {
        out.push_str(tok);
        for v in table.get(tok).unwrap() {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

/// Writes a labelled synthetic corpus: PNG memes with face sidecars, a
/// labels CSV for `ingest`, an offline captions file, two embedding tables
/// and a matching run config.
pub fn cmd_synth(out: &Path, cfg: &SynthConfig) -> Result<SynthSummary> {
    let memes = generate_memes(cfg);
    let lex = builtin_lexicon();
    let mut labels = String::from("id,path,label,a1,a2,a3\n");
    let mut captions = String::new();
    let mut docs = Vec::new();
    for m in &memes {
        let rel = format!("{}.png", m.id);
        let path = out.join("images").join(&rel);
        write_atomic(&path, &m.image.encode_png())?;
        if !m.faces.is_empty() {
            write_atomic(&sidecar_path(&path), serde_json::to_string(&m.faces)?.as_bytes())?;
        }
        let a = m.annotator_labels.map(|c| c.as_str());
        let _ = writeln!(labels, "{},{rel},{},{},{},{}", m.id, m.label.as_str(), a[0], a[1], a[2]);
        captions.push_str(&serde_json::to_string(&json!({ "id": m.id, "text": m.caption }))?);
        captions.push('\n');
        docs.push((normalize_caption(&m.caption, &lex).tokens.tokens, m.label.index()));
    }
    let labels_csv = out.join("labels.csv");
    let captions_file = out.join("captions.jsonl");
    write_atomic(&labels_csv, labels.as_bytes())?;
    write_atomic(&captions_file, captions.as_bytes())?;

    let mut embeddings = serde_json::Map::new();
    for (i, (name, dim)) in SYNTH_TABLES.iter().enumerate() {
        let table = class_embeddings(name, &docs, *dim, derive_seed(cfg.seed, 100 + i as u64));
        let rel = format!("embeddings/{name}.txt");
        write_atomic(&out.join(&rel), embedding_text(&table).as_bytes())?;
        embeddings.insert(name.to_string(), rel.into());
    }
    let run = json!({
        "seed": cfg.seed,
        "folds": 3,
        "offline_captions": "captions.jsonl",
        "embeddings": embeddings,
        "embedding_sets": ["glove", "glove+fasttext"],
        "train": { "epochs": 40, "batch_size": 16 },
    });
    let config = out.join("config.json");
    write_atomic(&config, (serde_json::to_string_pretty(&run)? + "\n").as_bytes())?;
    Ok(SynthSummary { memes: memes.len(), labels_csv, captions: captions_file, config })
}
