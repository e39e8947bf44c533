//! JSONL manifest: one meme per line.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use memeforge_core::MemeClass;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    /// Relative paths are relative to the manifest's directory.
    pub image_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<MemeClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption_raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_labels: Option<Vec<MemeClass>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_warning: Option<String>,
}

impl ManifestRecord {
    pub fn new(id: impl Into<String>, image_path: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            image_path: image_path.into(),
            label: None,
            caption_raw: None,
            annotator_labels: None,
            ocr_warning: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory that relative image paths hang off.
    pub dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn parse(text: &str, dir: &Path, origin: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut ids = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(line)
                .map_err(|e| CliError::Data(format!("{origin} line {}: {e}", n + 1)))?;
            if rec.annotator_labels.as_ref().is_some_and(|a| a.len() != 3) {
                return Err(CliError::Data(format!("{origin} line {}: annotator_labels must hold 3 labels", n + 1)));
            }
            if !ids.insert(rec.id.clone()) {
                return Err(CliError::Data(format!("{origin} line {}: duplicate id {:?}", n + 1, rec.id)));
            }
            records.push(rec);
        }
        Ok(Self { dir: dir.to_path_buf(), records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), &path.display().to_string())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl().as_bytes())
    }

    pub fn image_path(&self, rec: &ManifestRecord) -> PathBuf {
        if rec.image_path.is_absolute() {
            rec.image_path.clone()
        } else {
            self.dir.join(&rec.image_path)
        }
    }

    /// Labels as class indices, failing on the first unlabelled record.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.records
            .iter()
            .map(|r| r.label.map(MemeClass::index).ok_or_else(|| CliError::Data(format!("record {:?} has no label", r.id))))
            .collect()
    }
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp~");
    let mut f = std::fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
