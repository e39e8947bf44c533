use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use memeforge_core::MemeClass;

use crate::error::{CliError, Result};
use crate::manifest::{Manifest, ManifestRecord};

fn parse_label(row: usize, s: &str) -> Result<MemeClass> {
    MemeClass::parse(s).ok_or_else(|| CliError::UnknownLabel { row, label: s.to_string() })
}

fn canonical_dir(dir: &Path) -> Result<PathBuf> {
    let dir = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    dir.canonicalize().map_err(|e| CliError::io(dir, e))
}

/// Builds a manifest from a labels CSV with rows `id,relative_path,label`
/// and optionally three annotator labels. A header row is allowed. Image
/// paths are stored relative to the manifest when the image lies below it.
pub fn cmd_ingest(image_dir: &Path, labels_csv: &Path, out: &Path) -> Result<Manifest> {
    let manifest_dir = canonical_dir(out.parent().unwrap_or(Path::new(".")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(labels_csv)
        .map_err(|e| CliError::Data(format!("{}: {e}", labels_csv.display())))?;

    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 1;
        let row = row.map_err(|e| CliError::Data(format!("{} row {row_no}: {e}", labels_csv.display())))?;
        let fields: Vec<&str> = row.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if n == 0 && fields[0].eq_ignore_ascii_case("id") && fields.get(2).is_some_and(|l| MemeClass::parse(l).is_none()) {
            continue;
        }
        if fields.len() != 3 && fields.len() != 6 {
            return Err(CliError::Data(format!(
                "{} row {row_no}: expected 3 or 6 fields, found {}",
                labels_csv.display(),
                fields.len()
            )));
        }
        let id = fields[0].to_string();
        if id.is_empty() {
            return Err(CliError::Data(format!("{} row {row_no}: empty id", labels_csv.display())));
        }
        let label = parse_label(row_no, fields[2])?;
        let annotators = if fields.len() == 6 {
            Some(fields[3..].iter().map(|l| parse_label(row_no, l)).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        if !ids.insert(id.clone()) {
            return Err(CliError::DuplicateId { row: row_no, id });
        }
        let image = image_dir.join(fields[1]);
        if !image.is_file() {
            return Err(CliError::MissingImage { row: row_no, path: image.display().to_string() });
        }
        let image = image.canonicalize().map_err(|e| CliError::io(&image, e))?;
        let stored = image.strip_prefix(&manifest_dir).map(Path::to_path_buf).unwrap_or(image);
        records.push(ManifestRecord {
            label: Some(label),
            annotator_labels: annotators,
            ..ManifestRecord::new(id, stored)
        });
    }
    let manifest = Manifest { dir: manifest_dir, records };
    manifest.save(out)?;
    log::info!("wrote {} records to {}", manifest.records.len(), out.display());
    Ok(manifest)
}
