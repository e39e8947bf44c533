use std::path::Path;

use memeforge_core::baselines::extract_features;
use memeforge_core::vision::{load_face_sidecar, load_image};
use memeforge_core::FeatureFamily;
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::manifest::{write_atomic, Manifest};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub families: Vec<FeatureFamily>,
    pub columns: Vec<String>,
    /// `(id, values)` for every record whose features could be computed.
    pub rows: Vec<(String, Vec<f64>)>,
    /// `(id, message)` for skipped records.
    pub skipped: Vec<(String, String)>,
}

pub fn parse_families(list: &str) -> Result<Vec<FeatureFamily>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let f: FeatureFamily = name.parse().map_err(|_| CliError::Usage(format!("unknown feature family {name:?}")))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no feature families given".into()));
    }
    Ok(out)
}

fn record_features(manifest: &Manifest, idx: usize, families: &[FeatureFamily]) -> Result<Vec<f64>> {
    let path = manifest.image_path(&manifest.records[idx]);
    let img = load_image(&path)?;
    let faces = load_face_sidecar(&path).map_err(|e| CliError::Data(format!("face sidecar for {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for &f in families {
        values.extend(extract_features(f, &img, &faces)?.values);
    }
    Ok(values)
}

/// Computes the requested families for every record, in manifest order.
/// Records whose image cannot be read are skipped with a warning.
pub fn compute_features(manifest: &Manifest, families: &[FeatureFamily]) -> FeatureTable {
    let outcomes: Vec<Result<Vec<f64>>> =
        (0..manifest.records.len()).into_par_iter().map(|i| record_features(manifest, i, families)).collect();
    let mut table = FeatureTable {
        families: families.to_vec(),
        columns: families.iter().flat_map(|f| f.columns().iter().map(|c| c.to_string())).collect(),
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for (rec, outcome) in manifest.records.iter().zip(outcomes) {
        match outcome {
            Ok(v) => table.rows.push((rec.id.clone(), v)),
            Err(e) => {
                log::warn!("{}: skipped: {e}", rec.id);
                table.skipped.push((rec.id.clone(), e.to_string()));
            }
        }
    }
    table
}

impl FeatureTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
        w.write_record(std::iter::once("id").chain(self.columns.iter().map(String::as_str))).map_err(csv_err)?;
        for (id, values) in &self.rows {
            w.write_record(std::iter::once(id.clone()).chain(values.iter().map(|v| v.to_string()))).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
    }
}

pub fn cmd_features(manifest_path: &Path, families: &[FeatureFamily], out: &Path) -> Result<FeatureTable> {
    let manifest = Manifest::load(manifest_path)?;
    let table = compute_features(&manifest, families);
    write_atomic(out, &table.to_csv()?)?;
    Ok(table)
}
