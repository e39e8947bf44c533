use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Result, VisionError};

/// Face bounding box in pixels, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFeatures {
    pub count: usize,
    /// Largest box area over image area; 0 when there are no faces.
    pub max_rel_area: f64,
}

impl FaceFeatures {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.count as f64, self.max_rel_area]
    }
}

pub fn face_features(boxes: &[FaceBox], img_w: usize, img_h: usize) -> Result<FaceFeatures> {
    let mut largest = 0i64;
    for b in boxes {
        let inside = b.w > 0 && b.h > 0 && b.x >= 0 && b.y >= 0 && b.x + b.w <= img_w as i64 && b.y + b.h <= img_h as i64;
        if !inside {
            return Err(VisionError::BoxOutOfBounds(*b, img_w, img_h));
        }
        largest = largest.max(b.w * b.h);
    }
    let max_rel_area = if boxes.is_empty() { 0.0 } else { largest as f64 / (img_w * img_h) as f64 };
    Ok(FaceFeatures { count: boxes.len(), max_rel_area })
}

/// `dir/X.png` -> `dir/X.faces.json`.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    let stem = image_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    image_path.with_file_name(format!("{stem}.faces.json"))
}

/// Reads the optional face sidecar for an image; a missing file means no faces.
pub fn load_face_sidecar(image_path: &Path) -> std::io::Result<Vec<FaceBox>> {
    let path = sidecar_path(image_path);
    match std::fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}
