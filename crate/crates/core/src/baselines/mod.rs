//! Classical baselines: a polynomial-kernel SVM and a random forest over
//! hand-crafted image features.

mod forest;
mod svm;

pub use forest::{rf_predict, rf_train, RfConfig, RfModel};
pub use svm::{svm_decision_values, svm_predict, svm_train, SvmConfig, SvmModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vision::{
    colorfulness, compute_glcm, face_features, glcm_features, tamura_coarseness, tamura_directionality, FaceBox,
    ImageRgb, VisionError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("all training labels are the same class")]
    SingleClass,
    #[error("no training data")]
    EmptyData,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label count {labels} does not match row count {rows}")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Vision(#[from] VisionError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Glcm,
    Colorfulness,
    Tamura,
    Face,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 4] =
        [FeatureFamily::Glcm, FeatureFamily::Colorfulness, FeatureFamily::Tamura, FeatureFamily::Face];

    pub fn dim(self) -> usize {
        match self {
            FeatureFamily::Glcm => 4,
            FeatureFamily::Colorfulness => 1,
            FeatureFamily::Tamura | FeatureFamily::Face => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Glcm => "glcm",
            FeatureFamily::Colorfulness => "colorfulness",
            FeatureFamily::Tamura => "tamura",
            FeatureFamily::Face => "face",
        }
    }

    /// Column names, in value order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            FeatureFamily::Glcm => &["contrast", "correlation", "energy", "homogeneity"],
            FeatureFamily::Colorfulness => &["colorfulness"],
            FeatureFamily::Tamura => &["coarseness", "directionality"],
            FeatureFamily::Face => &["face_count", "face_max_rel_area"],
        }
    }
}

impl std::str::FromStr for FeatureFamily {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| BaselineError::InvalidConfig(format!("unknown feature family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub family: FeatureFamily,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(family: FeatureFamily, values: Vec<f64>) -> Result<Self> {
        if values.len() != family.dim() {
            return Err(BaselineError::DimensionMismatch { expected: family.dim(), found: values.len() });
        }
        Ok(Self { family, values })
    }
}

/// Computes one feature family for an image. GLCM uses 8 grey levels.
pub fn extract_features(family: FeatureFamily, img: &ImageRgb, faces: &[FaceBox]) -> Result<FeatureVector> {
    let values = match family {
        FeatureFamily::Glcm => glcm_features(&compute_glcm(&img.to_grayscale(), 8)?).to_vec(),
        FeatureFamily::Colorfulness => vec![colorfulness(img)],
        FeatureFamily::Tamura => {
            let g = img.to_grayscale();
            vec![tamura_coarseness(&g), tamura_directionality(&g).value]
        }
        FeatureFamily::Face => face_features(faces, img.width(), img.height())?.to_vec(),
    };
    FeatureVector::new(family, values)
}

/// Per-column mean and standard deviation of a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// z-scores a row; columns with std below 1e-12 are only centred.
    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(BaselineError::DimensionMismatch { expected: self.mean.len(), found: row.len() });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s < 1e-12 { v - m } else { (v - m) / s })
            .collect())
    }
}

/// Fits a [`Scaler`] (population standard deviation) and applies it.
pub fn standardize(x: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Scaler)> {
    if x.len() < 2 {
        return Err(BaselineError::TooFewRows { need: 2, got: x.len() });
    }
    let d = check_rect(x)?;
    let n = x.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..d).map(|j| (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt()).collect();
    let scaler = Scaler { mean, std };
    let out = x.iter().map(|r| scaler.apply(r)).collect::<Result<_>>()?;
    Ok((out, scaler))
}

fn check_rect(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map_or(0, Vec::len);
    for r in x {
        if r.len() != d {
            return Err(BaselineError::DimensionMismatch { expected: d, found: r.len() });
        }
    }
    Ok(d)
}

fn check_training(x: &[Vec<f64>], y: &[usize]) -> Result<usize> {
    if x.is_empty() {
        return Err(BaselineError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(BaselineError::LabelMismatch { labels: y.len(), rows: x.len() });
    }
    check_rect(x)
}

/// Index of the largest value; ties go to the lowest index.
fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::ImageRgb;

    #[test]
    fn standardize_contract() {
        let x = vec![vec![1.0, 5.0, 2.0], vec![2.0, 5.0, -1.0], vec![6.0, 5.0, 0.5], vec![3.0, 5.0, 9.0]];
        let (z, s) = standardize(&x).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9);
            if j == 1 {
                assert!(col.iter().all(|&v| v == 0.0));
            } else {
                let sd = (col.iter().map(|v| v * v).sum::<f64>() / 4.0).sqrt();
                assert!((sd - 1.0).abs() < 1e-9);
            }
        }
        for (row, zr) in x.iter().zip(&z) {
            assert_eq!(&s.apply(row).unwrap(), zr);
        }
        assert_eq!(standardize(&x[..1]).unwrap_err(), BaselineError::TooFewRows { need: 2, got: 1 });
        assert!(s.apply(&[1.0]).is_err());
    }

    #[test]
    fn feature_dims() {
        let img = ImageRgb::new(16, 12, (0..16 * 12 * 3).map(|i| (i * 37 % 256) as u8).collect()).unwrap();
        let faces = [FaceBox { x: 1, y: 1, w: 4, h: 3 }];
        for fam in FeatureFamily::ALL {
            let f = extract_features(fam, &img, &faces).unwrap();
            assert_eq!(f.values.len(), fam.dim());
            assert_eq!(fam.columns().len(), fam.dim());
            assert!(f.values.iter().all(|v| v.is_finite()));
        }
        assert!(FeatureVector::new(FeatureFamily::Glcm, vec![1.0]).is_err());
        assert_eq!("tamura".parse::<FeatureFamily>().unwrap(), FeatureFamily::Tamura);
    }
}
