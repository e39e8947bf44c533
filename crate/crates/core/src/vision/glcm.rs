use super::{ImageGray, Result, VisionError};

/// Pixel offset (row delta, column delta) for co-occurrence counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlcmOffset {
    pub dr: isize,
    pub dc: isize,
}

impl GlcmOffset {
    pub const DEG_0: GlcmOffset = GlcmOffset { dr: 0, dc: 1 };
    pub const DEG_45: GlcmOffset = GlcmOffset { dr: -1, dc: 1 };
    pub const DEG_90: GlcmOffset = GlcmOffset { dr: -1, dc: 0 };
    pub const DEG_135: GlcmOffset = GlcmOffset { dr: -1, dc: -1 };
    pub const ALL: [GlcmOffset; 4] = [Self::DEG_0, Self::DEG_45, Self::DEG_90, Self::DEG_135];
}

/// Normalised, symmetric gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    levels: usize,
    p: Vec<f64>,
}

impl GlcmMatrix {
    /// Wraps an already-normalised `levels x levels` probability table.
    pub fn from_probabilities(levels: usize, p: Vec<f64>) -> Result<Self> {
        if levels < 2 {
            return Err(VisionError::TooFewLevels(levels));
        }
        if p.len() != levels * levels {
            return Err(VisionError::InvalidRaster(format!("GLCM needs {} cells, got {}", levels * levels, p.len())));
        }
        Ok(Self { levels, p })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
}

impl GlcmFeatures {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.contrast, self.correlation, self.energy, self.homogeneity]
    }
}

/// GLCM pooled over the four distance-1 directions.
pub fn compute_glcm(img: &ImageGray, levels: usize) -> Result<GlcmMatrix> {
    compute_glcm_with_offsets(img, levels, &GlcmOffset::ALL)
}

/// Quantises into `levels` equal bins, counts each offset pair in both
/// orders, pools the offsets and normalises to unit mass.
pub fn compute_glcm_with_offsets(img: &ImageGray, levels: usize, offsets: &[GlcmOffset]) -> Result<GlcmMatrix> {
    if levels < 2 {
        return Err(VisionError::TooFewLevels(levels));
    }
    let (w, h) = (img.width(), img.height());
    if w < 2 || h < 2 {
        return Err(VisionError::TooSmall(w, h));
    }
    let q: Vec<usize> = img.data().iter().map(|&v| v as usize * levels / 256).collect();
    let mut counts = vec![0u64; levels * levels];
    for off in offsets {
        for r in 0..h as isize {
            let r2 = r + off.dr;
            if r2 < 0 || r2 >= h as isize {
                continue;
            }
            for c in 0..w as isize {
                let c2 = c + off.dc;
                if c2 < 0 || c2 >= w as isize {
                    continue;
                }
                let a = q[r as usize * w + c as usize];
                let b = q[r2 as usize * w + c2 as usize];
                counts[a * levels + b] += 1;
                counts[b * levels + a] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(VisionError::TooSmall(w, h));
    }
    let p = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(GlcmMatrix { levels, p })
}

/// Contrast, correlation, energy and homogeneity of a normalised GLCM.
pub fn glcm_features(m: &GlcmMatrix) -> GlcmFeatures {
    let n = m.levels;
    let (mut contrast, mut energy, mut homogeneity) = (0.0, 0.0, 0.0);
    let mut mu = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = m.get(i, j);
            let d = i as f64 - j as f64;
            contrast += d * d * p;
            energy += p * p;
            homogeneity += p / (1.0 + d.abs());
            mu += i as f64 * p;
        }
    }
    let mut var = 0.0;
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = m.get(i, j);
            var += (i as f64 - mu).powi(2) * p;
            cov += (i as f64 - mu) * (j as f64 - mu) * p;
        }
    }
    let correlation = if var < 1e-12 { 0.0 } else { cov / var };
    GlcmFeatures { contrast, correlation, energy, homogeneity }
}
