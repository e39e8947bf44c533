//! The OCR-oriented preprocessing chain: rescale, Gaussian blur, deskew and
//! Gaussian adaptive thresholding.

use serde::{Deserialize, Serialize};

use super::{ImageGray, ImageRgb, Result, VisionError};

/// Bilinear resampling with half-pixel centres, shared by the RGB and gray
/// rasters.
pub(crate) fn bilinear_resize(
    src: &[u8],
    sw: usize,
    sh: usize,
    channels: usize,
    dw: usize,
    dh: usize,
) -> Result<Vec<u8>> {
    if dw == 0 || dh == 0 {
        return Err(VisionError::ZeroDimension(dw, dh));
    }
    if sw == dw && sh == dh {
        return Ok(src.to_vec());
    }
    let axis = |d: usize, s: usize, n_dst: usize| -> (usize, usize, f64) {
        let pos = ((d as f64 + 0.5) * s as f64 / n_dst as f64 - 0.5).clamp(0.0, (s - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(s - 1);
        (i0, i1, pos - i0 as f64)
    };
    let xs: Vec<_> = (0..dw).map(|x| axis(x, sw, dw)).collect();
    let mut out = Vec::with_capacity(dw * dh * channels);
    for y in 0..dh {
        let (y0, y1, fy) = axis(y, sh, dh);
        for &(x0, x1, fx) in &xs {
            for c in 0..channels {
                let at = |xx: usize, yy: usize| src[(yy * sw + xx) * channels + c] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// Normalised 2-D Gaussian kernel of side `2*ceil(3*sigma)+1`, row-major.
pub fn gaussian_kernel(sigma: f64) -> Result<(usize, Vec<f64>)> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(VisionError::NonPositiveSigma(sigma));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let side = (2 * radius + 1) as usize;
    let mut k = Vec::with_capacity(side * side);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            k.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= total);
    Ok((side, k))
}

/// Direct 2-D convolution with a normalised Gaussian kernel.
pub fn gaussian_blur(img: &ImageGray, sigma: f64) -> Result<ImageGray> {
    let (side, kernel) = gaussian_kernel(sigma)?;
    let r = (side / 2) as isize;
    let (w, h) = (img.width, img.height);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            let mut ki = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    acc += kernel[ki] * img.get_clamped(x + dx, y + dy) as f64;
                    ki += 1;
                }
            }
            out.push(acc.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(ImageGray { width: w, height: h, data: out })
}

/// Rotates about the image centre by `angle_deg` (positive is clockwise on
/// screen, since rows grow downwards). Samples outside the source are white.
pub fn rotate(img: &ImageGray, angle_deg: f64) -> ImageGray {
    if angle_deg == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width, img.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let sample = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= w as isize || yi >= h as isize {
            255.0
        } else {
            img.data[yi as usize * w + xi as usize] as f64
        }
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 - cx, y as f64 - cy);
            // inverse map: rotate the output position by -angle
            let sx = cos * px + sin * py + cx;
            let sy = -sin * px + cos * py + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let top = sample(x0, y0) * (1.0 - fx) + sample(x0 + 1, y0) * fx;
            let bottom = sample(x0, y0 + 1) * (1.0 - fx) + sample(x0 + 1, y0 + 1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8);
        }
    }
    ImageGray { width: w, height: h, data: out }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewEstimate {
    /// Angle by which the content is rotated; `rotate(img, -angle)` levels it.
    pub angle: f64,
    /// Set when the image is uniform and no estimate is possible.
    pub degenerate: bool,
}

const SKEW_LIMIT_DEG: f64 = 15.0;
const SKEW_STEP_DEG: f64 = 0.5;

/// Projection-profile skew search over [-15, 15] degrees in 0.5 degree steps.
///
/// The image is binarised at the midpoint of its intensity range (dark pixels
/// are ink). For each candidate angle the ink is rotated back by that angle and
/// the variance of the resulting row sums is measured; text lines that have
/// been levelled give the spikiest profile.
pub fn estimate_skew(img: &ImageGray) -> SkewEstimate {
    let (lo, hi) = img
        .data
        .iter()
        .fold((u8::MAX, u8::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return SkewEstimate { angle: 0.0, degenerate: true };
    }
    let threshold = (lo as f64 + hi as f64) / 2.0;
    let (w, h) = (img.width, img.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let ink: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| (img.data[y * w + x] as f64) < threshold)
        .map(|(x, y)| (x as f64 - cx, y as f64 - cy))
        .collect();

    // 0, +0.5, -0.5, +1, ... so ties resolve toward the smallest rotation.
    let steps = (SKEW_LIMIT_DEG / SKEW_STEP_DEG).round() as i32;
    let candidates = std::iter::once(0).chain((1..=steps).flat_map(|s| [s, -s]));

    let mut rows = vec![0f64; h];
    let mut best = (f64::NEG_INFINITY, 0.0);
    for s in candidates {
        let angle = s as f64 * SKEW_STEP_DEG;
        let (sin, cos) = angle.to_radians().sin_cos();
        rows.iter_mut().for_each(|r| *r = 0.0);
        for &(px, py) in &ink {
            // forward map of rotate(-angle)
            let rx = (cos * px + sin * py + cx).round();
            let ry = (-sin * px + cos * py + cy).round();
            if rx >= 0.0 && ry >= 0.0 && rx < w as f64 && ry < h as f64 {
                rows[ry as usize] += 1.0;
            }
        }
        let mean = rows.iter().sum::<f64>() / h as f64;
        let var = rows.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / h as f64;
        if var > best.0 {
            best = (var, angle);
        }
    }
    SkewEstimate { angle: best.1, degenerate: false }
}

/// Levels the dominant text direction.
pub fn deskew(img: &ImageGray) -> (ImageGray, SkewEstimate) {
    let est = estimate_skew(img);
    (rotate(img, -est.angle), est)
}

/// Gaussian adaptive threshold: a pixel becomes 255 when it exceeds the
/// Gaussian-weighted mean of its `block` x `block` neighbourhood minus `c`,
/// else 0.
pub fn adaptive_threshold(img: &ImageGray, block: usize, c: f64) -> Result<ImageGray> {
    if block < 3 || block % 2 == 0 {
        return Err(VisionError::EvenBlock(block));
    }
    // Same sigma rule as the common OpenCV default for a given block size.
    let sigma = 0.3 * ((block as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let r = (block / 2) as isize;
    let mut k: Vec<f64> = (-r..=r).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);

    let (w, h) = (img.width, img.height);
    // separable pass: horizontal into a float buffer, then vertical
    let mut horiz = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (ki, d) in (-r..=r).enumerate() {
                acc += k[ki] * img.get_clamped(x + d, y as isize) as f64;
            }
            horiz[y * w + x as usize] = acc;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w {
            let mut mean = 0.0;
            for (ki, d) in (-r..=r).enumerate() {
                let yy = (y + d).clamp(0, h as isize - 1) as usize;
                mean += k[ki] * horiz[yy * w + x];
            }
            let v = img.data[y as usize * w + x] as f64;
            out.push(if v > mean - c { 255 } else { 0 });
        }
    }
    Ok(ImageGray { width: w, height: h, data: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcrPreprocessConfig {
    /// Upscaling factor applied before blurring.
    pub scale: f64,
    pub sigma: f64,
    pub block: usize,
    pub c: f64,
}

impl Default for OcrPreprocessConfig {
    fn default() -> Self {
        Self { scale: 2.0, sigma: 1.0, block: 11, c: 2.0 }
    }
}

/// Rescale, blur, deskew and threshold: the image handed to the OCR service.
pub fn preprocess_for_ocr(img: &ImageRgb, cfg: &OcrPreprocessConfig) -> Result<ImageGray> {
    let gray = img.to_grayscale();
    let tw = ((gray.width as f64 * cfg.scale).round() as usize).max(1);
    let th = ((gray.height as f64 * cfg.scale).round() as usize).max(1);
    let scaled = gray.rescale(tw, th)?;
    let blurred = gaussian_blur(&scaled, cfg.sigma)?;
    let (level, _) = deskew(&blurred);
    adaptive_threshold(&level, cfg.block, cfg.c)
}
