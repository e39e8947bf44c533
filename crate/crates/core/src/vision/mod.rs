//! Image decoding, OCR-oriented preprocessing and the classical image
//! features (GLCM texture, EMD colourfulness, Tamura texture, faces).
//!
//! Every operation is a pure function over its inputs. Borders are handled by
//! edge replication throughout.

mod colorfulness;
pub mod emd;
mod face;
mod glcm;
mod preprocess;
mod tamura;

pub use colorfulness::{color_histogram, colorfulness, COLOR_BINS_PER_AXIS};
pub use face::{face_features, load_face_sidecar, sidecar_path, FaceBox, FaceFeatures};
pub use glcm::{compute_glcm, compute_glcm_with_offsets, glcm_features, GlcmFeatures, GlcmMatrix, GlcmOffset};
pub use preprocess::{
    adaptive_threshold, deskew, estimate_skew, gaussian_blur, gaussian_kernel, preprocess_for_ocr,
    rotate, OcrPreprocessConfig, SkewEstimate,
};
pub use tamura::{tamura_coarseness, tamura_directionality, Directionality};

use std::io::Cursor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("target dimensions must be at least 1x1, got {0}x{1}")]
    ZeroDimension(usize, usize),
    #[error("gaussian sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("adaptive threshold block must be odd and at least 3, got {0}")]
    EvenBlock(usize),
    #[error("image of {0}x{1} is too small (need at least 2x2)")]
    TooSmall(usize, usize),
    #[error("GLCM needs at least 2 gray levels, got {0}")]
    TooFewLevels(usize),
    #[error("face box {0:?} lies outside a {1}x{2} image")]
    BoxOutOfBounds(FaceBox, usize, usize),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
}

pub type Result<T> = std::result::Result<T, VisionError>;

/// An 8-bit RGB raster, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// An 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_raster(width, height, 3, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "empty raster");
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Luma conversion with weights 0.299/0.587/0.114.
    pub fn to_grayscale(&self) -> ImageGray {
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        ImageGray { width: self.width, height: self.height, data }
    }

    /// Bilinear resize to exactly `target_w` x `target_h`.
    pub fn rescale(&self, target_w: usize, target_h: usize) -> Result<ImageRgb> {
        let data = preprocess::bilinear_resize(&self.data, self.width, self.height, 3, target_w, target_h)?;
        Ok(ImageRgb { width: target_w, height: target_h, data })
    }

    /// Encodes as PNG.
    pub fn encode_png(&self) -> Vec<u8> {
        encode_png(&self.data, self.width, self.height, image::ExtendedColorType::Rgb8)
    }
}

impl ImageGray {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_raster(width, height, 1, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width >= 1 && height >= 1, "empty raster");
        Self { width, height, data: vec![value; width * height] }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width >= 1 && height >= 1, "empty raster");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Edge-replicated read.
    pub(crate) fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn rescale(&self, target_w: usize, target_h: usize) -> Result<ImageGray> {
        let data = preprocess::bilinear_resize(&self.data, self.width, self.height, 1, target_w, target_h)?;
        Ok(ImageGray { width: target_w, height: target_h, data })
    }

    /// Replicates the gray channel into RGB.
    pub fn to_rgb(&self) -> ImageRgb {
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageRgb { width: self.width, height: self.height, data }
    }

    pub fn encode_png(&self) -> Vec<u8> {
        encode_png(&self.data, self.width, self.height, image::ExtendedColorType::L8)
    }
}

fn check_raster(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(VisionError::InvalidRaster(format!("{width}x{height} has no pixels")));
    }
    if len != width * height * channels {
        return Err(VisionError::InvalidRaster(format!(
            "expected {} bytes for {width}x{height}x{channels}, got {len}",
            width * height * channels
        )));
    }
    Ok(())
}

fn encode_png(data: &[u8], width: usize, height: usize, color: image::ExtendedColorType) -> Vec<u8> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(data, width as u32, height as u32, color)
        .expect("in-memory PNG encoding cannot fail for a valid raster");
    out
}

/// Decodes a PNG or JPEG stream into RGB.
pub fn decode_image(bytes: &[u8]) -> Result<ImageRgb> {
    let format = image::guess_format(bytes).map_err(|e| match e {
        image::ImageError::Unsupported(u) => VisionError::UnsupportedFormat(u.to_string()),
        other => VisionError::MalformedImage(other.to_string()),
    })?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(VisionError::UnsupportedFormat(format!("{format:?}")));
    }
    let reader = image::ImageReader::with_format(Cursor::new(bytes), format);
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => VisionError::UnsupportedFormat(u.to_string()),
        other => VisionError::MalformedImage(other.to_string()),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageRgb::new(w as usize, h as usize, rgb.into_raw())
}

/// Reads and decodes an image file, attaching the path to any error.
pub fn load_image(path: &std::path::Path) -> Result<ImageRgb> {
    let bytes = std::fs::read(path)
        .map_err(|e| VisionError::MalformedImage(format!("{}: {e}", path.display())))?;
    decode_image(&bytes).map_err(|e| match e {
        VisionError::MalformedImage(m) => VisionError::MalformedImage(format!("{}: {m}", path.display())),
        VisionError::UnsupportedFormat(m) => VisionError::UnsupportedFormat(format!("{}: {m}", path.display())),
        other => other,
    })
}
