use super::emd::emd;
use super::ImageRgb;

/// Bins per RGB axis; the cube has `4^3 = 64` bins.
pub const COLOR_BINS_PER_AXIS: usize = 4;
const BINS: usize = COLOR_BINS_PER_AXIS * COLOR_BINS_PER_AXIS * COLOR_BINS_PER_AXIS;

fn bin_center(k: usize) -> [f64; 3] {
    let n = COLOR_BINS_PER_AXIS;
    let (r, g, b) = (k / (n * n), (k / n) % n, k % n);
    [r, g, b].map(|v| (v as f64 + 0.5) / n as f64)
}

/// Euclidean distance between two bin centres of the unit RGB cube.
pub(crate) fn bin_distance(a: usize, b: usize) -> f64 {
    let (p, q) = (bin_center(a), bin_center(b));
    p.iter().zip(&q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Normalised 64-bin RGB histogram.
pub fn color_histogram(img: &ImageRgb) -> Vec<f64> {
    let n = COLOR_BINS_PER_AXIS;
    let shift = 8 - n.trailing_zeros();
    let mut h = vec![0f64; BINS];
    for p in img.data().chunks_exact(3) {
        let (r, g, b) = ((p[0] >> shift) as usize, (p[1] >> shift) as usize, (p[2] >> shift) as usize);
        h[(r * n + g) * n + b] += 1.0;
    }
    let total = (img.width() * img.height()) as f64;
    h.iter_mut().for_each(|v| *v /= total);
    h
}

/// EMD between the image's colour histogram and the uniform histogram.
pub fn colorfulness(img: &ImageRgb) -> f64 {
    let uniform = vec![1.0 / BINS as f64; BINS];
    emd(&color_histogram(img), &uniform, bin_distance)
}
