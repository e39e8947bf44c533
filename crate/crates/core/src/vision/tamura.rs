//! Tamura coarseness and directionality.

use super::ImageGray;

const MAX_WINDOW_EXP: u32 = 5;
const MIN_SIDE: usize = 64;
const ORIENTATION_BINS: usize = 16;
const EDGE_THRESHOLD: f64 = 12.0;

/// Summed-area table over an edge-replicated extension of the image, so box
/// means can be taken at any position within `margin` of the border.
struct BoxMeans {
    sat: Vec<f64>,
    stride: usize,
    margin: isize,
}

impl BoxMeans {
    fn new(img: &ImageGray, margin: usize) -> Self {
        let (w, h) = (img.width() + 2 * margin, img.height() + 2 * margin);
        let stride = w + 1;
        let mut sat = vec![0f64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += img.get_clamped(x as isize - margin as isize, y as isize - margin as isize) as f64;
                sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
            }
        }
        Self { sat, stride, margin: margin as isize }
    }

    /// Mean over the `size` x `size` window whose top-left is (x0, y0).
    fn mean(&self, x0: isize, y0: isize, size: isize) -> f64 {
        let (x0, y0) = ((x0 + self.margin) as usize, (y0 + self.margin) as usize);
        let (x1, y1) = (x0 + size as usize, y0 + size as usize);
        let s = self.stride;
        let total = self.sat[y1 * s + x1] - self.sat[y0 * s + x1] - self.sat[y1 * s + x0] + self.sat[y0 * s + x0];
        total / (size * size) as f64
    }
}

fn pad_to_min(img: &ImageGray) -> ImageGray {
    if img.width() >= MIN_SIDE && img.height() >= MIN_SIDE {
        return img.clone();
    }
    let (w, h) = (img.width().max(MIN_SIDE), img.height().max(MIN_SIDE));
    ImageGray::from_fn(w, h, |x, y| img.get_clamped(x as isize, y as isize))
}

/// Mean over pixels of the window size `2^k` (k = 1..5) that maximises the
/// difference between opposite neighbouring window averages. Ties go to the
/// smallest window.
///
/// A scale is only evaluated at a pixel when all four of its windows lie
/// inside the image; pixels where not even the smallest scale fits are left
/// out of the mean. Images smaller than 64x64 are first edge-padded.
pub fn tamura_coarseness(img: &ImageGray) -> f64 {
    let img = pad_to_min(img);
    let means = BoxMeans::new(&img, 0);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut total = 0.0;
    let mut counted = 0usize;
    for y in 0..h {
        for x in 0..w {
            let mut best: Option<(f64, u32)> = None;
            for k in 1..=MAX_WINDOW_EXP {
                let size = 1isize << k;
                let half = size / 2;
                // the outermost windows span [c - size, c + size)
                if x < size || y < size || x + size > w || y + size > h {
                    break;
                }
                // window "centred" on (cx, cy) spans [c - half, c + half)
                let at = |cx: isize, cy: isize| means.mean(cx - half, cy - half, size);
                let eh = (at(x + half, y) - at(x - half, y)).abs();
                let ev = (at(x, y + half) - at(x, y - half)).abs();
                let e = eh.max(ev);
                if best.is_none_or(|(b, _)| e > b + 1e-9) {
                    best = Some((e, k));
                }
            }
            if let Some((_, k)) = best {
                total += (1u32 << k) as f64;
                counted += 1;
            }
        }
    }
    total / counted as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Directionality {
    pub value: f64,
    /// No pixel had a strong enough gradient to vote.
    pub empty_histogram: bool,
}

/// Orientation concentration of strong Prewitt edges: 1 when every edge
/// shares one orientation bin, 0 for a uniform orientation histogram.
pub fn tamura_directionality(img: &ImageGray) -> Directionality {
    let mut hist = [0f64; ORIENTATION_BINS];
    let mut votes = 0usize;
    for y in 0..img.height() as isize {
        for x in 0..img.width() as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy) as f64;
            let gh = (p(1, -1) + p(1, 0) + p(1, 1)) - (p(-1, -1) + p(-1, 0) + p(-1, 1));
            let gv = (p(-1, 1) + p(0, 1) + p(1, 1)) - (p(-1, -1) + p(0, -1) + p(1, -1));
            let magnitude = (gh.abs() + gv.abs()) / 2.0;
            if magnitude < EDGE_THRESHOLD {
                continue;
            }
            let theta = gv.atan2(gh).rem_euclid(std::f64::consts::PI);
            let bin = ((theta / std::f64::consts::PI * ORIENTATION_BINS as f64) as usize).min(ORIENTATION_BINS - 1);
            hist[bin] += 1.0;
            votes += 1;
        }
    }
    if votes == 0 {
        return Directionality { value: 0.0, empty_histogram: true };
    }
    hist.iter_mut().for_each(|v| *v /= votes as f64);
    let peak = (0..ORIENTATION_BINS).fold(0, |best, b| if hist[b] > hist[best] { b } else { best });
    let circ = |b: usize| {
        let d = b.abs_diff(peak);
        d.min(ORIENTATION_BINS - d) as f64
    };
    let moment: f64 = (0..ORIENTATION_BINS).map(|b| circ(b).powi(2) * hist[b]).sum();
    let uniform: f64 = (0..ORIENTATION_BINS).map(|b| circ(b).powi(2)).sum::<f64>() / ORIENTATION_BINS as f64;
    Directionality { value: (1.0 - moment / uniform).clamp(0.0, 1.0), empty_histogram: false }
}
