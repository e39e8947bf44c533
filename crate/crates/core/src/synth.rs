//! Seeded synthetic data: labelled memes (coloured scenes with a rendered
//! Hinglish caption), class-associated word vectors, and Gaussian blobs.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::seeded;
use crate::text::EmbeddingTable;
use crate::vision::{FaceBox, ImageRgb};
use crate::MemeClass;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub per_class: usize,
    pub width: usize,
    pub height: usize,
    /// Side of one font pixel, in image pixels.
    pub font_scale: usize,
    /// Probability that an annotator copies the true label.
    pub annotator_accuracy: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { per_class: 8, width: 128, height: 128, font_scale: 2, annotator_accuracy: 0.9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMeme {
    pub id: String,
    pub label: MemeClass,
    pub image: ImageRgb,
    pub caption: String,
    pub faces: Vec<FaceBox>,
    pub annotator_labels: [MemeClass; 3],
}

const VOCAB: [&[&str]; 3] = [
    &["khana", "swaad", "dost", "party", "mast", "chai", "weekend", "pyaar", "ghar", "maza", "cricket", "shaadi"],
    &["neta", "vaada", "bhashan", "vikas", "sarkar", "chunav", "tax", "wifi", "exam", "naukri", "traffic", "mehngai"],
    &["nafrat", "gussa", "dushman", "ladai", "nikalo", "hatao", "dhokebaaz", "jalao", "maaro", "khatam", "badla", "virodh"],
];
const FILLER: &[&str] = &["yeh", "bhai", "log", "sab", "aaj", "kya", "hai", "ab", "toh", "the", "and", "so"];
const DEVANAGARI: [&[&str]; 3] = [&["दोस्त", "खाना"], &["नेता", "वादा"], &["नफरत", "गुस्सा"]];
const EMOTICONS: &[&str] = &[":)", ":(", ":D", ";)"];

/// Background base colours per class.
const PALETTE: [[u8; 3]; 3] = [[70, 170, 90], [70, 110, 190], [190, 60, 60]];

fn caption(class: usize, rng: &mut impl Rng) -> String {
    let (n_class, n_filler) = (rng.gen_range(3..=5), rng.gen_range(1..=3));
    let mut words: Vec<&str> = VOCAB[class].choose_multiple(rng, n_class).copied().collect();
    words.extend(FILLER.choose_multiple(rng, n_filler));
    words.shuffle(rng);
    if rng.gen_bool(0.3) {
        words.push(DEVANAGARI[class].choose(rng).unwrap());
    }
    if rng.gen_bool(0.3) {
        words.push(EMOTICONS.choose(rng).unwrap());
    }
    words.join(" ")
}

fn jitter(c: u8, amount: i32, rng: &mut impl Rng) -> u8 {
    (c as i32 + rng.gen_range(-amount..=amount)).clamp(0, 255) as u8
}

fn fill_rect(img: &mut ImageRgb, x0: usize, y0: usize, w: usize, h: usize, rgb: [u8; 3]) {
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(img.width()) {
            img.put_pixel(x, y, rgb);
        }
    }
}

fn fill_ellipse(img: &mut ImageRgb, b: &FaceBox, rgb: [u8; 3]) {
    let (cx, cy) = (b.x as f64 + b.w as f64 / 2.0, b.y as f64 + b.h as f64 / 2.0);
    let (rx, ry) = (b.w as f64 / 2.0, b.h as f64 / 2.0);
    for y in b.y..b.y + b.h {
        for x in b.x..b.x + b.w {
            let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
            if dx * dx + dy * dy <= 1.0 {
                img.put_pixel(x as usize, y as usize, rgb);
            }
        }
    }
}

fn scene(class: usize, cfg: &SynthConfig, rng: &mut impl Rng) -> (ImageRgb, Vec<FaceBox>) {
    let (w, h) = (cfg.width, cfg.height);
    let base = PALETTE[class].map(|c| jitter(c, 25, rng));
    let mut img = ImageRgb::filled(w, h, base);
    // vertical gradient plus pixel noise
    for y in 0..h {
        for x in 0..w {
            let shade = (y as f64 / h as f64 - 0.5) * 40.0;
            let px = base.map(|c| (c as f64 + shade).clamp(0.0, 255.0) as u8);
            img.put_pixel(x, y, px.map(|c| jitter(c, 6, rng)));
        }
    }
    for _ in 0..rng.gen_range(2..5) {
        let rw = rng.gen_range(w / 8..w / 3);
        let rh = rng.gen_range(h / 8..h / 3);
        let colour = PALETTE[class].map(|c| jitter(c / 2 + 40, 30, rng));
        fill_rect(&mut img, rng.gen_range(0..w - rw), rng.gen_range(h / 4..h - h / 4), rw, rh, colour);
    }
    let mut faces = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let side = rng.gen_range(w / 8..=w / 4).max(2);
        let b = FaceBox {
            x: rng.gen_range(0..w - side) as i64,
            y: rng.gen_range(h / 4..h - h / 4 - side / 2) as i64,
            w: side as i64,
            h: (side + side / 4) as i64,
        };
        if (b.y + b.h) as usize <= h {
            fill_ellipse(&mut img, &b, [jitter(224, 10, rng), jitter(172, 10, rng), jitter(140, 10, rng)]);
            faces.push(b);
        }
    }
    (img, faces)
}

/// Generates `per_class` memes of each class, interleaved by class.
pub fn generate_memes(cfg: &SynthConfig) -> Vec<SynthMeme> {
    assert!(cfg.width >= 32 && cfg.height >= 32, "synthetic memes need at least 32x32 pixels");
    let mut rng = seeded(cfg.seed);
    let mut out = Vec::with_capacity(cfg.per_class * 3);
    for i in 0..cfg.per_class * 3 {
        let class = i % 3;
        let text = caption(class, &mut rng);
        let (mut image, faces) = scene(class, cfg, &mut rng);
        draw_caption(&mut image, &text, cfg.font_scale);
        let label = MemeClass::from_index(class).unwrap();
        let annotator_labels = [0; 3].map(|_| {
            if rng.gen_bool(cfg.annotator_accuracy) {
                label
            } else {
                MemeClass::from_index((class + rng.gen_range(1..3)) % 3).unwrap()
            }
        });
        out.push(SynthMeme { id: format!("meme_{i:04}"), label, image, caption: text, faces, annotator_labels });
    }
    out
}

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '!' => [0x04, 0x04, 0x04, 0x04, 0x00, 0x00, 0x04],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        ';' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x04, 0x08],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        '\'' => [0x0C, 0x04, 0x08, 0x00, 0x00, 0x00, 0x00],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        ' ' => [0; 7],
        _ => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04],
    }
}

/// Draws `text` with its top-left corner at `(x, y)`, clipped to the image.
pub fn draw_text(img: &mut ImageRgb, text: &str, x: usize, y: usize, scale: usize, rgb: [u8; 3]) {
    for (i, c) in text.chars().enumerate() {
        let rows = glyph(c);
        for (gy, bits) in rows.iter().enumerate() {
            for gx in 0..5 {
                if bits & (0x10 >> gx) != 0 {
                    fill_rect(img, x + (i * 6 + gx) * scale, y + gy * scale, scale, scale, rgb);
                }
            }
        }
    }
}

/// Wraps the printable (ASCII) part of a caption into lines and draws the
/// first half at the top and the rest at the bottom, white on a dark band.
pub fn draw_caption(img: &mut ImageRgb, caption: &str, scale: usize) {
    let per_line = (img.width() / (6 * scale)).max(1);
    let mut lines: Vec<String> = vec![];
    for word in caption.split_whitespace().filter(|w| w.is_ascii()) {
        match lines.last_mut() {
            Some(l) if l.len() + 1 + word.len() <= per_line => {
                l.push(' ');
                l.push_str(word);
            }
            _ => lines.push(word.chars().take(per_line).collect()),
        }
    }
    let line_h = 9 * scale;
    let top = lines.len().div_ceil(2);
    for (i, line) in lines.iter().enumerate() {
        let y = if i < top {
            scale + i * line_h
        } else {
            img.height().saturating_sub((lines.len() - i) * line_h)
        };
        let x = (img.width().saturating_sub(line.len() * 6 * scale)) / 2;
        fill_rect(img, x.saturating_sub(scale), y.saturating_sub(scale), line.len() * 6 * scale + scale, line_h, [20, 20, 20]);
        draw_text(img, line, x, y, scale, [250, 250, 250]);
    }
}

/// Word vectors in which tokens seen with a single class cluster around a
/// per-class prototype and every other token is noise.
pub fn class_embeddings(name: &str, docs: &[(Vec<String>, usize)], dim: usize, seed: u64) -> EmbeddingTable {
    let mut seen: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for (tokens, class) in docs {
        for t in tokens {
            seen.entry(t).or_default().insert(*class);
        }
    }
    let mut rng = seeded(seed);
    let classes = docs.iter().map(|d| d.1 + 1).max().unwrap_or(0);
    let prototypes: Vec<Vec<f64>> =
        (0..classes).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let vectors = seen
        .into_iter()
        .map(|(tok, cls)| {
            let v = match (cls.len(), cls.first()) {
                (1, Some(&c)) => prototypes[c].iter().map(|p| p + rng.gen_range(-0.3..0.3)).collect(),
                _ => (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            };
            (tok.to_string(), v)
        })
        .collect();
    EmbeddingTable::new(name, dim, vectors).expect("vectors have the table dimension")
}

/// Isotropic Gaussian clusters, `per_class` points around each centre,
/// labelled by centre index.
pub fn gaussian_blobs(centers: &[Vec<f64>], per_class: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut x = Vec::with_capacity(centers.len() * per_class);
    let mut y = Vec::with_capacity(centers.len() * per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            x.push(center.iter().map(|m| m + noise.sample(&mut rng)).collect());
            y.push(c);
        }
    }
    (x, y)
}
