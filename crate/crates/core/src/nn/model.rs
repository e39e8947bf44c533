//! The three classifiers: fused CNN + LSTM, standalone CNN, standalone LSTM.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    affine, conv2d_backward, conv2d_forward, dense_backward, dropout_mask, maxpool2d_backward, maxpool2d_with_argmax,
    softmax, Activation,
};
use super::lstm::{self, LstmWeights};
use super::{NnError, Result, Tensor};
use crate::rng::seeded;
use crate::text::SequenceMatrix;

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fusion,
    CnnOnly,
    LstmOnly,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Fusion, ModelKind::CnnOnly, ModelKind::LstmOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fusion => "fusion",
            ModelKind::CnnOnly => "cnn_only",
            ModelKind::LstmOnly => "lstm_only",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ModelKind::Fusion => 0,
            ModelKind::CnnOnly => 1,
            ModelKind::LstmOnly => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == c)
    }

    fn uses_cnn(self) -> bool {
        self != ModelKind::LstmOnly
    }

    fn uses_lstm(self) -> bool {
        self != ModelKind::CnnOnly
    }
}

impl std::str::FromStr for ModelKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.replace('-', "_"))
            .ok_or_else(|| NnError::InvalidConfig(format!("unknown model kind {s:?}")))
    }
}

/// Which rendition of the meme image the CNN channel sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnnInput {
    /// Rescaled colour image in [0, 1].
    #[default]
    Rgb,
    /// The binarised OCR rendition, single channel.
    Thresholded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionModelConfig {
    pub img_h: usize,
    pub img_w: usize,
    pub img_channels: usize,
    pub cnn_input: CnnInput,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub pool1: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub pool2: usize,
    pub cnn_dropout: f64,
    pub cnn_dense: usize,
    /// Width of the hidden dense layer of the standalone CNN.
    pub standalone_cnn_dense: usize,
    pub embed_dim: usize,
    pub max_len: usize,
    pub embed_dropout: f64,
    pub lstm_input_dropout: f64,
    pub lstm_units: usize,
    pub lstm_dense1: usize,
    pub lstm_dense2: usize,
    pub fuse_dense1: usize,
    pub classes: usize,
}

impl Default for FusionModelConfig {
    fn default() -> Self {
        Self {
            img_h: 64,
            img_w: 64,
            img_channels: 3,
            cnn_input: CnnInput::Rgb,
            conv1_filters: 64,
            conv1_kernel: 5,
            pool1: 5,
            conv2_filters: 32,
            conv2_kernel: 3,
            pool2: 3,
            cnn_dropout: 0.4,
            cnn_dense: 32,
            standalone_cnn_dense: 64,
            embed_dim: 100,
            max_len: 32,
            embed_dropout: 0.2,
            lstm_input_dropout: 0.4,
            lstm_units: 64,
            lstm_dense1: 64,
            lstm_dense2: 32,
            fuse_dense1: 32,
            classes: 3,
        }
    }
}

impl FusionModelConfig {
    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("img_h", self.img_h),
            ("img_w", self.img_w),
            ("img_channels", self.img_channels),
            ("conv1_filters", self.conv1_filters),
            ("conv1_kernel", self.conv1_kernel),
            ("pool1", self.pool1),
            ("conv2_filters", self.conv2_filters),
            ("conv2_kernel", self.conv2_kernel),
            ("pool2", self.pool2),
            ("cnn_dense", self.cnn_dense),
            ("standalone_cnn_dense", self.standalone_cnn_dense),
            ("embed_dim", self.embed_dim),
            ("max_len", self.max_len),
            ("lstm_units", self.lstm_units),
            ("lstm_dense1", self.lstm_dense1),
            ("lstm_dense2", self.lstm_dense2),
            ("fuse_dense1", self.fuse_dense1),
            ("classes", self.classes),
        ];
        if let Some((name, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return Err(NnError::InvalidConfig(format!("{name} must be positive")));
        }
        for (name, r) in [
            ("cnn_dropout", self.cnn_dropout),
            ("embed_dropout", self.embed_dropout),
            ("lstm_input_dropout", self.lstm_input_dropout),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(NnError::InvalidConfig(format!("{name} must lie in [0, 1), got {r}")));
            }
        }
        if self.cnn_input == CnnInput::Thresholded && self.img_channels != 1 {
            return Err(NnError::InvalidConfig("thresholded CNN input has exactly one channel".into()));
        }
        Ok(())
    }

    /// Same config with every dropout rate set to zero.
    pub fn without_dropout(&self) -> Self {
        Self { cnn_dropout: 0.0, embed_dropout: 0.0, lstm_input_dropout: 0.0, ..self.clone() }
    }
}

/// Spatial extents along the convolutional trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CnnGeometry {
    pub conv1: (usize, usize),
    pub pool1: (usize, usize),
    pub conv2: (usize, usize),
    pub pool2: (usize, usize),
    pub flatten: usize,
}

pub fn cnn_geometry(cfg: &FusionModelConfig) -> Result<CnnGeometry> {
    let side = |n: usize, what: &str| -> Result<[usize; 4]> {
        let collapse = |stage: &str| NnError::InvalidGeometry(format!("{what} {n} collapses below 1 after {stage}"));
        let c1 = (n + 1).checked_sub(cfg.conv1_kernel).filter(|&v| v >= 1).ok_or_else(|| collapse("conv1"))?;
        let p1 = Some(c1 / cfg.pool1).filter(|&v| v >= 1).ok_or_else(|| collapse("pool1"))?;
        let c2 = (p1 + 1).checked_sub(cfg.conv2_kernel).filter(|&v| v >= 1).ok_or_else(|| collapse("conv2"))?;
        let p2 = Some(c2 / cfg.pool2).filter(|&v| v >= 1).ok_or_else(|| collapse("pool2"))?;
        Ok([c1, p1, c2, p2])
    };
    let h = side(cfg.img_h, "image height")?;
    let w = side(cfg.img_w, "image width")?;
    Ok(CnnGeometry {
        conv1: (h[0], w[0]),
        pool1: (h[1], w[1]),
        conv2: (h[2], w[2]),
        pool2: (h[3], w[3]),
        flatten: h[3] * w[3] * cfg.conv2_filters,
    })
}

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Parameters in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    params: Vec<Param>,
}

impl ModelParams {
    pub fn new(params: Vec<Param>) -> Self {
        Self { params }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            params: self.params.iter().map(|p| Param { name: p.name.clone(), value: p.value.zeros_like() }).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.data().iter().all(|v| v.is_finite()))
    }

    pub(crate) fn at(&self, i: usize) -> &Tensor {
        &self.params[i].value
    }
}

pub(crate) fn is_regularised(name: &str) -> bool {
    name.ends_with(".w") || name.ends_with(".w_x") || name.ends_with(".w_h")
}

/// A built network: its kind, configuration and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub config: FusionModelConfig,
    pub params: ModelParams,
}

/// One training or inference example. `image` is h x w x c in [0, 1].
#[derive(Debug, Clone)]
pub struct Example {
    pub image: Tensor,
    pub sequence: SequenceMatrix,
    pub label: usize,
}

enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    Zeros,
    LstmBias { units: usize },
}

struct Slot {
    name: &'static str,
    shape: Vec<usize>,
    init: Init,
}

fn dense_slots(out: &mut Vec<Slot>, w: &'static str, b: &'static str, n: usize, m: usize) {
    out.push(Slot { name: w, shape: vec![n, m], init: Init::Glorot { fan_in: n, fan_out: m } });
    out.push(Slot { name: b, shape: vec![m], init: Init::Zeros });
}

fn layout(kind: ModelKind, cfg: &FusionModelConfig) -> Result<Vec<Slot>> {
    cfg.validate()?;
    let mut s = Vec::new();
    if kind.uses_cnn() {
        let geo = cnn_geometry(cfg)?;
        let (k1, k2) = (cfg.conv1_kernel, cfg.conv2_kernel);
        s.push(Slot {
            name: "conv1.w",
            shape: vec![k1, k1, cfg.img_channels, cfg.conv1_filters],
            init: Init::Glorot { fan_in: k1 * k1 * cfg.img_channels, fan_out: k1 * k1 * cfg.conv1_filters },
        });
        s.push(Slot { name: "conv1.b", shape: vec![cfg.conv1_filters], init: Init::Zeros });
        s.push(Slot {
            name: "conv2.w",
            shape: vec![k2, k2, cfg.conv1_filters, cfg.conv2_filters],
            init: Init::Glorot { fan_in: k2 * k2 * cfg.conv1_filters, fan_out: k2 * k2 * cfg.conv2_filters },
        });
        s.push(Slot { name: "conv2.b", shape: vec![cfg.conv2_filters], init: Init::Zeros });
        if kind == ModelKind::Fusion {
            dense_slots(&mut s, "cnn_dense.w", "cnn_dense.b", geo.flatten, cfg.cnn_dense);
        } else {
            dense_slots(&mut s, "cnn_dense.w", "cnn_dense.b", geo.flatten, cfg.standalone_cnn_dense);
            dense_slots(&mut s, "out.w", "out.b", cfg.standalone_cnn_dense, cfg.classes);
        }
    }
    if kind.uses_lstm() {
        let (d, u) = (cfg.embed_dim, cfg.lstm_units);
        s.push(Slot { name: "lstm.w_x", shape: vec![d, 4 * u], init: Init::Glorot { fan_in: d, fan_out: 4 * u } });
        s.push(Slot { name: "lstm.w_h", shape: vec![u, 4 * u], init: Init::Glorot { fan_in: u, fan_out: 4 * u } });
        s.push(Slot { name: "lstm.b", shape: vec![4 * u], init: Init::LstmBias { units: u } });
        dense_slots(&mut s, "lstm_dense1.w", "lstm_dense1.b", u, cfg.lstm_dense1);
        dense_slots(&mut s, "lstm_dense2.w", "lstm_dense2.b", cfg.lstm_dense1, cfg.lstm_dense2);
        if kind == ModelKind::LstmOnly {
            dense_slots(&mut s, "out.w", "out.b", cfg.lstm_dense2, cfg.classes);
        }
    }
    if kind == ModelKind::Fusion {
        dense_slots(&mut s, "fuse_dense.w", "fuse_dense.b", cfg.cnn_dense + cfg.lstm_dense2, cfg.fuse_dense1);
        dense_slots(&mut s, "out.w", "out.b", cfg.fuse_dense1, cfg.classes);
    }
    Ok(s)
}

/// Expected `(name, shape)` list for a kind and config.
pub(crate) fn expected_shapes(kind: ModelKind, cfg: &FusionModelConfig) -> Result<Vec<(String, Vec<usize>)>> {
    Ok(layout(kind, cfg)?.into_iter().map(|s| (s.name.to_string(), s.shape)).collect())
}

/// Builds a network with Glorot-uniform weights drawn in declaration order.
pub fn build_model(kind: ModelKind, config: &FusionModelConfig, seed: u64) -> Result<Model> {
    let mut rng = seeded(seed);
    let params = layout(kind, config)?
        .into_iter()
        .map(|slot| {
            let n = slot.shape.iter().product();
            let data = match slot.init {
                Init::Glorot { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
                }
                Init::Zeros => vec![0.0; n],
                Init::LstmBias { units } => (0..n).map(|i| if (units..2 * units).contains(&i) { 1.0 } else { 0.0 }).collect(),
            };
            Param { name: slot.name.to_string(), value: Tensor::from_vec(&slot.shape, data).expect("layout shape") }
        })
        .collect();
    Ok(Model { kind, config: config.clone(), params: ModelParams::new(params) })
}

// ---------------------------------------------------------------------------
// forward / backward

#[derive(Clone, Copy)]
enum VecOp {
    /// Weight index; the bias sits at `w + 1`.
    Dense { w: usize, act: Activation },
    Dropout { rate: f64 },
}

struct Plan {
    conv1: usize,
    conv2: usize,
    lstm: usize,
    cnn_ops: Vec<VecOp>,
    lstm_ops: Vec<VecOp>,
    head_ops: Vec<VecOp>,
}

impl Plan {
    fn new(model: &Model) -> Self {
        let idx = |name: &str| {
            model.params.iter().position(|p| p.name == name).unwrap_or(usize::MAX)
        };
        let dense = |name: &str, act| VecOp::Dense { w: idx(name), act };
        let cfg = &model.config;
        let (mut cnn_ops, mut lstm_ops, mut head_ops) = (vec![], vec![], vec![]);
        match model.kind {
            ModelKind::Fusion => {
                cnn_ops = vec![VecOp::Dropout { rate: cfg.cnn_dropout }, dense("cnn_dense.w", Activation::Relu)];
                lstm_ops = vec![dense("lstm_dense1.w", Activation::Relu), dense("lstm_dense2.w", Activation::Relu)];
                head_ops = vec![dense("fuse_dense.w", Activation::Relu), dense("out.w", Activation::Softmax)];
            }
            ModelKind::CnnOnly => {
                cnn_ops = vec![
                    dense("cnn_dense.w", Activation::Relu),
                    VecOp::Dropout { rate: cfg.cnn_dropout },
                    dense("out.w", Activation::Softmax),
                ];
            }
            ModelKind::LstmOnly => {
                lstm_ops = vec![
                    dense("lstm_dense1.w", Activation::Relu),
                    dense("lstm_dense2.w", Activation::Relu),
                    dense("out.w", Activation::Softmax),
                ];
            }
        }
        Plan { conv1: idx("conv1.w"), conv2: idx("conv2.w"), lstm: idx("lstm.w_x"), cnn_ops, lstm_ops, head_ops }
    }
}

#[derive(Default)]
struct ChainCache {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

fn run_chain(ops: &[VecOp], params: &ModelParams, x: Vec<f64>, rng: &mut Option<&mut ChaCha8Rng>) -> ChainCache {
    let mut cache = ChainCache::default();
    let mut cur = x;
    for op in ops {
        let (next, mask) = match *op {
            VecOp::Dense { w, act } => {
                let z = affine(&cur, params.at(w).data(), params.at(w + 1).data());
                let y = match act {
                    Activation::Relu => z.into_iter().map(|v| v.max(0.0)).collect(),
                    Activation::Softmax => softmax(&z),
                    Activation::None => z,
                };
                (y, None)
            }
            VecOp::Dropout { rate } => match rng.as_deref_mut() {
                Some(r) if rate > 0.0 => {
                    let m = dropout_mask(cur.len(), rate, r);
                    (cur.iter().zip(&m).map(|(a, b)| a * b).collect(), Some(m))
                }
                _ => (cur.clone(), None),
            },
        };
        cache.inputs.push(cur);
        cache.outputs.push(next.clone());
        cache.masks.push(mask);
        cur = next;
    }
    cache
}

fn chain_output(cache: &ChainCache, fallback: &[f64]) -> Vec<f64> {
    cache.outputs.last().cloned().unwrap_or_else(|| fallback.to_vec())
}

/// Backward through a chain. For a trailing softmax layer `dy` is taken to
/// be the gradient with respect to its logits.
fn chain_backward(ops: &[VecOp], cache: &ChainCache, params: &ModelParams, grads: &mut [Vec<f64>], dy: Vec<f64>) -> Vec<f64> {
    let mut g = dy;
    for (k, op) in ops.iter().enumerate().rev() {
        g = match *op {
            VecOp::Dense { w, act } => {
                let dz: Vec<f64> = match act {
                    Activation::Relu => g.iter().zip(&cache.outputs[k]).map(|(d, &y)| if y > 0.0 { *d } else { 0.0 }).collect(),
                    Activation::Softmax | Activation::None => g,
                };
                let (lo, hi) = grads.split_at_mut(w + 1);
                dense_backward(&cache.inputs[k], params.at(w).data(), &dz, &mut lo[w], &mut hi[0])
            }
            VecOp::Dropout { .. } => match &cache.masks[k] {
                Some(m) => g.iter().zip(m).map(|(a, b)| a * b).collect(),
                None => g,
            },
        };
    }
    g
}

struct CnnCache {
    a1: Tensor,
    arg1: Vec<usize>,
    p1: Tensor,
    a2: Tensor,
    arg2: Vec<usize>,
}

struct ExampleCache {
    cnn: Option<CnnCache>,
    cnn_chain: ChainCache,
    lstm: Option<lstm::LstmCache>,
    lstm_chain: ChainCache,
    head_chain: ChainCache,
    cnn_out: usize,
    probs: Vec<f64>,
}

fn check_example(model: &Model, image: Option<&Tensor>, seq: Option<&SequenceMatrix>) -> Result<()> {
    let cfg = &model.config;
    if let Some(img) = image {
        img.expect_shape(&[cfg.img_h, cfg.img_w, cfg.img_channels], "image")?;
    }
    if let Some(s) = seq {
        if s.dim != cfg.embed_dim || s.max_len != cfg.max_len || s.data.len() != s.dim * s.max_len {
            return Err(NnError::ShapeMismatch(format!(
                "sequence must be {} x {}, got {} x {}",
                cfg.max_len, cfg.embed_dim, s.max_len, s.dim
            )));
        }
    }
    Ok(())
}

fn forward(
    model: &Model,
    plan: &Plan,
    image: &Tensor,
    seq: &SequenceMatrix,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<ExampleCache> {
    let p = &model.params;
    let cfg = &model.config;
    let (mut cnn, mut cnn_chain, mut lstm_c, mut lstm_chain) = (None, ChainCache::default(), None, ChainCache::default());
    let mut features = Vec::new();
    if model.kind.uses_cnn() {
        let a1 = conv2d_forward(image, p.at(plan.conv1), p.at(plan.conv1 + 1))?;
        let (p1, arg1) = maxpool2d_with_argmax(&a1, cfg.pool1)?;
        let a2 = conv2d_forward(&p1, p.at(plan.conv2), p.at(plan.conv2 + 1))?;
        let (p2, arg2) = maxpool2d_with_argmax(&a2, cfg.pool2)?;
        let flat = p2.into_data();
        cnn_chain = run_chain(&plan.cnn_ops, p, flat.clone(), rng);
        features.extend(chain_output(&cnn_chain, &flat));
        cnn = Some(CnnCache { a1, arg1, p1, a2, arg2 });
    }
    let cnn_out = features.len();
    if model.kind.uses_lstm() {
        let mut x = seq.data.clone();
        for rate in [cfg.embed_dropout, cfg.lstm_input_dropout] {
            if let Some(r) = rng.as_deref_mut() {
                if rate > 0.0 {
                    let m = dropout_mask(x.len(), rate, r);
                    x.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                }
            }
        }
        let w = LstmWeights { w_x: p.at(plan.lstm), w_h: p.at(plan.lstm + 1), b: p.at(plan.lstm + 2) };
        let c = lstm::forward_cached(&x, cfg.embed_dim, w, cfg.lstm_units);
        lstm_chain = run_chain(&plan.lstm_ops, p, c.last_h().to_vec(), rng);
        features.extend(chain_output(&lstm_chain, c.last_h()));
        lstm_c = Some(c);
    }
    let head_chain = run_chain(&plan.head_ops, p, features.clone(), rng);
    let probs = chain_output(&head_chain, &features);
    Ok(ExampleCache { cnn, cnn_chain, lstm: lstm_c, lstm_chain, head_chain, cnn_out, probs })
}

fn backward(model: &Model, plan: &Plan, image: &Tensor, cache: &ExampleCache, dlogits: Vec<f64>, grads: &mut [Vec<f64>]) {
    let p = &model.params;
    let cfg = &model.config;
    let dfeat = chain_backward(&plan.head_ops, &cache.head_chain, p, grads, dlogits);
    let (dcnn, dlstm) = dfeat.split_at(cache.cnn_out);
    if let Some(c) = &cache.lstm {
        let dh = chain_backward(&plan.lstm_ops, &cache.lstm_chain, p, grads, dlstm.to_vec());
        let (_, rest) = grads.split_at_mut(plan.lstm);
        let [gx, gh, gb, ..] = rest else { unreachable!("lstm params are contiguous") };
        lstm::backward(c, p.at(plan.lstm + 1), &dh, gx, gh, gb);
    }
    if let Some(c) = &cache.cnn {
        let dflat = chain_backward(&plan.cnn_ops, &cache.cnn_chain, p, grads, dcnn.to_vec());
        let mut da2 = vec![0.0; c.a2.len()];
        maxpool2d_backward(&c.arg2, &dflat, &mut da2);
        let mut dp1 = vec![0.0; c.p1.len()];
        {
            let (lo, hi) = grads.split_at_mut(plan.conv2 + 1);
            conv2d_backward(&c.p1, p.at(plan.conv2), &c.a2, &da2, &mut lo[plan.conv2], &mut hi[0], Some(&mut dp1));
        }
        let mut da1 = vec![0.0; c.a1.len()];
        maxpool2d_backward(&c.arg1, &dp1, &mut da1);
        let (lo, hi) = grads.split_at_mut(plan.conv1 + 1);
        conv2d_backward(image, p.at(plan.conv1), &c.a1, &da1, &mut lo[plan.conv1], &mut hi[0], None);
        let _ = cfg;
    }
}

/// Result of [`loss_and_grads`].
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    /// Cross-entropy part of `loss`, without the L2 term.
    pub data_loss: f64,
    pub grads: ModelParams,
    /// Examples whose argmax matched the label (in the mode the pass ran in).
    pub correct: usize,
}

/// Mean categorical cross-entropy plus `l2_lambda * sum ||W||^2`, and its
/// gradient. Dropout is active exactly when `dropout_rng` is given; masks are
/// drawn from it example by example.
pub fn loss_and_grads(
    model: &Model,
    batch: &[&Example],
    l2_lambda: f64,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(NnError::ShapeMismatch("empty batch".into()));
    }
    let plan = Plan::new(model);
    let classes = model.config.classes;
    let bsz = batch.len() as f64;
    let mut grads: Vec<Vec<f64>> = model.params.iter().map(|p| vec![0.0; p.value.len()]).collect();
    let mut data_loss = 0.0;
    let mut correct = 0;
    for ex in batch {
        if ex.label >= classes {
            return Err(NnError::ShapeMismatch(format!("label {} out of range for {classes} classes", ex.label)));
        }
        check_example(model, model.kind.uses_cnn().then_some(&ex.image), model.kind.uses_lstm().then_some(&ex.sequence))?;
        let cache = forward(model, &plan, &ex.image, &ex.sequence, &mut dropout_rng)?;
        let p = &cache.probs;
        let py = p[ex.label];
        data_loss -= (py + LOG_FLOOR).ln() / bsz;
        if argmax(p) == ex.label {
            correct += 1;
        }
        // d/dz of -log(p_y + floor) / B through the softmax
        let scale = -1.0 / ((py + LOG_FLOOR) * bsz);
        let dlogits = (0..classes).map(|j| scale * p[j] * ((j == ex.label) as u8 as f64 - py)).collect();
        backward(model, &plan, &ex.image, &cache, dlogits, &mut grads);
    }
    let mut l2 = 0.0;
    for (param, g) in model.params.iter().zip(grads.iter_mut()) {
        if is_regularised(&param.name) {
            for (gv, &w) in g.iter_mut().zip(param.value.data()) {
                l2 += w * w;
                *gv += 2.0 * l2_lambda * w;
            }
        }
    }
    let loss = data_loss + l2_lambda * l2;
    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss { epoch: 0 });
    }
    let grads = ModelParams::new(
        model
            .params
            .iter()
            .zip(grads)
            .map(|(p, g)| Param { name: p.name.clone(), value: Tensor::from_vec(p.value.shape(), g).expect("same shape") })
            .collect(),
    );
    Ok(LossOutput { loss, data_loss, grads, correct })
}

/// Class probabilities with dropout disabled. Inputs a channel does not use
/// are ignored (pass anything for them).
pub fn predict(model: &Model, image: &Tensor, sequence: &SequenceMatrix) -> Result<Vec<f64>> {
    check_example(model, model.kind.uses_cnn().then_some(image), model.kind.uses_lstm().then_some(sequence))?;
    let plan = Plan::new(model);
    Ok(forward(model, &plan, image, sequence, &mut None)?.probs)
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn default_geometry() {
        let g = cnn_geometry(&FusionModelConfig::default()).unwrap();
        assert_eq!(g.conv1, (60, 60));
        assert_eq!(g.pool1, (12, 12));
        assert_eq!(g.conv2, (10, 10));
        assert_eq!(g.pool2, (3, 3));
        assert_eq!(g.flatten, 288);
    }

    #[test]
    fn side_28_collapses() {
        let cfg = FusionModelConfig { img_h: 28, img_w: 28, ..Default::default() };
        assert!(matches!(build_model(ModelKind::Fusion, &cfg, 1), Err(NnError::InvalidGeometry(_))));
        // the LSTM-only model has no convolutional trunk
        assert!(build_model(ModelKind::LstmOnly, &cfg, 1).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn flatten_width_formula(n in 29usize..140) {
            let cfg = FusionModelConfig { img_h: n, img_w: n, ..Default::default() };
            let side = ((n - 4) / 5 - 2) / 3;
            let m = build_model(ModelKind::CnnOnly, &cfg, 0).unwrap();
            proptest::prop_assert_eq!(m.params.get("cnn_dense.w").unwrap().shape()[0], side * side * 32);
        }
    }

    #[test]
    fn layouts() {
        let cfg = FusionModelConfig::default();
        let names = |k| build_model(k, &cfg, 0).unwrap().params.iter().map(|p| p.name.clone()).collect::<Vec<_>>();
        assert_eq!(
            names(ModelKind::Fusion),
            [
                "conv1.w", "conv1.b", "conv2.w", "conv2.b", "cnn_dense.w", "cnn_dense.b", "lstm.w_x", "lstm.w_h", "lstm.b",
                "lstm_dense1.w", "lstm_dense1.b", "lstm_dense2.w", "lstm_dense2.b", "fuse_dense.w", "fuse_dense.b", "out.w",
                "out.b"
            ]
        );
        let m = build_model(ModelKind::Fusion, &cfg, 0).unwrap();
        assert_eq!(m.params.get("fuse_dense.w").unwrap().shape(), &[64, 32]);
        assert_eq!(m.params.get("out.w").unwrap().shape(), &[32, 3]);
        let b = m.params.get("lstm.b").unwrap().data();
        assert!(b[..64].iter().all(|&v| v == 0.0) && b[64..128].iter().all(|&v| v == 1.0) && b[128..].iter().all(|&v| v == 0.0));
        let c = build_model(ModelKind::CnnOnly, &cfg, 0).unwrap();
        assert_eq!(c.params.get("cnn_dense.w").unwrap().shape(), &[288, 64]);
        assert_eq!(c.params.get("out.w").unwrap().shape(), &[64, 3]);
        let l = build_model(ModelKind::LstmOnly, &cfg, 0).unwrap();
        assert_eq!(l.params.get("out.w").unwrap().shape(), &[32, 3]);
        assert_eq!(build_model(ModelKind::Fusion, &cfg, 0).unwrap(), m);
        assert_ne!(build_model(ModelKind::Fusion, &cfg, 1).unwrap(), m);
        // Glorot bounds
        let w = m.params.get("conv1.w").unwrap();
        let limit = (6.0f64 / (75 + 1600) as f64).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= limit));
    }

    fn tiny() -> FusionModelConfig {
        FusionModelConfig {
            img_h: 32,
            img_w: 32,
            conv1_filters: 4,
            conv2_filters: 4,
            cnn_dense: 8,
            standalone_cnn_dense: 8,
            embed_dim: 8,
            max_len: 4,
            lstm_units: 6,
            lstm_dense1: 8,
            lstm_dense2: 8,
            fuse_dense1: 8,
            ..Default::default()
        }
    }

    fn example(cfg: &FusionModelConfig, label: usize, rng: &mut ChaCha8Rng) -> Example {
        let n = cfg.img_h * cfg.img_w * cfg.img_channels;
        let image = Tensor::from_vec(&[cfg.img_h, cfg.img_w, cfg.img_channels], (0..n).map(|_| rng.gen()).collect()).unwrap();
        let mut sequence = SequenceMatrix::zeros(cfg.max_len, cfg.embed_dim);
        sequence.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        sequence.valid_len = cfg.max_len;
        Example { image, sequence, label }
    }

    #[test]
    fn uniform_and_perfect_losses() {
        let cfg = tiny();
        let mut m = build_model(ModelKind::LstmOnly, &cfg, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = example(&cfg, 1, &mut rng);
        m.params.get_mut("out.w").unwrap().data_mut().fill(0.0);
        let out = loss_and_grads(&m, &[&ex], 0.0, None).unwrap();
        // the 1e-12 log floor shifts the value by about 3e-12
        assert!((out.loss - 3f64.ln()).abs() < 1e-10);
        m.params.get_mut("out.b").unwrap().data_mut().copy_from_slice(&[-40.0, 40.0, -40.0]);
        let out = loss_and_grads(&m, &[&ex], 0.0, None).unwrap();
        assert!(out.loss < 1e-6);
        // L2 term: zero lambda gives the bare cross-entropy, larger lambda never less
        let a = loss_and_grads(&m, &[&ex], 0.0, None).unwrap();
        let b = loss_and_grads(&m, &[&ex], 1e-3, None).unwrap();
        assert_eq!(a.loss, a.data_loss);
        assert!(b.loss >= a.loss);
    }

    #[test]
    fn predictions_sum_to_one_and_fresh_model_is_near_uniform() {
        let cfg = FusionModelConfig::default();
        let m = build_model(ModelKind::Fusion, &cfg, 4).unwrap();
        let img = Tensor::zeros(&[64, 64, 3]);
        let seq = SequenceMatrix::zeros(32, 100);
        let p = predict(&m, &img, &seq).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // zero input and zero biases leave every logit at zero
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12), "{p:?}");
        assert!(predict(&m, &Tensor::zeros(&[32, 32, 3]), &seq).is_err());
    }

    #[test]
    fn argmax_survives_positive_logit_scaling() {
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = build_model(ModelKind::Fusion, &cfg, 5).unwrap();
        for _ in 0..5 {
            let ex = example(&cfg, 0, &mut rng);
            let base = argmax(&predict(&m, &ex.image, &ex.sequence).unwrap());
            for s in [0.1, 3.0, 50.0] {
                let mut scaled = m.clone();
                for name in ["out.w", "out.b"] {
                    scaled.params.get_mut(name).unwrap().data_mut().iter_mut().for_each(|v| *v *= s);
                }
                assert_eq!(argmax(&predict(&scaled, &ex.image, &ex.sequence).unwrap()), base);
            }
        }
    }

    fn grad_check(kind: ModelKind) -> f64 {
        let cfg = tiny().without_dropout();
        let mut model = build_model(kind, &cfg, 21).unwrap();
        // non-zero biases so no unit sits exactly at a ReLU kink
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for p in model.params.iter_mut() {
            if p.name.ends_with(".b") {
                p.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
            }
        }
        let batch: Vec<Example> = (0..3).map(|i| example(&cfg, i, &mut rng)).collect();
        let refs: Vec<&Example> = batch.iter().collect();
        let lambda = 1e-3;
        let analytic = loss_and_grads(&model, &refs, lambda, None).unwrap().grads;
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for pi in 0..model.params.len() {
            for j in 0..model.params.at(pi).len() {
                let orig = model.params.at(pi).data()[j];
                model.params.params[pi].value.data_mut()[j] = orig + eps;
                let up = loss_and_grads(&model, &refs, lambda, None).unwrap().loss;
                model.params.params[pi].value.data_mut()[j] = orig - eps;
                let down = loss_and_grads(&model, &refs, lambda, None).unwrap().loss;
                model.params.params[pi].value.data_mut()[j] = orig;
                let fd = (up - down) / (2.0 * eps);
                let a = analytic.at(pi).data()[j];
                worst = worst.max((a - fd).abs() / (a.abs() + fd.abs()).max(1e-6));
            }
        }
        worst
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for kind in ModelKind::ALL {
            let e = grad_check(kind);
            assert!(e < 1e-4, "{kind:?}: {e}");
        }
    }

    #[test]
    fn dropout_makes_training_pass_stochastic_but_seeded() {
        let cfg = tiny();
        let m = build_model(ModelKind::Fusion, &cfg, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = example(&cfg, 2, &mut rng);
        let run = |seed| loss_and_grads(&m, &[&ex], 0.0, Some(&mut ChaCha8Rng::seed_from_u64(seed))).unwrap().loss;
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }
}
