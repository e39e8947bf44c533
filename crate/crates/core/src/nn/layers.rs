//! Layer kernels and their backward passes. Activations are laid out
//! height x width x channels; convolution weights are kh x kw x c x f and
//! dense weights are inputs x outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
    None,
}

/// Valid (unpadded) cross-correlation plus bias, followed by ReLU.
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (h, w, c) = dims3(input, "conv input")?;
    let &[kh, kw, kc, f] = weights.shape() else {
        return Err(NnError::ShapeMismatch(format!("conv weights must be 4-d, got {:?}", weights.shape())));
    };
    if kc != c {
        return Err(NnError::ShapeMismatch(format!("conv weights expect {kc} channels, input has {c}")));
    }
    bias.expect_shape(&[f], "conv bias")?;
    if kh > h || kw > w {
        return Err(NnError::ShapeMismatch(format!("{kh}x{kw} kernel does not fit a {h}x{w} input")));
    }
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![0f64; oh * ow * f];
    let (x, wt, b) = (input.data(), weights.data(), bias.data());
    for oy in 0..oh {
        for ox in 0..ow {
            let o = &mut out[(oy * ow + ox) * f..(oy * ow + ox + 1) * f];
            o.copy_from_slice(b);
            for ky in 0..kh {
                for kx in 0..kw {
                    let px = &x[((oy + ky) * w + ox + kx) * c..((oy + ky) * w + ox + kx + 1) * c];
                    let base = (ky * kw + kx) * c;
                    for (ci, &v) in px.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let row = &wt[(base + ci) * f..(base + ci + 1) * f];
                        for (acc, &wv) in o.iter_mut().zip(row) {
                            *acc += v * wv;
                        }
                    }
                }
            }
            o.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    Tensor::from_vec(&[oh, ow, f], out)
}

/// Gradients of [`conv2d_forward`]. `out` is the post-ReLU output and
/// `dout` the gradient with respect to it. The input gradient is only
/// computed when asked for.
pub(crate) fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    out: &Tensor,
    dout: &[f64],
    dweights: &mut [f64],
    dbias: &mut [f64],
    mut dinput: Option<&mut [f64]>,
) {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let &[kh, kw, _, f] = weights.shape() else { unreachable!("checked in forward") };
    let (oh, ow) = (out.shape()[0], out.shape()[1]);
    let (x, wt) = (input.data(), weights.data());
    let _ = h;
    let mut dz = vec![0f64; f];
    for oy in 0..oh {
        for ox in 0..ow {
            let at = (oy * ow + ox) * f;
            let mut any = false;
            for k in 0..f {
                dz[k] = if out.data()[at + k] > 0.0 { dout[at + k] } else { 0.0 };
                any |= dz[k] != 0.0;
            }
            if !any {
                continue;
            }
            for (db, &g) in dbias.iter_mut().zip(&dz) {
                *db += g;
            }
            for ky in 0..kh {
                for kx in 0..kw {
                    let pix = ((oy + ky) * w + ox + kx) * c;
                    let base = (ky * kw + kx) * c;
                    for ci in 0..c {
                        let v = x[pix + ci];
                        let widx = (base + ci) * f;
                        if v != 0.0 {
                            for (dw, &g) in dweights[widx..widx + f].iter_mut().zip(&dz) {
                                *dw += v * g;
                            }
                        }
                        if let Some(dx) = dinput.as_deref_mut() {
                            let row = &wt[widx..widx + f];
                            dx[pix + ci] += row.iter().zip(&dz).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                }
            }
        }
    }
}

/// Non-overlapping max pooling with floor semantics.
pub fn maxpool2d(input: &Tensor, pool: usize) -> Result<Tensor> {
    Ok(maxpool2d_with_argmax(input, pool)?.0)
}

pub(crate) fn maxpool2d_with_argmax(input: &Tensor, pool: usize) -> Result<(Tensor, Vec<usize>)> {
    let (h, w, c) = dims3(input, "pool input")?;
    if pool == 0 {
        return Err(NnError::ShapeMismatch("pool size must be at least 1".into()));
    }
    let (oh, ow) = (h / pool, w / pool);
    if oh == 0 || ow == 0 {
        return Err(NnError::ShapeMismatch(format!("{pool}x{pool} pool does not fit a {h}x{w} input")));
    }
    let x = input.data();
    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
    let mut arg = vec![0usize; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let o = (oy * ow + ox) * c;
            for py in 0..pool {
                for px in 0..pool {
                    let i = ((oy * pool + py) * w + ox * pool + px) * c;
                    for ci in 0..c {
                        if x[i + ci] > out[o + ci] {
                            out[o + ci] = x[i + ci];
                            arg[o + ci] = i + ci;
                        }
                    }
                }
            }
        }
    }
    Ok((Tensor::from_vec(&[oh, ow, c], out)?, arg))
}

pub(crate) fn maxpool2d_backward(argmax: &[usize], dout: &[f64], dinput: &mut [f64]) {
    for (&i, &g) in argmax.iter().zip(dout) {
        dinput[i] += g;
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub(crate) fn affine(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut y = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (acc, &wv) in y.iter_mut().zip(&w[i * m..(i + 1) * m]) {
            *acc += xi * wv;
        }
    }
    y
}

/// `y = act(W^T x + b)`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor, activation: Activation) -> Result<Tensor> {
    let &[n, m] = weights.shape() else {
        return Err(NnError::ShapeMismatch(format!("dense weights must be 2-d, got {:?}", weights.shape())));
    };
    if x.len() != n {
        return Err(NnError::ShapeMismatch(format!("dense layer expects {n} inputs, got {}", x.len())));
    }
    bias.expect_shape(&[m], "dense bias")?;
    let z = affine(x.data(), weights.data(), bias.data());
    let y = match activation {
        Activation::Relu => z.into_iter().map(|v| v.max(0.0)).collect(),
        Activation::Softmax => softmax(&z),
        Activation::None => z,
    };
    Tensor::from_vec(&[m], y)
}

/// Accumulates dense-layer gradients given `dz`, the gradient with respect
/// to the pre-activation, and returns the input gradient.
pub(crate) fn dense_backward(x: &[f64], w: &[f64], dz: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let m = dz.len();
    let mut dx = vec![0f64; x.len()];
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * m..(i + 1) * m];
        let drow = &mut dw[i * m..(i + 1) * m];
        let mut acc = 0.0;
        for k in 0..m {
            drow[k] += xi * dz[k];
            acc += row[k] * dz[k];
        }
        dx[i] = acc;
    }
    for (a, &g) in db.iter_mut().zip(dz) {
        *a += g;
    }
    dx
}

/// Draws an inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub(crate) fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect()
}

/// Inverted dropout; the identity when not training or when `rate` is 0.
pub fn dropout_apply(x: &Tensor, rate: f64, training: bool, rng: &mut impl Rng) -> Tensor {
    assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
    if !training || rate == 0.0 {
        return x.clone();
    }
    let mask = dropout_mask(x.len(), rate, rng);
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(NnError::ShapeMismatch(format!("{what} must be h x w x c, got {s:?}"))),
    }
}
