//! Single-layer LSTM over a padded sequence, returning the last hidden state.
//! Gate blocks are packed in the order input, forget, candidate, output.

use super::{NnError, Result, Tensor};
use crate::text::SequenceMatrix;

/// Borrowed LSTM parameters: `w_x` is d x 4u, `w_h` is u x 4u, `b` is 4u.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub w_x: &'a Tensor,
    pub w_h: &'a Tensor,
    pub b: &'a Tensor,
}

impl LstmWeights<'_> {
    fn check(&self, dim: usize, units: usize) -> Result<()> {
        self.w_x.expect_shape(&[dim, 4 * units], "lstm input weights")?;
        self.w_h.expect_shape(&[units, 4 * units], "lstm recurrent weights")?;
        self.b.expect_shape(&[4 * units], "lstm bias")
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Runs the recurrence over every row, padding included, and returns h_T.
pub fn lstm_forward(seq: &SequenceMatrix, weights: LstmWeights<'_>, units: usize) -> Result<Tensor> {
    if seq.data.len() != seq.max_len * seq.dim {
        return Err(NnError::ShapeMismatch("sequence data does not match max_len x dim".into()));
    }
    weights.check(seq.dim, units)?;
    let cache = forward_cached(&seq.data, seq.dim, weights, units);
    Tensor::from_vec(&[units], cache.last_h().to_vec())
}

/// Activations kept for backpropagation through time.
pub(crate) struct LstmCache {
    units: usize,
    dim: usize,
    inputs: Vec<f64>,
    /// Post-nonlinearity gates per step, 4u each.
    gates: Vec<f64>,
    /// Cell states c_0..c_T, u each.
    cells: Vec<f64>,
    /// Hidden states h_0..h_T, u each.
    hidden: Vec<f64>,
}

impl LstmCache {
    pub(crate) fn last_h(&self) -> &[f64] {
        &self.hidden[self.hidden.len() - self.units..]
    }

    fn steps(&self) -> usize {
        self.inputs.len() / self.dim
    }
}

pub(crate) fn forward_cached(inputs: &[f64], dim: usize, w: LstmWeights<'_>, units: usize) -> LstmCache {
    let u = units;
    let steps = inputs.len() / dim;
    let (wx, wh, b) = (w.w_x.data(), w.w_h.data(), w.b.data());
    let mut gates = Vec::with_capacity(steps * 4 * u);
    let mut cells = vec![0.0; u];
    let mut hidden = vec![0.0; u];
    let mut z = vec![0.0; 4 * u];
    for t in 0..steps {
        z.copy_from_slice(b);
        for (k, &xv) in inputs[t * dim..(t + 1) * dim].iter().enumerate() {
            if xv != 0.0 {
                for (acc, &wv) in z.iter_mut().zip(&wx[k * 4 * u..(k + 1) * 4 * u]) {
                    *acc += xv * wv;
                }
            }
        }
        let h_prev = t * u;
        for k in 0..u {
            let hv = hidden[h_prev + k];
            if hv != 0.0 {
                for (acc, &wv) in z.iter_mut().zip(&wh[k * 4 * u..(k + 1) * 4 * u]) {
                    *acc += hv * wv;
                }
            }
        }
        for j in 0..4 * u {
            z[j] = if (2 * u..3 * u).contains(&j) { z[j].tanh() } else { sigmoid(z[j]) };
        }
        for k in 0..u {
            let c = z[u + k] * cells[t * u + k] + z[k] * z[2 * u + k];
            cells.push(c);
            hidden.push(z[3 * u + k] * c.tanh());
        }
        gates.extend_from_slice(&z);
    }
    LstmCache { units, dim, inputs: inputs.to_vec(), gates, cells, hidden }
}

/// Backpropagates `dh_last` through time, accumulating into the weight
/// gradients. Input gradients are not produced: the embeddings are frozen.
pub(crate) fn backward(
    cache: &LstmCache,
    w_h: &Tensor,
    dh_last: &[f64],
    dw_x: &mut [f64],
    dw_h: &mut [f64],
    db: &mut [f64],
) {
    let u = cache.units;
    let d = cache.dim;
    let wh = w_h.data();
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; u];
    let mut dz = vec![0.0; 4 * u];
    for t in (0..cache.steps()).rev() {
        let g = &cache.gates[t * 4 * u..(t + 1) * 4 * u];
        let c_prev = &cache.cells[t * u..(t + 1) * u];
        let c = &cache.cells[(t + 1) * u..(t + 2) * u];
        for k in 0..u {
            let (i, f, gg, o) = (g[k], g[u + k], g[2 * u + k], g[3 * u + k]);
            let tc = c[k].tanh();
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dct * gg * i * (1.0 - i);
            dz[u + k] = dct * c_prev[k] * f * (1.0 - f);
            dz[2 * u + k] = dct * i * (1.0 - gg * gg);
            dz[3 * u + k] = dh[k] * tc * o * (1.0 - o);
            dc[k] = dct * f;
        }
        for (a, &v) in db.iter_mut().zip(&dz) {
            *a += v;
        }
        for (k, &xv) in cache.inputs[t * d..(t + 1) * d].iter().enumerate() {
            if xv != 0.0 {
                for (a, &v) in dw_x[k * 4 * u..(k + 1) * 4 * u].iter_mut().zip(&dz) {
                    *a += xv * v;
                }
            }
        }
        let h_prev = &cache.hidden[t * u..(t + 1) * u];
        for k in 0..u {
            let row = &wh[k * 4 * u..(k + 1) * 4 * u];
            if h_prev[k] != 0.0 {
                for (a, &v) in dw_h[k * 4 * u..(k + 1) * 4 * u].iter_mut().zip(&dz) {
                    *a += h_prev[k] * v;
                }
            }
            dh[k] = row.iter().zip(&dz).map(|(a, b)| a * b).sum();
        }
    }
}
