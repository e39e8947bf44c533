//! One-vs-rest soft-margin SVM with the kernel `(gamma <x, z> + coef0)^degree`,
//! each binary problem solved by SMO with second-order working-set
//! selection.

use serde::{Deserialize, Serialize};

use super::{argmax, check_training, BaselineError, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub kernel_degree: u32,
    pub c: f64,
    /// `None` means 1 / feature count.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub tol: f64,
    /// The solver stops after `max_passes * n` iterations.
    pub max_passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { kernel_degree: 3, c: 1.0, gamma: None, coef0: 0.0, tol: 1e-3, max_passes: 200 }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(BaselineError::InvalidConfig("c must be positive".into()));
        }
        if self.kernel_degree < 1 {
            return Err(BaselineError::InvalidConfig("kernel degree must be at least 1".into()));
        }
        if self.gamma.is_some_and(|g| !(g > 0.0)) || !(self.tol > 0.0) || self.max_passes == 0 {
            return Err(BaselineError::InvalidConfig("gamma, tol and max_passes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// Indices into [`SvmModel::support`].
    pub support: Vec<usize>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub dim: usize,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
    pub c: f64,
    /// Training rows that are a support vector of at least one machine.
    pub support: Vec<Vec<f64>>,
    /// One machine per class, class `k` against the rest.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        kernel(a, b, self.gamma, self.coef0, self.degree)
    }
}

fn kernel(a: &[f64], b: &[f64], gamma: f64, coef0: f64, degree: u32) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (gamma * dot + coef0).powi(degree as i32)
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

/// Solves the dual `min 1/2 a'Qa - e'a`, `0 <= a <= c`, `y'a = 0`.
fn smo(k: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i maximises -y_t G_t over the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { !at_upper(alpha[t]) } else { !at_lower(alpha[t]) };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..n {
                let low = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t]) };
                if !low {
                    continue;
                }
                let v = y[t] * grad[t];
                gmax2 = gmax2.max(v);
                let diff = gmax + v;
                if diff > 0.0 {
                    let quad = k[i][i] + k[t][t] - 2.0 * k[i][t];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        if j == usize::MAX || gmax + gmax2 < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        let quad = {
            let q = k[i][i] + k[j][j] - 2.0 * k[i][j];
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[i][t] * di + y[j] * k[j][t] * dj);
        }
    }
    // bias from free multipliers, else the midpoint of the feasible range
    let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    Solution { alpha, rho, iterations, converged }
}

pub fn svm_train(x: &[Vec<f64>], y: &[usize], cfg: &SvmConfig) -> Result<SvmModel> {
    cfg.validate()?;
    let d = check_training(x, y)?;
    let classes = y.iter().max().unwrap() + 1;
    if y.iter().all(|&l| l == y[0]) {
        return Err(BaselineError::SingleClass);
    }
    let gamma = cfg.gamma.unwrap_or(1.0 / d.max(1) as f64);
    let n = x.len();
    let k: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| kernel(&x[i], &x[j], gamma, cfg.coef0, cfg.kernel_degree)).collect()).collect();
    let max_iter = cfg.max_passes.saturating_mul(n);
    let mut sv_index = vec![usize::MAX; n];
    let mut support = Vec::new();
    let mut machines = Vec::with_capacity(classes);
    for class in 0..classes {
        let signs: Vec<f64> = y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let sol = smo(&k, &signs, cfg.c, cfg.tol, max_iter);
        if !sol.converged {
            log::warn!("svm for class {class} stopped after {} iterations without converging", sol.iterations);
        }
        let mut m = BinarySvm {
            support: vec![],
            coef: vec![],
            alpha: vec![],
            rho: sol.rho,
            iterations: sol.iterations,
            converged: sol.converged,
        };
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                if sv_index[i] == usize::MAX {
                    sv_index[i] = support.len();
                    support.push(x[i].clone());
                }
                m.support.push(sv_index[i]);
                m.coef.push(a * signs[i]);
                m.alpha.push(a);
            }
        }
        machines.push(m);
    }
    Ok(SvmModel { dim: d, gamma, degree: cfg.kernel_degree, coef0: cfg.coef0, c: cfg.c, support, machines })
}

/// One decision value per class.
pub fn svm_decision_values(model: &SvmModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim {
        return Err(BaselineError::DimensionMismatch { expected: model.dim, found: x.len() });
    }
    let kv: Vec<f64> = model.support.iter().map(|s| model.kernel(s, x)).collect();
    Ok(model.machines.iter().map(|m| m.support.iter().zip(&m.coef).map(|(&s, c)| c * kv[s]).sum::<f64>() - m.rho).collect())
}

/// Class with the largest decision value; ties go to the lowest index.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<usize> {
    Ok(argmax(&svm_decision_values(model, x)?))
}
