//! Random forest of CART trees grown on bootstrap samples with Gini splits.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, check_training, BaselineError, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// `None` means `max(1, floor(log2 d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self { n_estimators: 600, max_depth: 12, max_features: None, min_samples_split: 2, seed: 0 }
    }
}

impl RfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.max_depth == 0 || self.max_features == Some(0) {
            return Err(BaselineError::InvalidConfig("n_estimators, max_depth and max_features must be at least 1".into()));
        }
        Ok(())
    }

    pub fn features_per_split(&self, d: usize) -> usize {
        self.max_features.unwrap_or_else(|| (d.max(1) as f64).log2().floor().max(1.0) as usize).clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub dim: usize,
    pub classes: usize,
    pub trees: Vec<Tree>,
    /// Out-of-bag accuracy over rows left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    cfg: &'a RfConfig,
    mtry: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut impl Rng) -> usize {
        let at = self.nodes.len();
        let mut counts = vec![0; self.classes];
        rows.iter().for_each(|&r| counts[self.y[r]] += 1);
        let majority = argmax(&counts);
        self.nodes.push(Node::Leaf { class: majority });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || rows.len() < self.cfg.min_samples_split {
            return at;
        }
        let Some((feature, threshold)) = self.best_split(rows, &counts, rng) else {
            return at;
        };
        let mid = partition(rows, |&r| self.x[r][feature] <= threshold);
        let (l, r) = rows.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }

    fn best_split(&self, rows: &[usize], counts: &[usize], rng: &mut impl Rng) -> Option<(usize, f64)> {
        let n = rows.len();
        let parent = gini(counts, n);
        let d = self.x[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for feature in sample(rng, d, self.mtry).into_iter() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[r][feature], self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0; self.classes];
            for i in 0..n - 1 {
                left[sorted[i].1] += 1;
                if sorted[i].0 == sorted[i + 1].0 {
                    continue;
                }
                let nl = i + 1;
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let impurity = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                let gain = parent - impurity;
                if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                    let mut threshold = (sorted[i].0 + sorted[i + 1].0) / 2.0;
                    if threshold >= sorted[i + 1].0 {
                        threshold = sorted[i].0;
                    }
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn partition(rows: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if pred(&rows[i]) {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

pub fn rf_train(x: &[Vec<f64>], y: &[usize], cfg: &RfConfig) -> Result<RfModel> {
    cfg.validate()?;
    let d = check_training(x, y)?;
    let n = x.len();
    let classes = y.iter().max().unwrap() + 1;
    let mtry = cfg.features_per_split(d);
    let grown: Vec<(Tree, Vec<bool>)> = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, t as u64);
            let mut rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            rows.iter().for_each(|&r| in_bag[r] = true);
            let mut g = Grower { x, y, classes, cfg, mtry, nodes: Vec::new() };
            if d > 0 {
                g.grow(&mut rows, 0, &mut rng);
            } else {
                let mut counts = vec![0; classes];
                rows.iter().for_each(|&r| counts[y[r]] += 1);
                g.nodes.push(Node::Leaf { class: argmax(&counts) });
            }
            (Tree { nodes: g.nodes }, in_bag)
        })
        .collect();
    let mut votes = vec![vec![0usize; classes]; n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            votes[i][tree.predict(&x[i])] += 1;
        }
    }
    let scored: Vec<usize> = (0..n).filter(|&i| votes[i].iter().sum::<usize>() > 0).collect();
    let oob_accuracy = (!scored.is_empty())
        .then(|| scored.iter().filter(|&&i| argmax(&votes[i]) == y[i]).count() as f64 / scored.len() as f64);
    Ok(RfModel { dim: d, classes, trees: grown.into_iter().map(|(t, _)| t).collect(), oob_accuracy })
}

/// Majority vote; ties go to the lowest class index.
pub fn rf_predict(model: &RfModel, x: &[f64]) -> Result<usize> {
    if x.len() != model.dim {
        return Err(BaselineError::DimensionMismatch { expected: model.dim, found: x.len() });
    }
    let mut votes = vec![0usize; model.classes];
    model.trees.iter().for_each(|t| votes[t.predict(x)] += 1);
    Ok(argmax(&votes))
}
