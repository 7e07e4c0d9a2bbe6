//! CART regression trees and bagged forests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        let k = self.trees.len() as f64;
        Ok((0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().cloned().collect();
                self.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / k
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means floor(sqrt(d)).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    p: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let first = self.y[idx[0]];
        let value = if idx.iter().all(|&i| self.y[i] == first) {
            first
        } else {
            idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
        };
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<Split> {
        let d = self.x.ncols();
        let leaf = self.p.min_samples_leaf;
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<Split> = None;
        let mut visited = 0;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for k in 0..d {
            if visited >= self.mtry {
                break;
            }
            let pick = self.rng.gen_range(k..d);
            self.order.swap(k, pick);
            let f = self.order[k];
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x[(i, f)], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            visited += 1;
            let mut left = 0.0;
            for s in 1..n {
                left += pairs[s - 1].1;
                if s < leaf || n - s < leaf || pairs[s - 1].0 == pairs[s].0 {
                    continue;
                }
                let right = total - left;
                let score = left * left / s as f64 + right * right / (n - s) as f64;
                if score > parent + 1e-12 * parent.abs() && best.as_ref().is_none_or(|b| score > b.score) {
                    let (lo, hi) = (pairs[s - 1].0, pairs[s].0);
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Split { feature: f, threshold, score });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let first = self.y[idx[0]];
        if self.p.max_depth.is_some_and(|m| depth >= m)
            || n < self.p.min_samples_split
            || n < 2 * self.p.min_samples_leaf
            || idx.iter().all(|&i| self.y[i] == first)
        {
            return self.leaf(idx);
        }
        let Some(split) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let mut cut = 0;
        for k in 0..n {
            if self.x[(idx[k], split.feature)] <= split.threshold {
                idx.swap(k, cut);
                cut += 1;
            }
        }
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        at
    }
}

fn fit_tree(x: &DMatrix<f64>, y: &[f64], p: &ForestParams, mtry: usize, seed: u64) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = y.len();
    let mut idx: Vec<usize> = if p.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
    let mut b = Builder { x, y, p, mtry, rng, nodes: Vec::new(), order: (0..x.ncols()).collect() };
    b.grow(&mut idx, 0);
    DecisionTree { nodes: b.nodes }
}

/// Tree `t` is seeded with `seed + t`, so results do not depend on scheduling.
pub fn fit_random_forest(x: &DMatrix<f64>, y: &[f64], p: &ForestParams) -> Result<RandomForest> {
    let (n, d) = x.shape();
    if n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n < p.min_samples_split.max(2) || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "forest needs at least {} rows and one feature, got {n}x{d}",
            p.min_samples_split.max(2)
        )));
    }
    if p.n_estimators == 0 || p.min_samples_leaf == 0 || p.min_samples_split < 2 {
        return Err(Error::InvalidArgument("n_estimators, min_samples_leaf >= 1 and min_samples_split >= 2".into()));
    }
    let mtry = p.max_features.unwrap_or(((d as f64).sqrt().floor() as usize).max(1)).clamp(1, d);
    let trees = (0..p.n_estimators)
        .into_par_iter()
        .map(|t| fit_tree(x, y, p, mtry, p.seed.wrapping_add(t as u64)))
        .collect();
    Ok(RandomForest { n_features: d, trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_grown_tree_memorizes() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 5) % 23) as f64 + 0.1 * i as f64);
        let y: Vec<f64> = (0..20).map(|i| ((i * 13) % 7) as f64 * 0.1).collect();
        let p = ForestParams { n_estimators: 1, bootstrap: false, max_features: Some(3), ..Default::default() };
        let f = fit_random_forest(&x, &y, &p).unwrap();
        assert_eq!(f.predict(&x).unwrap(), y);
    }

    #[test]
    fn constant_target() {
        let x = DMatrix::from_fn(10, 2, |i, j| (i + j) as f64);
        let f = fit_random_forest(&x, &[0.3; 10], &ForestParams { n_estimators: 5, ..Default::default() }).unwrap();
        assert!(f.predict(&x).unwrap().iter().all(|v| *v == 0.3));
    }

    #[test]
    fn depth_limit() {
        let x = DMatrix::from_fn(64, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        let p = ForestParams { n_estimators: 3, max_depth: Some(3), ..Default::default() };
        let f = fit_random_forest(&x, &y, &p).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 3 && t.n_leaves() <= 8));
    }
}
