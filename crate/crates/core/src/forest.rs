//! Extremely randomized trees.
//!
//! Every tree is grown on the full training set. At each node `K` feature
//! indices are drawn without replacement; each non-constant candidate gets
//! one threshold drawn uniformly between its node-local minimum and maximum,
//! and the candidate with the best score splits the node (`x ≤ t` goes
//! left). A node becomes a leaf when it holds fewer than `n_min` samples,
//! when its targets are all equal, or when every drawn candidate is constant
//! on it. Leaves store the mean target vector.
//!
//! Classifiers are trained on one-hot targets, so leaves hold class
//! frequencies and predictions are probability vectors. For one-hot targets
//! the Gini reduction and the summed variance reduction both equal
//! `Σ_c (L_c²/n_L + R_c²/n_R − S_c²/n)`, where `L_c`, `R_c`, `S_c` are
//! target sums, so one scoring routine serves both kinds.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const FORMAT: &str = "pilesort-forest";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForestKind {
    Classifier,
    Regressor,
}

/// `max_features` and `min_samples_split` default by kind when `None`:
/// `⌈√d⌉` and 5 for classifiers, `d` and 2 for regressors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_features: Option<usize>,
    pub min_samples_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { num_trees: 100, max_features: None, min_samples_split: None }
    }
}

impl ForestParams {
    fn resolve(&self, kind: ForestKind, dim: usize) -> (usize, usize) {
        let k = self.max_features.unwrap_or(match kind {
            ForestKind::Classifier => (dim as f64).sqrt().ceil() as usize,
            ForestKind::Regressor => dim,
        });
        let n_min = self.min_samples_split.unwrap_or(match kind {
            ForestKind::Classifier => 5,
            ForestKind::Regressor => 2,
        });
        (k.clamp(1, dim.max(1)), n_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: Vec<f64> },
}

/// Nodes in creation order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    #[inline]
    fn leaf<F: Fn(usize) -> f64>(&self, x: &F) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x(*feature) <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub kind: ForestKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    forest: Forest,
}

/// Column-major training data and the scratch state of one fit.
struct Builder<'a> {
    cols: &'a [Vec<f64>],
    targets: &'a [f64],
    out_dim: usize,
    k: usize,
    n_min: usize,
    left: Vec<f64>,
    best_left: Vec<f64>,
    total: Vec<f64>,
}

impl Builder<'_> {
    #[inline]
    fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.out_dim..(i + 1) * self.out_dim]
    }

    fn mean(&self, idx: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.out_dim];
        for &i in idx {
            for (a, b) in m.iter_mut().zip(self.target(i)) {
                *a += b;
            }
        }
        let n = idx.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    fn constant_targets(&self, idx: &[usize]) -> bool {
        let first = self.target(idx[0]);
        idx[1..].iter().all(|&i| self.target(i) == first)
    }

    fn grow(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        self.node(idx, rng, &mut nodes);
        Tree { nodes }
    }

    fn node(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>) -> usize {
        let id = nodes.len();
        nodes.push(TreeNode::Leaf { value: Vec::new() });
        let split = if idx.len() < self.n_min || self.constant_targets(idx) { None } else { self.best_split(idx, rng) };
        match split {
            None => nodes[id] = TreeNode::Leaf { value: self.mean(idx) },
            Some((feature, threshold)) => {
                let col = &self.cols[feature];
                let mut n_left = 0;
                for j in 0..idx.len() {
                    if col[idx[j]] <= threshold {
                        idx.swap(j, n_left);
                        n_left += 1;
                    }
                }
                let (l, r) = idx.split_at_mut(n_left);
                let left = self.node(l, rng, nodes);
                let right = self.node(r, rng, nodes);
                nodes[id] = TreeNode::Split { feature, threshold, left, right };
            }
        }
        id
    }

    fn best_split(&mut self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let n = idx.len() as f64;
        self.total.iter_mut().for_each(|a| *a = 0.0);
        for &i in idx {
            for d in 0..self.out_dim {
                self.total[d] += self.targets[i * self.out_dim + d];
            }
        }
        let parent: f64 = self.total.iter().map(|s| s * s).sum::<f64>() / n;
        let mut best: Option<(usize, f64, f64)> = None;
        for feature in sample(rng, self.cols.len(), self.k) {
            let col = &self.cols[feature];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in idx {
                lo = lo.min(col[i]);
                hi = hi.max(col[i]);
            }
            if lo >= hi {
                continue;
            }
            let u: f64 = rng.random();
            let mut t = lo + u * (hi - lo);
            if t >= hi {
                t = lo;
            }
            self.left.iter_mut().for_each(|a| *a = 0.0);
            let mut n_left = 0usize;
            for &i in idx {
                if col[i] <= t {
                    n_left += 1;
                    for d in 0..self.out_dim {
                        self.left[d] += self.targets[i * self.out_dim + d];
                    }
                }
            }
            let (nl, nr) = (n_left as f64, n - n_left as f64);
            let mut score = -parent;
            for d in 0..self.out_dim {
                let (l, r) = (self.left[d], self.total[d] - self.left[d]);
                score += l * l / nl + r * r / nr;
            }
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((feature, t, score));
                std::mem::swap(&mut self.left, &mut self.best_left);
            }
        }
        best.map(|(f, t, _)| (f, t))
    }
}

impl Forest {
    /// Fits `params.num_trees` trees on `rows` with target vectors
    /// `targets`.
    pub fn fit<X: AsRef<[f64]>, Y: AsRef<[f64]>, R: Rng + ?Sized>(
        kind: ForestKind,
        rows: &[X],
        targets: &[Y],
        params: &ForestParams,
        rng: &mut R,
    ) -> Result<Forest> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != targets.len() {
            return Err(Error::TargetCount(targets.len(), rows.len()));
        }
        if params.num_trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        let input_dim = rows[0].as_ref().len();
        let output_dim = targets[0].as_ref().len();
        for (row, x) in rows.iter().enumerate() {
            let got = x.as_ref().len();
            if got != input_dim {
                return Err(Error::RaggedRows { row, expected: input_dim, got });
            }
            if x.as_ref().iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("row {row} has a non-finite feature")));
            }
        }
        let mut flat = Vec::with_capacity(targets.len() * output_dim);
        for (row, y) in targets.iter().enumerate() {
            let y = y.as_ref();
            if y.len() != output_dim {
                return Err(Error::RaggedRows { row, expected: output_dim, got: y.len() });
            }
            flat.extend_from_slice(y);
        }
        let cols: Vec<Vec<f64>> = (0..input_dim).map(|j| rows.iter().map(|x| x.as_ref()[j]).collect()).collect();
        let (k, n_min) = params.resolve(kind, input_dim);
        let mut builder = Builder {
            cols: &cols,
            targets: &flat,
            out_dim: output_dim,
            k,
            n_min,
            left: vec![0.0; output_dim],
            best_left: vec![0.0; output_dim],
            total: vec![0.0; output_dim],
        };
        let mut idx: Vec<usize> = Vec::with_capacity(rows.len());
        let mut trees = Vec::with_capacity(params.num_trees);
        for _ in 0..params.num_trees {
            let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.random());
            idx.clear();
            idx.extend(0..rows.len());
            trees.push(builder.grow(&mut idx, &mut tree_rng));
        }
        Ok(Forest { kind, input_dim, output_dim, params: *params, trees })
    }

    /// Classifier on integer labels `0..num_classes`.
    pub fn fit_classifier<X: AsRef<[f64]>, R: Rng + ?Sized>(
        rows: &[X],
        labels: &[usize],
        num_classes: usize,
        params: &ForestParams,
        rng: &mut R,
    ) -> Result<Forest> {
        let mut targets = Vec::with_capacity(labels.len());
        for &l in labels {
            if l >= num_classes {
                return Err(Error::Format(format!("label {l} outside 0..{num_classes}")));
            }
            let mut y = vec![0.0; num_classes];
            y[l] = 1.0;
            targets.push(y);
        }
        Forest::fit(ForestKind::Classifier, rows, &targets, params, rng)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(self.predict_with(|j| x[j]))
    }

    /// Prediction reading feature `j` through `x(j)`, so callers can compute
    /// only the features the trees visit.
    pub fn predict_with<F: Fn(usize) -> f64>(&self, x: F) -> Vec<f64> {
        // Averaging deviations from the first tree keeps a unanimous
        // ensemble exact.
        let base = self.trees[0].leaf(&x).to_vec();
        let mut dev = vec![0.0; self.output_dim];
        for tree in &self.trees[1..] {
            for ((d, v), b) in dev.iter_mut().zip(tree.leaf(&x)).zip(&base) {
                *d += v - b;
            }
        }
        let m = self.trees.len() as f64;
        base.iter().zip(dev).map(|(b, d)| b + d / m).collect()
    }

    /// `predict_with`, abandoned early once output `k` (the largest output
    /// when `k` is `None`) is certain to end below `floor`, given that no
    /// leaf holds more than `leaf_max` there. A completed prediction is
    /// identical to `predict_with`.
    pub fn predict_above<F: Fn(usize) -> f64>(&self, x: F, k: Option<usize>, leaf_max: f64, floor: f64) -> Option<Vec<f64>> {
        let base = self.trees[0].leaf(&x).to_vec();
        let m = self.trees.len() as f64;
        let mut dev = vec![0.0; self.output_dim];
        let outputs = match k {
            Some(k) => k..k + 1,
            None => 0..self.output_dim,
        };
        for (done, tree) in self.trees[1..].iter().enumerate() {
            let left = (self.trees.len() - 1 - done) as f64;
            let reachable = outputs
                .clone()
                .any(|j| base[j] + (dev[j] + left * (leaf_max - base[j]).max(0.0)) / m + 1e-9 >= floor);
            if !reachable {
                return None;
            }
            for ((d, v), b) in dev.iter_mut().zip(tree.leaf(&x)).zip(&base) {
                *d += v - b;
            }
        }
        Some(base.iter().zip(dev).map(|(b, d)| b + d / m).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let c = Checkpoint { format: FORMAT.into(), version: VERSION, forest: self.clone() };
        Ok(serde_json::to_string(&c)?)
    }

    pub fn from_json(s: &str) -> Result<Forest> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint {} v{}", c.format, c.version)));
        }
        Ok(c.forest)
    }
}

impl AsRef<[f64]> for crate::features::FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
