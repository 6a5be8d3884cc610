//! Random forest of CART trees: Gini impurity for classification, variance
//! reduction for (multi-output) regression. Splits are chosen among a random
//! subset of ceil(sqrt(d)) features by default; ties keep the lowest feature
//! index, then the lowest threshold.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::ForestParams;
use super::tree::{Node, Tree};
use crate::data::Task;
use crate::matrix::Matrix;
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub task: Task,
    pub n_outputs: usize,
    pub trees: Vec<Tree>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a Matrix,
    task: Task,
    params: &'a ForestParams,
    max_features: usize,
    nodes: Vec<Node>,
    rng: SeededRng,
}

/// Impurity statistics accumulated over a set of rows.
#[derive(Clone)]
struct Stats {
    n: f64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Stats {
    fn new(k: usize) -> Self {
        Stats { n: 0.0, sum: vec![0.0; k], sum_sq: vec![0.0; k] }
    }

    fn add(&mut self, y: &[f64]) {
        self.n += 1.0;
        for (j, v) in y.iter().enumerate() {
            self.sum[j] += v;
            self.sum_sq[j] += v * v;
        }
    }

    fn sub(&mut self, y: &[f64]) {
        self.n -= 1.0;
        for (j, v) in y.iter().enumerate() {
            self.sum[j] -= v;
            self.sum_sq[j] -= v * v;
        }
    }

    /// Weighted impurity: n * Gini for one-hot targets, SSE for regression.
    fn cost(&self, task: Task) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        match task {
            Task::Classification => self.n - self.sum.iter().map(|c| c * c).sum::<f64>() / self.n,
            Task::Regression => self
                .sum
                .iter()
                .zip(&self.sum_sq)
                .map(|(s, q)| (q - s * s / self.n).max(0.0))
                .sum(),
        }
    }

    fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n).collect()
    }
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let mut stats = Stats::new(self.y.cols());
        for &r in rows.iter() {
            stats.add(self.y.row(r));
        }
        self.nodes.push(Node::leaf(stats.mean()));
        let parent_cost = stats.cost(self.task);
        if depth >= self.params.max_depth || rows.len() < self.params.min_samples_split || parent_cost <= 1e-12 {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, &stats, parent_cost) else {
            return id;
        };
        let mut split_at = 0;
        for i in 0..rows.len() {
            if self.x.get(rows[i], feature) <= threshold {
                rows.swap(i, split_at);
                split_at += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split_at);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        let node = &mut self.nodes[id as usize];
        node.feature = feature as i32;
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        node.value.clear();
        id
    }

    fn best_split(&mut self, rows: &[usize], total: &Stats, parent_cost: f64) -> Option<(usize, f64)> {
        let d = self.x.cols();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut examined = 0;
        let mut sorted = rows.to_vec();
        // Draw max_features candidates; keep drawing past that only while no
        // candidate has produced a valid split.
        let mut chosen: Vec<usize> = Vec::new();
        let mut cursor = 0;
        while cursor < d {
            if examined >= self.max_features && best.is_some() {
                break;
            }
            let take = if examined < self.max_features { self.max_features - examined } else { 1 };
            chosen.clear();
            chosen.extend(features[cursor..(cursor + take).min(d)].iter().copied());
            cursor += chosen.len();
            examined += chosen.len();
            chosen.sort_unstable();
            for &f in &chosen {
                sorted.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
                let mut left = Stats::new(self.y.cols());
                let mut right = total.clone();
                for i in 0..sorted.len() - 1 {
                    let r = sorted[i];
                    left.add(self.y.row(r));
                    right.sub(self.y.row(r));
                    let (xa, xb) = (self.x.get(r, f), self.x.get(sorted[i + 1], f));
                    if xa == xb {
                        continue;
                    }
                    let gain = parent_cost - left.cost(self.task) - right.cost(self.task);
                    let threshold = xa + (xb - xa) / 2.0;
                    let better = match best {
                        None => true,
                        Some((g, bf, bt)) => gain > g + 1e-12 || ((gain - g).abs() <= 1e-12 && (f, threshold) < (bf, bt)),
                    };
                    if better {
                        best = Some((gain, f, threshold));
                    }
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn grow_tree(x: &Matrix, y: &Matrix, task: Task, params: &ForestParams, seed: u64, index: usize) -> Tree {
    let mut rng = rng::derived(seed, index as u64);
    let n = x.rows();
    let mut rows: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let d = x.cols();
    let max_features = params.max_features.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d.max(1));
    let mut b = Builder { x, y, task, params, max_features, nodes: Vec::new(), rng };
    b.build(&mut rows, 0);
    Tree { nodes: b.nodes }
}

impl Forest {
    /// `y` holds one-hot class rows for classification.
    pub fn fit(x: &Matrix, y: &Matrix, task: Task, params: &ForestParams, seed: u64) -> Forest {
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|i| grow_tree(x, y, task, params, seed, i))
            .collect();
        Forest { task, n_outputs: y.cols(), trees }
    }

    pub fn predict_row(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in &self.trees {
            for (o, v) in out.iter_mut().zip(t.leaf_for(x)) {
                *o += v;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        if self.task == Task::Classification {
            let s: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tree() -> ForestParams {
        ForestParams { n_trees: 1, bootstrap: false, max_depth: 64, max_features: Some(usize::MAX), min_samples_split: 2 }
    }

    #[test]
    fn full_depth_tree_interpolates_training_data() {
        let mut g = rng::seeded(3);
        let x = Matrix::from_rows(&(0..200).map(|_| vec![g.random::<f64>(), g.random::<f64>()]).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_rows(&x.iter_rows().map(|r| vec![(r[0] * 7.0).sin() + r[1]]).collect::<Vec<_>>()).unwrap();
        let p = ForestParams { max_features: Some(2), ..single_tree() };
        let f = Forest::fit(&x, &y, Task::Regression, &p, 0);
        let mut out = [0.0];
        for i in 0..x.rows() {
            f.predict_row(x.row(i), &mut out);
            assert!((out[0] - y.get(i, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn xor_needs_zero_gain_root_split() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = ForestParams { max_features: Some(2), ..single_tree() };
        let f = Forest::fit(&x, &y, Task::Classification, &p, 0);
        let mut out = [0.0; 2];
        for i in 0..4 {
            f.predict_row(x.row(i), &mut out);
            assert_eq!(out, [y.get(i, 0), y.get(i, 1)]);
        }
        // tie between the two features at the root resolves to feature 0
        assert_eq!(f.trees[0].nodes[0].feature, 0);
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_vec(20, 1, vec![2.5; 20]).unwrap();
        let f = Forest::fit(&x, &y, Task::Regression, &ForestParams::default(), 4);
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn deterministic_and_depth_bounded() {
        let mut g = rng::seeded(9);
        let x = Matrix::from_rows(&(0..300).map(|_| (0..4).map(|_| g.random::<f64>()).collect()).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_rows(&x.iter_rows().map(|r| vec![r[0] * r[1] + r[2]]).collect::<Vec<_>>()).unwrap();
        let p = ForestParams { n_trees: 8, max_depth: 5, ..Default::default() };
        let a = Forest::fit(&x, &y, Task::Regression, &p, 12);
        let b = Forest::fit(&x, &y, Task::Regression, &p, 12);
        assert_eq!(a, b);
        assert!(a.trees.iter().all(|t| t.depth() <= 5));
    }
}
