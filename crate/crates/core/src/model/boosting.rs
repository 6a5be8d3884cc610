//! Second-order gradient boosting. Each round fits one tree per booster to the
//! gradient/hessian pair of the loss; a leaf's weight is `-G / (H + lambda)`
//! scaled by the learning rate, and a split's gain is
//! `(GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)) / 2 - gamma`.
//!
//! Regression uses squared loss, one booster per output column. Classification
//! uses the logistic loss: one booster for two classes, one-vs-rest beyond.
//! Trees grow level by level with an exact greedy search over presorted
//! feature columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::BoostParams;
use super::tree::{Node, Tree};
use crate::data::Task;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Squared,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub objective: Objective,
    /// Number of prediction columns (outputs, or classes).
    pub n_outputs: usize,
    pub base_margin: Vec<f64>,
    /// One tree sequence per booster.
    pub boosters: Vec<Vec<Tree>>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row order of each feature column plus the values in that order.
struct Sorted {
    rows: Vec<u32>,
    values: Vec<f64>,
}

fn presort(x: &Matrix) -> Vec<Sorted> {
    (0..x.cols())
        .into_par_iter()
        .map(|f| {
            let mut rows: Vec<u32> = (0..x.rows() as u32).collect();
            rows.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)));
            let values = rows.iter().map(|&r| x.get(r as usize, f)).collect();
            Sorted { rows, values }
        })
        .collect()
}

/// Per-row gradient, hessian and slot in the current level, packed so the
/// split scan touches one record per row.
#[derive(Clone, Copy)]
struct RowState {
    g: f64,
    h: f64,
    slot: u32,
}

const INACTIVE: u32 = u32::MAX;

struct Candidate {
    gain: f64,
    threshold: f64,
}

/// Grows one regression tree on (g, h). Returns the tree and each row's leaf.
fn grow(x: &Matrix, order: &[Sorted], g: &[f64], h: &[f64], p: &BoostParams) -> (Tree, Vec<u32>) {
    let n = x.rows();
    let score = |gs: f64, hs: f64| gs * gs / (hs + p.lambda);
    let mut node_g = vec![g.iter().sum::<f64>()];
    let mut node_h = vec![h.iter().sum::<f64>()];
    let mut nodes = vec![Node::leaf(vec![])];
    let mut node_of = vec![0u32; n];
    let mut level: Vec<u32> = vec![0];

    for _depth in 0..p.max_depth {
        if level.is_empty() {
            break;
        }
        let mut local = vec![-1i32; nodes.len()];
        for (i, &id) in level.iter().enumerate() {
            local[id as usize] = i as i32;
        }
        let m = level.len();
        let state: Vec<RowState> = (0..n)
            .map(|r| {
                let li = local[node_of[r] as usize];
                RowState { g: g[r], h: h[r], slot: if li < 0 { INACTIVE } else { li as u32 } }
            })
            .collect();
        let per_feature: Vec<Vec<Option<Candidate>>> = order
            .par_iter()
            .enumerate()
            .map(|(_, ord)| {
                let mut gl = vec![0.0; m];
                let mut hl = vec![0.0; m];
                let mut last = vec![f64::NAN; m];
                let mut best: Vec<Option<Candidate>> = (0..m).map(|_| None).collect();
                for (&r, &xv) in ord.rows.iter().zip(&ord.values) {
                    let s = state[r as usize];
                    if s.slot == INACTIVE {
                        continue;
                    }
                    let li = s.slot as usize;
                    if !last[li].is_nan() && xv != last[li] {
                        let id = level[li] as usize;
                        let (gr, hr) = (node_g[id] - gl[li], node_h[id] - hl[li]);
                        if hl[li] >= p.min_child_weight && hr >= p.min_child_weight {
                            let gain = 0.5 * (score(gl[li], hl[li]) + score(gr, hr) - score(node_g[id], node_h[id])) - p.gamma;
                            if best[li].as_ref().is_none_or(|b| gain > b.gain) {
                                best[li] = Some(Candidate { gain, threshold: last[li] + (xv - last[li]) / 2.0 });
                            }
                        }
                    }
                    gl[li] += s.g;
                    hl[li] += s.h;
                    last[li] = xv;
                }
                best
            })
            .collect();

        // lowest feature index wins ties
        let mut chosen: Vec<Option<(usize, f64, f64)>> = vec![None; m];
        for (f, cands) in per_feature.iter().enumerate() {
            for (li, c) in cands.iter().enumerate() {
                if let Some(c) = c {
                    if c.gain > 1e-12 && chosen[li].is_none_or(|(_, _, g)| c.gain > g) {
                        chosen[li] = Some((f, c.threshold, c.gain));
                    }
                }
            }
        }

        let mut next = Vec::new();
        let mut children = vec![(0u32, 0u32); m];
        for (li, c) in chosen.iter().enumerate() {
            if let Some((f, t, _)) = *c {
                let id = level[li] as usize;
                let left = nodes.len() as u32;
                nodes.push(Node::leaf(vec![]));
                nodes.push(Node::leaf(vec![]));
                node_g.extend([0.0, 0.0]);
                node_h.extend([0.0, 0.0]);
                nodes[id].feature = f as i32;
                nodes[id].threshold = t;
                nodes[id].left = left;
                nodes[id].right = left + 1;
                children[li] = (left, left + 1);
                next.extend([left, left + 1]);
            }
        }
        if next.is_empty() {
            break;
        }
        for r in 0..n {
            let id = node_of[r] as usize;
            let li = local.get(id).copied().unwrap_or(-1);
            if li < 0 || chosen[li as usize].is_none() {
                continue;
            }
            let node = &nodes[id];
            let child = if x.get(r, node.feature as usize) <= node.threshold {
                children[li as usize].0
            } else {
                children[li as usize].1
            };
            node_of[r] = child;
            node_g[child as usize] += g[r];
            node_h[child as usize] += h[r];
        }
        level = next;
    }

    for (id, node) in nodes.iter_mut().enumerate() {
        if node.is_leaf() {
            node.value = vec![-node_g[id] / (node_h[id] + p.lambda) * p.learning_rate];
        }
    }
    (Tree { nodes }, node_of)
}

impl Boosted {
    /// Fits the ensemble; returns it with the mean train loss after each round.
    pub fn fit(x: &Matrix, y: &Matrix, task: Task, p: &BoostParams) -> (Boosted, Vec<f64>) {
        let n = x.rows();
        let order = presort(x);
        let (objective, targets): (Objective, Vec<Vec<f64>>) = match task {
            Task::Regression => (Objective::Squared, (0..y.cols()).map(|j| y.column(j)).collect()),
            Task::Classification => {
                let cols: Vec<Vec<f64>> = match y.cols() {
                    0 | 1 => vec![],
                    2 => vec![y.column(1)],
                    k => (0..k).map(|j| y.column(j)).collect(),
                };
                (Objective::Logistic, cols)
            }
        };
        let base_margin: Vec<f64> = targets
            .iter()
            .map(|t| {
                let mean = t.iter().sum::<f64>() / n as f64;
                match objective {
                    Objective::Squared => mean,
                    Objective::Logistic => {
                        let q = mean.clamp(1e-6, 1.0 - 1e-6);
                        (q / (1.0 - q)).ln()
                    }
                }
            })
            .collect();
        let mut margins: Vec<Vec<f64>> = base_margin.iter().map(|b| vec![*b; n]).collect();
        let mut boosters: Vec<Vec<Tree>> = vec![Vec::with_capacity(p.n_rounds); targets.len()];
        let mut history = Vec::with_capacity(p.n_rounds);
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..p.n_rounds {
            let mut round_loss = 0.0;
            for (b, t) in targets.iter().enumerate() {
                let m = &mut margins[b];
                for r in 0..n {
                    match objective {
                        Objective::Squared => {
                            g[r] = m[r] - t[r];
                            h[r] = 1.0;
                        }
                        Objective::Logistic => {
                            let q = sigmoid(m[r]);
                            g[r] = q - t[r];
                            h[r] = (q * (1.0 - q)).max(1e-16);
                        }
                    }
                }
                let (tree, leaf_of) = grow(x, &order, &g, &h, p);
                for r in 0..n {
                    m[r] += tree.nodes[leaf_of[r] as usize].value[0];
                }
                boosters[b].push(tree);
                round_loss += match objective {
                    Objective::Squared => m.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64,
                    Objective::Logistic => {
                        m.iter()
                            .zip(t)
                            .map(|(z, y)| {
                                // log(1 + e^z) - y z, stable
                                let softplus = if *z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                                softplus - y * z
                            })
                            .sum::<f64>()
                            / n as f64
                    }
                };
            }
            history.push(if targets.is_empty() { 0.0 } else { round_loss / targets.len() as f64 });
        }
        (Boosted { objective, n_outputs: y.cols(), base_margin, boosters }, history)
    }

    pub fn predict_row(&self, x: &[f64], out: &mut [f64]) {
        let margin = |b: usize| self.base_margin[b] + self.boosters[b].iter().map(|t| t.leaf_for(x)[0]).sum::<f64>();
        match self.objective {
            Objective::Squared => {
                for (b, o) in out.iter_mut().enumerate() {
                    *o = margin(b);
                }
            }
            Objective::Logistic => match self.n_outputs {
                0 => {}
                1 => out[0] = 1.0,
                2 => {
                    let q = sigmoid(margin(0));
                    out[0] = 1.0 - q;
                    out[1] = q;
                }
                _ => {
                    for (b, o) in out.iter_mut().enumerate() {
                        *o = sigmoid(margin(b));
                    }
                    let s: f64 = out.iter().sum();
                    out.iter_mut().for_each(|v| *v /= s);
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn line(n: usize) -> (Matrix, Matrix) {
        let x = Matrix::from_rows(&(0..n).map(|i| vec![i as f64 / n as f64]).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_rows(&x.iter_rows().map(|r| vec![3.0 * r[0]]).collect::<Vec<_>>()).unwrap();
        (x, y)
    }

    #[test]
    fn fits_linear_target() {
        let (x, y) = line(200);
        let (m, hist) = Boosted::fit(&x, &y, Task::Regression, &BoostParams::default());
        let mut out = [0.0];
        let mut mse = 0.0;
        for i in 0..200 {
            m.predict_row(x.row(i), &mut out);
            mse += (out[0] - y.get(i, 0)).powi(2) / 200.0;
        }
        let mean = y.as_slice().iter().sum::<f64>() / 200.0;
        let var = y.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 200.0;
        assert!(mse < 0.01 * var, "mse {mse} var {var}");
        assert!((hist.last().unwrap() - mse).abs() < 1e-9);
    }

    #[test]
    fn squared_loss_never_increases() {
        let mut g = rng::seeded(2);
        let x = Matrix::from_rows(&(0..300).map(|_| vec![g.random::<f64>(), g.random::<f64>()]).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_rows(&x.iter_rows().map(|r| vec![(4.0 * r[0]).sin() * r[1]]).collect::<Vec<_>>()).unwrap();
        let (_, hist) = Boosted::fit(&x, &y, Task::Regression, &BoostParams::default());
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{w:?}");
        }
    }

    #[test]
    fn logistic_probabilities() {
        let mut g = rng::seeded(5);
        let x = Matrix::from_rows(&(0..400).map(|_| vec![g.random::<f64>() * 2.0 - 1.0]).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_rows(&x.iter_rows().map(|r| if r[0] > 0.1 { vec![0.0, 1.0] } else { vec![1.0, 0.0] }).collect::<Vec<_>>()).unwrap();
        let (m, hist) = Boosted::fit(&x, &y, Task::Classification, &BoostParams::default());
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        let mut out = [0.0; 2];
        m.predict_row(&[0.8], &mut out);
        assert!(out[1] > 0.9 && (out[0] + out[1] - 1.0).abs() < 1e-12);
        m.predict_row(&[-0.8], &mut out);
        assert!(out[0] > 0.9);
    }

    #[test]
    fn constant_target_exact() {
        let (x, _) = line(50);
        let y = Matrix::from_vec(50, 1, vec![1.75; 50]).unwrap();
        let (m, _) = Boosted::fit(&x, &y, Task::Regression, &BoostParams::default());
        let mut out = [0.0];
        m.predict_row(&[0.3], &mut out);
        assert!((out[0] - 1.75).abs() < 1e-12);
    }
}
