use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::payload::{feature_values, FeatureEntry, LocalExplanation, Method};
use super::{subject, Problem};
use crate::data::{Encoded, Split, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TrainedModel;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapConfig {
    /// Background rows drawn from the reference pool (at most this many).
    pub background_size: usize,
    /// Up to this many features every coalition is enumerated.
    pub max_exact_dim: usize,
    /// Coalitions sampled (in complementary pairs) above `max_exact_dim`.
    pub num_coalitions: usize,
    pub seed: u64,
    pub target: Option<String>,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig { background_size: 100, max_exact_dim: 12, num_coalitions: 2048, seed: 0, target: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapOutcome {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
    pub exact: bool,
}

struct Game<'a> {
    problem: &'a Problem<'a>,
    background: Matrix,
}

impl Game<'_> {
    /// Mean model output with features in `coalition` taken from the
    /// instance and the rest from each background row.
    fn value(&self, coalition: &[bool]) -> f64 {
        let p = self.problem;
        let mut x = self.background.clone();
        for (g, on) in p.groups.iter().zip(coalition) {
            if *on {
                for i in 0..x.rows() {
                    x.row_mut(i)[g.columns()].copy_from_slice(&p.instance[g.columns()]);
                }
            }
        }
        let y = p.model.predict_batch(&x).column(p.target);
        y.iter().sum::<f64>() / y.len() as f64
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley values of the background-marginalized game, one per feature group.
pub fn shap_attributions(problem: &Problem, config: &ShapConfig) -> Result<ShapOutcome> {
    problem.check()?;
    let pool = problem.reference.rows();
    if pool == 0 || config.background_size == 0 {
        return Err(Error::Empty("the SHAP background is empty".into()));
    }
    let mut g = rng::seeded(config.seed);
    let mut chosen: Vec<usize> = index::sample(&mut g, pool, config.background_size.min(pool)).into_vec();
    chosen.sort_unstable();
    let game = Game { problem, background: problem.reference.select_rows(&chosen) };
    let d = problem.groups.len();
    if d <= config.max_exact_dim {
        exact(&game, d)
    } else {
        sampled(&game, d, config.num_coalitions, &mut g)
    }
}

fn exact(game: &Game, d: usize) -> Result<ShapOutcome> {
    if d > 24 {
        return Err(Error::InvalidInput(format!("exact SHAP over {d} features is too expensive")));
    }
    let values: Vec<f64> = (0..1usize << d)
        .into_par_iter()
        .map(|mask| {
            let c: Vec<bool> = (0..d).map(|i| mask >> i & 1 == 1).collect();
            game.value(&c)
        })
        .collect();
    // weight of a coalition of size s not containing i: s!(d-s-1)!/d!
    let weight: Vec<f64> = (0..d).map(|s| 1.0 / (d as f64 * binomial(d - 1, s))).collect();
    let phi = (0..d)
        .map(|i| {
            let bit = 1usize << i;
            (0..1usize << d)
                .filter(|m| m & bit == 0)
                .map(|m| weight[m.count_ones() as usize] * (values[m | bit] - values[m]))
                .sum()
        })
        .collect();
    Ok(ShapOutcome { phi, base_value: values[0], prediction: values[(1 << d) - 1], exact: true })
}

fn sampled(game: &Game, d: usize, num_coalitions: usize, g: &mut impl Rng) -> Result<ShapOutcome> {
    if num_coalitions < 2 {
        return Err(Error::InvalidInput("at least 2 coalitions are needed".into()));
    }
    // sizes drawn with total kernel mass per size, (d-1)/(s(d-s)); each drawn
    // coalition then carries equal weight
    let mass: Vec<f64> = (1..d).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
    let total: f64 = mass.iter().sum();
    let mut coalitions = Vec::with_capacity(num_coalitions);
    while coalitions.len() + 1 < num_coalitions {
        let mut u = g.random_range(0.0..total);
        let mut s = d - 1;
        for (k, m) in mass.iter().enumerate() {
            if u < *m {
                s = k + 1;
                break;
            }
            u -= m;
        }
        let mut c = vec![false; d];
        for i in index::sample(g, d, s) {
            c[i] = true;
        }
        let complement: Vec<bool> = c.iter().map(|b| !b).collect();
        coalitions.push(c);
        coalitions.push(complement);
    }
    let empty = vec![false; d];
    let full = vec![true; d];
    let base = game.value(&empty);
    let prediction = game.value(&full);
    let values: Vec<f64> = coalitions.par_iter().map(|c| game.value(c)).collect();

    // eliminate the last feature with the efficiency constraint
    let delta = prediction - base;
    let last = d - 1;
    let mut a = DMatrix::<f64>::zeros(last, last);
    let mut b = DVector::<f64>::zeros(last);
    for (c, v) in coalitions.iter().zip(&values) {
        let zl = f64::from(u8::from(c[last]));
        let y = v - base - zl * delta;
        let x: Vec<f64> = (0..last).map(|j| f64::from(u8::from(c[j])) - zl).collect();
        for p in 0..last {
            b[p] += x[p] * y;
            for q in p..last {
                a[(p, q)] += x[p] * x[q];
            }
        }
    }
    for p in 0..last {
        for q in 0..p {
            a[(p, q)] = a[(q, p)];
        }
    }
    let beta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a
            .pseudo_inverse(1e-10)
            .map(|p| p * &b)
            .map_err(|e| Error::Domain(format!("kernel SHAP system is singular: {e}")))?,
    };
    let mut phi: Vec<f64> = beta.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    Ok(ShapOutcome { phi, base_value: base, prediction, exact: false })
}

pub fn shap_explain(
    model: &TrainedModel,
    data: &Encoded,
    split: Split,
    sample_index: usize,
    config: &ShapConfig,
) -> Result<LocalExplanation> {
    let s = subject(model, data, split, sample_index, config.target.as_deref())?;
    let groups = &data.inputs.groups;
    let problem = Problem { model, groups, reference: &s.reference, instance: &s.instance, target: s.target };
    let out = shap_attributions(&problem, config)?;
    let entries = groups.iter().zip(&out.phi).map(|(g, p)| FeatureEntry::new(g.feature.clone(), *p, None)).collect();
    let mut warnings = Vec::new();
    if !out.exact {
        warnings.push(format!("{} features exceed the exact limit; attributions are sampled estimates", groups.len()));
    }
    Ok(LocalExplanation {
        method: Method::Shap,
        sample_index,
        split,
        target: s.target_name,
        prediction: s.outputs[s.target],
        ground_truth: s.ground_truth,
        entries,
        probabilities: (model.task() == Task::Classification)
            .then(|| model.fingerprint.outputs.iter().cloned().zip(s.outputs.iter().copied()).collect()),
        base_value: Some(out.base_value),
        intercept: None,
        feature_values: feature_values(model, groups, &s.instance),
        warnings,
    })
}
