use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::payload::{feature_values, FeatureEntry, LocalExplanation, Method};
use super::{subject, Problem};
use crate::data::{Encoded, GroupKind, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TrainedModel;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub num_samples: usize,
    /// Features reported; `None` means min(6, d).
    pub num_features: Option<usize>,
    /// Kernel width; `None` means 0.75 * sqrt(d).
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    pub seed: u64,
    /// Output to explain (class label or output column); defaults to the
    /// predicted class.
    pub target: Option<String>,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig { num_samples: 5000, num_features: None, kernel_width: None, ridge: 1.0, seed: 0, target: None }
    }
}

/// Quartile edges of one numeric column plus per-bin sampling statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct QuartileBins {
    /// Distinct interior edges, at most three.
    pub edges: Vec<f64>,
    pub min: f64,
    pub max: f64,
    mean: Vec<f64>,
    std: Vec<f64>,
    /// Train rows per bin; perturbations pick bins in these proportions.
    count: Vec<f64>,
}

impl QuartileBins {
    pub fn fit(values: &[f64]) -> QuartileBins {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut edges: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|&q| quantile(&sorted, q)).collect();
        edges.dedup();
        let min = sorted.first().copied().unwrap_or(0.0);
        let max = sorted.last().copied().unwrap_or(0.0);
        let mut bins = QuartileBins { edges, min, max, mean: vec![], std: vec![], count: vec![] };
        let k = bins.n_bins();
        let mut acc = vec![(0usize, 0.0, 0.0); k];
        for &v in values {
            let b = bins.bin(v);
            acc[b].0 += 1;
            acc[b].1 += v;
            acc[b].2 += v * v;
        }
        for (b, (n, s, ss)) in acc.into_iter().enumerate() {
            let (lo, hi) = bins.range(b);
            bins.count.push(n as f64);
            if n == 0 {
                bins.mean.push(0.5 * (lo + hi));
                bins.std.push((hi - lo) / 12f64.sqrt());
            } else {
                let m = s / n as f64;
                bins.mean.push(m);
                bins.std.push((ss / n as f64 - m * m).max(0.0).sqrt());
            }
        }
        bins
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin(&self, v: f64) -> usize {
        self.edges.iter().filter(|&&e| v > e).count()
    }

    /// Sampling range of a bin; the outer bins stop at the observed extremes.
    fn range(&self, b: usize) -> (f64, f64) {
        let lo = if b == 0 { self.min } else { self.edges[b - 1] };
        let hi = if b == self.edges.len() { self.max } else { self.edges[b] };
        (lo, hi.max(lo))
    }

    /// Truncated normal draw inside bin `b`.
    fn sample(&self, b: usize, g: &mut impl Rng) -> f64 {
        let (lo, hi) = self.range(b);
        let (m, s) = (self.mean[b], self.std[b]);
        if s <= 0.0 || hi <= lo {
            return m.clamp(lo, hi);
        }
        let normal = Normal::new(m, s).expect("positive std");
        for _ in 0..64 {
            let v = normal.sample(g);
            if v >= lo && v <= hi {
                return v;
            }
        }
        g.random_range(lo..=hi)
    }

    /// `lo < name <= hi` for the bin, one-sided at the ends.
    pub fn describe(&self, b: usize, name: &str) -> String {
        let fmt = |x: f64| format!("{}", (x * 1e4).round() / 1e4);
        match (b, b == self.edges.len()) {
            (0, true) => format!("{name} (any)"),
            (0, false) => format!("{name} <= {}", fmt(self.edges[0])),
            (_, true) => format!("{name} > {}", fmt(self.edges[b - 1])),
            _ => format!("{} < {name} <= {}", fmt(self.edges[b - 1]), fmt(self.edges[b])),
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimeOutcome {
    /// Surrogate coefficient per feature group.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Bin description for numeric features.
    pub thresholds: Vec<Option<String>>,
    pub warning: Option<String>,
}

enum Sampler {
    Numeric { bins: QuartileBins, instance_bin: usize },
    Categorical { freq: Vec<f64>, instance_cat: usize },
}

/// Fits the LIME surrogate for `problem`, one coefficient per feature group.
pub fn lime_attributions(problem: &Problem, config: &LimeConfig) -> Result<LimeOutcome> {
    problem.check()?;
    if config.num_samples < 100 {
        return Err(Error::InvalidInput("LIME needs at least 100 samples".into()));
    }
    if !(config.ridge >= 0.0) {
        return Err(Error::InvalidInput("ridge strength must be non-negative".into()));
    }
    if problem.reference.rows() == 0 {
        return Err(Error::Empty("no training rows for LIME statistics".into()));
    }
    let groups = problem.groups;
    let d = groups.len();
    let width = config.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(width > 0.0) {
        return Err(Error::InvalidInput("kernel width must be positive".into()));
    }
    let samplers: Vec<Sampler> = groups
        .iter()
        .map(|g| match g.kind {
            GroupKind::Numeric => {
                let bins = QuartileBins::fit(&problem.reference.column(g.start));
                let instance_bin = bins.bin(problem.instance[g.start]);
                Sampler::Numeric { bins, instance_bin }
            }
            GroupKind::OneHot => {
                let mut freq = vec![0.0; g.len];
                for r in problem.reference.iter_rows() {
                    freq[super::argmax(&r[g.columns()])] += 1.0;
                }
                let instance_cat = super::argmax(&problem.instance[g.columns()]);
                Sampler::Categorical { freq, instance_cat }
            }
        })
        .collect();

    let n = config.num_samples;
    let mut g = rng::seeded(config.seed);
    let mut z = Matrix::zeros(n, d);
    let mut x = Matrix::zeros(n, problem.instance.len());
    x.row_mut(0).copy_from_slice(problem.instance);
    z.row_mut(0).fill(1.0);
    for i in 1..n {
        let xr = x.row_mut(i);
        for (k, (grp, s)) in groups.iter().zip(&samplers).enumerate() {
            let same = match s {
                Sampler::Numeric { bins, instance_bin } => {
                    let b = weighted_index(&bins.count, &mut g);
                    xr[grp.start] = bins.sample(b, &mut g);
                    b == *instance_bin
                }
                Sampler::Categorical { freq, instance_cat } => {
                    let c = weighted_index(freq, &mut g);
                    for (j, v) in xr[grp.columns()].iter_mut().enumerate() {
                        *v = if j == c { 1.0 } else { 0.0 };
                    }
                    c == *instance_cat
                }
            };
            z.set(i, k, if same { 1.0 } else { 0.0 });
        }
    }
    let y: Vec<f64> = predict_parallel(problem, &x);
    let w: Vec<f64> = z
        .iter_rows()
        .map(|r| {
            let d2 = r.iter().filter(|&&v| v == 0.0).count() as f64;
            (-d2 / (width * width)).exp()
        })
        .collect();
    let thresholds = groups
        .iter()
        .zip(&samplers)
        .map(|(grp, s)| match s {
            Sampler::Numeric { bins, instance_bin } => Some(bins.describe(*instance_bin, &grp.feature)),
            Sampler::Categorical { .. } => None,
        })
        .collect();

    let wsum: f64 = w.iter().sum();
    let ymean = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let yvar = w.iter().zip(&y).map(|(a, b)| a * (b - ymean).powi(2)).sum::<f64>() / wsum;
    if yvar <= 1e-24 * ymean.abs().max(1.0).powi(2) {
        return Ok(LimeOutcome {
            coefficients: vec![0.0; d],
            intercept: ymean,
            thresholds,
            warning: Some("the model is constant around this sample; attributions are zero".into()),
        });
    }
    let (coefficients, intercept) = weighted_ridge(&z, &y, &w, config.ridge);
    Ok(LimeOutcome { coefficients, intercept, thresholds, warning: None })
}

fn weighted_index(freq: &[f64], g: &mut impl Rng) -> usize {
    let total: f64 = freq.iter().sum();
    if total <= 0.0 {
        return g.random_range(0..freq.len());
    }
    let mut u = g.random_range(0.0..total);
    for (i, f) in freq.iter().enumerate() {
        if u < *f {
            return i;
        }
        u -= f;
    }
    freq.len() - 1
}

pub(crate) fn predict_parallel(problem: &Problem, x: &Matrix) -> Vec<f64> {
    const CHUNK: usize = 1024;
    let cols = x.cols();
    let parts: Vec<Vec<f64>> = x
        .as_slice()
        .par_chunks(CHUNK * cols.max(1))
        .map(|c| {
            let m = Matrix::from_vec(c.len() / cols.max(1), cols, c.to_vec()).expect("chunk shape");
            problem.model.predict_batch(&m).column(problem.target)
        })
        .collect();
    parts.concat()
}

/// Weighted ridge with an unpenalized intercept.
fn weighted_ridge(z: &Matrix, y: &[f64], w: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let (n, d) = (z.rows(), z.cols());
    let wsum: f64 = w.iter().sum();
    let zmean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| w[i] * z.get(i, j)).sum::<f64>() / wsum).collect();
    let ymean = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / wsum;
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for i in 0..n {
        let r = z.row(i);
        for p in 0..d {
            let zp = r[p] - zmean[p];
            b[p] += w[i] * zp * (y[i] - ymean);
            for q in p..d {
                a[(p, q)] += w[i] * zp * (r[q] - zmean[q]);
            }
        }
    }
    for p in 0..d {
        for q in 0..p {
            a[(p, q)] = a[(q, p)];
        }
        a[(p, p)] += lambda;
    }
    let beta = match a.clone().cholesky() {
        Some(c) => c.solve(&b),
        None => a.pseudo_inverse(1e-12).map(|p| p * &b).unwrap_or_else(|_| DVector::zeros(d)),
    };
    let intercept = ymean - (0..d).map(|j| beta[j] * zmean[j]).sum::<f64>();
    (beta.iter().copied().collect(), intercept)
}

pub fn lime_explain(
    model: &TrainedModel,
    data: &Encoded,
    split: Split,
    sample_index: usize,
    config: &LimeConfig,
) -> Result<LocalExplanation> {
    let s = subject(model, data, split, sample_index, config.target.as_deref())?;
    let groups = &data.inputs.groups;
    let d = groups.len();
    let k = match config.num_features {
        None => d.min(6),
        Some(k) if k <= d && k > 0 => k,
        Some(k) => return Err(Error::InvalidInput(format!("num_features must be in 1..={d} (got {k})"))),
    };
    let problem = Problem { model, groups, reference: &s.reference, instance: &s.instance, target: s.target };
    let out = lime_attributions(&problem, config)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| out.coefficients[b].abs().total_cmp(&out.coefficients[a].abs()).then(a.cmp(&b)));
    let entries = order[..k]
        .iter()
        .map(|&j| FeatureEntry::new(groups[j].feature.clone(), out.coefficients[j], out.thresholds[j].clone()))
        .collect();
    Ok(LocalExplanation {
        method: Method::Lime,
        sample_index,
        split,
        target: s.target_name,
        prediction: s.outputs[s.target],
        ground_truth: s.ground_truth,
        entries,
        probabilities: (model.task() == crate::data::Task::Classification)
            .then(|| model.fingerprint.outputs.iter().cloned().zip(s.outputs.iter().copied()).collect()),
        base_value: None,
        intercept: Some(out.intercept),
        feature_values: feature_values(model, groups, &s.instance),
        warnings: out.warning.into_iter().collect(),
    })
}
