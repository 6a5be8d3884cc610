//! eFAST estimator of first-order (S1) and total-order (ST) Sobol indices.
//!
//! For each feature of interest `i`, every input travels along a search curve
//! `x_j(s) = 1/2 + arcsin(sin(w_j s + phi_j)) / pi`, `s = 2 pi k / N`, so each
//! coordinate is uniform on [0, 1]. Feature `i` is driven at the high
//! frequency `w_i = floor((N - 1) / 2M)`; the others cycle through the low
//! frequencies `1..=max(1, floor(w_i / 2M))`. From the Fourier amplitudes
//! `L_k = A_k^2 + B_k^2` of the model output along the curve:
//!
//! * total variance `V` sums `L_k / 2` over all harmonics `k = 1..(N - 1)/2`,
//! * `S1_i` is the share at the first `M` harmonics of `w_i`,
//! * `ST_i = 1 - V_~i / V` where `V_~i` sums the harmonics `1..=w_i / 2`,
//!   which carry the complementary (low-frequency) inputs.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{correlation_check, Encoded, Split, Task, DEFAULT_CORRELATION_THRESHOLD};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{BatchPredict, TrainedModel};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfastConfig {
    /// Points per search curve (N). Odd and at least 4M^2 + 1.
    pub samples_per_curve: usize,
    /// Interference factor (M): harmonics of w_i counted towards S1.
    pub interference: usize,
    pub seed: u64,
    /// Per-input (lo, hi). Inputs with lo == hi are held fixed and get zero indices.
    pub bounds: Vec<(f64, f64)>,
    /// Independent phase draws averaged together.
    pub resamples: usize,
}

impl EfastConfig {
    pub const DEFAULT_N: usize = 65;
    pub const DEFAULT_M: usize = 4;

    pub fn new(bounds: Vec<(f64, f64)>, seed: u64) -> Self {
        EfastConfig { samples_per_curve: Self::DEFAULT_N, interference: Self::DEFAULT_M, seed, bounds, resamples: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.samples_per_curve, self.interference);
        if m == 0 {
            return Err(Error::InvalidInput("interference factor must be at least 1".into()));
        }
        if n < 4 * m * m + 1 || n % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "samples per curve must be odd and at least 4M^2+1 = {} (got {n})",
                4 * m * m + 1
            )));
        }
        if self.resamples == 0 {
            return Err(Error::InvalidInput("resamples must be at least 1".into()));
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidInput(format!("invalid bounds for input {j}: ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

/// Frequencies for one curve: `w_i` on the feature of interest, cycling low
/// frequencies on the others. `active` lists the non-degenerate inputs.
pub fn frequencies(n: usize, m: usize, active: usize, interest: usize) -> Vec<usize> {
    let w_i = (n - 1) / (2 * m);
    let low = (w_i / (2 * m)).max(1);
    let mut out = Vec::with_capacity(active);
    let mut c = 0;
    for j in 0..active {
        if j == interest {
            out.push(w_i);
        } else {
            out.push(c % low + 1);
            c += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// Input index (into the full input list) driven at the high frequency.
    pub feature_of_interest: usize,
    pub resample: usize,
    /// Frequency per input; 0 for fixed (degenerate) inputs.
    pub omega: Vec<usize>,
    pub phases: Vec<f64>,
    /// N x d sample points, already scaled to the bounds.
    pub points: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfastDesign {
    pub curves: Vec<Curve>,
    /// Sample positions s_k = 2 pi k / N.
    pub s: Vec<f64>,
    /// Inputs with lo == hi, excluded from the analysis.
    pub degenerate: Vec<usize>,
}

pub fn efast_design(config: &EfastConfig, d: usize) -> Result<EfastDesign> {
    if d == 0 {
        return Err(Error::InvalidInput("at least one input is required".into()));
    }
    if config.bounds.len() != d {
        return Err(Error::InvalidInput(format!("{} bounds given for {d} inputs", config.bounds.len())));
    }
    config.validate()?;
    let n = config.samples_per_curve;
    let s: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let active: Vec<usize> = (0..d).filter(|&j| config.bounds[j].0 < config.bounds[j].1).collect();
    let degenerate: Vec<usize> = (0..d).filter(|j| !active.contains(j)).collect();
    let mut curves = Vec::with_capacity(active.len() * config.resamples);
    for r in 0..config.resamples {
        for (ai, &feature) in active.iter().enumerate() {
            let freq = frequencies(n, config.interference, active.len(), ai);
            let mut g = rng::derived(config.seed, (r * d + feature) as u64);
            let mut omega = vec![0; d];
            let mut phases = vec![0.0; d];
            for (k, &j) in active.iter().enumerate() {
                omega[j] = freq[k];
                phases[j] = g.random_range(0.0..2.0 * PI);
            }
            let mut points = Matrix::zeros(n, d);
            for (k, sk) in s.iter().enumerate() {
                let row = points.row_mut(k);
                for j in 0..d {
                    let (lo, hi) = config.bounds[j];
                    row[j] = if omega[j] == 0 {
                        lo
                    } else {
                        let u = (0.5 + (omega[j] as f64 * sk + phases[j]).sin().asin() / PI).clamp(0.0, 1.0);
                        (lo + u * (hi - lo)).clamp(lo, hi)
                    };
                }
            }
            curves.push(Curve { feature_of_interest: feature, resample: r, omega, phases, points });
        }
    }
    Ok(EfastDesign { curves, s, degenerate })
}

/// (S1, ST, V) from one curve's outputs. `None` when the output is constant.
pub fn efast_indices(y: &[f64], omega_i: usize, interference: usize) -> Option<(f64, f64, f64)> {
    let n = y.len();
    let half = (n - 1) / 2;
    let mut power = vec![0.0; half + 1];
    for (k, p) in power.iter_mut().enumerate().skip(1) {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, v) in y.iter().enumerate() {
            // reduce k*j mod n so the angle stays small and exact
            let ang = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
            a += v * ang.cos();
            b += v * ang.sin();
        }
        a *= 2.0 / n as f64;
        b *= 2.0 / n as f64;
        *p = a * a + b * b;
    }
    let v: f64 = power[1..].iter().sum::<f64>() / 2.0;
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if v <= 1e-24 * scale * scale {
        return None;
    }
    let v_i: f64 = (1..=interference).map(|p| p * omega_i).filter(|&k| k <= half).map(|k| power[k]).sum::<f64>() / 2.0;
    let v_rest: f64 = power[1..=(omega_i / 2).min(half)].iter().sum::<f64>() / 2.0;
    Some((v_i / v, 1.0 - v_rest / v, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndex {
    pub input: String,
    pub s1: f64,
    pub st: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputIndices {
    pub output: String,
    pub indices: Vec<SobolIndex>,
    pub total_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SobolResult {
    pub outputs: Vec<OutputIndices>,
    pub warnings: Vec<String>,
}

impl SobolResult {
    /// `input,output,s1,st` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("input,output,s1,st\n");
        for o in &self.outputs {
            for i in &o.indices {
                out.push_str(&format!("{},{},{},{}\n", csv_field(&i.input), csv_field(&o.output), i.s1, i.st));
            }
        }
        out
    }

    pub fn index(&self, output: usize, input: &str) -> Option<&SobolIndex> {
        self.outputs.get(output)?.indices.iter().find(|i| i.input == input)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs the full design through `model` and reports indices for the selected
/// output columns, averaged over resamples.
pub fn efast_analyze(
    model: &dyn BatchPredict,
    input_names: &[String],
    outputs: &[(usize, String)],
    config: &EfastConfig,
) -> Result<SobolResult> {
    let d = input_names.len();
    let design = efast_design(config, d)?;
    let evaluated: Vec<Matrix> = design.curves.par_iter().map(|c| model.predict_batch(&c.points)).collect();
    let mut result = SobolResult::default();
    let mut constant_outputs = Vec::new();
    for (col, name) in outputs {
        let mut s1 = vec![0.0; d];
        let mut st = vec![0.0; d];
        let mut counts = vec![0usize; d];
        let mut total_v = 0.0;
        let mut v_count = 0;
        for (curve, y) in design.curves.iter().zip(&evaluated) {
            let yi = y.column(*col);
            let i = curve.feature_of_interest;
            counts[i] += 1;
            if let Some((a, b, v)) = efast_indices(&yi, curve.omega[i], config.interference) {
                s1[i] += a;
                st[i] += b;
                total_v += v;
                v_count += 1;
            }
        }
        if v_count == 0 && !design.curves.is_empty() {
            constant_outputs.push(name.clone());
        }
        let indices = (0..d)
            .map(|j| {
                let c = counts[j].max(1) as f64;
                SobolIndex { input: input_names[j].clone(), s1: s1[j] / c, st: st[j] / c }
            })
            .collect();
        result.outputs.push(OutputIndices {
            output: name.clone(),
            indices,
            total_variance: if v_count > 0 { total_v / v_count as f64 } else { 0.0 },
        });
    }
    for name in constant_outputs {
        result.warnings.push(format!("output `{name}` is constant over the input ranges; indices reported as 0"));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsaOptions {
    pub samples_per_curve: usize,
    pub interference: usize,
    pub seed: u64,
    pub resamples: usize,
}

impl Default for GsaOptions {
    fn default() -> Self {
        GsaOptions { samples_per_curve: EfastConfig::DEFAULT_N, interference: EfastConfig::DEFAULT_M, seed: 0, resamples: 1 }
    }
}

/// GSA of a trained model with each encoded input uniform over its observed
/// range on `split`. Classification analyzes the positive-class probability
/// (two classes) or every class probability.
pub fn run_gsa(model: &TrainedModel, data: &Encoded, split: Split, options: &GsaOptions) -> Result<SobolResult> {
    if data.inputs.column_names != model.fingerprint.inputs {
        return Err(Error::FingerprintMismatch("data encoding does not match the model".into()));
    }
    let pos = data.positions(split);
    if pos.is_empty() {
        return Err(Error::Empty(format!("the {} split is empty", split.as_str())));
    }
    let x = data.inputs.select_rows(&pos);
    let bounds: Vec<(f64, f64)> = (0..x.n_cols())
        .map(|j| {
            let c = x.values.column(j);
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let names = &model.fingerprint.outputs;
    let outputs: Vec<(usize, String)> = match model.task() {
        Task::Classification if names.len() == 2 => vec![(1, names[1].clone())],
        _ => names.iter().cloned().enumerate().collect(),
    };
    let config = EfastConfig {
        samples_per_curve: options.samples_per_curve,
        interference: options.interference,
        seed: options.seed,
        bounds,
        resamples: options.resamples,
    };
    let mut result = efast_analyze(model, &model.fingerprint.inputs, &outputs, &config)?;
    let corr = correlation_check(&x, DEFAULT_CORRELATION_THRESHOLD);
    result.warnings.extend(corr.warnings());
    Ok(result)
}
