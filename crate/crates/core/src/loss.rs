//! Scalar error metrics for model evaluation.
//!
//! Regression kinds compare real predictions with real targets element-wise.
//! Classification kinds take a probability matrix (one column per class) and
//! one-hot targets; `Nll` takes log-probabilities instead. Margin losses work on
//! the decision value `f = 2p - 1` of the positive class with labels in {-1, +1}
//! and are defined for binary tasks only.
//!
//! Every kind is mean-reduced. For several output columns the per-sample value
//! is averaged over columns first, then over samples. `Rmse` and `Rmsle` are the
//! exact square roots of `Mse` and `Msle`.

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    Mse,
    Rmse,
    Msle,
    Rmsle,
    LogCosh,
    Hinge,
    SmoothedHinge,
    SquaredHinge,
    ModifiedHuber,
    Ramp,
    CrossEntropy,
    BinaryCrossEntropy,
    Nll,
}

impl LossKind {
    pub const ALL: [LossKind; 14] = [
        LossKind::Mae,
        LossKind::Mse,
        LossKind::Rmse,
        LossKind::Msle,
        LossKind::Rmsle,
        LossKind::LogCosh,
        LossKind::Hinge,
        LossKind::SmoothedHinge,
        LossKind::SquaredHinge,
        LossKind::ModifiedHuber,
        LossKind::Ramp,
        LossKind::CrossEntropy,
        LossKind::BinaryCrossEntropy,
        LossKind::Nll,
    ];

    pub fn task(self) -> Task {
        use LossKind::*;
        match self {
            Mae | Mse | Rmse | Msle | Rmsle | LogCosh => Task::Regression,
            _ => Task::Classification,
        }
    }

    pub fn is_margin(self) -> bool {
        use LossKind::*;
        matches!(self, Hinge | SmoothedHinge | SquaredHinge | ModifiedHuber | Ramp)
    }

    pub fn name(self) -> String {
        serde_json::to_value(self).unwrap().as_str().unwrap().to_string()
    }

    pub fn parse(s: &str) -> Result<LossKind> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidInput(format!("unknown loss `{s}`")))
    }
}

/// ln cosh(z) without overflow.
#[inline]
pub fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + ((1.0 + (-2.0 * a).exp()) / 2.0).ln()
}

#[inline]
fn margin_term(kind: LossKind, yf: f64) -> f64 {
    match kind {
        LossKind::Hinge => (1.0 - yf).max(0.0),
        LossKind::SquaredHinge => (1.0 - yf).max(0.0).powi(2),
        LossKind::SmoothedHinge => {
            if yf >= 1.0 {
                0.0
            } else if yf >= 0.0 {
                (1.0 - yf).powi(2) / 2.0
            } else {
                0.5 - yf
            }
        }
        LossKind::ModifiedHuber => {
            if yf >= -1.0 {
                (1.0 - yf).max(0.0).powi(2)
            } else {
                -4.0 * yf
            }
        }
        LossKind::Ramp => (1.0 - yf).clamp(0.0, 2.0),
        _ => unreachable!(),
    }
}

fn check_shapes(p: &Matrix, t: &Matrix) -> Result<()> {
    if p.rows() != t.rows() || p.cols() != t.cols() {
        return Err(Error::InvalidInput(format!(
            "prediction shape {}x{} differs from target shape {}x{}",
            p.rows(),
            p.cols(),
            t.rows(),
            t.cols()
        )));
    }
    if p.rows() == 0 || p.cols() == 0 {
        return Err(Error::Empty("loss needs at least one sample".into()));
    }
    Ok(())
}

fn true_class(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Positive-class probability and 0/1 label of a binary row.
fn binary_parts(p: &[f64], t: &[f64]) -> (f64, f64) {
    let last = p.len() - 1;
    (p[last], t[last])
}

pub fn compute_loss(kind: LossKind, predictions: &Matrix, targets: &Matrix) -> Result<f64> {
    check_shapes(predictions, targets)?;
    let n = predictions.rows();
    let k = predictions.cols();
    let rows = predictions.iter_rows().zip(targets.iter_rows());
    use LossKind::*;
    let mean = match kind {
        Mae | Mse | Rmse | LogCosh => {
            let f = |d: f64| match kind {
                Mae => d.abs(),
                LogCosh => log_cosh(d),
                _ => d * d,
            };
            let total: f64 = rows.map(|(p, t)| p.iter().zip(t).map(|(a, b)| f(a - b)).sum::<f64>() / k as f64).sum();
            total / n as f64
        }
        Msle | Rmsle => {
            if predictions.as_slice().iter().chain(targets.as_slice()).any(|v| *v <= -1.0) {
                return Err(Error::Domain("logarithmic error needs values greater than -1".into()));
            }
            let total: f64 = rows
                .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a.ln_1p() - b.ln_1p()).powi(2)).sum::<f64>() / k as f64)
                .sum();
            total / n as f64
        }
        CrossEntropy | BinaryCrossEntropy => {
            if predictions.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Domain("cross entropy needs probabilities in [0, 1]".into()));
            }
            let clamp = |p: f64| p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            let total: f64 = if kind == CrossEntropy {
                rows.map(|(p, t)| -clamp(p[true_class(t)]).ln()).sum()
            } else if k <= 2 {
                rows.map(|(p, t)| {
                    let (p, t) = binary_parts(p, t);
                    let p = clamp(p);
                    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                })
                .sum()
            } else {
                rows.map(|(p, t)| {
                    p.iter()
                        .zip(t)
                        .map(|(&p, &t)| {
                            let p = clamp(p);
                            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                        })
                        .sum::<f64>()
                        / k as f64
                })
                .sum()
            };
            total / n as f64
        }
        Nll => {
            if predictions.as_slice().iter().any(|v| *v > 0.0 || v.is_nan()) {
                return Err(Error::Domain("negative log-likelihood needs log-probabilities".into()));
            }
            let total: f64 = rows.map(|(p, t)| -p[true_class(t)]).sum();
            total / n as f64
        }
        Hinge | SmoothedHinge | SquaredHinge | ModifiedHuber | Ramp => {
            if k > 2 {
                return Err(Error::InvalidInput(format!("{} is defined for binary tasks only", kind.name())));
            }
            let total: f64 = rows
                .map(|(p, t)| {
                    let (p, t) = binary_parts(p, t);
                    let f = 2.0 * p - 1.0;
                    let y = if t > 0.5 { 1.0 } else { -1.0 };
                    margin_term(kind, y * f)
                })
                .sum();
            total / n as f64
        }
    };
    Ok(match kind {
        Rmse | Rmsle => mean.sqrt(),
        _ => mean,
    })
}

/// Element-wise natural log of probabilities, clamped away from zero.
pub fn log_probabilities(p: &Matrix) -> Matrix {
    let mut out = p.clone();
    for v in out.as_mut_slice() {
        *v = v.max(PROB_EPS).ln();
    }
    out
}
