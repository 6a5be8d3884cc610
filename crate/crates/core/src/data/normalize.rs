use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    #[default]
    None,
    MinMax,
    MeanStd,
}

impl NormMethod {
    pub fn parse(s: &str) -> Result<NormMethod> {
        match s {
            "none" => Ok(NormMethod::None),
            "min_max" => Ok(NormMethod::MinMax),
            "mean_std" => Ok(NormMethod::MeanStd),
            other => Err(Error::InvalidInput(format!("unknown normalization `{other}`"))),
        }
    }
}

/// Affine map `x' = (x - shift) / scale`. A zero scale marks a constant
/// column: it maps to 0 and inverts back to `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub shift: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub method: NormMethod,
    pub columns: Vec<ColumnStats>,
}

impl NormalizationParams {
    pub fn identity(width: usize) -> Self {
        NormalizationParams { method: NormMethod::None, columns: vec![ColumnStats { shift: 0.0, scale: 1.0 }; width] }
    }

    /// Fits per-column statistics. Pass train rows only.
    pub fn fit(train: &Matrix, method: NormMethod) -> Self {
        let cols = (0..train.cols())
            .map(|j| {
                let col = train.column(j);
                match method {
                    NormMethod::None => ColumnStats { shift: 0.0, scale: 1.0 },
                    NormMethod::MinMax => {
                        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        if col.is_empty() {
                            ColumnStats { shift: 0.0, scale: 1.0 }
                        } else {
                            ColumnStats { shift: lo, scale: hi - lo }
                        }
                    }
                    NormMethod::MeanStd => {
                        if col.is_empty() {
                            return ColumnStats { shift: 0.0, scale: 1.0 };
                        }
                        let n = col.len() as f64;
                        let mean = col.iter().sum::<f64>() / n;
                        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                        // a column of identical values can leave a rounding residue
                        let std = if col.iter().all(|v| *v == col[0]) { 0.0 } else { var.sqrt() };
                        ColumnStats { shift: mean, scale: std }
                    }
                }
            })
            .collect();
        NormalizationParams { method, columns: cols }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn apply_value(&self, j: usize, x: f64) -> f64 {
        let s = self.columns[j];
        if s.scale == 0.0 {
            0.0
        } else {
            (x - s.shift) / s.scale
        }
    }

    #[inline]
    pub fn invert_value(&self, j: usize, z: f64) -> f64 {
        let s = self.columns[j];
        if s.scale == 0.0 {
            s.shift
        } else {
            z * s.scale + s.shift
        }
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, (o, x)) in out.iter_mut().zip(row).enumerate() {
            *o = self.apply_value(j, *x);
        }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..m.rows() {
            self.apply_row(m.row(i), out.row_mut(i));
        }
        out
    }

    pub fn invert(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.set(i, j, self.invert_value(j, m.get(i, j)));
            }
        }
        out
    }
}
