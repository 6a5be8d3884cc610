use serde::{Deserialize, Serialize};

use super::encode::EncodedMatrix;

pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPair {
    pub a: String,
    pub b: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub threshold: f64,
    pub pairs: Vec<CorrelatedPair>,
    /// Columns with zero variance, excluded from the pairwise check.
    pub constant_columns: Vec<String>,
}

impl CorrelationReport {
    pub fn warnings(&self) -> Vec<String> {
        self.pairs
            .iter()
            .map(|p| {
                format!(
                    "inputs `{}` and `{}` are strongly correlated (r = {:.3}); their sensitivity is split between them",
                    p.a, p.b, p.r
                )
            })
            .collect()
    }
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Reports every column pair with |r| >= threshold. Advisory only.
pub fn correlation_check(inputs: &EncodedMatrix, threshold: f64) -> CorrelationReport {
    let mut report = CorrelationReport { threshold, ..Default::default() };
    if inputs.n_rows() < 2 {
        return report;
    }
    let cols: Vec<Vec<f64>> = (0..inputs.n_cols()).map(|j| inputs.values.column(j)).collect();
    let constant: Vec<bool> = cols.iter().map(|c| c.iter().all(|v| *v == c[0])).collect();
    for (j, c) in constant.iter().enumerate() {
        if *c {
            report.constant_columns.push(inputs.column_names[j].clone());
        }
    }
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            if constant[a] || constant[b] {
                continue;
            }
            if let Some(r) = pearson(&cols[a], &cols[b]) {
                if r.abs() >= threshold {
                    report.pairs.push(CorrelatedPair {
                        a: inputs.column_names[a].clone(),
                        b: inputs.column_names[b].clone(),
                        r,
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::rng;
    use rand::Rng;

    fn enc(cols: &[Vec<f64>]) -> EncodedMatrix {
        let n = cols[0].len();
        let mut data = Vec::new();
        for i in 0..n {
            data.extend(cols.iter().map(|c| c[i]));
        }
        let names = (0..cols.len()).map(|j| format!("c{j}")).collect();
        EncodedMatrix::from_numeric(names, Matrix::from_vec(n, cols.len(), data).unwrap()).unwrap()
    }

    #[test]
    fn linear_pair_reported() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = correlation_check(&enc(&[x, y]), DEFAULT_CORRELATION_THRESHOLD);
        assert_eq!(r.pairs.len(), 1);
        assert!((r.pairs[0].r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_hot_pair_is_minus_one() {
        let a: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
        let r = correlation_check(&enc(&[a, b]), 0.9);
        assert!((r.pairs[0].r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_uniforms_clean() {
        let mut g = rng::seeded(11);
        let a: Vec<f64> = (0..10_000).map(|_| g.random()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| g.random()).collect();
        assert!(pearson(&a, &b).unwrap().abs() < 0.1);
        assert!(correlation_check(&enc(&[a, b]), 0.9).pairs.is_empty());
    }

    #[test]
    fn constant_columns_skipped() {
        let r = correlation_check(&enc(&[vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]]), 0.9);
        assert_eq!(r.constant_columns, vec!["c0"]);
        assert!(r.pairs.is_empty());
    }
}
