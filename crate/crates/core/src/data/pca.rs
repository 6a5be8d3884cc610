use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::encode::EncodedMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Principal axes fitted on centered train rows. All axes are kept so the
/// transform can be inverted; `retained` leading axes are used downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Row k is the k-th unit eigenvector of the covariance, by descending eigenvalue.
    pub axes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub retained: usize,
    pub source_columns: Vec<String>,
}

/// Fits PCA and keeps the fewest leading components whose cumulative
/// explained variance reaches `variance_kept`.
pub fn pca_fit(train: &EncodedMatrix, variance_kept: f64) -> Result<Pca> {
    let x = &train.values;
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidInput("pca needs at least 2 rows".into()));
    }
    if !(0.0..=1.0).contains(&variance_kept) {
        return Err(Error::InvalidInput("variance_kept must lie in [0, 1]".into()));
    }
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in x.iter_rows() {
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let axes: Vec<Vec<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();

    let total: f64 = eigenvalues.iter().sum();
    let mut retained = d;
    if total > 0.0 {
        let mut acc = 0.0;
        for (k, ev) in eigenvalues.iter().enumerate() {
            acc += ev;
            if acc / total >= variance_kept - 1e-12 {
                retained = k + 1;
                break;
            }
        }
    } else {
        retained = 1.min(d);
    }
    Ok(Pca { mean, axes, eigenvalues, retained, source_columns: train.column_names.clone() })
}

impl Pca {
    pub fn component_names(&self) -> Vec<String> {
        (1..=self.retained).map(|k| format!("pc{k}")).collect()
    }

    pub fn explained_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|e| if total > 0.0 { e / total } else { 0.0 }).collect()
    }

    fn project(&self, x: &Matrix, k: usize) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), k);
        for (i, r) in x.iter_rows().enumerate() {
            for c in 0..k {
                let v: f64 = self.axes[c].iter().zip(r).zip(&self.mean).map(|((a, v), m)| a * (v - m)).sum();
                out.set(i, c, v);
            }
        }
        out
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        self.project(x, self.retained)
    }

    pub fn transform_all(&self, x: &Matrix) -> Matrix {
        self.project(x, self.axes.len())
    }

    /// Maps component scores (any leading count) back to the source columns.
    pub fn inverse_transform(&self, scores: &Matrix) -> Matrix {
        let d = self.mean.len();
        let mut out = Matrix::zeros(scores.rows(), d);
        for (i, s) in scores.iter_rows().enumerate() {
            for j in 0..d {
                let v: f64 = s.iter().enumerate().map(|(c, sc)| sc * self.axes[c][j]).sum();
                out.set(i, j, v + self.mean[j]);
            }
        }
        out
    }

    pub fn transform_encoded(&self, m: &EncodedMatrix) -> Result<EncodedMatrix> {
        if m.column_names != self.source_columns {
            return Err(Error::FingerprintMismatch("pca was fitted on different columns".into()));
        }
        EncodedMatrix::from_numeric(self.component_names(), self.transform(&m.values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::pearson;
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn enc(rows: Vec<Vec<f64>>) -> EncodedMatrix {
        let d = rows[0].len();
        EncodedMatrix::from_numeric((0..d).map(|j| format!("x{j}")).collect(), Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn rank_one_keeps_one_component() {
        let rows = (0..50).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = pca_fit(&enc(rows), 0.99).unwrap();
        assert_eq!(p.retained, 1);
    }

    #[test]
    fn isotropic_data_keeps_all() {
        let mut g = rng::seeded(5);
        let rows: Vec<Vec<f64>> =
            (0..20_000).map(|_| (0..3).map(|_| StandardNormal.sample(&mut g)).collect()).collect();
        let m = enc(rows.clone());
        let p = pca_fit(&m, 0.99).unwrap();
        assert_eq!(p.retained, 3);
        // independent check: eigenvalues of a near-identity covariance are all ~1
        // and their sum equals the trace computed directly.
        let trace: f64 = (0..3)
            .map(|j| {
                let c = m.values.column(j);
                let mu = c.iter().sum::<f64>() / c.len() as f64;
                c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (c.len() - 1) as f64
            })
            .sum();
        assert!((p.eigenvalues.iter().sum::<f64>() - trace).abs() < 1e-9);
        for ev in &p.eigenvalues {
            assert!((ev - 1.0).abs() < 0.05, "{ev}");
        }
    }

    #[test]
    fn components_uncorrelated_and_invertible() {
        let mut g = rng::seeded(8);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let a: f64 = g.random();
                let b: f64 = g.random();
                let c: f64 = g.random();
                vec![a, a + 0.1 * b, b - a + 0.2 * c, 3.0]
            })
            .collect();
        let m = enc(rows);
        let p = pca_fit(&m, 1.0).unwrap();
        let z = p.transform_all(&m.values);
        for a in 0..3 {
            for b in a + 1..3 {
                let r = pearson(&z.column(a), &z.column(b)).unwrap();
                assert!(r.abs() < 1e-6, "{a},{b}: {r}");
            }
        }
        let back = p.inverse_transform(&z);
        for (x, y) in back.as_slice().iter().zip(m.values.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(pca_fit(&enc(vec![vec![1.0, 2.0]]), 0.99).is_err());
    }
}
