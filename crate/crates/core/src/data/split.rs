use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::table::{DataTable, Source, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidInput("split fractions must be nonnegative".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// Partition sizes: rounded train and validation counts, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let n_train = ((n as f64 * self.train).round() as usize).min(n);
        let n_val = ((n as f64 * self.validation).round() as usize).min(n - n_train);
        (n_train, n_val, n - n_train - n_val)
    }
}

/// Randomly partitions a single-file table. Deterministic for a given seed.
pub fn split_random(table: &DataTable, fractions: SplitFractions, seed: u64) -> Result<DataTable> {
    fractions.validate()?;
    if table.source() != Source::SingleFileSplit {
        return Err(Error::Precondition("data loaded from separate files cannot be re-split".into()));
    }
    let n = table.n_rows();
    let (n_train, n_val, _) = fractions.sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut assignment = vec![Split::Test; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    let mut out = table.clone();
    out.split = assignment;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, FeatureSpec};

    fn table(n: usize) -> DataTable {
        DataTable::new(
            vec![FeatureSpec::numeric("x")],
            vec![Column::Numeric((0..n).map(|i| Some(i as f64)).collect())],
            vec![Split::Train; n],
            Source::SingleFileSplit,
        )
        .unwrap()
    }

    #[test]
    fn ten_rows_default_fractions() {
        let t = table(10);
        let s = split_random(&t, SplitFractions::default(), 42).unwrap();
        assert_eq!(s.split_sizes(), [7, 2, 1]);
        let again = split_random(&t, SplitFractions::default(), 42).unwrap();
        assert_eq!(s.split_assignment(), again.split_assignment());
    }

    #[test]
    fn all_train() {
        let f = SplitFractions { train: 1.0, validation: 0.0, test: 0.0 };
        let s = split_random(&table(13), f, 1).unwrap();
        assert_eq!(s.split_sizes(), [13, 0, 0]);
    }

    #[test]
    fn large_partition_covers_all_rows() {
        let s = split_random(&table(100_000), SplitFractions::default(), 9).unwrap();
        assert_eq!(s.split_sizes().iter().sum::<usize>(), 100_000);
    }

    #[test]
    fn invalid_fractions() {
        let f = SplitFractions { train: 0.5, validation: 0.2, test: 0.2 };
        assert!(split_random(&table(5), f, 0).is_err());
        let f = SplitFractions { train: 1.2, validation: -0.2, test: 0.0 };
        assert!(split_random(&table(5), f, 0).is_err());
    }

    #[test]
    fn separate_files_cannot_resplit() {
        let mut t = table(4);
        t.source = Source::SeparateFiles;
        assert!(matches!(split_random(&t, SplitFractions::default(), 0), Err(Error::Precondition(_))));
    }
}
