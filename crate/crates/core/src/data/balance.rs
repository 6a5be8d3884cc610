use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::table::{format_number, Column, DataTable, Split};
use crate::error::{Error, Result};
use crate::rng;

/// How a feature's values are grouped for counting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "bins")]
pub enum Binning {
    /// Categories as stored; numeric columns by distinct value.
    Categorical,
    /// Equal-width bins over the observed range of a numeric column.
    EqualWidth(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub label: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBalance {
    pub feature: String,
    pub categories: Vec<CategoryCount>,
    /// Largest count over smallest nonzero count.
    pub imbalance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub features: Vec<FeatureBalance>,
}

/// Per-row bin keys for one feature; missing cells get `None`.
fn bin_keys(table: &DataTable, feature: &str, binning: Binning, rows: &[usize]) -> Result<(Vec<String>, Vec<Option<usize>>)> {
    let (spec, col) = table.feature(feature)?;
    match (col, binning) {
        (Column::Categorical(v), _) => Ok((spec.categories.clone(), rows.iter().map(|&r| v[r].map(|c| c as usize)).collect())),
        (Column::Numeric(v), Binning::Categorical) => {
            let mut distinct: Vec<f64> = rows.iter().filter_map(|&r| v[r]).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let keys = rows.iter().map(|&r| v[r].map(|x| distinct.partition_point(|d| *d < x))).collect();
            Ok((distinct.into_iter().map(format_number).collect(), keys))
        }
        (Column::Numeric(v), Binning::EqualWidth(k)) => {
            if k == 0 {
                return Err(Error::InvalidInput("bin count must be positive".into()));
            }
            let present: Vec<f64> = rows.iter().filter_map(|&r| v[r]).collect();
            let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = (hi - lo) / k as f64;
            let labels = (0..k)
                .map(|b| format!("[{}, {}{}", lo + width * b as f64, lo + width * (b + 1) as f64, if b + 1 == k { "]" } else { ")" }))
                .collect();
            let keys = rows
                .iter()
                .map(|&r| {
                    v[r].map(|x| if width > 0.0 { (((x - lo) / width) as usize).min(k - 1) } else { 0 })
                })
                .collect();
            Ok((labels, keys))
        }
    }
}

fn require_binning(table: &DataTable, feature: &str, binning: Option<Binning>) -> Result<Binning> {
    let (_, col) = table.feature(feature)?;
    match (col, binning) {
        (_, Some(b)) => Ok(b),
        (Column::Categorical(_), None) => Ok(Binning::Categorical),
        (Column::Numeric(_), None) => Err(Error::InvalidInput(format!(
            "feature `{feature}` is continuous; balancing needs an explicit binning"
        ))),
    }
}

/// Counts per category (or bin) of each listed feature over all rows.
pub fn balance_report(table: &DataTable, features: &[(String, Option<Binning>)]) -> Result<BalanceReport> {
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    let mut out = Vec::new();
    for (name, binning) in features {
        let binning = require_binning(table, name, *binning)?;
        let (labels, keys) = bin_keys(table, name, binning, &rows)?;
        let mut counts = vec![0usize; labels.len()];
        for k in keys.iter().flatten() {
            counts[*k] += 1;
        }
        let total: usize = counts.iter().sum();
        let max = counts.iter().copied().max().unwrap_or(0);
        let min = counts.iter().copied().filter(|c| *c > 0).min().unwrap_or(0);
        out.push(FeatureBalance {
            feature: name.clone(),
            categories: labels
                .into_iter()
                .zip(&counts)
                .map(|(label, &count)| CategoryCount {
                    label,
                    count,
                    fraction: if total > 0 { count as f64 / total as f64 } else { 0.0 },
                })
                .collect(),
            imbalance_ratio: if min > 0 { max as f64 / min as f64 } else { 0.0 },
        });
    }
    Ok(BalanceReport { features: out })
}

/// Random oversampling of the train split until every observed combination
/// of the target features' categories has the same count. Other splits are
/// untouched; duplicated rows are appended.
pub fn apply_balancing(table: &DataTable, targets: &[(String, Option<Binning>)], seed: u64) -> Result<DataTable> {
    if targets.is_empty() {
        return Ok(table.clone());
    }
    let train = table.rows_in(Split::Train);
    let mut per_target = Vec::new();
    for (name, binning) in targets {
        let b = require_binning(table, name, *binning)?;
        per_target.push(bin_keys(table, name, b, &train)?.1);
    }
    let mut buckets: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    'rows: for (i, &r) in train.iter().enumerate() {
        let mut key = Vec::with_capacity(per_target.len());
        for keys in &per_target {
            match keys[i] {
                Some(k) => key.push(k),
                None => continue 'rows,
            }
        }
        buckets.entry(key).or_default().push(r);
    }
    let target = buckets.values().map(Vec::len).max().unwrap_or(0);
    let mut g = rng::seeded(seed);
    let mut extra = Vec::new();
    for members in buckets.values() {
        for _ in members.len()..target {
            extra.push(members[g.random_range(0..members.len())]);
        }
    }
    let mut all: Vec<usize> = (0..table.n_rows()).collect();
    all.extend(extra);
    Ok(table.take_rows(&all))
}
