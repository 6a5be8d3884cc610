use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Input,
    Output,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// Which partition a loaded file belongs to. `All` marks a single file that is
/// split randomly later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleHint {
    All,
    Train,
    Validation,
    Test,
}

impl RoleHint {
    pub fn parse(s: &str) -> Result<RoleHint> {
        match s {
            "all" => Ok(RoleHint::All),
            other => Split::parse(other).map(|s| match s {
                Split::Train => RoleHint::Train,
                Split::Validation => RoleHint::Validation,
                Split::Test => RoleHint::Test,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    SingleFileSplit,
    SeparateFiles,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub role: Role,
    /// Ordered category labels; empty for numeric features.
    #[serde(default)]
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Numeric, role: Role::Ignored, categories: Vec::new() }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Categorical, role: Role::Ignored, categories }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureKind::Numeric if !self.categories.is_empty() => {
                Err(Error::InvalidInput(format!("numeric feature `{}` lists categories", self.name)))
            }
            FeatureKind::Categorical if self.categories.is_empty() => {
                Err(Error::InvalidInput(format!("categorical feature `{}` has no categories", self.name)))
            }
            _ => Ok(()),
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

/// Per-feature values. `None` is a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<u32>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Categorical(v) => v[row].is_none(),
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Column-typed table with per-row split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub(crate) schema: Vec<FeatureSpec>,
    pub(crate) columns: Vec<Column>,
    pub(crate) split: Vec<Split>,
    pub(crate) source: Source,
}

impl DataTable {
    pub fn new(schema: Vec<FeatureSpec>, columns: Vec<Column>, split: Vec<Split>, source: Source) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::InvalidInput("schema and column counts differ".into()));
        }
        let mut names = HashSet::new();
        for (spec, col) in schema.iter().zip(&columns) {
            spec.validate()?;
            if !names.insert(spec.name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate feature name `{}`", spec.name)));
            }
            if col.len() != split.len() {
                return Err(Error::InvalidInput(format!("column `{}` has wrong length", spec.name)));
            }
            let kind_ok = matches!(
                (spec.kind, col),
                (FeatureKind::Numeric, Column::Numeric(_)) | (FeatureKind::Categorical, Column::Categorical(_))
            );
            if !kind_ok {
                return Err(Error::InvalidInput(format!("column `{}` does not match its kind", spec.name)));
            }
        }
        Ok(DataTable { schema, columns, split, source })
    }

    pub fn n_rows(&self) -> usize {
        self.split.len()
    }

    pub fn schema(&self) -> &[FeatureSpec] {
        &self.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn split_assignment(&self) -> &[Split] {
        &self.split
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn feature(&self, name: &str) -> Result<(&FeatureSpec, &Column)> {
        let i = self.feature_index(name)?;
        Ok((&self.schema[i], &self.columns[i]))
    }

    pub fn rows_in(&self, split: Split) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.split[r] == split).collect()
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for s in &self.split {
            out[*s as usize] += 1;
        }
        out
    }

    /// Assigns input/output roles; all other features become ignored.
    pub fn set_roles(&mut self, inputs: &[String], outputs: &[String]) -> Result<()> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::InvalidInput("at least one input and one output feature are required".into()));
        }
        for name in inputs.iter().chain(outputs) {
            self.feature_index(name)?;
        }
        if let Some(both) = inputs.iter().find(|n| outputs.contains(n)) {
            return Err(Error::InvalidInput(format!("feature `{both}` is both input and output")));
        }
        for spec in &mut self.schema {
            spec.role = if inputs.contains(&spec.name) {
                Role::Input
            } else if outputs.contains(&spec.name) {
                Role::Output
            } else {
                Role::Ignored
            };
        }
        Ok(())
    }

    pub fn names_with_role(&self, role: Role) -> Vec<String> {
        self.schema.iter().filter(|f| f.role == role).map(|f| f.name.clone()).collect()
    }

    /// Reinterprets a numeric column as categorical, one category per distinct
    /// value in ascending numeric order. Used for class labels stored as numbers.
    pub fn numeric_to_categorical(&mut self, name: &str) -> Result<()> {
        let i = self.feature_index(name)?;
        let Column::Numeric(values) = &self.columns[i] else {
            return Ok(());
        };
        let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let codes = values
            .iter()
            .map(|v| v.map(|x| distinct.iter().position(|d| *d == x).unwrap() as u32))
            .collect();
        let role = self.schema[i].role;
        self.schema[i] = FeatureSpec::categorical(name, distinct.iter().map(|d| format_number(*d)).collect());
        self.schema[i].role = role;
        self.columns[i] = Column::Categorical(codes);
        Ok(())
    }

    /// Returns a new table holding the listed rows (duplicates allowed).
    pub fn take_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            split: rows.iter().map(|&r| self.split[r]).collect(),
            source: self.source,
        }
    }

    /// Cell as text, the way it would be written back to CSV.
    pub fn cell_text(&self, feature: usize, row: usize) -> Option<String> {
        match &self.columns[feature] {
            Column::Numeric(v) => v[row].map(format_number),
            Column::Categorical(v) => v[row].map(|c| self.schema[feature].categories[c as usize].clone()),
        }
    }
}

pub(crate) fn format_number(x: f64) -> String {
    format!("{x}")
}
