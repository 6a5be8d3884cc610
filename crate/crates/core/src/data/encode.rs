use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pca::Pca;
use super::table::{format_number, Column, DataTable, FeatureKind, FeatureSpec, Role, Split, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Numeric,
    OneHot,
}

/// Encoded columns that originate from one source feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub feature: String,
    pub kind: GroupKind,
    pub start: usize,
    pub len: usize,
    #[serde(default)]
    pub categories: Vec<String>,
}

impl ColumnGroup {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub column_names: Vec<String>,
    pub values: Matrix,
    pub groups: Vec<ColumnGroup>,
    /// Encoded column index -> index into `groups`.
    pub group_of: Vec<usize>,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            column_names: self.column_names.clone(),
            values: self.values.select_rows(rows),
            groups: self.groups.clone(),
            group_of: self.group_of.clone(),
        }
    }

    pub fn with_values(&self, values: Matrix) -> EncodedMatrix {
        EncodedMatrix { values, ..self.clone() }
    }

    /// One numeric group per column; for data that did not come from a table.
    pub fn from_numeric(names: Vec<String>, values: Matrix) -> Result<EncodedMatrix> {
        if names.len() != values.cols() {
            return Err(Error::InvalidInput("column names and matrix width differ".into()));
        }
        let groups = names
            .iter()
            .enumerate()
            .map(|(j, n)| ColumnGroup { feature: n.clone(), kind: GroupKind::Numeric, start: j, len: 1, categories: vec![] })
            .collect();
        Ok(EncodedMatrix { group_of: (0..names.len()).collect(), column_names: names, values, groups })
    }
}

/// How a table is turned into model matrices. Stored with every trained model
/// so new data can be encoded identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingRecipe {
    pub task: Task,
    pub inputs: Vec<FeatureSpec>,
    pub outputs: Vec<FeatureSpec>,
    #[serde(default)]
    pub pca: Option<Pca>,
}

impl EncodingRecipe {
    /// Builds a recipe from the table's current roles. For classification the
    /// single output must be categorical; numeric label columns are read as
    /// categories in ascending order.
    pub fn from_table(table: &DataTable, task: Task) -> Result<EncodingRecipe> {
        let inputs: Vec<FeatureSpec> = table.schema().iter().filter(|f| f.role == Role::Input).cloned().collect();
        let mut outputs: Vec<FeatureSpec> = table.schema().iter().filter(|f| f.role == Role::Output).cloned().collect();
        if inputs.is_empty() {
            return Err(Error::InvalidInput("no input feature selected".into()));
        }
        if outputs.is_empty() {
            return Err(Error::InvalidInput("no output feature selected".into()));
        }
        match task {
            Task::Regression => {
                if let Some(f) = outputs.iter().find(|f| f.kind == FeatureKind::Categorical) {
                    return Err(Error::InvalidInput(format!(
                        "regression output `{}` is categorical",
                        f.name
                    )));
                }
            }
            Task::Classification => {
                if outputs.len() != 1 {
                    return Err(Error::InvalidInput("classification takes exactly one output feature".into()));
                }
                if outputs[0].kind == FeatureKind::Numeric {
                    let mut t = table.clone();
                    t.numeric_to_categorical(&outputs[0].name)?;
                    outputs[0] = t.feature(&outputs[0].name)?.0.clone();
                }
            }
        }
        Ok(EncodingRecipe { task, inputs, outputs, pca: None })
    }

    /// Stable digest of the feature layout, used in model fingerprints.
    pub fn schema_hash(&self) -> String {
        let body = serde_json::to_vec(&(self.task, &self.inputs, &self.outputs, &self.pca)).unwrap();
        hex::encode(Sha256::digest(&body))
    }

    pub fn input_column_names(&self) -> Vec<String> {
        if let Some(p) = &self.pca {
            return p.component_names();
        }
        column_names(&self.inputs)
    }

    pub fn output_column_names(&self) -> Vec<String> {
        column_names(&self.outputs)
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self.task {
            Task::Classification => Some(self.outputs[0].categories.len()),
            Task::Regression => None,
        }
    }
}

fn column_names(specs: &[FeatureSpec]) -> Vec<String> {
    let mut names = Vec::new();
    for f in specs {
        match f.kind {
            FeatureKind::Numeric => names.push(f.name.clone()),
            FeatureKind::Categorical => names.extend(f.categories.iter().map(|c| format!("{}={}", f.name, c))),
        }
    }
    names
}

fn layout(specs: &[FeatureSpec]) -> (Vec<ColumnGroup>, Vec<usize>) {
    let mut groups = Vec::new();
    let mut group_of = Vec::new();
    let mut start = 0;
    for (g, f) in specs.iter().enumerate() {
        let (kind, len) = match f.kind {
            FeatureKind::Numeric => (GroupKind::Numeric, 1),
            FeatureKind::Categorical => (GroupKind::OneHot, f.categories.len()),
        };
        groups.push(ColumnGroup { feature: f.name.clone(), kind, start, len, categories: f.categories.clone() });
        group_of.extend(std::iter::repeat_n(g, len));
        start += len;
    }
    (groups, group_of)
}

/// Source of a cell value for one recipe feature, resolved against a table.
enum Accessor<'a> {
    Numeric(&'a [Option<f64>]),
    /// Table category index -> recipe category index (None: unseen label).
    Categorical(&'a [Option<u32>], Vec<Option<usize>>),
    /// Numeric table column read as category labels.
    NumericLabels(&'a [Option<f64>], &'a [String]),
}

impl Accessor<'_> {
    fn missing(&self, r: usize) -> bool {
        match self {
            Accessor::Numeric(v) | Accessor::NumericLabels(v, _) => v[r].is_none(),
            Accessor::Categorical(v, _) => v[r].is_none(),
        }
    }

    fn write(&self, r: usize, out: &mut Vec<f64>, name: &str, width: usize) -> Result<()> {
        match self {
            Accessor::Numeric(v) => out.push(v[r].unwrap()),
            Accessor::Categorical(v, map) => {
                let code = v[r].unwrap() as usize;
                let k = map[code].ok_or_else(|| Error::InvalidInput(format!("unseen category in `{name}`")))?;
                out.extend((0..width).map(|i| if i == k { 1.0 } else { 0.0 }));
            }
            Accessor::NumericLabels(v, cats) => {
                let label = format_number(v[r].unwrap());
                let k = cats
                    .iter()
                    .position(|c| *c == label)
                    .ok_or_else(|| Error::InvalidInput(format!("unseen category `{label}` in `{name}`")))?;
                out.extend((0..width).map(|i| if i == k { 1.0 } else { 0.0 }));
            }
        }
        Ok(())
    }
}

fn accessor<'a>(table: &'a DataTable, spec: &'a FeatureSpec) -> Result<Accessor<'a>> {
    let (tspec, col) = table.feature(&spec.name)?;
    match (spec.kind, col) {
        (FeatureKind::Numeric, Column::Numeric(v)) => Ok(Accessor::Numeric(v)),
        (FeatureKind::Categorical, Column::Categorical(v)) => {
            let map = tspec.categories.iter().map(|c| spec.category_index(c)).collect();
            Ok(Accessor::Categorical(v, map))
        }
        (FeatureKind::Categorical, Column::Numeric(v)) => Ok(Accessor::NumericLabels(v, &spec.categories)),
        (FeatureKind::Numeric, Column::Categorical(_)) => {
            Err(Error::InvalidInput(format!("feature `{}` is not numeric in this table", spec.name)))
        }
    }
}

/// Result of encoding a table: aligned input/output matrices over the rows
/// that have every selected value present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoded {
    pub inputs: EncodedMatrix,
    pub outputs: EncodedMatrix,
    /// Original table row of each encoded row.
    pub rows: Vec<usize>,
    pub split: Vec<Split>,
    /// Rows dropped for missing values.
    pub dropped: usize,
}

impl Encoded {
    /// Encoded-row positions belonging to a partition.
    pub fn positions(&self, split: Split) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn part(&self, split: Split) -> (EncodedMatrix, EncodedMatrix) {
        let p = self.positions(split);
        (self.inputs.select_rows(&p), self.outputs.select_rows(&p))
    }
}

/// One-hot encodes the recipe's features. Rows with a missing selected value
/// are dropped first and counted.
pub fn encode(table: &DataTable, recipe: &EncodingRecipe) -> Result<Encoded> {
    let in_acc: Vec<_> = recipe.inputs.iter().map(|f| accessor(table, f)).collect::<Result<_>>()?;
    let out_acc: Vec<_> = recipe.outputs.iter().map(|f| accessor(table, f)).collect::<Result<_>>()?;
    let (in_groups, in_group_of) = layout(&recipe.inputs);
    let (out_groups, out_group_of) = layout(&recipe.outputs);
    let in_width = in_group_of.len();
    let out_width = out_group_of.len();

    let mut rows = Vec::new();
    let mut split = Vec::new();
    let mut xin = Vec::new();
    let mut xout = Vec::new();
    let mut dropped = 0;
    for r in 0..table.n_rows() {
        if in_acc.iter().chain(&out_acc).any(|a| a.missing(r)) {
            dropped += 1;
            continue;
        }
        for ((a, f), g) in in_acc.iter().zip(&recipe.inputs).zip(&in_groups) {
            a.write(r, &mut xin, &f.name, g.len)?;
        }
        for ((a, f), g) in out_acc.iter().zip(&recipe.outputs).zip(&out_groups) {
            a.write(r, &mut xout, &f.name, g.len)?;
        }
        rows.push(r);
        split.push(table.split_assignment()[r]);
    }
    if rows.is_empty() && table.n_rows() > 0 {
        return Err(Error::Empty(format!("all {dropped} rows have missing selected values")));
    }
    let n = rows.len();
    let mut inputs = EncodedMatrix {
        column_names: column_names(&recipe.inputs),
        values: Matrix::from_vec(n, in_width, xin)?,
        groups: in_groups,
        group_of: in_group_of,
    };
    if let Some(pca) = &recipe.pca {
        inputs = pca.transform_encoded(&inputs)?;
    }
    let outputs = EncodedMatrix {
        column_names: column_names(&recipe.outputs),
        values: Matrix::from_vec(n, out_width, xout)?,
        groups: out_groups,
        group_of: out_group_of,
    };
    Ok(Encoded { inputs, outputs, rows, split, dropped })
}
