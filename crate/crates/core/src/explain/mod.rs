//! Per-sample local explanations over source features: a one-hot block counts
//! as a single feature for both LIME and SHAP.

mod lime;
mod payload;
mod shap;

pub use lime::{lime_attributions, lime_explain, LimeConfig, LimeOutcome, QuartileBins};
pub use payload::{explanation_payload, CellValue, ExplanationPayload, FeatureEntry, FeatureValue, LocalExplanation, Method};
pub use shap::{shap_attributions, shap_explain, ShapConfig, ShapOutcome};

use crate::data::{ColumnGroup, Encoded, Split, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{BatchPredict, TrainedModel};

/// What an explainer needs: a predictor, how encoded columns group into
/// features, reference rows and the instance.
pub struct Problem<'a> {
    pub model: &'a dyn BatchPredict,
    pub groups: &'a [ColumnGroup],
    /// Training rows: LIME bin statistics and the SHAP background pool.
    pub reference: &'a Matrix,
    pub instance: &'a [f64],
    /// Output column being explained.
    pub target: usize,
}

impl Problem<'_> {
    pub(crate) fn check(&self) -> Result<()> {
        let width = self.groups.iter().map(|g| g.len).sum::<usize>();
        if width != self.instance.len() || self.reference.cols() != width {
            return Err(Error::InvalidInput("feature groups do not cover the input columns".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::InvalidInput("nothing to explain: no input features".into()));
        }
        if self.target >= self.model.n_outputs() {
            return Err(Error::InvalidInput(format!("output column {} does not exist", self.target)));
        }
        Ok(())
    }
}

/// Resolved sample and target shared by both explainers.
pub(crate) struct Subject {
    pub instance: Vec<f64>,
    pub reference: Matrix,
    pub target: usize,
    pub target_name: String,
    pub outputs: Vec<f64>,
    pub ground_truth: f64,
}

/// Picks the `sample_index`-th row of `split`; the target defaults to the
/// predicted class for classification and the first output for regression.
pub(crate) fn subject(
    model: &TrainedModel,
    data: &Encoded,
    split: Split,
    sample_index: usize,
    target: Option<&str>,
) -> Result<Subject> {
    if data.inputs.column_names != model.fingerprint.inputs {
        return Err(Error::FingerprintMismatch("data encoding does not match the model".into()));
    }
    let pos = data.positions(split);
    let &row = pos.get(sample_index).ok_or_else(|| {
        Error::NotFound(format!("sample {sample_index} is not in the {} split ({} rows)", split.as_str(), pos.len()))
    })?;
    let train = data.positions(Split::Train);
    if train.is_empty() {
        return Err(Error::Empty("the train split is empty".into()));
    }
    let instance = data.inputs.values.row(row).to_vec();
    let outputs = model.predict_batch(&Matrix::from_vec(1, instance.len(), instance.clone())?).row(0).to_vec();
    let names = &model.fingerprint.outputs;
    let target = match (target, model.task()) {
        (Some(t), _) => names
            .iter()
            .position(|n| n == t || n.split_once('=').is_some_and(|(_, c)| c == t))
            .ok_or_else(|| Error::UnknownFeature(t.to_string()))?,
        (None, Task::Regression) => 0,
        (None, Task::Classification) => argmax(&outputs),
    };
    Ok(Subject {
        reference: data.inputs.values.select_rows(&train),
        target,
        target_name: names[target].clone(),
        ground_truth: data.outputs.values.get(row, target),
        instance,
        outputs,
    })
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
