use serde::{Deserialize, Serialize};

use crate::data::{ColumnGroup, GroupKind, Split};
use crate::model::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lime,
    Shap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub name: String,
    pub attribution: f64,
    pub direction: Direction,
    /// LIME only: the instance's bin, e.g. `2 < age <= 7`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<String>,
}

impl FeatureEntry {
    pub fn new(name: String, attribution: f64, threshold: Option<String>) -> Self {
        let direction = if attribution < 0.0 { Direction::Negative } else { Direction::Positive };
        FeatureEntry { name, attribution, direction, threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellValue {
    Number(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    pub raw: CellValue,
    pub normalized: CellValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub method: Method,
    /// Position of the sample within its split.
    pub sample_index: usize,
    pub split: Split,
    /// Encoded output column explained.
    pub target: String,
    pub prediction: f64,
    pub ground_truth: f64,
    pub entries: Vec<FeatureEntry>,
    /// Classification: every class probability for the sample.
    pub probabilities: Option<Vec<(String, f64)>>,
    /// SHAP: mean prediction over the background.
    pub base_value: Option<f64>,
    /// LIME: surrogate intercept.
    pub intercept: Option<f64>,
    pub feature_values: Vec<FeatureValue>,
    pub warnings: Vec<String>,
}

/// Raw and normalized copies of the sample's feature values, one per group.
pub(crate) fn feature_values(model: &TrainedModel, groups: &[ColumnGroup], x: &[f64]) -> Vec<FeatureValue> {
    groups
        .iter()
        .map(|g| match g.kind {
            GroupKind::Numeric => {
                let raw = x[g.start];
                let normalized = model.normalization.apply_value(g.start, raw);
                FeatureValue { name: g.feature.clone(), raw: CellValue::Number(raw), normalized: CellValue::Number(normalized) }
            }
            GroupKind::OneHot => {
                let c = super::argmax(&x[g.columns()]);
                let label = CellValue::Category(g.categories.get(c).cloned().unwrap_or_default());
                FeatureValue { name: g.feature.clone(), raw: label.clone(), normalized: label }
            }
        })
        .collect()
}

/// Wire form of an explanation with feature values in one space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    pub method: Method,
    pub sample_index: usize,
    pub split: Split,
    pub target: String,
    pub prediction: f64,
    pub ground_truth: f64,
    pub entries: Vec<FeatureEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<(String, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_value: Option<f64>,
    pub normalized: bool,
    pub feature_values: Vec<(String, CellValue)>,
    pub warnings: Vec<String>,
}

pub fn explanation_payload(expl: &LocalExplanation, normalized: bool) -> ExplanationPayload {
    ExplanationPayload {
        method: expl.method,
        sample_index: expl.sample_index,
        split: expl.split,
        target: expl.target.clone(),
        prediction: expl.prediction,
        ground_truth: expl.ground_truth,
        entries: expl.entries.clone(),
        probabilities: expl.probabilities.clone(),
        base_value: expl.base_value,
        normalized,
        feature_values: expl
            .feature_values
            .iter()
            .map(|f| (f.name.clone(), if normalized { f.normalized.clone() } else { f.raw.clone() }))
            .collect(),
        warnings: expl.warnings.clone(),
    }
}
