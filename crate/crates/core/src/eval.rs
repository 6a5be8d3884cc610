//! Evaluation of comparable models on one split, error-plot data, automatic
//! selection of the lowest-error model, and per-sample plot series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Encoded, Split, Task};
use crate::error::{Error, Result};
use crate::loss::{compute_loss, log_probabilities, LossKind};
use crate::matrix::Matrix;
use crate::model::{BatchPredict, Family, FeatureFingerprint, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub model_id: String,
    pub family: Family,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedModel {
    pub model_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub split: Split,
    pub loss: LossKind,
    pub entries: Vec<EvaluationEntry>,
    pub excluded: Vec<ExcludedModel>,
    pub best_model_id: String,
}

impl EvaluationReport {
    /// `model_id,family,error` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model_id,family,error\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.model_id, e.family.name(), e.error));
        }
        out
    }
}

/// Error of one model's predictions under `loss`. Regression errors are the
/// unweighted mean of per-output losses.
pub fn model_error(task: Task, loss: LossKind, predictions: &Matrix, targets: &Matrix) -> Result<f64> {
    if loss.task() != task {
        return Err(Error::InvalidInput(format!(
            "loss `{}` does not apply to a {:?} task",
            loss.name(),
            task
        )));
    }
    match task {
        Task::Regression => {
            let k = targets.cols();
            let mut total = 0.0;
            for j in 0..k {
                let p = predictions.select_cols(&[j]);
                let t = targets.select_cols(&[j]);
                total += compute_loss(loss, &p, &t)?;
            }
            Ok(total / k as f64)
        }
        Task::Classification => {
            if loss == LossKind::Nll {
                compute_loss(loss, &log_probabilities(predictions), targets)
            } else {
                compute_loss(loss, predictions, targets)
            }
        }
    }
}

/// Evaluates every model whose fingerprint equals `reference` on `split`.
/// Others are excluded and listed. The best model has the lowest error; ties
/// go to the earliest registered.
pub fn evaluate_all(
    models: &[(String, &TrainedModel)],
    reference: &FeatureFingerprint,
    data: &Encoded,
    split: Split,
    loss: LossKind,
) -> Result<EvaluationReport> {
    if models.is_empty() {
        return Err(Error::Precondition("no models to evaluate".into()));
    }
    let (x, y) = data.part(split);
    if x.n_rows() == 0 {
        return Err(Error::Empty(format!("the {} split is empty", split.as_str())));
    }
    let mut excluded = Vec::new();
    let mut comparable = Vec::new();
    for (id, m) in models {
        if &m.fingerprint == reference {
            comparable.push((id, *m));
        } else {
            excluded.push(ExcludedModel { model_id: id.clone(), reason: "feature fingerprint differs".into() });
        }
    }
    if comparable.is_empty() {
        return Err(Error::Precondition("no model matches the current feature configuration".into()));
    }
    let errors: Vec<Result<f64>> = comparable
        .par_iter()
        .map(|(_, m)| {
            let p = m.predict(&x)?;
            model_error(m.task(), loss, &p, &y.values)
        })
        .collect();
    let mut entries = Vec::with_capacity(comparable.len());
    for ((id, m), e) in comparable.iter().zip(errors) {
        entries.push(EvaluationEntry { model_id: (*id).clone(), family: m.spec.family, error: e? });
    }
    let mut best = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.error < entries[best].error {
            best = i;
        }
    }
    Ok(EvaluationReport { split, loss, best_model_id: entries[best].model_id.clone(), entries, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortMode {
    #[default]
    None,
    GroundTruth,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub output: String,
    pub ground_truth: Vec<f64>,
    pub prediction: Vec<f64>,
    /// Original table row of each point.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub output: String,
    pub prediction: Vec<f64>,
    pub ground_truth: Vec<f64>,
    pub outlier: Vec<bool>,
    pub rows: Vec<usize>,
}

/// Resolves an encoded output column by name; `None` picks the first
/// regression output or the last class column (the positive class).
pub fn output_column(model: &TrainedModel, output: Option<&str>) -> Result<usize> {
    let names = &model.fingerprint.outputs;
    match output {
        Some(name) => names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string())),
        None => Ok(match model.task() {
            Task::Regression => 0,
            Task::Classification => names.len() - 1,
        }),
    }
}

fn split_predictions(model: &TrainedModel, data: &Encoded, split: Split, col: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    let pos = data.positions(split);
    if pos.is_empty() {
        return Err(Error::Empty(format!("the {} split is empty", split.as_str())));
    }
    let x = data.inputs.select_rows(&pos);
    let pred = model.predict(&x)?.column(col);
    let gt = data.outputs.values.select_rows(&pos).column(col);
    let rows = pos.iter().map(|&p| data.rows[p]).collect();
    Ok((gt, pred, rows))
}

pub fn plot_series(model: &TrainedModel, data: &Encoded, split: Split, output: Option<&str>, sort: SortMode) -> Result<PlotSeries> {
    let col = output_column(model, output)?;
    let (gt, pred, rows) = split_predictions(model, data, split, col)?;
    let mut order: Vec<usize> = (0..gt.len()).collect();
    match sort {
        SortMode::None => {}
        SortMode::GroundTruth => order.sort_by(|&a, &b| gt[a].total_cmp(&gt[b])),
        SortMode::Prediction => order.sort_by(|&a, &b| pred[a].total_cmp(&pred[b])),
    }
    Ok(PlotSeries {
        output: model.fingerprint.outputs[col].clone(),
        ground_truth: order.iter().map(|&i| gt[i]).collect(),
        prediction: order.iter().map(|&i| pred[i]).collect(),
        rows: order.iter().map(|&i| rows[i]).collect(),
    })
}

/// Outlier flags mark |prediction - truth| > 3 * std(residuals).
pub fn outlier_flags(prediction: &[f64], ground_truth: &[f64]) -> Vec<bool> {
    let res: Vec<f64> = prediction.iter().zip(ground_truth).map(|(p, g)| p - g).collect();
    let n = res.len() as f64;
    let mean = res.iter().sum::<f64>() / n;
    let std = (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    res.iter().map(|r| r.abs() > 3.0 * std).collect()
}

pub fn plot_goodness_of_fit(model: &TrainedModel, data: &Encoded, split: Split, output: Option<&str>) -> Result<GoodnessOfFit> {
    if model.task() != Task::Regression {
        return Err(Error::InvalidInput("goodness-of-fit view is available in regression mode only".into()));
    }
    let col = output_column(model, output)?;
    let (gt, pred, rows) = split_predictions(model, data, split, col)?;
    Ok(GoodnessOfFit {
        output: model.fingerprint.outputs[col].clone(),
        outlier: outlier_flags(&pred, &gt),
        prediction: pred,
        ground_truth: gt,
        rows,
    })
}

/// Convenience for callers holding any predictor rather than a trained model.
pub fn predictions_for(model: &dyn BatchPredict, x: &Matrix) -> Matrix {
    model.predict_batch(x)
}
