//! Transport-agnostic session state for the interactive loop. Every mutating
//! call bumps `revision`; long-running steps are split into a read-only
//! `*_input` snapshot and a `set_*`/`add_*` commit so callers can run them off
//! the lock.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::{
    apply_balancing, balance_report, correlation_check, encode, from_raw, parse_csv, pca_fit, split_random, BalanceReport,
    Binning, CorrelationReport, DataTable, Encoded, EncodingRecipe, FeatureSpec, NormMethod, RoleHint, Source, Split,
    SplitFractions, Task, DEFAULT_CORRELATION_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_all, plot_goodness_of_fit, plot_series, EvaluationReport, GoodnessOfFit, PlotSeries, SortMode};
use crate::explain::{lime_explain, shap_explain, LimeConfig, LocalExplanation, ShapConfig};
use crate::gsa::{run_gsa, GsaOptions, SobolResult};
use crate::loss::LossKind;
use crate::model::{fingerprint, train, Family, FeatureFingerprint, ModelSpec, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    #[serde(default = "all_rows")]
    pub role: RoleHint,
    pub csv: String,
}

fn all_rows() -> RoleHint {
    RoleHint::All
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadRequest {
    pub files: Vec<DataFile>,
    #[serde(default)]
    pub split: SplitFractions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceTarget {
    pub feature: String,
    #[serde(default)]
    pub binning: Option<Binning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub task: Task,
    #[serde(default)]
    pub normalization: NormMethod,
    /// Replace inputs by the principal components keeping this variance share.
    #[serde(default)]
    pub pca: Option<f64>,
    /// Oversample the train split so these features' combinations are equally frequent.
    #[serde(default)]
    pub balance: Vec<BalanceTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub family: Family,
    #[serde(default)]
    pub hyperparameters: Map<String, Value>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    #[serde(default = "validation")]
    pub split: Split,
    /// Defaults to MSE for regression and cross-entropy for classification.
    #[serde(default)]
    pub loss: Option<LossKind>,
}

impl Default for EvaluateRequest {
    fn default() -> Self {
        EvaluateRequest { split: Split::Validation, loss: None }
    }
}

fn validation() -> Split {
    Split::Validation
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsaRequest {
    #[serde(default)]
    pub samples_per_curve: Option<usize>,
    #[serde(default)]
    pub interference: Option<usize>,
    #[serde(default)]
    pub resamples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Range source; defaults to the split of the latest evaluation.
    #[serde(default)]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMethod {
    Lime,
    Shap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainRequest {
    pub sample: usize,
    pub method: ExplainMethod,
    #[serde(default)]
    pub split: Option<Split>,
    /// Defaults to the best model of the latest evaluation.
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub lime: Option<LimeConfig>,
    #[serde(default)]
    pub shap: Option<ShapConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotMode {
    #[default]
    Series,
    GoodnessOfFit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotRequest {
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub split: Option<Split>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub sort: SortMode,
    #[serde(default)]
    pub mode: PlotMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PlotPayload {
    Series(PlotSeries),
    GoodnessOfFit(GoodnessOfFit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub schema: Vec<FeatureSpec>,
    pub n_rows: usize,
    pub split_sizes: [usize; 3],
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub input_columns: Vec<String>,
    pub output_columns: Vec<String>,
    pub rows: usize,
    pub dropped_rows: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub family: Family,
    pub task: Task,
    pub seed: u64,
    pub hyperparameters: Map<String, Value>,
    /// Whether the model matches the current feature configuration.
    pub compatible: bool,
}

/// Table, recipe and encoded matrices for the current feature configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub table: DataTable,
    pub config: FeatureConfig,
    pub recipe: EncodingRecipe,
    pub encoded: Encoded,
    pub fingerprint: FeatureFingerprint,
}

/// Snapshot needed to train one model without holding the session.
#[derive(Debug, Clone)]
pub struct TrainingInput {
    pub spec: ModelSpec,
    pub prepared: Arc<Prepared>,
}

impl TrainingInput {
    pub fn run(&self) -> Result<TrainedModel> {
        let p = &self.prepared;
        let (x, y) = p.encoded.part(Split::Train);
        train(&self.spec, &p.recipe, p.config.normalization, &x, &y)
    }
}

/// Snapshot for a GSA run on the best model.
#[derive(Debug, Clone)]
pub struct GsaInput {
    pub model_id: String,
    pub model: Arc<TrainedModel>,
    pub prepared: Arc<Prepared>,
    pub split: Split,
    pub options: GsaOptions,
    /// Revision of the evaluation this run belongs to.
    pub evaluation_revision: u64,
}

impl GsaInput {
    pub fn run(&self) -> Result<SobolResult> {
        run_gsa(&self.model, &self.prepared.encoded, self.split, &self.options)
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub seed: u64,
    revision: u64,
    table: Option<DataTable>,
    prepared: Option<Arc<Prepared>>,
    models: BTreeMap<String, Arc<TrainedModel>>,
    next_model: u64,
    evaluation: Option<(EvaluationReport, u64)>,
    gsa: Option<SobolResult>,
}

impl Session {
    pub fn new(id: impl Into<String>, seed: u64) -> Self {
        Session {
            id: id.into(),
            seed,
            revision: 0,
            table: None,
            prepared: None,
            models: BTreeMap::new(),
            next_model: 1,
            evaluation: None,
            gsa: None,
        }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    fn bump(&mut self) {
        self.revision += 1;
    }

    fn invalidate_results(&mut self) {
        self.evaluation = None;
        self.gsa = None;
    }

    pub fn upload_dataset(&mut self, req: &UploadRequest) -> Result<DatasetSummary> {
        if req.files.is_empty() {
            return Err(Error::InvalidInput("no data files given".into()));
        }
        let parts = req
            .files
            .iter()
            .map(|f| Ok((parse_csv(f.csv.as_bytes())?, f.role)))
            .collect::<Result<Vec<_>>>()?;
        let mut table = from_raw(parts)?;
        if table.source() == Source::SingleFileSplit {
            table = split_random(&table, req.split, self.seed)?;
        }
        self.table = Some(table);
        self.prepared = None;
        self.invalidate_results();
        self.bump();
        self.dataset_summary()
    }

    pub fn table(&self) -> Result<&DataTable> {
        self.table.as_ref().ok_or_else(|| Error::Precondition("no dataset uploaded".into()))
    }

    pub fn dataset_summary(&self) -> Result<DatasetSummary> {
        let t = self.table()?;
        Ok(DatasetSummary {
            schema: t.schema().to_vec(),
            n_rows: t.n_rows(),
            split_sizes: t.split_sizes(),
            source: t.source(),
        })
    }

    /// Applies a feature selection. Clears the evaluation and GSA results;
    /// registered models stay and are compared by fingerprint later.
    pub fn configure_features(&mut self, config: &FeatureConfig) -> Result<FeatureSummary> {
        let prepared = prepare(self.table()?, config, self.seed)?;
        let mut warnings = correlation_check(&prepared.encoded.part(Split::Train).0, DEFAULT_CORRELATION_THRESHOLD).warnings();
        if prepared.encoded.dropped > 0 {
            warnings.push(format!("{} rows with missing values were dropped", prepared.encoded.dropped));
        }
        let summary = FeatureSummary {
            input_columns: prepared.encoded.inputs.column_names.clone(),
            output_columns: prepared.encoded.outputs.column_names.clone(),
            rows: prepared.encoded.rows.len(),
            dropped_rows: prepared.encoded.dropped,
            warnings,
        };
        self.prepared = Some(Arc::new(prepared));
        self.invalidate_results();
        self.bump();
        Ok(summary)
    }

    pub fn prepared(&self) -> Result<&Arc<Prepared>> {
        self.prepared.as_ref().ok_or_else(|| Error::Precondition("configure features first".into()))
    }

    pub fn training_input(&self, req: &TrainRequest) -> Result<TrainingInput> {
        let prepared = self.prepared()?.clone();
        let spec = ModelSpec::new(req.family, prepared.config.task, &req.hyperparameters, req.seed.unwrap_or(self.seed))?;
        Ok(TrainingInput { spec, prepared })
    }

    /// Registers a model (trained here or uploaded) and returns its id.
    pub fn add_model(&mut self, model: TrainedModel) -> String {
        let id = format!("m{:03}", self.next_model);
        self.next_model += 1;
        self.models.insert(id.clone(), Arc::new(model));
        self.bump();
        id
    }

    pub fn model(&self, id: &str) -> Result<&Arc<TrainedModel>> {
        self.models.get(id).ok_or_else(|| Error::NotFound(format!("model `{id}`")))
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    pub fn list_models(&self) -> Vec<ModelSummary> {
        let current = self.prepared.as_ref().map(|p| &p.fingerprint);
        self.models
            .iter()
            .map(|(id, m)| ModelSummary {
                id: id.clone(),
                family: m.spec.family,
                task: m.spec.task,
                seed: m.spec.seed,
                hyperparameters: m.spec.hyperparameters.to_map(),
                compatible: current == Some(&m.fingerprint),
            })
            .collect()
    }

    pub fn evaluate(&mut self, req: &EvaluateRequest) -> Result<EvaluationReport> {
        let prepared = self.prepared()?.clone();
        if self.models.is_empty() {
            return Err(Error::Precondition("train or upload a model before evaluating".into()));
        }
        let loss = req.loss.unwrap_or(match prepared.config.task {
            Task::Regression => LossKind::Mse,
            Task::Classification => LossKind::CrossEntropy,
        });
        // ids are zero-padded, so key order is registration order
        let models: Vec<(String, &TrainedModel)> = self.models.iter().map(|(id, m)| (id.clone(), m.as_ref())).collect();
        let report = evaluate_all(&models, &prepared.fingerprint, &prepared.encoded, req.split, loss)?;
        self.gsa = None;
        self.bump();
        self.evaluation = Some((report.clone(), self.revision));
        Ok(report)
    }

    pub fn evaluation(&self) -> Result<&EvaluationReport> {
        self.evaluation
            .as_ref()
            .map(|(r, _)| r)
            .ok_or_else(|| Error::Precondition("no evaluation for the current feature selection".into()))
    }

    pub fn gsa_input(&self, req: &GsaRequest) -> Result<GsaInput> {
        let (report, evaluation_revision) =
            self.evaluation.as_ref().ok_or_else(|| Error::Precondition("evaluate models before running GSA".into()))?;
        let defaults = GsaOptions::default();
        Ok(GsaInput {
            model_id: report.best_model_id.clone(),
            model: self.model(&report.best_model_id)?.clone(),
            prepared: self.prepared()?.clone(),
            split: req.split.unwrap_or(report.split),
            options: GsaOptions {
                samples_per_curve: req.samples_per_curve.unwrap_or(defaults.samples_per_curve),
                interference: req.interference.unwrap_or(defaults.interference),
                resamples: req.resamples.unwrap_or(defaults.resamples),
                seed: req.seed.unwrap_or(self.seed),
            },
            evaluation_revision: *evaluation_revision,
        })
    }

    /// Stores a GSA result unless the evaluation it was computed for has
    /// since been replaced or invalidated.
    pub fn set_gsa(&mut self, input: &GsaInput, result: SobolResult) -> Result<()> {
        match &self.evaluation {
            Some((_, rev)) if *rev == input.evaluation_revision => {
                self.gsa = Some(result);
                self.bump();
                Ok(())
            }
            _ => Err(Error::Precondition("the evaluation changed while GSA was running; result discarded".into())),
        }
    }

    pub fn gsa(&self) -> Result<&SobolResult> {
        self.gsa.as_ref().ok_or_else(|| Error::Precondition("no GSA result; evaluate models first".into()))
    }

    fn resolve_model(&self, id: Option<&str>) -> Result<(Arc<TrainedModel>, Split)> {
        match id {
            Some(id) => Ok((self.model(id)?.clone(), self.evaluation.as_ref().map_or(Split::Validation, |(r, _)| r.split))),
            None => {
                let r = self.evaluation()?;
                Ok((self.model(&r.best_model_id)?.clone(), r.split))
            }
        }
    }

    pub fn explain(&self, req: &ExplainRequest) -> Result<LocalExplanation> {
        let (model, default_split) = self.resolve_model(req.model_id.as_deref())?;
        let prepared = self.prepared()?;
        let split = req.split.unwrap_or(default_split);
        let seed = req.seed.unwrap_or(self.seed);
        match req.method {
            ExplainMethod::Lime => {
                let mut cfg = req.lime.clone().unwrap_or_default();
                cfg.seed = seed;
                if req.target.is_some() {
                    cfg.target = req.target.clone();
                }
                lime_explain(&model, &prepared.encoded, split, req.sample, &cfg)
            }
            ExplainMethod::Shap => {
                let mut cfg = req.shap.clone().unwrap_or_default();
                cfg.seed = seed;
                if req.target.is_some() {
                    cfg.target = req.target.clone();
                }
                shap_explain(&model, &prepared.encoded, split, req.sample, &cfg)
            }
        }
    }

    pub fn plot(&self, req: &PlotRequest) -> Result<PlotPayload> {
        let (model, default_split) = self.resolve_model(req.model_id.as_deref())?;
        let prepared = self.prepared()?;
        let split = req.split.unwrap_or(default_split);
        match req.mode {
            PlotMode::Series => {
                plot_series(&model, &prepared.encoded, split, req.output.as_deref(), req.sort).map(PlotPayload::Series)
            }
            PlotMode::GoodnessOfFit => {
                plot_goodness_of_fit(&model, &prepared.encoded, split, req.output.as_deref()).map(PlotPayload::GoodnessOfFit)
            }
        }
    }

    pub fn balance(&self, targets: &[BalanceTarget]) -> Result<BalanceReport> {
        let t = self.table()?;
        let features: Vec<(String, Option<Binning>)> = targets.iter().map(|b| (b.feature.clone(), b.binning)).collect();
        balance_report(t, &features)
    }

    pub fn correlation(&self, threshold: Option<f64>) -> Result<CorrelationReport> {
        let p = self.prepared()?;
        Ok(correlation_check(&p.encoded.part(Split::Train).0, threshold.unwrap_or(DEFAULT_CORRELATION_THRESHOLD)))
    }
}

fn prepare(table: &DataTable, config: &FeatureConfig, seed: u64) -> Result<Prepared> {
    let mut table = table.clone();
    table.set_roles(&config.inputs, &config.outputs)?;
    if !config.balance.is_empty() {
        let targets: Vec<(String, Option<Binning>)> = config.balance.iter().map(|b| (b.feature.clone(), b.binning)).collect();
        table = apply_balancing(&table, &targets, seed)?;
    }
    let mut recipe = EncodingRecipe::from_table(&table, config.task)?;
    let mut encoded = encode(&table, &recipe)?;
    if let Some(kept) = config.pca {
        let train = encoded.part(Split::Train).0;
        recipe.pca = Some(pca_fit(&train, kept)?);
        encoded = encode(&table, &recipe)?;
    }
    let fingerprint = fingerprint(&recipe, config.normalization);
    Ok(Prepared { table, config: config.clone(), recipe, encoded, fingerprint })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Train,
    Evaluate,
    Gsa,
    Explain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

/// A background job. Status only moves queued -> running -> done | failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    pub result: Option<Value>,
    pub error: Option<String>,
}

impl Job {
    pub fn new(id: impl Into<String>, kind: JobKind) -> Self {
        Job { id: id.into(), kind, status: JobStatus::Queued, progress: 0.0, result: None, error: None }
    }

    pub fn start(&mut self) -> Result<()> {
        self.transition(JobStatus::Queued, JobStatus::Running)
    }

    pub fn finish(&mut self, result: Value) -> Result<()> {
        self.transition(JobStatus::Running, JobStatus::Done)?;
        self.progress = 1.0;
        self.result = Some(result);
        Ok(())
    }

    pub fn fail(&mut self, error: impl Into<String>) -> Result<()> {
        self.transition(JobStatus::Running, JobStatus::Failed)?;
        self.error = Some(error.into());
        Ok(())
    }

    pub fn set_progress(&mut self, fraction: f64) {
        if self.status == JobStatus::Running {
            self.progress = fraction.clamp(self.progress, 1.0);
        }
    }

    fn transition(&mut self, from: JobStatus, to: JobStatus) -> Result<()> {
        if self.status != from {
            return Err(Error::Precondition(format!(
                "job {} cannot move from {:?} to {:?}",
                self.id, self.status, to
            )));
        }
        self.status = to;
        Ok(())
    }
}
