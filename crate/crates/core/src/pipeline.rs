//! Headless run of the whole loop from one JSON config: upload, configure,
//! train every listed model, evaluate, GSA on the best model and optional
//! explanations. The config sections are the session request payloads.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{RoleHint, SplitFractions};
use crate::error::Error;
use crate::explain::explanation_payload;
use crate::model::{save, ModelSpec};
use crate::session::{
    DataFile, EvaluateRequest, ExplainMethod, ExplainRequest, FeatureConfig, GsaRequest, Session, TrainRequest,
    UploadRequest,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRef {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "all_rows")]
    pub role: RoleHint,
}

fn all_rows() -> RoleHint {
    RoleHint::All
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub files: Vec<FileRef>,
    #[serde(default)]
    pub split: SplitFractions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSection,
    pub features: FeatureConfig,
    pub models: Vec<TrainRequest>,
    #[serde(default)]
    pub evaluation: EvaluateRequest,
    #[serde(default)]
    pub gsa: GsaRequest,
    #[serde(default)]
    pub explain: Vec<ExplainRequest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Upload,
    Configure,
    Train,
    Evaluate,
    Gsa,
    Explain,
    Write,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Upload => "upload",
            Stage::Configure => "configure",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Gsa => "gsa",
            Stage::Explain => "explain",
            Stage::Write => "write",
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage.as_str(), self.error)
    }
}

impl std::error::Error for PipelineError {}

fn at(stage: Stage) -> impl FnOnce(Error) -> PipelineError {
    move |error| PipelineError { stage, error }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub completed: Vec<Stage>,
    /// Written files, relative to the output directory.
    pub files: Vec<String>,
    pub models: Vec<String>,
    pub best_model_id: Option<String>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads a config; returns it with the directory relative paths resolve against.
pub fn load_config(path: &Path) -> Result<(PipelineConfig, PathBuf), PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| at(Stage::Config)(e.into()))?;
    let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| at(Stage::Config)(e.into()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

struct Writer<'a> {
    out: &'a Path,
    manifest: Manifest,
}

impl Writer<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| at(Stage::Write)(e.into()))?;
        }
        fs::write(&path, bytes).map_err(|e| at(Stage::Write)(e.into()))?;
        self.manifest.files.push(rel.to_string());
        Ok(())
    }

    fn flush(&self) -> std::io::Result<()> {
        fs::create_dir_all(self.out)?;
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(self.out.join(MANIFEST_FILE), json)
    }
}

/// Runs every stage; on failure the files written so far stay and the
/// manifest records the stage-tagged error.
pub fn run_pipeline(config: &PipelineConfig, base_dir: &Path, out: &Path) -> Result<Manifest, PipelineError> {
    let mut w = Writer { out, manifest: Manifest { seed: config.seed, ..Manifest::default() } };
    let result = run_stages(config, base_dir, &mut w);
    if let Err(e) = &result {
        w.manifest.error = Some(e.to_string());
    }
    w.flush().map_err(|e| at(Stage::Write)(e.into()))?;
    result.map(|_| w.manifest)
}

fn run_stages(config: &PipelineConfig, base_dir: &Path, w: &mut Writer) -> Result<(), PipelineError> {
    // validate every model spec before any work
    if config.models.is_empty() {
        return Err(at(Stage::Config)(Error::InvalidInput("no models listed".into())));
    }
    for m in &config.models {
        ModelSpec::new(m.family, config.features.task, &m.hyperparameters, m.seed.unwrap_or(config.seed))
            .map_err(at(Stage::Config))?;
    }
    w.manifest.completed.push(Stage::Config);

    let mut session = Session::new("pipeline", config.seed);
    let files = config
        .data
        .files
        .iter()
        .map(|f| {
            let path = base_dir.join(&f.path);
            fs::read_to_string(&path)
                .map(|csv| DataFile { role: f.role, csv })
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(at(Stage::Upload))?;
    session.upload_dataset(&UploadRequest { files, split: config.data.split }).map_err(at(Stage::Upload))?;
    w.manifest.completed.push(Stage::Upload);

    let summary = session.configure_features(&config.features).map_err(at(Stage::Configure))?;
    w.manifest.warnings.extend(summary.warnings);
    w.manifest.completed.push(Stage::Configure);

    for req in &config.models {
        let model = session.training_input(req).and_then(|t| t.run()).map_err(at(Stage::Train))?;
        let id = session.add_model(model);
        let path = w.out.join("models").join(format!("{id}.model"));
        fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| at(Stage::Write)(e.into()))?;
        save(session.model(&id).map_err(at(Stage::Train))?, &path).map_err(at(Stage::Write))?;
        w.manifest.files.push(format!("models/{id}.model"));
        w.manifest.models.push(id);
    }
    w.manifest.completed.push(Stage::Train);

    let report = session.evaluate(&config.evaluation).map_err(at(Stage::Evaluate))?;
    w.manifest.best_model_id = Some(report.best_model_id.clone());
    w.write("error_report.csv", report.to_csv().as_bytes())?;
    w.write("evaluation.json", &json_bytes(&report))?;
    w.manifest.completed.push(Stage::Evaluate);

    let input = session.gsa_input(&config.gsa).map_err(at(Stage::Gsa))?;
    let sobol = input.run().map_err(at(Stage::Gsa))?;
    w.manifest.warnings.extend(sobol.warnings.iter().cloned());
    w.write("sobol.csv", sobol.to_csv().as_bytes())?;
    w.write("gsa.json", &json_bytes(&sobol))?;
    session.set_gsa(&input, sobol).map_err(at(Stage::Gsa))?;
    w.manifest.completed.push(Stage::Gsa);

    for (i, req) in config.explain.iter().enumerate() {
        let expl = session.explain(req).map_err(at(Stage::Explain))?;
        let method = match req.method {
            ExplainMethod::Lime => "lime",
            ExplainMethod::Shap => "shap",
        };
        let payload = explanation_payload(&expl, false);
        w.write(&format!("explanations/{i:02}_{method}_{}.json", req.sample), &json_bytes(&payload))?;
    }
    if !config.explain.is_empty() {
        w.manifest.completed.push(Stage::Explain);
    }
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(value).expect("report types serialize")
}
