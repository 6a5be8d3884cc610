//! Command-line front end. Each command parses flags and calls the engine;
//! failures print one `error[stage]: message` line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use sensiloop_core::data::{encode, load_csv, split_random, Encoded, RoleHint, Split, SplitFractions};
use sensiloop_core::eval::evaluate_all;
use sensiloop_core::explain::{explanation_payload, lime_explain, shap_explain, LimeConfig, LocalExplanation, ShapConfig};
use sensiloop_core::gsa::{run_gsa, GsaOptions};
use sensiloop_core::loss::LossKind;
use sensiloop_core::model::{load, TrainedModel};
use sensiloop_core::pipeline::{load_config, run_pipeline};
use sensiloop_core::Error;

use crate::state::ConflictPolicy;

#[derive(Debug, Parser)]
#[command(name = "sensiloop", version, about = "Train, compare and explain tabular models")]
pub struct Cli {
    /// Seed for every random step (splits, training, GSA phases, explanations).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP API under /api/v1.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ConflictPolicy::Reject)]
        conflict: ConflictPolicy,
    },
    /// Run the whole loop from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sobol indices of a saved model, written as CSV.
    Gsa {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "validation")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 65)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        interference: usize,
        #[arg(long, default_value_t = 1)]
        resamples: usize,
    },
    /// Explain one sample of a split.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        sample: usize,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, default_value = "test")]
        split: String,
        /// Class label or output column to explain.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Error table of every model in a directory.
    Evaluate {
        #[arg(long)]
        models_dir: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "validation")]
        split: String,
        #[arg(long)]
        loss: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lime,
    Shap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // one line, so scripts can split on the first ": "
        write!(f, "error[{}]: {}", self.stage, self.message.replace('\n', " "))
    }
}

fn stage(stage: &'static str) -> impl FnOnce(Error) -> CliError {
    move |e| CliError { stage, message: e.to_string() }
}

/// Loads one CSV and splits it the way a session upload does.
pub fn load_split_table(path: &Path, model: &TrainedModel, seed: u64) -> Result<Encoded, CliError> {
    let table = load_csv(path, RoleHint::All).map_err(stage("load"))?;
    let table = split_random(&table, SplitFractions::default(), seed).map_err(stage("load"))?;
    encode(&table, &model.recipe).map_err(stage("encode"))
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    Split::parse(s).map_err(stage("args"))
}

pub fn gsa_command(
    model: &Path,
    data: &Path,
    split: &str,
    out: &Path,
    options: GsaOptions,
) -> Result<Vec<String>, CliError> {
    let split = parse_split(split)?;
    let m = load(model).map_err(stage("load"))?;
    let encoded = load_split_table(data, &m, options.seed)?;
    let result = run_gsa(&m, &encoded, split, &options).map_err(stage("gsa"))?;
    fs::write(out, result.to_csv()).map_err(|e| stage("write")(e.into()))?;
    Ok(result.warnings)
}

pub fn explain_command(
    model: &Path,
    data: &Path,
    sample: usize,
    method: MethodArg,
    split: &str,
    target: Option<String>,
    seed: u64,
) -> Result<LocalExplanation, CliError> {
    let split = parse_split(split)?;
    let m = load(model).map_err(stage("load"))?;
    let encoded = load_split_table(data, &m, seed)?;
    match method {
        MethodArg::Lime => lime_explain(&m, &encoded, split, sample, &LimeConfig { seed, target, ..LimeConfig::default() }),
        MethodArg::Shap => shap_explain(&m, &encoded, split, sample, &ShapConfig { seed, target, ..ShapConfig::default() }),
    }
    .map_err(stage("explain"))
}

pub fn format_explanation(e: &LocalExplanation, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&explanation_payload(e, false)).expect("payload serializes"),
        Format::Csv => {
            let mut s = String::from("feature,attribution,direction,threshold\n");
            for x in &e.entries {
                let dir = if x.attribution < 0.0 { "negative" } else { "positive" };
                let _ = writeln!(s, "{},{},{},{}", x.name, x.attribution, dir, x.threshold.as_deref().unwrap_or(""));
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{:?} explanation of {} sample {}", e.method, e.split.as_str(), e.sample_index);
            let _ = writeln!(s, "target      {}", e.target);
            let _ = writeln!(s, "prediction  {:.6}", e.prediction);
            let _ = writeln!(s, "truth       {:.6}", e.ground_truth);
            if let Some(b) = e.base_value {
                let _ = writeln!(s, "base value  {b:.6}");
            }
            if let Some(p) = &e.probabilities {
                for (class, prob) in p {
                    let _ = writeln!(s, "  P({class}) = {prob:.4}");
                }
            }
            for x in &e.entries {
                let label = x.threshold.clone().unwrap_or_else(|| x.name.clone());
                let _ = writeln!(s, "  {:>+10.5}  {label}", x.attribution);
            }
            for w in &e.warnings {
                let _ = writeln!(s, "warning: {w}");
            }
            s
        }
    }
}

/// Evaluates every `*.model` file in `dir`; the first file (by name) sets
/// the feature layout the others must match.
pub fn evaluate_command(dir: &Path, data: &Path, split: &str, loss: &str, seed: u64) -> Result<String, CliError> {
    let split = parse_split(split)?;
    let loss = LossKind::parse(loss).map_err(stage("args"))?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| stage("load")(e.into()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    paths.sort();
    let models = paths
        .iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
            load(p).map(|m| (id, m)).map_err(stage("load"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let first = models
        .first()
        .ok_or_else(|| CliError { stage: "load", message: format!("no .model files in {}", dir.display()) })?;
    let encoded = load_split_table(data, &first.1, seed)?;
    let refs: Vec<(String, &TrainedModel)> = models.iter().map(|(id, m)| (id.clone(), m)).collect();
    let report = evaluate_all(&refs, &first.1.fingerprint, &encoded, split, loss).map_err(stage("evaluate"))?;
    let mut out = report.to_csv();
    for x in &report.excluded {
        let _ = writeln!(out, "# excluded {}: {}", x.model_id, x.reason);
    }
    let _ = writeln!(out, "# best {}", report.best_model_id);
    Ok(out)
}

pub fn run_command(config: &Path, out: &Path, seed: Option<u64>) -> Result<String, CliError> {
    let tagged = |e: sensiloop_core::pipeline::PipelineError| CliError { stage: e.stage.as_str(), message: e.error.to_string() };
    let (mut cfg, base) = load_config(config).map_err(tagged)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let manifest = run_pipeline(&cfg, &base, out).map_err(tagged)?;
    Ok(serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
}
