//! Python module `sensiloop`. Requests and results cross the boundary as
//! plain dicts and lists, matching the JSON bodies of the HTTP API.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sensiloop_core::data::{RoleHint, Split, SplitFractions};
use sensiloop_core::gsa::{efast_analyze, EfastConfig};
use sensiloop_core::loss::{compute_loss, LossKind};
use sensiloop_core::model::{self, FnModel, TrainedModel};
use sensiloop_core::pipeline::{load_config, run_pipeline};
use sensiloop_core::session::{
    DataFile, EvaluateRequest, ExplainRequest, FeatureConfig, GsaRequest, TrainRequest, UploadRequest,
};
use sensiloop_core::{Error, Matrix};
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(sensiloop, SensiloopError, PyException);

fn err(e: Error) -> PyErr {
    SensiloopError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| SensiloopError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Reads a request from keyword arguments (or a dict).
fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    let text: String = match obj {
        Some(o) => py.import("json")?.call_method1("dumps", (o,))?.extract()?,
        None => "{}".into(),
    };
    serde_json::from_str(&text).map_err(|e| SensiloopError::new_err(format!("invalid request: {e}")))
}

/// Parses a snake_case name such as "validation" or "binary_cross_entropy".
fn named<T: DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| SensiloopError::new_err(format!("unknown name {name:?}")))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(SensiloopError::new_err("rows have different lengths"));
    }
    let n = rows.len();
    Matrix::from_vec(n, cols, rows.into_iter().flatten().collect()).map_err(err)
}

/// A trained model with its encoding, as stored on disk.
#[pyclass(module = "sensiloop", frozen)]
struct Model {
    inner: TrainedModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        model::load(path).map(|inner| Model { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        model::from_bytes(data).map(|inner| Model { inner }).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save(&self.inner, path).map_err(err)
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        model::to_bytes(&self.inner).map_err(err)
    }

    #[getter]
    fn family(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.spec.family)
    }

    #[getter]
    fn inputs(&self) -> Vec<String> {
        self.inner.fingerprint.inputs.clone()
    }

    #[getter]
    fn outputs(&self) -> Vec<String> {
        self.inner.fingerprint.outputs.clone()
    }

    /// Predicts already encoded rows (one value per encoded input column).
    fn predict(&self, py: Python<'_>, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(rows)?;
        if x.cols() != self.inner.fingerprint.inputs.len() {
            return Err(SensiloopError::new_err(format!(
                "expected {} encoded columns, got {}",
                self.inner.fingerprint.inputs.len(),
                x.cols()
            )));
        }
        let y = py.detach(|| model::BatchPredict::predict_batch(&self.inner, &x));
        Ok(y.iter_rows().map(<[f64]>::to_vec).collect())
    }

    fn __repr__(&self) -> String {
        format!("Model({:?}, {} inputs)", self.inner.spec.family, self.inner.fingerprint.inputs.len())
    }
}

/// The interactive loop: upload, configure, train, evaluate, GSA, explain.
#[pyclass(module = "sensiloop")]
struct Session {
    inner: sensiloop_core::session::Session,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (seed=0, id="python"))]
    fn new(seed: u64, id: &str) -> Self {
        Session { inner: sensiloop_core::session::Session::new(id, seed) }
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.inner.revision()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Loads one CSV text and splits it. `split` is (train, validation, test).
    #[pyo3(signature = (csv, split=None))]
    fn upload_csv(&mut self, py: Python<'_>, csv: String, split: Option<(f64, f64, f64)>) -> PyResult<Py<PyAny>> {
        let split = split.map_or_else(SplitFractions::default, |(train, validation, test)| SplitFractions {
            train,
            validation,
            test,
        });
        let req = UploadRequest { files: vec![DataFile { role: RoleHint::All, csv }], split };
        let summary = self.inner.upload_dataset(&req).map_err(err)?;
        to_py(py, &summary)
    }

    #[pyo3(signature = (**config))]
    fn configure(&mut self, py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let cfg: FeatureConfig = from_py(py, config.map(|c| c.as_any()))?;
        let summary = self.inner.configure_features(&cfg).map_err(err)?;
        to_py(py, &summary)
    }

    /// Trains one model and returns its id.
    #[pyo3(signature = (family, seed=None, **hyperparameters))]
    fn train(
        &mut self,
        py: Python<'_>,
        family: &Bound<'_, PyAny>,
        seed: Option<u64>,
        hyperparameters: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<String> {
        let req = TrainRequest {
            family: from_py(py, Some(family))?,
            hyperparameters: from_py(py, hyperparameters.map(|h| h.as_any()))?,
            seed,
        };
        let input = self.inner.training_input(&req).map_err(err)?;
        let trained = py.detach(|| input.run()).map_err(err)?;
        Ok(self.inner.add_model(trained))
    }

    fn model(&self, id: &str) -> PyResult<Model> {
        let inner = self.inner.model(id).map_err(err)?;
        Ok(Model { inner: TrainedModel::clone(inner) })
    }

    fn add_model(&mut self, model: &Model) -> String {
        self.inner.add_model(model.inner.clone())
    }

    fn models(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.list_models())
    }

    #[pyo3(signature = (split="validation", loss=None))]
    fn evaluate(&mut self, py: Python<'_>, split: &str, loss: Option<&str>) -> PyResult<Py<PyAny>> {
        let split: Split = named(split)?;
        let loss: Option<LossKind> = loss.map(named).transpose()?;
        let report = self.inner.evaluate(&EvaluateRequest { split, loss }).map_err(err)?;
        to_py(py, &report)
    }

    /// Sobol indices of the best (or named) model; also stored on the session.
    #[pyo3(signature = (**options))]
    fn gsa(&mut self, py: Python<'_>, options: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let req: GsaRequest = from_py(py, options.map(|o| o.as_any()))?;
        let input = self.inner.gsa_input(&req).map_err(err)?;
        let result = py.detach(|| input.run()).map_err(err)?;
        self.inner.set_gsa(&input, result.clone()).map_err(err)?;
        to_py(py, &result)
    }

    #[pyo3(signature = (sample, method, **options))]
    fn explain(
        &self,
        py: Python<'_>,
        sample: usize,
        method: &str,
        options: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<Py<PyAny>> {
        let req = PyDict::new(py);
        if let Some(o) = options {
            req.update(o.as_mapping())?;
        }
        req.set_item("sample", sample)?;
        req.set_item("method", method)?;
        let req: ExplainRequest = from_py(py, Some(req.as_any()))?;
        let explanation = py.detach(|| self.inner.explain(&req)).map_err(err)?;
        to_py(py, &explanation)
    }
}

/// Mean loss of `predictions` against `targets` (lists of rows).
#[pyfunction]
fn loss(kind: &str, predictions: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> PyResult<f64> {
    compute_loss(named(kind)?, &matrix(predictions)?, &matrix(targets)?).map_err(err)
}

/// First-order and total Sobol indices of a Python function of `len(bounds)`
/// inputs that returns a float.
#[pyfunction]
#[pyo3(signature = (func, bounds, names=None, samples_per_curve=EfastConfig::DEFAULT_N, interference=EfastConfig::DEFAULT_M, resamples=1, seed=0))]
#[allow(clippy::too_many_arguments)]
fn efast(
    py: Python<'_>,
    func: Py<PyAny>,
    bounds: Vec<(f64, f64)>,
    names: Option<Vec<String>>,
    samples_per_curve: usize,
    interference: usize,
    resamples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let names = names.unwrap_or_else(|| (1..=bounds.len()).map(|i| format!("x{i}")).collect());
    if names.len() != bounds.len() {
        return Err(SensiloopError::new_err("names and bounds differ in length"));
    }
    let config = EfastConfig { samples_per_curve, interference, seed, bounds, resamples };
    let failure: std::sync::Mutex<Option<PyErr>> = std::sync::Mutex::new(None);
    let model = FnModel::new(1, |x: &[f64]| {
        Python::attach(|py| match func.call1(py, (x.to_vec(),)).and_then(|v| v.extract::<f64>(py)) {
            Ok(v) => vec![v],
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                vec![f64::NAN]
            }
        })
    });
    let result = py.detach(|| efast_analyze(&model, &names, &[(0, "y".to_string())], &config));
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    to_py(py, &result.map_err(err)?)
}

/// Runs a JSON pipeline config and writes its artifacts to `out`.
#[pyfunction]
fn run(py: Python<'_>, config: PathBuf, out: PathBuf) -> PyResult<Py<PyAny>> {
    let tagged = |e: sensiloop_core::pipeline::PipelineError| SensiloopError::new_err(e.to_string());
    let (cfg, base) = load_config(&config).map_err(tagged)?;
    let manifest = py.detach(|| run_pipeline(&cfg, &base, &out)).map_err(tagged)?;
    to_py(py, &manifest)
}

#[pymodule]
pub fn sensiloop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SensiloopError", m.py().get_type::<SensiloopError>())?;
    m.add_class::<Session>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(efast, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
