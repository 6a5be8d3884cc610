//! Model zoo: random forest, second-order boosted trees, MLP and tabular
//! ResNet, all behind one [`TrainedModel`] type that owns its feature
//! fingerprint and normalization so callers always pass raw encoded rows.

pub mod boosting;
pub mod forest;
pub mod network;
mod persist;
mod spec;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use persist::{from_bytes, load, save, to_bytes, FORMAT_VERSION};
pub use spec::{BoostParams, Family, FeatureFingerprint, ForestParams, Hyperparameters, MlpParams, ModelSpec, ResnetParams};

use crate::data::{EncodedMatrix, EncodingRecipe, NormMethod, NormalizationParams, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use boosting::Boosted;
use forest::Forest;
use network::{Head, Network, Optimizer};

/// Anything that maps a batch of encoded rows to a batch of outputs.
pub trait BatchPredict: Sync {
    fn n_outputs(&self) -> usize;
    fn predict_batch(&self, x: &Matrix) -> Matrix;
}

/// Adapts a row function to [`BatchPredict`].
pub struct FnModel<F> {
    n_outputs: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnModel<F> {
    pub fn new(n_outputs: usize, f: F) -> Self {
        FnModel { n_outputs, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> BatchPredict for FnModel<F> {
    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict_batch(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_outputs);
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&(self.f)(x.row(i)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub network: Network,
    /// Networks always see normalized inputs.
    pub input_norm: NormalizationParams,
    /// Regression targets are standardized for training and mapped back on output.
    pub target_norm: Option<NormalizationParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Learned {
    Forest(Forest),
    Boosted(Boosted),
    Network(NetworkState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub fingerprint: FeatureFingerprint,
    pub recipe: EncodingRecipe,
    /// The session's normalization, fitted on the train split. Used to show
    /// normalized feature values; networks additionally train through it.
    pub normalization: NormalizationParams,
    pub learned: Learned,
    pub training_history: Vec<f64>,
}

pub fn fingerprint(recipe: &EncodingRecipe, normalization: NormMethod) -> FeatureFingerprint {
    FeatureFingerprint {
        inputs: recipe.input_column_names(),
        outputs: recipe.output_column_names(),
        normalization,
        schema_hash: recipe.schema_hash(),
    }
}

fn check_training_data(spec: &ModelSpec, recipe: &EncodingRecipe, x: &EncodedMatrix, y: &EncodedMatrix) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    if x.n_rows() < 2 {
        return Err(Error::InvalidInput("training needs at least 2 rows".into()));
    }
    if x.n_rows() != y.n_rows() {
        return Err(Error::InvalidInput("input and output row counts differ".into()));
    }
    if !x.values.all_finite() || !y.values.all_finite() {
        return Err(Error::InvalidInput("training data contains NaN or infinite values".into()));
    }
    if spec.task != recipe.task {
        return Err(Error::InvalidInput("model task differs from the feature configuration".into()));
    }
    if x.column_names != recipe.input_column_names() || y.column_names != recipe.output_column_names() {
        return Err(Error::FingerprintMismatch("training matrices do not follow the recipe".into()));
    }
    if spec.task == Task::Classification {
        for r in y.values.iter_rows() {
            let ones = r.iter().filter(|v| **v == 1.0).count();
            if ones != 1 || r.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::InvalidInput("classification targets must be one-hot".into()));
            }
        }
    }
    Ok(())
}

/// Trains one model. Deterministic in (spec, data, seed).
pub fn train(
    spec: &ModelSpec,
    recipe: &EncodingRecipe,
    normalization: NormMethod,
    inputs: &EncodedMatrix,
    outputs: &EncodedMatrix,
) -> Result<TrainedModel> {
    check_training_data(spec, recipe, inputs, outputs)?;
    let x = &inputs.values;
    let y = &outputs.values;
    let session_norm = NormalizationParams::fit(x, normalization);
    let (learned, history) = match &spec.hyperparameters {
        Hyperparameters::RandomForest(p) => (Learned::Forest(Forest::fit(x, y, spec.task, p, spec.seed)), Vec::new()),
        Hyperparameters::GradientBoostedTrees(p) => {
            let (b, h) = Boosted::fit(x, y, spec.task, p);
            (Learned::Boosted(b), h)
        }
        Hyperparameters::Mlp(_) | Hyperparameters::TabularResnet(_) => {
            let input_norm = match normalization {
                NormMethod::None => NormalizationParams::fit(x, NormMethod::MeanStd),
                _ => session_norm.clone(),
            };
            let xn = input_norm.apply(x);
            let (target_norm, yn, head) = match spec.task {
                Task::Regression => {
                    let tn = NormalizationParams::fit(y, NormMethod::MeanStd);
                    let yn = tn.apply(y);
                    (Some(tn), yn, Head::Mse)
                }
                Task::Classification => (None, y.clone(), Head::SoftmaxCrossEntropy),
            };
            let mut g = rng::seeded(spec.seed);
            let (mut net, opt) = match &spec.hyperparameters {
                Hyperparameters::Mlp(p) => (
                    Network::mlp(x.cols(), &p.hidden_layers, y.cols(), p.dropout, head, &mut g),
                    Optimizer { learning_rate: p.learning_rate, beta1: p.beta1, beta2: p.beta2, batch_size: p.batch_size, epochs: p.epochs },
                ),
                Hyperparameters::TabularResnet(p) => (
                    Network::resnet(x.cols(), p.layer_size, p.blocks, y.cols(), p.dropout, head, &mut g),
                    Optimizer { learning_rate: p.learning_rate, beta1: p.beta1, beta2: p.beta2, batch_size: p.batch_size, epochs: p.epochs },
                ),
                _ => unreachable!(),
            };
            let history = net.train(&xn, &yn, &opt, &mut g);
            (Learned::Network(NetworkState { network: net, input_norm, target_norm }), history)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        fingerprint: fingerprint(recipe, normalization),
        recipe: recipe.clone(),
        normalization: session_norm,
        learned,
        training_history: history,
    })
}

const PAR_CHUNK: usize = 512;

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.spec.task
    }

    pub fn n_inputs(&self) -> usize {
        self.fingerprint.inputs.len()
    }

    /// Predicts on an encoded matrix whose columns must match the fingerprint.
    pub fn predict(&self, inputs: &EncodedMatrix) -> Result<Matrix> {
        if inputs.column_names != self.fingerprint.inputs {
            return Err(Error::FingerprintMismatch(format!(
                "model expects columns {:?}, got {:?}",
                self.fingerprint.inputs, inputs.column_names
            )));
        }
        Ok(self.predict_batch(&inputs.values))
    }

    fn predict_chunk(&self, x: &Matrix) -> Matrix {
        let k = self.fingerprint.outputs.len();
        match &self.learned {
            Learned::Forest(f) => {
                let mut out = Matrix::zeros(x.rows(), k);
                for i in 0..x.rows() {
                    f.predict_row(x.row(i), out.row_mut(i));
                }
                out
            }
            Learned::Boosted(b) => {
                let mut out = Matrix::zeros(x.rows(), k);
                for i in 0..x.rows() {
                    b.predict_row(x.row(i), out.row_mut(i));
                }
                out
            }
            Learned::Network(s) => {
                let out = s.network.forward(&s.input_norm.apply(x));
                match &s.target_norm {
                    Some(t) => t.invert(&out),
                    None => out,
                }
            }
        }
    }
}

impl BatchPredict for TrainedModel {
    fn n_outputs(&self) -> usize {
        self.fingerprint.outputs.len()
    }

    fn predict_batch(&self, x: &Matrix) -> Matrix {
        if x.rows() <= PAR_CHUNK {
            return self.predict_chunk(x);
        }
        let chunks: Vec<Matrix> = (0..x.rows())
            .step_by(PAR_CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let idx: Vec<usize> = (start..(start + PAR_CHUNK).min(x.rows())).collect();
                self.predict_chunk(&x.select_rows(&idx))
            })
            .collect();
        let mut data = Vec::with_capacity(x.rows() * self.n_outputs());
        for c in chunks {
            data.extend(c.into_vec());
        }
        Matrix::from_vec(x.rows(), self.n_outputs(), data).unwrap()
    }
}

/// Backprop vs central-difference check on a small randomly initialized
/// network of the spec's family, on random data. Returns the largest relative
/// deviation.
pub fn gradient_check(spec: &ModelSpec, n_inputs: usize, n_outputs: usize, seed: u64) -> Result<f64> {
    let mut g = rng::seeded(seed);
    let head = match spec.task {
        Task::Regression => Head::Mse,
        Task::Classification => Head::SoftmaxCrossEntropy,
    };
    let net = match &spec.hyperparameters {
        Hyperparameters::Mlp(p) => Network::mlp(n_inputs, &p.hidden_layers, n_outputs, 0.0, head, &mut g),
        Hyperparameters::TabularResnet(p) => Network::resnet(n_inputs, p.layer_size, p.blocks, n_outputs, 0.0, head, &mut g),
        _ => return Err(Error::InvalidInput("gradient check applies to network families only".into())),
    };
    if net.n_params() > 1000 {
        return Err(Error::InvalidInput(format!("network has {} parameters; gradient check is for <= 1000", net.n_params())));
    }
    use rand::Rng;
    let rows = 12;
    let x = Matrix::from_vec(rows, n_inputs, (0..rows * n_inputs).map(|_| g.random_range(-1.0..1.0)).collect())?;
    let y = match spec.task {
        Task::Regression => Matrix::from_vec(rows, n_outputs, (0..rows * n_outputs).map(|_| g.random_range(-1.0..1.0)).collect())?,
        Task::Classification => {
            let mut y = Matrix::zeros(rows, n_outputs);
            for i in 0..rows {
                y.set(i, g.random_range(0..n_outputs), 1.0);
            }
            y
        }
    };
    Ok(net.gradient_check(&x, &y, 1e-5))
}
