use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::{NormMethod, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    RandomForest,
    GradientBoostedTrees,
    Mlp,
    TabularResnet,
}

impl Family {
    pub fn parse(s: &str) -> Result<Family> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::InvalidInput(format!("unknown model family `{s}`")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomForest => "random_forest",
            Family::GradientBoostedTrees => "gradient_boosted_trees",
            Family::Mlp => "mlp",
            Family::TabularResnet => "tabular_resnet",
        }
    }

    pub fn is_network(self) -> bool {
        matches!(self, Family::Mlp | Family::TabularResnet)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_depth: usize,
    /// Features examined per split; `None` means ceil(sqrt(d)).
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, bootstrap: true, max_depth: 16, max_features: None, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { n_rounds: 100, learning_rate: 0.1, max_depth: 6, lambda: 1.0, gamma: 0.0, min_child_weight: 1.0 }
    }
}

/// Optimizer and schedule shared by both network families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden_layers: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_layers: vec![64, 32],
            dropout: 0.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 64,
            epochs: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResnetParams {
    pub blocks: usize,
    pub layer_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for ResnetParams {
    fn default() -> Self {
        ResnetParams {
            blocks: 2,
            layer_size: 64,
            dropout: 0.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 64,
            epochs: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hyperparameters {
    RandomForest(ForestParams),
    GradientBoostedTrees(BoostParams),
    Mlp(MlpParams),
    TabularResnet(ResnetParams),
}

impl Hyperparameters {
    pub fn defaults(family: Family) -> Self {
        match family {
            Family::RandomForest => Hyperparameters::RandomForest(Default::default()),
            Family::GradientBoostedTrees => Hyperparameters::GradientBoostedTrees(Default::default()),
            Family::Mlp => Hyperparameters::Mlp(Default::default()),
            Family::TabularResnet => Hyperparameters::TabularResnet(Default::default()),
        }
    }

    /// Parses a partial key/value map; unknown keys are rejected, missing keys
    /// take the family default.
    pub fn from_map(family: Family, map: &Map<String, Value>) -> Result<Self> {
        let v = Value::Object(map.clone());
        let bad = |e: serde_json::Error| Error::InvalidInput(format!("{} hyperparameters: {e}", family.name()));
        let h = match family {
            Family::RandomForest => Hyperparameters::RandomForest(serde_json::from_value(v).map_err(bad)?),
            Family::GradientBoostedTrees => Hyperparameters::GradientBoostedTrees(serde_json::from_value(v).map_err(bad)?),
            Family::Mlp => Hyperparameters::Mlp(serde_json::from_value(v).map_err(bad)?),
            Family::TabularResnet => Hyperparameters::TabularResnet(serde_json::from_value(v).map_err(bad)?),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn to_map(&self) -> Map<String, Value> {
        let v = match self {
            Hyperparameters::RandomForest(p) => serde_json::to_value(p),
            Hyperparameters::GradientBoostedTrees(p) => serde_json::to_value(p),
            Hyperparameters::Mlp(p) => serde_json::to_value(p),
            Hyperparameters::TabularResnet(p) => serde_json::to_value(p),
        };
        match v.unwrap() {
            Value::Object(m) => m,
            _ => unreachable!(),
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(m.to_string()));
        match self {
            Hyperparameters::RandomForest(p) => {
                if p.n_trees == 0 || p.max_depth == 0 || p.min_samples_split < 2 || p.max_features == Some(0) {
                    return fail("random forest needs n_trees, max_depth, max_features >= 1 and min_samples_split >= 2");
                }
            }
            Hyperparameters::GradientBoostedTrees(p) => {
                if p.n_rounds == 0 || p.max_depth == 0 || !(p.learning_rate > 0.0) || p.lambda < 0.0 || p.gamma < 0.0 {
                    return fail("boosting needs positive rounds, depth and learning rate and nonnegative lambda, gamma");
                }
            }
            Hyperparameters::Mlp(p) => {
                if p.hidden_layers.contains(&0) || p.batch_size == 0 || !(0.0..1.0).contains(&p.dropout) || !(p.learning_rate > 0.0) {
                    return fail("mlp needs nonzero layer sizes and batch size, dropout in [0, 1) and a positive learning rate");
                }
            }
            Hyperparameters::TabularResnet(p) => {
                if p.layer_size == 0 || p.batch_size == 0 || !(0.0..1.0).contains(&p.dropout) || !(p.learning_rate > 0.0) {
                    return fail("tabular resnet needs a nonzero layer size and batch size, dropout in [0, 1) and a positive learning rate");
                }
            }
        }
        Ok(())
    }
}

/// What to train. Serialized with every hyperparameter filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub task: Task,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SpecWire {
    family: Family,
    task: Task,
    #[serde(default)]
    hyperparameters: Map<String, Value>,
    #[serde(default)]
    seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family, task: Task, hyperparameters: &Map<String, Value>, seed: u64) -> Result<Self> {
        Ok(ModelSpec { family, task, hyperparameters: Hyperparameters::from_map(family, hyperparameters)?, seed })
    }

    pub fn with_defaults(family: Family, task: Task, seed: u64) -> Self {
        ModelSpec { family, task, hyperparameters: Hyperparameters::defaults(family), seed }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecWire { family: self.family, task: self.task, hyperparameters: self.hyperparameters.to_map(), seed: self.seed }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = SpecWire::deserialize(d)?;
        ModelSpec::new(w.family, w.task, &w.hyperparameters, w.seed).map_err(serde::de::Error::custom)
    }
}

/// The exact encoded column layout a model was trained on. Models are
/// comparable only when fingerprints are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureFingerprint {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub normalization: NormMethod,
    pub schema_hash: String,
}
