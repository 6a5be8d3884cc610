//! Engine for an interactive tabular modelling loop: data preparation, a small
//! zoo of natively implemented models, automated model selection, eFAST global
//! sensitivity analysis and LIME / Kernel SHAP local explanations.
//!
//! The [`session`] module ties everything together behind a transport-agnostic
//! state machine; [`pipeline`] runs the same steps headless from a config file.

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod gsa;
pub mod loss;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod session;

pub use error::{Error, Result};
pub use matrix::Matrix;
