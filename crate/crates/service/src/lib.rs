//! HTTP API (`/api/v1`) and command-line driver around `sensiloop-core`.

pub mod cli;
mod error;
mod routes;
mod state;

pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, ConflictPolicy, ServiceConfig};

/// Version tag carried by every JSON payload.
pub const SCHEMA_VERSION: u32 = 1;
