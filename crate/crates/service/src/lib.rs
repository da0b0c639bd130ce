//! HTTP service and operator CLI for argument sufficiency assessment.

pub mod config;
pub mod server;
pub mod store;

pub use config::{Backends, ConfigError, ServiceConfig};
pub use server::{router, serve, AppState};
pub use store::{RunRecord, RunStatus, RunStore, RunSummary};
