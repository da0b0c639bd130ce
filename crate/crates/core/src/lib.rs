//! Argument sufficiency assessment.
//!
//! An argument is judged sufficient when forcing its premise to hold, in
//! situations where neither the premise nor the conclusion holds, makes the
//! conclusion follow. The situations are sampled from an LLM, revised to
//! contain the premise, and scored with an NLI model.

pub mod assistance;
pub mod backends;
pub mod baselines;
pub mod concurrency;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod prompts;
pub mod textproc;
pub mod types;

pub use error::{CasaError, Result};
pub use types::*;
