//! Deterministic discrete-event simulator for edge data dissemination.
//!
//! A cloud server pushes a data set, split into blocks, to `n` edge servers.
//! [`edgedis`] implements the majority-committed scheme with coordinator
//! repair; [`baselines`] holds the comparison schemes; [`experiment`] runs
//! parameter sweeps, the election benchmark and scripted scenarios.

pub mod baselines;
pub mod config;
pub mod edgedis;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod simnet;

pub use baselines::{run_scheme, RunOptions, RunOutcome, Scheme};
pub use config::RunConfig;
pub use error::Error;
pub use metrics::RunResult;
