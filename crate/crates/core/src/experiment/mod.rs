//! Experiment harness: parameter sweeps, the scripted coordinator
//! uniqueness scenario and the election latency benchmark.

pub mod cli;
pub mod election;
pub mod scenario;
pub mod sweep;

pub use cli::{parse_config, Cli, Invocation};
pub use election::{measure_election, run_election_benchmark, ElectionReport, ElectionSample, ElectionSpec};
pub use scenario::{run_uniqueness_scenario, EventVerdict, ScenarioVerdict};
pub use sweep::{run_sweep, Axis, SweepReport, SweepRow, SweepSpec, CSV_COLUMNS};
