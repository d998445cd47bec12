//! Parallel packet filter engines, file formats, benchmark harness and CLI
//! on top of [`parfw_core`].
//!
//! Four execution models classify a batch of packets against an ordered
//! ruleset: the sequential reference, data-parallel (packets split across
//! workers, each holding the full ruleset), function-parallel (every worker
//! sees every packet but holds a slice of the ruleset) and hybrid (one task
//! per packet, each fanned out over rule slices). All four must produce the
//! sequential first-match verdict for every packet.

pub mod bench;
pub mod cli;
pub mod engine;
pub mod error;
pub mod io;

pub use bench::{
    emit_csv, read_csv, run_point, run_sweep, Axis, BenchReport, SweepError, SweepRunError, SweepSpec,
};
pub use engine::{
    run, run_data_parallel, run_function_parallel, run_hybrid, Aggregator, ConfigError, Engine,
    EngineConfig, Model, MAX_NODES,
};
pub use error::Error;
pub use io::{load_ruleset, load_traffic, save_ruleset, save_traffic, TRAFFIC_HEADER};
