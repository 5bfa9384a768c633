//! Benchmark harness: configures sweeps over the three experiment families, runs them in
//! parallel and emits aggregated tables.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod container;
pub mod error;
pub mod runner;
pub mod selftest;
pub mod table;

pub use config::{Cell, ExperimentConfig, Family, VariantKind};
pub use error::{BenchError, Result};
pub use runner::run_experiment;
pub use table::{emit_table, OutputFormat, RunRecord, RunTable, TableRow};
