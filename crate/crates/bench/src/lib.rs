//! Benchmark harness: runs drafting strategies over prompt sets, checks every
//! run against vanilla greedy decoding, and reports call accounting plus a
//! modeled speedup.

pub mod config;
pub mod experiment;
pub mod prompts;
pub mod table;

pub use config::{ExperimentConfig, OutputFormat, Overrides, StrategyKind, CONFIG_ENV};
pub use experiment::{
    parse_grid, run_experiment, sweep, ExperimentReport, GridValue, StrategyRow, SweepParam,
    SweepTable, METRIC_COLUMNS,
};
pub use table::Table;
