//! Experiment runner for the AIMD utility-maximization library: config
//! parsing, seeded runs with CSV/JSON artifacts, and analysis reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod commands;
pub mod config;
pub mod experiment;

pub use config::{parse_config, parse_config_str, ExperimentSpec, Variant};
pub use experiment::{run_experiment, Summary};
