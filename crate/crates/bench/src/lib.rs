//! Harness around `sca-core`: run configuration, trace CSV files, instance and graph IO,
//! reference oracles, the experiment driver behind the `sca` binary, and the acceptance battery.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod io;
pub mod oracle;
pub mod trace;

pub use error::{BenchError, Result};
