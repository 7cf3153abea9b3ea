//! Scenario runner and verification harness: loads JSON run configs, drives
//! the local and memory-kernel propagators and the closed forms, and writes
//! trajectories plus diagnostics.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod extract;
pub mod output;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use error::{CliError, CliResult};
