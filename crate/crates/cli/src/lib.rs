//! Experiment harness: sweeps, training comparisons and the acceptance
//! suite, writing CSV and JSON.

pub mod adam;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod verify;
