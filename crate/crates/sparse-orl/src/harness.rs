//! Experiment harness: coverage metrics, seeded sweeps, and the CLI.

pub mod cli;
pub mod metrics;
pub mod sweep;
