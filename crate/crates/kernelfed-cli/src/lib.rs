//! Experiment harness around the `kernelfed` library: dataset generation,
//! single runs, the three sweeps, and the theory-validation suite.

pub mod checks;
pub mod commands;
pub mod config;
pub mod sweeps;
