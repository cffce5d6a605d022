//! Experiment harness for the extension-problem solvers: sectioned
//! key-value configs, manufactured or tabulated boundary data with seeded
//! noise, study sweeps, and deterministic CSV reports.

pub mod config;
pub mod noise;
pub mod run;
