//! Command-line front end of the receiver-network simulator: scenario
//! files, presets, Monte-Carlo batches and the CSV/JSON outputs.

pub mod config;
pub mod output;
pub mod run;
