//! Experiment harness for the FLARE simulator: configuration, the round
//! engine, repetitions with on-disk artifacts, summary reports and the CLI.

pub mod cli;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod output;
pub mod report;
