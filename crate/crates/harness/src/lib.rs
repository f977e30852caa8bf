//! Experiment harness: dataset manifests, JSON configs, the experiment
//! runners behind each CLI verb, CSV reports and the synthetic benchmarks.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod report;
pub mod synth;
