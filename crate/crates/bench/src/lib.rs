//! Training, simulation and benchmark harness for sdl-core.

pub mod baselines;
pub mod commands;
pub mod config;
pub mod experiments;
