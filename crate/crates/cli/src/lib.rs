//! Command implementations behind the `reachguard` binary: data collection,
//! episode runs, reach-tube soundness verification, gradient checks, timing
//! benchmarks, and plot-data emission. The binary is a thin argument parser
//! over these functions so tests can drive them directly.

pub mod commands;
pub mod runconfig;

pub use runconfig::RunConfig;
