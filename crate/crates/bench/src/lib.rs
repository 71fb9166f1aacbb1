//! Benchmark harness for `fmbs-core`: matrix files, averaged-MSE experiments,
//! timing sweeps and the `fmbs` command line.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod io;
pub mod scaling;

pub use error::{BenchError, Result};
