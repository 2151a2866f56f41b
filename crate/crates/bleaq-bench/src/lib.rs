//! Benchmark harness around `bleaq-core`: experiment execution, report
//! aggregation, table emission, and the `bleaq` command-line interface.

pub mod aggregate;
pub mod cli;
pub mod experiment;
pub mod reference;
pub mod tables;
