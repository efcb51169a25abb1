//! IO companion for the shepherding simulator: CLI commands, config and
//! result files, and SVG figure emission.

pub mod charts;
pub mod commands;
pub mod files;
pub mod svg;

pub use commands::{main_impl, run_sweep_parallel};
pub use files::RunRecord;
