//! Library half of the `koopman` command-line tool.
//!
//! The binary itself is a thin argument-parsing shell; everything it does
//! lives here so it can be tested directly:
//!
//! - [`parse`] — the line-oriented system-definition grammar,
//! - [`report`] — the versioned JSON analysis report and the rebuild path
//!   from a report back to evaluable eigenfunctions,
//! - [`grid`] — the CSV contour-grid emitter,
//! - [`commands`] — the `analyze-fp`, `analyze-lc`, `emit-grid`, and
//!   `verify` pipelines.

pub mod commands;
pub mod grid;
pub mod parse;
pub mod report;

pub use commands::{CliError, GlobalOpts};
pub use parse::{parse_system, SystemDefinition};
pub use report::Report;
