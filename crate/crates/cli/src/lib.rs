//! Batch front-end for `fedosov-core`: loads a presentation, runs one suite
//! of exact checks and produces a JSON report.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, InputError};
pub use config::{Cli, Command, CommonArgs, GeodesicArgs};
pub use report::{Check, Report, Status, Tag};
