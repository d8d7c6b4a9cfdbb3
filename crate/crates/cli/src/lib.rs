//! Command-line front end: config loading, frame containers, reports and
//! annotated output.

pub mod commands;
pub mod config;
pub mod error;
pub mod frameio;
pub mod render;
pub mod report;

pub use commands::{run, Cli};
pub use error::{code, Failure};
