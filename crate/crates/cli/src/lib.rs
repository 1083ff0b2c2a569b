//! Command-line front end for `pshubert`: single runs with trace and summary
//! output, the corpus benchmark matrix, the bound calculator and numerical
//! self-checks.

pub mod app;
pub mod error;
pub mod matrix;
pub mod summary;
pub mod trace_csv;
pub mod verify;

pub use app::{execute, Cli, Status};
pub use error::CliError;
