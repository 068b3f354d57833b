//! Command-line front end: problem files, solves, residual checks, reference
//! extremals and refinement studies.

pub mod commands;
pub mod error;
pub mod problem_file;

pub use error::CliError;
pub use problem_file::{Loaded, ProblemFile};
