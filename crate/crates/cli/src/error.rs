use std::path::PathBuf;

use mixfrac::fracgrid::GridError;
use mixfrac::lagrange_dsl::ParseError;
use mixfrac::reference::ReferenceError;
use mixfrac::solver::SolverError;
use mixfrac::variational::VariationalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("problem file {}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("problem file: {0}")]
    Schema(String),
    #[error("problem file key `{key}`: {source}")]
    Expression { key: &'static str, source: ParseError },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
}

fn variational_code(e: &VariationalError) -> u8 {
    match e {
        VariationalError::Eval { .. } => 4,
        _ => 2,
    }
}

impl CliError {
    /// 2 for bad input, 3 for a solve that did not converge, 4 for a
    /// numeric domain failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Variational(e) => variational_code(e),
            CliError::Solver(e) => match e {
                SolverError::Variational(v) => variational_code(v),
                SolverError::LineSearch { .. }
                | SolverError::BracketFailure { .. }
                | SolverError::InnerNonConvergence { .. } => 3,
                SolverError::InvalidOptions(_) | SolverError::UnexpectedConstraint | SolverError::MissingConstraint => {
                    2
                }
            },
            CliError::Reference(e) => match e {
                ReferenceError::Special(_) | ReferenceError::Quadrature(_) => 4,
                ReferenceError::GridOrigin(_) | ReferenceError::NonFinite { .. } | ReferenceError::Grid(_) => 2,
            },
            _ => 2,
        }
    }
}
