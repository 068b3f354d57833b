//! JSON problem files.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "a": 0.0, "b": 1.0, "alpha": 0.5, "k": 1.0,
//!   "F": "v^2", "G": "v", "xi": 1.0,
//!   "ya": 0.0, "yb": "auto-reference",
//!   "n": 1001,
//!   "solver": { "grad_tol": 1e-9 }
//! }
//! ```

use std::fmt;
use std::path::Path;

use mixfrac::fracgrid::{FracOrder, Grid};
use mixfrac::lagrange_dsl::{BinaryOp, Expr, Lagrangian, Var};
use mixfrac::reference::{boundary_value, ReferenceSpec};
use mixfrac::solver::{LineSearch, SolverOptions};
use mixfrac::variational::{Constraint, Problem};
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Right boundary value: a number or the reference extremal's value at `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryValue {
    Value(f64),
    AutoReference,
}

impl<'de> Deserialize<'de> for BoundaryValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = BoundaryValue;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"auto-reference\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(BoundaryValue::Value(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(BoundaryValue::Value(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(BoundaryValue::Value(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "auto-reference" {
                    Ok(BoundaryValue::AutoReference)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearchName {
    BacktrackingArmijo,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub constraint_tol: Option<f64>,
    pub line_search: Option<LineSearchName>,
    pub memory: Option<usize>,
    pub lambda_bracket: Option<[f64; 2]>,
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            constraint_tol: self.constraint_tol.unwrap_or(d.constraint_tol),
            line_search: match self.line_search {
                Some(LineSearchName::BacktrackingArmijo) | None => LineSearch::BacktrackingArmijo,
            },
            memory: self.memory.unwrap_or(d.memory),
            lambda_bracket: self.lambda_bracket.map_or(d.lambda_bracket, |[lo, hi]| (lo, hi)),
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub k: f64,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "G", default)]
    pub g: Option<String>,
    #[serde(default)]
    pub xi: Option<f64>,
    pub ya: f64,
    pub yb: BoundaryValue,
    pub n: usize,
    #[serde(default)]
    pub solver: Option<SolverSection>,
}

/// A validated problem file, ready to solve.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub problem: Problem,
    pub options: SolverOptions,
    /// `true` when the file describes `F = v^2`, `G = v` with `y(0) = 0` and
    /// `y(b)` equal to the reference boundary value.
    pub reference_family: bool,
}

impl ProblemFile {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// Validates the file and builds the problem on `n` nodes (the file's
    /// own `n` unless overridden).
    pub fn load(&self, n_override: Option<usize>) -> Result<Loaded, CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "unsupported schema {} (this build reads schema {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Schema(format!(
                "`alpha` = {} is outside the open interval (0, 1)",
                self.alpha
            )));
        }
        let order = FracOrder::new(self.alpha)?;
        let grid = Grid::new(self.a, self.b, n_override.unwrap_or(self.n))?;
        let f = Lagrangian::parse(&self.f).map_err(|source| CliError::Expression { key: "F", source })?;
        let constraint = match (&self.g, self.xi) {
            (Some(g), Some(xi)) => Some(Constraint {
                g: Lagrangian::parse(g).map_err(|source| CliError::Expression { key: "G", source })?,
                xi,
            }),
            (None, None) => None,
            (Some(_), None) => return Err(CliError::Schema("`G` is given without `xi`".into())),
            (None, Some(_)) => return Err(CliError::Schema("`xi` is given without `G`".into())),
        };
        let yb = match self.yb {
            BoundaryValue::Value(v) => v,
            BoundaryValue::AutoReference => {
                let xi = self
                    .xi
                    .ok_or_else(|| CliError::Schema("`yb` = \"auto-reference\" needs `xi`".into()))?;
                boundary_value(&ReferenceSpec::new(self.k, order, xi, grid)?)?
            }
        };
        let options = self.solver.clone().unwrap_or_default().options();
        options.validate()?;
        let quadratic = f.f == Expr::Binary(BinaryOp::Pow, Box::new(Expr::Var(Var::V)), Box::new(Expr::Const(2.0)))
            && constraint.as_ref().is_some_and(|c| c.g.f == Expr::Var(Var::V));
        let reference_family = quadratic && self.a == 0.0 && self.ya == 0.0 && self.yb == BoundaryValue::AutoReference;
        let problem = Problem::new(f, constraint, self.k, order, grid, self.ya, yb)?;
        Ok(Loaded {
            problem,
            options,
            reference_family,
        })
    }
}
