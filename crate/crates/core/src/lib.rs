//! Numerical tools for variational problems whose Lagrangian depends on the
//! combined derivative `y'(t) + k·D^α y(t)`, where `D^α` is the left
//! Riemann–Liouville derivative of order `0 < α < 1`.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] – gamma, erfc and the two-parameter Mittag–Leffler function.
//! * [`quadrature`] – adaptive Gauss–Kronrod integration used by the above and
//!   by [`reference`].
//! * [`fracgrid`] – uniform grids, sampled functions, Grünwald–Letnikov
//!   fractional operators and classical difference/trapezoid stencils.
//! * [`lagrange_dsl`] – a small expression language for `F(t, y, v)` with exact
//!   symbolic partial derivatives.
//! * [`variational`] – functionals, Euler–Lagrange residuals and the discrete
//!   first variation.
//! * [`solver`] – direct-method minimisation, with a Lagrange-multiplier outer
//!   loop for isoperimetric constraints.
//! * [`reference`] – the Mittag–Leffler convolution extremal used to validate
//!   the solvers.

pub mod fracgrid;
pub mod lagrange_dsl;
pub mod quadrature;
pub mod reference;
pub mod solver;
pub mod special;
pub mod variational;

pub use fracgrid::{FracOperator, FracOrder, Grid, SampledFunction, Side};
pub use lagrange_dsl::{Expr, Lagrangian};
pub use reference::ReferenceSpec;
pub use solver::{Solution, SolverOptions};
pub use variational::{Constraint, Problem};
