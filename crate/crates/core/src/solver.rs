//! Direct-method solvers.
//!
//! The inner solver minimises the discrete functional over the interior node
//! values with L-BFGS. Its initial inverse Hessian is the Cholesky factor of
//! the exact Hessian at the starting point, so quadratic Lagrangians
//! converge in one step and others start well scaled. If that Hessian is not
//! positive definite a shifted factor, and finally a scaled identity, is
//! used instead.
//!
//! Isoperimetric problems wrap the inner solver in a scalar root-find on the
//! multiplier `λ`: minimise `∫ (F − λG)` for fixed `λ`, then adjust `λ`
//! until `∫ G = ξ`. The search starts with secant steps and switches to the
//! Illinois variant of regula falsi once a sign change is bracketed.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::fracgrid::SampledFunction;
use crate::lagrange_dsl::{BinaryOp, Expr, Var};
use crate::variational::{Problem, VariationalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineSearch {
    #[default]
    BacktrackingArmijo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Max-norm of the discrete gradient.
    pub grad_tol: f64,
    /// Bound on `|∫ G − ξ|`.
    pub constraint_tol: f64,
    pub line_search: LineSearch,
    /// Number of stored correction pairs.
    pub memory: usize,
    pub lambda_bracket: (f64, f64),
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-9,
            constraint_tol: 1e-9,
            line_search: LineSearch::BacktrackingArmijo,
            memory: 10,
            lambda_bracket: (-1e6, 1e6),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidOptions(what.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad("grad_tol must be positive");
        }
        if !(self.constraint_tol > 0.0 && self.constraint_tol.is_finite()) {
            return bad("constraint_tol must be positive");
        }
        if self.memory == 0 {
            return bad("memory must be at least 1");
        }
        let (lo, hi) = self.lambda_bracket;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("lambda_bracket must be a finite interval lo < hi");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub y: SampledFunction,
    /// `∫ F` at `y` (without the multiplier term).
    pub objective: f64,
    pub lambda: Option<f64>,
    /// Interior max-norm of the Euler–Lagrange residual.
    pub el_norm: f64,
    /// `∫ G − ξ` for constrained problems.
    pub constraint_residual: Option<f64>,
    /// Inner iterations, summed over all multiplier probes.
    pub iterations: usize,
    /// Multiplier probes (0 for unconstrained problems).
    pub outer_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("line search found no finite objective value at iteration {iteration}")]
    LineSearch { iteration: usize },
    #[error("constraint residual does not change sign for lambda in [{lo}, {hi}]; the constraint may be degenerate (every admissible y extremal for it)")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("inner minimisation did not converge at lambda = {lambda}")]
    InnerNonConvergence { lambda: f64, solution: Box<Solution> },
    #[error("problem has an isoperimetric constraint; use the isoperimetric solver")]
    UnexpectedConstraint,
    #[error("problem has no isoperimetric constraint")]
    MissingConstraint,
}

enum Precond {
    Cholesky(Cholesky<f64, Dyn>),
    Identity,
}

impl Precond {
    fn build(p: &Problem, y: &SampledFunction, lambda: f64) -> Result<Self, VariationalError> {
        let b = p.discrete_hessian(y, lambda)?;
        if let Some(c) = Cholesky::new(b.clone()) {
            return Ok(Precond::Cholesky(c));
        }
        let scale = b
            .diagonal()
            .iter()
            .fold(0.0, |m: f64, d| m.max(d.abs()))
            .max(f64::MIN_POSITIVE);
        let mut shift = 1e-10 * scale;
        for _ in 0..12 {
            let shifted = &b + DMatrix::identity(b.nrows(), b.ncols()) * shift;
            if let Some(c) = Cholesky::new(shifted) {
                return Ok(Precond::Cholesky(c));
            }
            shift *= 10.0;
        }
        Ok(Precond::Identity)
    }

    /// `H₀ q`; `gamma` scales the identity fallback.
    fn apply(&self, q: &[f64], gamma: f64) -> Vec<f64> {
        match self {
            Precond::Cholesky(c) => c.solve(&DVector::from_column_slice(q)).as_slice().to_vec(),
            Precond::Identity => q.iter().map(|x| gamma * x).collect(),
        }
    }
}

struct Inner {
    y: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(g: &[f64], hist: &VecDeque<Pair>, pre: &Precond) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for pair in hist.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = hist.back().map_or(1.0, |p| dot(&p.s, &p.y) / dot(&p.y, &p.y));
    let mut r = pre.apply(&q, gamma);
    for (pair, a) in hist.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * dot(&pair.y, &r);
        for (ri, si) in r.iter_mut().zip(&pair.s) {
            *ri += (a - b) * si;
        }
    }
    r
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const STALL_REL_DECREASE: f64 = 1e-14;
const STALL_ITERS: usize = 10;

/// Minimises `∫ (F − λG)` from the affine interpolant. `cache` holds a
/// preconditioner that may be reused when `reuse` is set.
fn minimize(
    p: &Problem,
    lambda: f64,
    opts: &SolverOptions,
    cache: &mut Option<Precond>,
    reuse: bool,
) -> Result<Inner, SolverError> {
    let start = p.linear_interpolant();
    let mut y = start.values().to_vec();
    let n = y.len();
    let (mut f, mut g) = p.objective_and_gradient(&y, lambda)?;
    if max_abs(&g) <= opts.grad_tol {
        return Ok(Inner {
            y,
            iterations: 0,
            converged: true,
        });
    }
    if cache.is_none() || !reuse {
        *cache = Some(Precond::build(p, &start, lambda)?);
    }
    let pre = cache.as_ref().expect("just built");

    let mut hist: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut stall = 0;
    let mut trial = y.clone();
    for iter in 1..=opts.max_iters {
        let mut d: Vec<f64> = two_loop(&g, &hist, pre).into_iter().map(|x| -x).collect();
        let mut slope = dot(&d, &g);
        if slope.is_nan() || slope >= 0.0 {
            hist.clear();
            d = pre.apply(&g, 1.0).into_iter().map(|x| -x).collect();
            slope = dot(&d, &g);
            if slope.is_nan() || slope >= 0.0 {
                d = g.iter().map(|x| -x).collect();
                slope = -dot(&g, &g);
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        let mut any_finite = false;
        for _ in 0..MAX_BACKTRACKS {
            for i in 1..n - 1 {
                trial[i] = y[i] + step * d[i - 1];
            }
            match p.objective_and_gradient(&trial, lambda) {
                Ok((ft, gt)) if ft.is_finite() => {
                    any_finite = true;
                    if ft <= f + ARMIJO_C1 * step * slope {
                        accepted = Some((ft, gt));
                        break;
                    }
                }
                Ok(_) | Err(VariationalError::Eval { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            step *= 0.5;
        }
        let Some((f_new, g_new)) = accepted else {
            if !any_finite {
                return Err(SolverError::LineSearch { iteration: iter });
            }
            return Ok(Inner {
                y,
                iterations: iter,
                converged: false,
            });
        };

        let s: Vec<f64> = (1..n - 1).map(|i| trial[i] - y[i]).collect();
        let yd: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yd);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&yd, &yd).sqrt() && sy > 0.0 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back(Pair {
                s,
                y: yd,
                rho: 1.0 / sy,
            });
        }

        if f - f_new < STALL_REL_DECREASE * f.abs() {
            stall += 1;
        } else {
            stall = 0;
        }
        y.copy_from_slice(&trial);
        f = f_new;
        g = g_new;
        if max_abs(&g) <= opts.grad_tol {
            return Ok(Inner {
                y,
                iterations: iter,
                converged: true,
            });
        }
        if stall >= STALL_ITERS {
            return Ok(Inner {
                y,
                iterations: iter,
                converged: false,
            });
        }
    }
    Ok(Inner {
        y,
        iterations: opts.max_iters,
        converged: false,
    })
}

/// Minimises the discrete functional of an unconstrained problem.
pub fn solve_unconstrained(p: &Problem, opts: &SolverOptions) -> Result<Solution, SolverError> {
    opts.validate()?;
    if p.constraint().is_some() {
        return Err(SolverError::UnexpectedConstraint);
    }
    let inner = minimize(p, 0.0, opts, &mut None, false)?;
    let y = SampledFunction::new(*p.grid(), inner.y).map_err(VariationalError::from)?;
    Ok(Solution {
        objective: p.functional_value(&y)?,
        el_norm: p.el_residual(&y, None)?.norm_max_interior,
        lambda: None,
        constraint_residual: None,
        iterations: inner.iterations,
        outer_iterations: 0,
        converged: inner.converged,
        y,
    })
}

/// `F = v^2` and `G = v`, for which the multiplier is close to `2ξ`.
fn is_quadratic_family(p: &Problem) -> bool {
    let Some(c) = p.constraint() else {
        return false;
    };
    let square = Expr::Binary(BinaryOp::Pow, Box::new(Expr::Var(Var::V)), Box::new(Expr::Const(2.0)));
    p.f().f == square && c.g.f == Expr::Var(Var::V)
}

struct Probe {
    lambda: f64,
    residual: f64,
    y: SampledFunction,
}

struct Outer<'a> {
    p: &'a Problem,
    opts: &'a SolverOptions,
    xi: f64,
    cache: Option<Precond>,
    reuse: bool,
    evaluations: usize,
    iterations: usize,
    best: Option<Probe>,
}

impl Outer<'_> {
    fn finish(&self, y: SampledFunction, lambda: f64, converged: bool) -> Result<Solution, SolverError> {
        let residual = self.p.constraint_value(&y)? - self.xi;
        Ok(Solution {
            objective: self.p.functional_value(&y)?,
            el_norm: self.p.el_residual(&y, Some(lambda))?.norm_max_interior,
            lambda: Some(lambda),
            constraint_residual: Some(residual),
            iterations: self.iterations,
            outer_iterations: self.evaluations,
            converged: converged && residual.abs() <= self.opts.constraint_tol,
            y,
        })
    }

    /// Constraint residual of the inner minimiser at `lambda`.
    fn eval(&mut self, lambda: f64) -> Result<f64, SolverError> {
        let inner = minimize(self.p, lambda, self.opts, &mut self.cache, self.reuse)?;
        self.evaluations += 1;
        self.iterations += inner.iterations;
        let y = SampledFunction::new(*self.p.grid(), inner.y).map_err(VariationalError::from)?;
        if !inner.converged {
            let solution = self.finish(y, lambda, false)?;
            return Err(SolverError::InnerNonConvergence {
                lambda,
                solution: Box::new(solution),
            });
        }
        let residual = self.p.constraint_value(&y)? - self.xi;
        let better = self.best.as_ref().is_none_or(|b| residual.abs() < b.residual.abs());
        if better {
            self.best = Some(Probe { lambda, residual, y });
        }
        Ok(residual)
    }

    fn done(&self, r: f64) -> bool {
        r.abs() <= self.opts.constraint_tol
    }

    fn best_solution(&mut self, converged: bool) -> Result<Solution, SolverError> {
        let best = self.best.take().expect("at least one probe");
        self.finish(best.y, best.lambda, converged)
    }
}

const MAX_SECANT: usize = 12;
const MAX_ILLINOIS: usize = 200;
const EXPANSION: f64 = 4.0;

/// Solves an isoperimetric problem, returning the extremal and multiplier.
pub fn solve_isoperimetric(p: &Problem, opts: &SolverOptions) -> Result<Solution, SolverError> {
    opts.validate()?;
    let c = p.constraint().ok_or(SolverError::MissingConstraint)?;
    let (lo, hi) = opts.lambda_bracket;
    let mut o = Outer {
        p,
        opts,
        xi: c.xi,
        cache: None,
        reuse: c.g.is_affine(),
        evaluations: 0,
        iterations: 0,
        best: None,
    };

    let lambda0 = if is_quadratic_family(p) { 2.0 * c.xi } else { 0.0 }.clamp(lo, hi);
    let r0 = o.eval(lambda0)?;
    if o.done(r0) {
        return o.best_solution(true);
    }
    let delta = (0.1 * lambda0.abs()).max(1.0);
    let mut lambda1 = lambda0 + delta;
    if lambda1 > hi {
        lambda1 = lambda0 - delta;
    }
    let lambda1 = lambda1.clamp(lo, hi);
    let r1 = o.eval(lambda1)?;
    if o.done(r1) {
        return o.best_solution(true);
    }

    // Secant phase.
    let (mut a, mut fa, mut b, mut fb) = (lambda0, r0, lambda1, r1);
    let mut bracket = None;
    for _ in 0..MAX_SECANT {
        if fa.signum() != fb.signum() {
            bracket = Some((a, fa, b, fb));
            break;
        }
        if fb == fa {
            break;
        }
        let next = b - fb * (b - a) / (fb - fa);
        if !next.is_finite() || next < lo || next > hi || next == b {
            break;
        }
        let fnext = o.eval(next)?;
        if o.done(fnext) {
            return o.best_solution(true);
        }
        (a, fa, b, fb) = (b, fb, next, fnext);
    }

    // Geometric expansion around the starting multiplier.
    if bracket.is_none() {
        let slope = (fb - fa) / (b - a);
        let first_dir = if slope != 0.0 && slope.is_finite() {
            -(r0 * slope).signum()
        } else {
            1.0
        };
        'dirs: for dir in [first_dir, -first_dir] {
            let (mut prev, mut fprev) = (lambda0, r0);
            let mut step = delta;
            loop {
                let cand = (lambda0 + dir * step).clamp(lo, hi);
                if cand == prev {
                    break;
                }
                let fc = o.eval(cand)?;
                if o.done(fc) {
                    return o.best_solution(true);
                }
                if fc.signum() != fprev.signum() {
                    bracket = Some((prev, fprev, cand, fc));
                    break 'dirs;
                }
                (prev, fprev) = (cand, fc);
                step *= EXPANSION;
            }
        }
    }
    let Some((mut a, mut fa, mut b, mut fb)) = bracket else {
        return Err(SolverError::BracketFailure { lo, hi });
    };

    // Illinois iterations on a sign-changing bracket.
    let mut kept = 0i8;
    for _ in 0..MAX_ILLINOIS {
        let cand = (a * fb - b * fa) / (fb - fa);
        if !cand.is_finite() || cand == a || cand == b {
            break;
        }
        let fc = o.eval(cand)?;
        if o.done(fc) {
            return o.best_solution(true);
        }
        if fc.signum() == fb.signum() {
            b = cand;
            fb = fc;
            if kept == -1 {
                fa *= 0.5;
            }
            kept = -1;
        } else {
            a = cand;
            fa = fc;
            if kept == 1 {
                fb *= 0.5;
            }
            kept = 1;
        }
    }
    o.best_solution(false)
}
