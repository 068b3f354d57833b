//! Discretised functionals `J(y) = ∫ F(t, y, y' + k·D^α y) dt`, optional
//! isoperimetric constraints `∫ G(t, y, v) dt = ξ`, Euler–Lagrange residuals
//! and the exact gradient of the discrete functional.
//!
//! With a multiplier `λ` every quantity is built from `H = F − λG`. The
//! residual at node `i` is
//!
//! ```text
//! r_i = ∂_y H − D_c[∂_v H]_i + k·(R ∂_v H)_i
//! ```
//!
//! where `D_c` is the classical difference stencil and `R` the right GL
//! operator. Norms skip both endpoints.
//!
//! The functional itself is discretised cell by cell with the midpoint rule:
//! on `[t_c, t_{c+1}]` the integrand is evaluated at `t_{c+½}` with the cell
//! average of `y` and
//!
//! ```text
//! v_{c+½} = (y_{c+1} − y_c)/h + k·((L y)_c + (L y)_{c+1})/2.
//! ```
//!
//! Unlike nodal central differences this has no odd/even null mode, so for
//! `F = v²`, `k = 0` the discrete minimiser is exactly the straight line.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::fracgrid::{self, derivative_slice, FracOperator, FracOrder, Grid, GridError, SampledFunction, Side};
use crate::lagrange_dsl::{EvalError, Lagrangian};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("at evaluation point {index} (t = {t}): {source}")]
    Eval {
        index: usize,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("problem has no isoperimetric constraint")]
    MissingConstraint,
    #[error("a multiplier is required because the problem has a constraint")]
    MissingLambda,
    #[error("a multiplier was given but the problem has no constraint")]
    UnexpectedLambda,
    #[error("boundary value at {side} is {found}, expected {expected}")]
    BoundaryMismatch {
        side: &'static str,
        expected: f64,
        found: f64,
    },
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },
}

/// Isoperimetric constraint `∫ G dt = xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub g: Lagrangian,
    pub xi: f64,
}

#[derive(Debug, Clone)]
pub struct Problem {
    f: Lagrangian,
    constraint: Option<Constraint>,
    k: f64,
    order: FracOrder,
    grid: Grid,
    ya: f64,
    yb: f64,
    left: FracOperator,
    right: FracOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedDerivative {
    pub v: SampledFunction,
    pub yprime: SampledFunction,
    pub frac: SampledFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ELResidual {
    pub values: SampledFunction,
    pub norm_max_interior: f64,
    pub norm_l2_interior: f64,
}

impl ELResidual {
    fn from_values(values: SampledFunction) -> Self {
        let h = values.grid().h();
        let inner = &values.values()[1..values.len() - 1];
        let norm_max_interior = inner.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
        let norm_l2_interior = (h * inner.iter().map(|r| r * r).sum::<f64>()).sqrt();
        Self {
            values,
            norm_max_interior,
            norm_l2_interior,
        }
    }

    /// Max-norm over interior nodes with `t_lo ≤ t ≤ t_hi`. Returns 0 when
    /// no interior node falls in the window.
    pub fn max_abs_on(&self, t_lo: f64, t_hi: f64) -> f64 {
        let g = *self.values.grid();
        let n = g.n();
        (1..n - 1)
            .filter(|&i| (t_lo..=t_hi).contains(&g.node(i)))
            .fold(0.0, |m: f64, i| m.max(self.values.values()[i].abs()))
    }
}

struct Cells {
    t: Vec<f64>,
    y: Vec<f64>,
    v: Vec<f64>,
}

/// Values of `H`, `∂_y H` and `∂_v H` at a set of points.
struct Nodal {
    h: Vec<f64>,
    hy: Vec<f64>,
    hv: Vec<f64>,
}

impl Problem {
    pub fn new(
        f: Lagrangian,
        constraint: Option<Constraint>,
        k: f64,
        order: FracOrder,
        grid: Grid,
        ya: f64,
        yb: f64,
    ) -> Result<Self, VariationalError> {
        for (name, value) in [("k", k), ("ya", ya), ("yb", yb)] {
            if !value.is_finite() {
                return Err(VariationalError::NonFiniteParameter { name, value });
            }
        }
        if let Some(c) = &constraint {
            if !c.xi.is_finite() {
                return Err(VariationalError::NonFiniteParameter {
                    name: "xi",
                    value: c.xi,
                });
            }
        }
        Ok(Self {
            f,
            constraint,
            k,
            order,
            grid,
            ya,
            yb,
            left: FracOperator::assemble(grid, order, Side::Left),
            right: FracOperator::assemble(grid, order, Side::Right),
        })
    }

    pub fn f(&self) -> &Lagrangian {
        &self.f
    }

    pub fn constraint(&self) -> Option<&Constraint> {
        self.constraint.as_ref()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ya(&self) -> f64 {
        self.ya
    }

    pub fn yb(&self) -> f64 {
        self.yb
    }

    pub fn left_operator(&self) -> &FracOperator {
        &self.left
    }

    pub fn right_operator(&self) -> &FracOperator {
        &self.right
    }

    /// Same problem with the boundary value at `b` replaced.
    pub fn with_yb(mut self, yb: f64) -> Result<Self, VariationalError> {
        if !yb.is_finite() {
            return Err(VariationalError::NonFiniteParameter { name: "yb", value: yb });
        }
        self.yb = yb;
        Ok(self)
    }

    /// The affine interpolant of the boundary data.
    pub fn linear_interpolant(&self) -> SampledFunction {
        let g = self.grid;
        let (a, len) = (g.a(), g.b() - g.a());
        let mut vals: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&t| self.ya + (self.yb - self.ya) * (t - a) / len)
            .collect();
        vals[0] = self.ya;
        vals[g.n() - 1] = self.yb;
        SampledFunction::new(g, vals).expect("finite boundary data")
    }

    fn check_grid(&self, y: &SampledFunction) -> Result<(), VariationalError> {
        if *y.grid() != self.grid {
            return Err(GridError::GridMismatch.into());
        }
        Ok(())
    }

    fn check_boundary(&self, y: &[f64]) -> Result<(), VariationalError> {
        let n = y.len();
        for (side, expected, found) in [("a", self.ya, y[0]), ("b", self.yb, y[n - 1])] {
            if (found - expected).abs() > 1e-12 * (1.0 + expected.abs()) {
                return Err(VariationalError::BoundaryMismatch { side, expected, found });
            }
        }
        Ok(())
    }

    fn lambda_factor(&self, lambda: Option<f64>) -> Result<f64, VariationalError> {
        match (&self.constraint, lambda) {
            (Some(_), Some(l)) => Ok(l),
            (Some(_), None) => Err(VariationalError::MissingLambda),
            (None, Some(_)) => Err(VariationalError::UnexpectedLambda),
            (None, None) => Ok(0.0),
        }
    }

    pub(crate) fn combined_slice(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut v = vec![0.0; n];
        derivative_slice(y, self.grid.h(), &mut v);
        if self.k != 0.0 {
            let mut frac = vec![0.0; n];
            self.left.apply_split_slice(y, &mut frac);
            for (vi, fi) in v.iter_mut().zip(&frac) {
                *vi += self.k * fi;
            }
        }
        v
    }

    pub fn combined_derivative(&self, y: &SampledFunction) -> Result<CombinedDerivative, VariationalError> {
        self.check_grid(y)?;
        let yprime = fracgrid::classical_derivative(y);
        let frac = self.left.apply_with_boundary_split(y)?;
        let v = yprime.combine(1.0, &frac, self.k)?;
        Ok(CombinedDerivative { v, yprime, frac })
    }

    /// Cell midpoints `t_{c+½}`, cell averages of `y` and cell values of `v`
    /// for `c = 0..n-2`.
    fn cells(&self, y: &[f64]) -> Cells {
        let n = y.len();
        let h = self.grid.h();
        let mut frac = vec![0.0; n];
        if self.k != 0.0 {
            self.left.apply_split_slice(y, &mut frac);
        }
        let mut out = Cells {
            t: Vec::with_capacity(n - 1),
            y: Vec::with_capacity(n - 1),
            v: Vec::with_capacity(n - 1),
        };
        for c in 0..n - 1 {
            out.t.push(self.grid.a() + (c as f64 + 0.5) * h);
            out.y.push(0.5 * (y[c] + y[c + 1]));
            out.v
                .push((y[c + 1] - y[c]) / h + self.k * 0.5 * (frac[c] + frac[c + 1]));
        }
        out
    }

    fn integrate(&self, l: &Lagrangian, y: &[f64]) -> Result<f64, VariationalError> {
        let cells = self.cells(y);
        let mut sum = 0.0;
        for c in 0..cells.t.len() {
            let (t, yc, vc) = (cells.t[c], cells.y[c], cells.v[c]);
            sum += l.f.evaluate(t, yc, vc).map_err(eval_err(c, t))?;
        }
        Ok(self.grid.h() * sum)
    }

    /// Discrete `∫ F dt` (composite midpoint rule over grid cells).
    pub fn functional_value(&self, y: &SampledFunction) -> Result<f64, VariationalError> {
        self.check_grid(y)?;
        self.integrate(&self.f, y.values())
    }

    /// Discrete `∫ G dt`, discretised like [`functional_value`](Self::functional_value).
    pub fn constraint_value(&self, y: &SampledFunction) -> Result<f64, VariationalError> {
        let c = self.constraint.as_ref().ok_or(VariationalError::MissingConstraint)?;
        self.check_grid(y)?;
        self.integrate(&c.g, y.values())
    }

    /// `H`, `∂_y H`, `∂_v H` for `H = F − λG` at the given points (just `F`
    /// when `lambda == 0`).
    fn partials(&self, t: &[f64], y: &[f64], v: &[f64], lambda: f64) -> Result<Nodal, VariationalError> {
        let n = y.len();
        let mut out = Nodal {
            h: vec![0.0; n],
            hy: vec![0.0; n],
            hv: vec![0.0; n],
        };
        for i in 0..n {
            let pf = self.f.partials(t[i], y[i], v[i]).map_err(eval_err(i, t[i]))?;
            out.h[i] = pf.f;
            out.hy[i] = pf.d2;
            out.hv[i] = pf.d3;
            if let Some(c) = &self.constraint {
                if lambda != 0.0 {
                    let pg = c.g.partials(t[i], y[i], v[i]).map_err(eval_err(i, t[i]))?;
                    out.h[i] -= lambda * pg.f;
                    out.hy[i] -= lambda * pg.d2;
                    out.hv[i] -= lambda * pg.d3;
                }
            }
        }
        Ok(out)
    }

    fn residual_from(&self, hy: &[f64], hv: &[f64]) -> Result<ELResidual, VariationalError> {
        let n = hy.len();
        let mut dhv = vec![0.0; n];
        derivative_slice(hv, self.grid.h(), &mut dhv);
        let mut rhv = vec![0.0; n];
        if self.k != 0.0 {
            self.right.apply_slice(hv, &mut rhv);
        }
        let r: Vec<f64> = (0..n).map(|i| hy[i] - dhv[i] + self.k * rhv[i]).collect();
        let values = SampledFunction::new(self.grid, r).map_err(VariationalError::Grid)?;
        Ok(ELResidual::from_values(values))
    }

    /// Euler–Lagrange residual of `F` (no constraint) or of `F − λG`, with
    /// `v` from [`combined_derivative`](Self::combined_derivative).
    pub fn el_residual(&self, y: &SampledFunction, lambda: Option<f64>) -> Result<ELResidual, VariationalError> {
        let lambda = self.lambda_factor(lambda)?;
        self.check_grid(y)?;
        let v = self.combined_slice(y.values());
        let nodal = self.partials(&self.grid.nodes(), y.values(), &v, lambda)?;
        self.residual_from(&nodal.hy, &nodal.hv)
    }

    /// Euler–Lagrange residual built from `G` alone.
    pub fn constraint_el_residual(&self, y: &SampledFunction) -> Result<ELResidual, VariationalError> {
        let c = self.constraint.as_ref().ok_or(VariationalError::MissingConstraint)?;
        self.check_grid(y)?;
        let v = self.combined_slice(y.values());
        let n = y.len();
        let (mut gy, mut gv) = (vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let t = self.grid.node(i);
            let p = c.g.partials(t, y.values()[i], v[i]).map_err(eval_err(i, t))?;
            gy[i] = p.d2;
            gv[i] = p.d3;
        }
        self.residual_from(&gy, &gv)
    }

    /// Value and interior gradient of the discrete `∫ (F − λG) dt` at a full
    /// nodal vector.
    pub(crate) fn objective_and_gradient(&self, y: &[f64], lambda: f64) -> Result<(f64, Vec<f64>), VariationalError> {
        let n = y.len();
        let h = self.grid.h();
        let cells = self.cells(y);
        let p = self.partials(&cells.t, &cells.y, &cells.v, lambda)?;
        let value = h * p.h.iter().sum::<f64>();

        let mut grad = vec![0.0; n];
        // averaging (y) and forward-difference (v) parts
        for c in 0..n - 1 {
            let ay = 0.5 * h * p.hy[c];
            grad[c] += ay - p.hv[c];
            grad[c + 1] += ay + p.hv[c];
        }
        if self.k != 0.0 {
            // k·Lᵀ·Aᵀ(h ∂_v H), with Lᵀ exactly the right operator
            let mut z = vec![0.0; n];
            for c in 0..n - 1 {
                let half = 0.5 * h * p.hv[c];
                z[c] += half;
                z[c + 1] += half;
            }
            let mut lt = vec![0.0; n];
            self.right.apply_slice(&z, &mut lt);
            for (g, l) in grad.iter_mut().zip(&lt) {
                *g += self.k * l;
            }
        }
        Ok((value, grad[1..n - 1].to_vec()))
    }

    /// Gradient of the discrete functional with respect to `y_1..y_{n-2}`.
    pub fn discrete_gradient(&self, y: &SampledFunction) -> Result<Vec<f64>, VariationalError> {
        self.discrete_gradient_with(y, None)
    }

    /// Gradient of the discrete `∫ (F − λG) dt`; `lambda` follows the same
    /// rules as in [`el_residual`](Self::el_residual).
    pub fn discrete_gradient_with(
        &self,
        y: &SampledFunction,
        lambda: Option<f64>,
    ) -> Result<Vec<f64>, VariationalError> {
        let lambda = self.lambda_factor(lambda.or(self.constraint.as_ref().map(|_| 0.0)))?;
        self.check_grid(y)?;
        self.check_boundary(y.values())?;
        Ok(self.objective_and_gradient(y.values(), lambda)?.1)
    }

    /// Jacobians of the cell averages and cell `v` with respect to the
    /// interior node values, both `(n−1) × (n−2)`.
    fn cell_jacobians(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.grid.n();
        let h = self.grid.h();
        let mut avg = DMatrix::zeros(n - 1, n - 2);
        let mut m = DMatrix::zeros(n - 1, n - 2);
        if self.k != 0.0 {
            for c in 0..n - 1 {
                for j in 1..=(c + 1).min(n - 2) {
                    m[(c, j - 1)] = self.k * 0.5 * (self.left.entry(c, j) + self.left.entry(c + 1, j));
                }
            }
        }
        for c in 0..n - 1 {
            if c >= 1 {
                avg[(c, c - 1)] = 0.5;
                m[(c, c - 1)] -= 1.0 / h;
            }
            if c < n - 2 {
                avg[(c, c)] = 0.5;
                m[(c, c)] += 1.0 / h;
            }
        }
        (avg, m)
    }

    /// Hessian of the discrete `∫ (F − λG) dt` with respect to the interior
    /// node values. `lambda` is ignored without a constraint.
    pub fn discrete_hessian(&self, y: &SampledFunction, lambda: f64) -> Result<DMatrix<f64>, VariationalError> {
        self.check_grid(y)?;
        let n = y.len();
        let h = self.grid.h();
        let cells = self.cells(y.values());
        let (mut hyy, mut hyv, mut hvv) = (vec![0.0; n - 1], vec![0.0; n - 1], vec![0.0; n - 1]);
        for c in 0..n - 1 {
            let (t, yc, vc) = (cells.t[c], cells.y[c], cells.v[c]);
            let s = self.f.second_partials(t, yc, vc).map_err(eval_err(c, t))?;
            hyy[c] = h * s.d22;
            hyv[c] = h * s.d23;
            hvv[c] = h * s.d33;
            if let Some(g) = &self.constraint {
                if lambda != 0.0 && !g.g.is_affine() {
                    let s = g.g.second_partials(t, yc, vc).map_err(eval_err(c, t))?;
                    hyy[c] -= lambda * h * s.d22;
                    hyv[c] -= lambda * h * s.d23;
                    hvv[c] -= lambda * h * s.d33;
                }
            }
        }
        let (avg, m) = self.cell_jacobians();
        let scaled = |d: &[f64], x: &DMatrix<f64>| {
            let mut out = x.clone();
            for (c, s) in d.iter().enumerate() {
                out.row_mut(c).scale_mut(*s);
            }
            out
        };
        let mut b = m.tr_mul(&scaled(&hvv, &m));
        if hyy.iter().any(|&x| x != 0.0) {
            b += avg.tr_mul(&scaled(&hyy, &avg));
        }
        if hyv.iter().any(|&x| x != 0.0) {
            let cross = avg.tr_mul(&scaled(&hyv, &m));
            b += &cross + cross.transpose();
        }
        Ok(b)
    }
}

fn eval_err(index: usize, t: f64) -> impl Fn(EvalError) -> VariationalError {
    move |source| VariationalError::Eval { index, t, source }
}
