//! Uniform grids, sampled functions and the discrete derivative operators
//! that act on them.
//!
//! Fractional derivatives use first-order Grünwald–Letnikov (GL) sums stored
//! as dense triangular matrices. The left operator at node `t_i` is
//!
//! ```text
//! (L y)_i = h^{-α} Σ_{j=0..i} w_j y_{i-j},      w_j = (-1)^j binom(α, j)
//! ```
//!
//! and the right operator mirrors it towards `b`. The left operator's row 0
//! and the right operator's row `n-1` sit on the endpoint where the
//! Riemann–Liouville derivative of a function that does not vanish there is
//! infinite; they are assembled like every other row but flagged, and callers
//! leave them out of norms.

use thiserror::Error;

use crate::special;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid interval [{a}, {b}]: need finite a < b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("a grid needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("value at node {index} is not finite")]
    NonFinite { index: usize },
    #[error("fractional order must lie in (0, 1), got {0}")]
    InvalidOrder(f64),
    #[error("operand lives on a different grid")]
    GridMismatch,
}

/// Uniform grid `t_i = a + i·h`, `i = 0..n-1`, with `t_{n-1} = b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(GridError::InvalidInterval { a, b });
        }
        if n < 3 {
            return Err(GridError::TooFewNodes(n));
        }
        Ok(Self {
            a,
            b,
            n,
            h: (b - a) / (n - 1) as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.b
        } else {
            self.a + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
}

/// Values of a real function at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n {
            return Err(GridError::LengthMismatch {
                expected: grid.n,
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self, GridError> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `c1·self + c2·other`.
    pub fn combine(&self, c1: f64, other: &Self, c2: f64) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| c1 * x + c2 * y)
            .collect();
        Self::new(self.grid, values)
    }

    /// Largest absolute value over nodes `1..n-1` (both endpoints excluded).
    pub fn max_abs_interior(&self) -> f64 {
        self.values[1..self.values.len() - 1]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fractional order `α` with `0 < α < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self, GridError> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(GridError::InvalidOrder(alpha))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// GL weights `w_0..w_{count-1}`: `w_0 = 1`, `w_j = w_{j-1}(1 - (α+1)/j)`.
///
/// These are the coefficients of `(1 - x)^α`; `alpha` is not restricted to
/// `(0, 1)` here.
pub fn gl_weights(alpha: f64, count: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(count);
    if count == 0 {
        return w;
    }
    w.push(1.0);
    for j in 1..count {
        let prev = w[j - 1];
        w.push(prev * (1.0 - (alpha + 1.0) / j as f64));
    }
    w
}

/// Dense triangular GL approximation of a left or right Riemann–Liouville
/// derivative on a fixed grid.
#[derive(Debug, Clone)]
pub struct FracOperator {
    grid: Grid,
    order: FracOrder,
    side: Side,
    /// `w_j · h^{-α}`; every matrix entry is one of these.
    scaled: Vec<f64>,
    /// Row-major `n × n`.
    weights: Vec<f64>,
}

impl FracOperator {
    pub fn assemble(grid: Grid, order: FracOrder, side: Side) -> Self {
        let n = grid.n;
        let scale = grid.h.powf(-order.alpha());
        let scaled: Vec<f64> = gl_weights(order.alpha(), n).into_iter().map(|w| w * scale).collect();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut weights[i * n..(i + 1) * n];
            match side {
                Side::Left => {
                    for j in 0..=i {
                        row[j] = scaled[i - j];
                    }
                }
                Side::Right => {
                    row[i..n].copy_from_slice(&scaled[..n - i]);
                }
            }
        }
        Self {
            grid,
            order,
            side,
            scaled,
            weights,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Index of the flagged endpoint row.
    pub fn boundary_row(&self) -> usize {
        match self.side {
            Side::Left => 0,
            Side::Right => self.grid.n - 1,
        }
    }

    pub fn is_boundary_row(&self, i: usize) -> bool {
        i == self.boundary_row()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.grid.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n;
        &self.weights[i * n..(i + 1) * n]
    }

    /// Columns of the nonzero band of row `i`.
    fn support(&self, i: usize) -> std::ops::Range<usize> {
        match self.side {
            Side::Left => 0..i + 1,
            Side::Right => i..self.grid.n,
        }
    }

    pub(crate) fn apply_slice(&self, f: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let cols = self.support(i);
            let row = &self.row(i)[cols.clone()];
            *o = row.iter().zip(&f[cols]).map(|(w, v)| w * v).sum();
        }
    }

    /// Plain matrix–vector product.
    pub fn apply(&self, f: &SampledFunction) -> Result<SampledFunction, GridError> {
        if f.grid != self.grid {
            return Err(GridError::GridMismatch);
        }
        let mut out = vec![0.0; self.grid.n];
        self.apply_slice(&f.values, &mut out);
        SampledFunction::new(self.grid, out)
    }

    /// Like [`apply`](Self::apply), but a left operator first splits off the
    /// endpoint value: `f = f(a) + (f − f(a))`, with the constant part
    /// differentiated exactly as `f(a)(t − a)^{−α}/Γ(1 − α)` at interior
    /// rows. The flagged row keeps the plain GL value. Right operators are
    /// applied unchanged.
    pub fn apply_with_boundary_split(&self, f: &SampledFunction) -> Result<SampledFunction, GridError> {
        if f.grid != self.grid {
            return Err(GridError::GridMismatch);
        }
        let mut out = vec![0.0; self.grid.n];
        self.apply_split_slice(&f.values, &mut out);
        SampledFunction::new(self.grid, out)
    }

    pub(crate) fn apply_split_slice(&self, f: &[f64], out: &mut [f64]) {
        let fa = f[0];
        if self.side == Side::Right || fa == 0.0 {
            self.apply_slice(f, out);
            return;
        }
        let alpha = self.order.alpha();
        // 1 - α ∈ (0, 1): never a pole
        let g = special::gamma(1.0 - alpha).expect("gamma on (0,1)");
        let shifted: Vec<f64> = f.iter().map(|v| v - fa).collect();
        self.apply_slice(&shifted, out);
        out[0] = self.scaled[0] * fa;
        for (i, o) in out.iter_mut().enumerate().skip(1) {
            let dt = self.grid.node(i) - self.grid.a;
            *o += fa * dt.powf(-alpha) / g;
        }
    }
}

/// Second-order central differences inside, second-order one-sided
/// differences at both ends.
pub fn classical_derivative(f: &SampledFunction) -> SampledFunction {
    let mut out = vec![0.0; f.len()];
    derivative_slice(&f.values, f.grid.h, &mut out);
    SampledFunction {
        grid: f.grid,
        values: out,
    }
}

pub(crate) fn derivative_slice(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let inv = 0.5 / h;
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
}

/// Composite trapezoid weights `h/2, h, …, h, h/2`.
pub fn trapezoid_weights(grid: &Grid) -> Vec<f64> {
    let mut w = vec![grid.h; grid.n];
    w[0] = 0.5 * grid.h;
    w[grid.n - 1] = 0.5 * grid.h;
    w
}

pub fn trapezoid_integral(f: &SampledFunction) -> f64 {
    trapezoid_weights(&f.grid)
        .iter()
        .zip(&f.values)
        .map(|(w, v)| w * v)
        .sum()
}
