//! Reference extremal of the isoperimetric problem
//!
//! ```text
//! minimise ∫₀^b (y' + k·D^α y)² dt   subject to   ∫₀^b (y' + k·D^α y) dt = ξ,
//! ```
//!
//! namely the solution of `y' + k·D^α y = ξ`, `y(0) = 0`:
//!
//! ```text
//! y(t) = ξ ∫₀^t E_{1−α,1}(−k s^{1−α}) ds.
//! ```
//!
//! Values are accumulated panel by panel over the grid with adaptive
//! Gauss–Kronrod quadrature. For `α > 1/2` the panel touching `s = 0` is
//! integrated in the variable `u = s^{1−α}`, which removes the steep
//! `s^{1−α}` onset of the kernel.

use std::cell::Cell;

use thiserror::Error;

use crate::fracgrid::{FracOrder, Grid, GridError, SampledFunction};
use crate::quadrature::{self, QuadError, QuadOptions};
use crate::special::{self, MLParams, SpecialError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("reference extremal needs a grid starting at 0, got a = {0}")]
    GridOrigin(f64),
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("Mittag-Leffler evaluation failed: {0}")]
    Special(#[from] SpecialError),
    #[error("quadrature failed: {0}")]
    Quadrature(QuadError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub k: f64,
    pub order: FracOrder,
    pub xi: f64,
    pub grid: Grid,
}

impl ReferenceSpec {
    pub fn new(k: f64, order: FracOrder, xi: f64, grid: Grid) -> Result<Self, ReferenceError> {
        if grid.a() != 0.0 {
            return Err(ReferenceError::GridOrigin(grid.a()));
        }
        for (name, value) in [("k", k), ("xi", xi)] {
            if !value.is_finite() {
                return Err(ReferenceError::NonFinite { name, value });
            }
        }
        Ok(Self { k, order, xi, grid })
    }
}

const PANEL_OPTS: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-13,
    max_intervals: 500,
};

/// `∫_{s0}^{s1} E_{1−α,1}(−k s^{1−α}) ds` (without the factor ξ).
struct Kernel {
    k: f64,
    beta_exp: f64,
    params: MLParams,
    substitute: bool,
}

impl Kernel {
    fn new(spec: &ReferenceSpec) -> Result<Self, ReferenceError> {
        let alpha = spec.order.alpha();
        Ok(Self {
            k: spec.k,
            beta_exp: 1.0 - alpha,
            params: MLParams::new(1.0 - alpha, 1.0)?,
            substitute: alpha > 0.5,
        })
    }

    fn integrate(&self, s0: f64, s1: f64) -> Result<f64, ReferenceError> {
        if self.k == 0.0 {
            return Ok(s1 - s0);
        }
        let failure: Cell<Option<SpecialError>> = Cell::new(None);
        let ml = |z: f64| match special::mittag_leffler(self.params, z) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };
        let result = if self.substitute && s0 == 0.0 {
            // s = u^{1/(1−α)}, ds = u^{α/(1−α)} du / (1−α)
            let p = 1.0 - self.beta_exp;
            let jac_pow = p / self.beta_exp;
            let inv = 1.0 / self.beta_exp;
            let u1 = s1.powf(self.beta_exp);
            quadrature::integrate(|u| inv * u.powf(jac_pow) * ml(-self.k * u), 0.0, u1, PANEL_OPTS)
        } else {
            quadrature::integrate(|s| ml(-self.k * s.powf(self.beta_exp)), s0, s1, PANEL_OPTS)
        };
        match (result, failure.take()) {
            (_, Some(e)) => Err(e.into()),
            (Ok(r), None) => Ok(r.value),
            (Err(e), None) => Err(ReferenceError::Quadrature(e)),
        }
    }
}

/// Samples of the reference extremal on `spec.grid`.
pub fn ml_convolution_extremal(spec: &ReferenceSpec) -> Result<SampledFunction, ReferenceError> {
    let kernel = Kernel::new(spec)?;
    let nodes = spec.grid.nodes();
    let mut values = Vec::with_capacity(nodes.len());
    values.push(0.0);
    let mut acc = 0.0;
    for w in nodes.windows(2) {
        acc += kernel.integrate(w[0], w[1])?;
        values.push(spec.xi * acc);
    }
    Ok(SampledFunction::new(spec.grid, values)?)
}

/// The extremal at `t = b`, computed as one adaptive integral over `[0, b]`
/// rather than by accumulating panels.
pub fn boundary_value(spec: &ReferenceSpec) -> Result<f64, ReferenceError> {
    let kernel = Kernel::new(spec)?;
    Ok(spec.xi * kernel.integrate(0.0, spec.grid.b())?)
}

/// The extremal for `k = 1`, `α = 1/2`:
/// `ξ(e^t·erfc(√t) − 1 + 2√(t/π))`.
pub fn closed_form_alpha_half(t: f64, xi: f64) -> f64 {
    let s = t.sqrt();
    xi * (t.exp() * special::erfc(s) - 1.0 + 2.0 * (t / std::f64::consts::PI).sqrt())
}
