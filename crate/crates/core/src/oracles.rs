//! Closed-form solutions for the two solvable drift families.
//!
//! Everything here is evaluated directly from its formula; nothing in this
//! module integrates or differentiates numerically. The numeric cascade and
//! the reference solvers are checked against these values, so they must not
//! share code paths with them.
//!
//! Integration constants follow one convention throughout: terms growing like
//! `x/t` are dropped (they are not finite as `t -> 0`) and additive constants
//! in the action are dropped (they only rescale the density).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionExpansion, DensityField, DriftFamily, DriftSpec, Grid, Quantity, ScalarField};

/// Time modulation `V(t)` of the linear drift potential `U = lambda * x * V(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModulationV {
    Cos { omega: f64 },
    Sin { omega: f64 },
    Const { v0: f64 },
}

impl ModulationV {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ModulationV::Cos { omega } => (omega * t).cos(),
            ModulationV::Sin { omega } => (omega * t).sin(),
            ModulationV::Const { v0 } => v0,
        }
    }

    /// `dV/dt`.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            ModulationV::Cos { omega } => -omega * (omega * t).sin(),
            ModulationV::Sin { omega } => omega * (omega * t).cos(),
            ModulationV::Const { .. } => 0.0,
        }
    }

    /// Antiderivative normalized so that it vanishes at `t = 0`.
    ///
    /// For `sin` this is `(1 - cos wt)/w`, i.e. the indefinite integral plus
    /// `1/w`, which keeps `S1` finite as `t -> 0`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            ModulationV::Cos { omega } => (omega * t).sin() / omega,
            ModulationV::Sin { omega } => (1.0 - (omega * t).cos()) / omega,
            ModulationV::Const { v0 } => v0 * t,
        }
    }
}

/// A Gaussian described by its first two moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    pub fn pdf(&self, x: f64) -> f64 {
        let z = x - self.mean;
        (-z * z / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }
}

/// Heat kernel `(4 pi D t)^(-1/2) exp(-x^2 / 4Dt)`.
pub fn w0_diffusion(x: f64, t: f64, d: f64) -> f64 {
    (-x * x / (4.0 * d * t)).exp() / (4.0 * PI * d * t).sqrt()
}

/// Zeroth-order action `S0 = -(D/2) ln(4 pi D t) - x^2/4t`, so that `exp(S0/D)` is the heat kernel.
pub fn s0_value(x: f64, t: f64, d: f64) -> f64 {
    -0.5 * d * (4.0 * PI * d * t).ln() - x * x / (4.0 * t)
}

/// `S1 = (x/2) V(t) - (x/2t) Vbar(t)` for `U = lambda x V(t)`.
pub fn example1_s1(x: f64, t: f64, v: &ModulationV) -> f64 {
    0.5 * x * (v.value(t) - v.integral(t) / t)
}

/// `S2 = -Vbar(t)^2 / 4t` for `U = lambda x V(t)`; independent of x.
pub fn example1_s2(t: f64, v: &ModulationV) -> f64 {
    let vbar = v.integral(t);
    -vbar * vbar / (4.0 * t)
}

/// Exact density for `U = lambda x V(t)`: the heat kernel translated by `-lambda Vbar(t)`.
pub fn example1_density_exact(x: f64, t: f64, d: f64, lambda: f64, v: &ModulationV) -> f64 {
    if lambda == 0.0 {
        return w0_diffusion(x, t, d);
    }
    w0_diffusion(x + lambda * v.integral(t), t, d)
}

/// Variance `D (1 - e^{-2 lambda t}) / lambda` of the Ornstein-Uhlenbeck density started from a delta.
pub fn ou_variance(t: f64, d: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 2.0 * d * t;
    }
    -d * (-2.0 * lambda * t).exp_m1() / lambda
}

/// Exact Ornstein-Uhlenbeck density for `U = lambda x^2 / 2`.
///
/// `lambda = 0` dispatches to [`w0_diffusion`] instead of taking the limit.
pub fn ou_density_exact(x: f64, t: f64, d: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return w0_diffusion(x, t, d);
    }
    let variance = ou_variance(t, d, lambda);
    (-x * x / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

pub fn ou_s1(t: f64, d: f64) -> f64 {
    0.5 * d * t
}

pub fn ou_s2(x: f64, t: f64, d: f64) -> f64 {
    -(d * t * t + x * x * t) / 12.0
}

/// `1 + lambda t + lambda^2 t^2 / 3`, the factor produced by the order-2 OU expansion.
///
/// The quadratic has no real roots, so only non-finite input is rejected.
fn ou_resummation_factor(lambda: f64, t: f64) -> Result<f64> {
    let lt = lambda * t;
    let factor = 1.0 + lt + lt * lt / 3.0;
    if factor > 0.0 && factor.is_finite() {
        Ok(factor)
    } else {
        Err(Error::Domain(format!(
            "1 + lambda t + (lambda t)^2/3 = {factor} is not positive (lambda = {lambda}, t = {t})"
        )))
    }
}

/// Log-resummed order-2 OU density:
/// `sqrt(f / 4 pi D t) exp(-x^2 f / 4Dt)` with `f = 1 + lambda t + lambda^2 t^2 / 3`.
pub fn ou_density_pert(x: f64, t: f64, d: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(w0_diffusion(x, t, d));
    }
    let factor = ou_resummation_factor(lambda, t)?;
    Ok((factor / (4.0 * PI * d * t)).sqrt() * (-x * x * factor / (4.0 * d * t)).exp())
}

/// Variance `2Dt / f` of [`ou_density_pert`].
pub fn ou_pert_variance(t: f64, d: f64, lambda: f64) -> Result<f64> {
    Ok(2.0 * d * t / ou_resummation_factor(lambda, t)?)
}

/// `|(lambda t/2 - lambda^2 t^2/12) - ln(1 + lambda t + lambda^2 t^2/3)/2|`.
pub fn log_resummation_gap(lambda: f64, t: f64) -> Result<f64> {
    let factor = ou_resummation_factor(lambda, t)?;
    let lt = lambda * t;
    let truncated = 0.5 * lt - lt * lt / 12.0;
    // ln_1p keeps the O(lambda^4) difference above rounding noise for small lambda.
    let resummed = 0.5 * (factor - 1.0).ln_1p();
    Ok((truncated - resummed).abs())
}

/// Moments of the exact density of a built-in family at time `t`, started from a delta at the origin.
pub fn exact_gaussian(drift: &DriftSpec, d: f64, lambda: f64, t: f64) -> Option<Gaussian> {
    match drift.family() {
        DriftFamily::Zero => Some(Gaussian {
            mean: 0.0,
            variance: 2.0 * d * t,
        }),
        DriftFamily::LinearTimeModulated { v } => Some(Gaussian {
            mean: -lambda * v.integral(t),
            variance: 2.0 * d * t,
        }),
        DriftFamily::QuadraticOu => Some(Gaussian {
            mean: 0.0,
            variance: ou_variance(t, d, lambda),
        }),
        DriftFamily::Custom { .. } => None,
    }
}

/// Exact density of a built-in family at `(x, t)`, evaluated from its own closed form.
pub fn exact_density(drift: &DriftSpec, d: f64, lambda: f64, x: f64, t: f64) -> Option<f64> {
    match drift.family() {
        DriftFamily::Zero => Some(w0_diffusion(x, t, d)),
        DriftFamily::LinearTimeModulated { v } => Some(example1_density_exact(x, t, d, lambda, v)),
        DriftFamily::QuadraticOu => Some(ou_density_exact(x, t, d, lambda)),
        DriftFamily::Custom { .. } => None,
    }
}

/// Exact density sampled on every node of `grid`, without renormalization.
pub fn exact_density_field(drift: &DriftSpec, d: f64, lambda: f64, grid: &Grid) -> Option<DensityField> {
    exact_density(drift, d, lambda, 0.0, grid.t0())?;
    Some(DensityField::from_fn(grid, |x, t| {
        exact_density(drift, d, lambda, x, t).unwrap()
    }))
}

/// Closed-form action term `S_n(x, t)` for a built-in family.
///
/// `None` when the family has no closed form at this order: custom drifts,
/// and the OU process beyond order 2.
pub fn analytic_term(drift: &DriftSpec, n: usize, d: f64, x: f64, t: f64) -> Option<f64> {
    if n == 0 {
        return match drift.family() {
            DriftFamily::Custom { .. } => None,
            _ => Some(s0_value(x, t, d)),
        };
    }
    match drift.family() {
        DriftFamily::Zero => Some(0.0),
        DriftFamily::LinearTimeModulated { v } => match n {
            1 => Some(example1_s1(x, t, v)),
            2 => Some(example1_s2(t, v)),
            // Higher orders obey the homogeneous equation and are taken as zero.
            _ => Some(0.0),
        },
        DriftFamily::QuadraticOu => match n {
            1 => Some(ou_s1(t, d)),
            2 => Some(ou_s2(x, t, d)),
            _ => None,
        },
        DriftFamily::Custom { .. } => None,
    }
}

/// The closed-form expansion `S0..S_order` sampled on `grid`.
pub fn analytic_expansion(
    drift: &DriftSpec,
    d: f64,
    lambda: f64,
    order: usize,
    grid: &Grid,
) -> Option<ActionExpansion> {
    let mut terms = Vec::with_capacity(order + 1);
    for n in 0..=order {
        analytic_term(drift, n, d, grid.x(0), grid.t0())?;
        terms.push(ScalarField::from_fn(grid, Quantity::ActionTerm(n), |x, t| {
            analytic_term(drift, n, d, x, t).unwrap()
        }));
    }
    Some(ActionExpansion::new(d, lambda, terms))
}
