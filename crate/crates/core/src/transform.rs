//! Mapping between the Fokker-Planck density and the Schrodinger-like wavefunction.
//!
//! With `psi = exp(U / 2D) W` the Fokker-Planck equation becomes
//! `psi_t = D psi'' + (Ubar / D) psi`, where the effective potential is
//! `Ubar = (D/2) U'' - U'^2 / 4 + Udot / 2`.

use ndarray::Zip;

use crate::error::{Error, Result};
use crate::model::{DensityField, DriftSpec, Quantity, ScalarField};

/// Largest argument for which `exp` stays finite.
pub(crate) const EXP_LIMIT: f64 = 709.78;

/// `Ubar(x, t)` for the full potential at coupling `lambda`.
pub fn effective_potential(drift: &DriftSpec, d: f64, lambda: f64, x: f64, t: f64) -> f64 {
    let u_x = drift.potential_dx(lambda, x, t);
    0.5 * d * drift.potential_dxx(lambda, x, t) - 0.25 * u_x * u_x + 0.5 * drift.potential_dt(lambda, x, t)
}

/// Coefficient of `lambda^n` in `Ubar`:
/// `(D/2) U_n'' + Udot_n / 2 - (1/4) sum_{j+k=n} U_j' U_k'`.
///
/// Meaningful for `n <= 2 * max_order`; it is zero above that.
pub fn effective_potential_order(drift: &DriftSpec, d: f64, n: usize, x: f64, t: f64) -> f64 {
    let u_n = drift.term(n);
    let cross: f64 = (0..=n)
        .map(|j| drift.term(j).dx(x, t) * drift.term(n - j).dx(x, t))
        .sum();
    0.5 * d * u_n.dxx(x, t) + 0.5 * u_n.dt(x, t) - 0.25 * cross
}

/// `Ubar_n` sampled on the grid of `like`.
pub fn effective_potential_order_field(drift: &DriftSpec, d: f64, n: usize, like: &ScalarField) -> ScalarField {
    ScalarField::from_fn(like.grid(), Quantity::EffectivePotentialOrder(n), |x, t| {
        effective_potential_order(drift, d, n, x, t)
    })
}

/// `exp(sign * U / 2D)` at every node, failing on the first node that overflows.
fn weight(
    grid: &crate::model::Grid,
    drift: &DriftSpec,
    d: f64,
    lambda: f64,
    sign: f64,
    quantity: &'static str,
) -> Result<ndarray::Array2<f64>> {
    let mut out = ndarray::Array2::zeros((grid.nt(), grid.nx()));
    for ((j, i), w) in out.indexed_iter_mut() {
        let exponent = sign * drift.potential(lambda, grid.x(i), grid.t(j)) / (2.0 * d);
        if exponent > EXP_LIMIT || !exponent.is_finite() {
            return Err(Error::Overflow {
                quantity,
                exponent,
                i,
                j,
            });
        }
        *w = exponent.exp();
    }
    Ok(out)
}

/// `psi = exp(U / 2D) W`, nodewise.
pub fn to_wavefunction(w: &DensityField, drift: &DriftSpec, d: f64, lambda: f64) -> Result<ScalarField> {
    let mut psi = weight(w.grid(), drift, d, lambda, 1.0, "wavefunction")?;
    Zip::from(&mut psi).and(w.values()).for_each(|p, &v| *p *= v);
    Ok(ScalarField::new(w.grid(), Quantity::Wavefunction, psi))
}

/// `W = exp(-U / 2D) psi`, nodewise.
pub fn from_wavefunction(psi: &ScalarField, drift: &DriftSpec, d: f64, lambda: f64) -> Result<DensityField> {
    let mut w = weight(psi.grid(), drift, d, lambda, -1.0, "density")?;
    Zip::from(&mut w).and(psi.values()).for_each(|p, &v| *p *= v);
    Ok(DensityField::new(psi.grid(), w))
}
