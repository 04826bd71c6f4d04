//! Order-by-order solution of the action expansion.
//!
//! Writing `psi = exp(S / D)` with `S = sum_n lambda^n S_n` turns the
//! wavefunction equation into the cascade
//!
//! ```text
//! dS_n/dt = D S_n'' + sum_{k=0..n} S_k' S_{n-k}' + Ubar_n
//! ```
//!
//! With `U_0 = 0` and a delta initial profile, `S_0` is the free-diffusion
//! action and `2 S_0' = -x/t`, so every `S_n` with `n >= 1` solves the same
//! linear advection-diffusion equation `dS_n/dt = D S_n'' - (x/t) S_n' + f_n`,
//! whose source `f_n` only involves lower orders.
//!
//! Each order is integrated with Crank-Nicolson from `t0 > 0`. Spatial
//! derivatives are centered in the interior and one-sided (three points) at
//! the two edge columns, so every stencil is exact on quadratics in `x`.

use ndarray::Array2;

use crate::banded::{BandedMatrix, SingularRow};
use crate::error::{Error, Result};
use crate::model::{ActionExpansion, DensityField, DriftSpec, Grid, Quantity, ScalarField, MAX_ORDER};
use crate::oracles;
use crate::transform::{self, EXP_LIMIT};

/// `S0 = -(D/2) ln(4 pi D t) - x^2 / 4t` on every node.
pub fn s0_closed_form(grid: &Grid, d: f64) -> ScalarField {
    ScalarField::from_fn(grid, Quantity::ActionTerm(0), |x, t| oracles::s0_value(x, t, d))
}

/// First x-derivative of one slice: centered inside, second-order one-sided at the ends.
fn derivative_x(row: ndarray::ArrayView1<'_, f64>, dx: f64) -> Vec<f64> {
    let n = row.len();
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * dx);
    out[n - 1] = (3.0 * row[n - 1] - 4.0 * row[n - 2] + row[n - 3]) / (2.0 * dx);
    for i in 1..n - 1 {
        out[i] = (row[i + 1] - row[i - 1]) / (2.0 * dx);
    }
    out
}

fn derivative_x_field(s: &ScalarField) -> Array2<f64> {
    let grid = s.grid();
    let mut out = Array2::zeros((grid.nt(), grid.nx()));
    for (j, mut row) in out.outer_iter_mut().enumerate() {
        let d = derivative_x(s.slice(j), grid.dx());
        row.iter_mut().zip(d).for_each(|(o, v)| *o = v);
    }
    out
}

/// Source of the order-`n` equation: `sum_{k=1..n-1} S_k' S_{n-k}' + Ubar_n`.
///
/// The `k = 0` and `k = n` products form the advection term of the linear
/// operator and are not part of the source. `solved` must hold `S_0..S_{n-1}`.
pub fn cascade_source(n: usize, drift: &DriftSpec, d: f64, solved: &[ScalarField]) -> Result<ScalarField> {
    assert!(n >= 1, "the order-0 action is not solved by the cascade");
    if solved.len() < n {
        return Err(Error::MissingOrder(solved.len()));
    }
    let grid = solved[0].grid();
    let derivatives: Vec<Array2<f64>> = solved[1..n].iter().map(derivative_x_field).collect();
    let mut source = transform::effective_potential_order_field(drift, d, n, &solved[0])
        .values()
        .clone();
    for k in 1..n {
        source += &(&derivatives[k - 1] * &derivatives[n - k - 1]);
    }
    Ok(ScalarField::new(grid, Quantity::Source(n), source))
}

/// Row `i` of the discrete operator `L S = D S'' + v S'` as `(column, coefficient)` pairs.
fn operator_row(i: usize, nx: usize, d: f64, v: f64, dx: f64) -> [(usize, f64); 3] {
    let diff = d / (dx * dx);
    let adv = v / (2.0 * dx);
    if i == 0 {
        [(0, diff - 3.0 * adv), (1, -2.0 * diff + 4.0 * adv), (2, diff - adv)]
    } else if i == nx - 1 {
        [
            (nx - 3, diff + adv),
            (nx - 2, -2.0 * diff - 4.0 * adv),
            (nx - 1, diff + 3.0 * adv),
        ]
    } else {
        [(i - 1, diff - adv), (i, -2.0 * diff), (i + 1, diff + adv)]
    }
}

/// Integrate `dS/dt = D S'' - (x/t) S' + source` from the initial slice `init` at `t0`.
///
/// Crank-Nicolson in time with the advection speed taken at the half step and
/// the source averaged over the two time levels.
pub fn advance_term(n: usize, source: &ScalarField, d: f64, grid: &Grid, init: &[f64]) -> Result<ScalarField> {
    let nx = grid.nx();
    assert_eq!(init.len(), nx, "initial slice length");
    assert_eq!(source.grid(), grid, "source must live on the solve grid");
    let dx = grid.dx();
    let dt = grid.dt();
    let mut values = Array2::zeros((grid.nt(), nx));
    values.row_mut(0).iter_mut().zip(init).for_each(|(o, &v)| *o = v);

    let mut rhs = vec![0.0; nx];
    for j in 0..grid.nt() - 1 {
        let t_half = 0.5 * (grid.t(j) + grid.t(j + 1));
        let mut matrix = BandedMatrix::zeros(nx, 2, 2);
        let prev = values.row(j);
        let src_now = source.slice(j);
        let src_next = source.slice(j + 1);
        for i in 0..nx {
            let v = -grid.x(i) / t_half;
            let row = operator_row(i, nx, d, v, dx);
            let mut explicit = 0.0;
            for &(col, coeff) in &row {
                explicit += coeff * prev[col];
                let identity = if col == i { 1.0 } else { 0.0 };
                matrix.set(i, col, identity - 0.5 * dt * coeff);
            }
            rhs[i] = prev[i] + 0.5 * dt * (explicit + src_now[i] + src_next[i]);
        }
        matrix
            .solve(&mut rhs)
            .map_err(|SingularRow(row)| Error::SolverBreakdown { step: j, row })?;
        values.row_mut(j + 1).iter_mut().zip(&rhs).for_each(|(o, &v)| *o = v);
    }
    Ok(ScalarField::new(grid, Quantity::ActionTerm(n), values))
}

/// Solve `S_0..S_order` on `grid`.
///
/// `S_0` is closed-form. Each higher order starts from its closed-form slice
/// at `t0` when the drift family has one, and from zero otherwise.
pub fn solve_expansion(drift: &DriftSpec, d: f64, lambda: f64, order: usize, grid: &Grid) -> Result<ActionExpansion> {
    if drift.has_base_potential() {
        return Err(Error::NonzeroBasePotential);
    }
    if order > MAX_ORDER {
        return Err(Error::Config(format!("order {order} exceeds the cap of {MAX_ORDER}")));
    }
    let mut terms = vec![s0_closed_form(grid, d)];
    for n in 1..=order {
        let source = cascade_source(n, drift, d, &terms).map_err(|e| e.at_order(n))?;
        let init: Vec<f64> = grid
            .xs()
            .iter()
            .map(|&x| oracles::analytic_term(drift, n, d, x, grid.t0()).unwrap_or(0.0))
            .collect();
        let s_n = advance_term(n, &source, d, grid, &init).map_err(|e| e.at_order(n))?;
        if !s_n.is_finite() {
            return Err(Error::Domain("solution is not finite".into()).at_order(n));
        }
        terms.push(s_n);
    }
    Ok(ActionExpansion::new(d, lambda, terms))
}

/// `W = exp(-U / 2D) exp(S / D)` nodewise, without normalization.
///
/// Both exponents are summed before exponentiating so that neither factor
/// underflows on its own.
pub fn assemble_density_raw(expansion: &ActionExpansion, drift: &DriftSpec) -> Result<DensityField> {
    let d = expansion.d_coeff();
    let lambda = expansion.lambda();
    let grid = expansion.grid();
    let mut values = expansion.partial_sum() / d;
    for ((j, i), e) in values.indexed_iter_mut() {
        let exponent = *e - drift.potential(lambda, grid.x(i), grid.t(j)) / (2.0 * d);
        if exponent.is_nan() || exponent > EXP_LIMIT {
            return Err(Error::Overflow {
                quantity: "density",
                exponent,
                i,
                j,
            });
        }
        *e = exponent.exp();
    }
    Ok(DensityField::new(grid, values))
}

/// [`assemble_density_raw`] with each slice divided by its trapezoid mass.
///
/// This fixes the additive constants the closed forms leave undetermined.
pub fn assemble_density(expansion: &ActionExpansion, drift: &DriftSpec) -> Result<DensityField> {
    let raw = assemble_density_raw(expansion, drift)?;
    let grid = raw.grid().clone();
    let mut values = raw.values().clone();
    for (j, mut row) in values.outer_iter_mut().enumerate() {
        let mass = crate::analysis::trapezoid(row.view(), grid.dx());
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!(
                "slice {j} has mass {mass} and cannot be normalized"
            )));
        }
        row /= mass;
    }
    Ok(DensityField::new(&grid, values))
}

/// Largest residual of the order-`n` equation over interior nodes and interior time levels.
///
/// Time derivatives are central differences; the nonlinear sum runs over
/// `k = 0..n` using the stored fields, so this checks the solver against the
/// equation rather than against its own discretization.
pub fn cascade_residual(n: usize, expansion: &ActionExpansion, drift: &DriftSpec) -> Result<f64> {
    if expansion.order() < n {
        return Err(Error::MissingOrder(expansion.order() + 1));
    }
    let grid = expansion.grid();
    let (nx, nt) = (grid.nx(), grid.nt());
    if nt < 3 {
        return Ok(0.0);
    }
    let d = expansion.d_coeff();
    let dx = grid.dx();
    let dt = grid.dt();
    let terms = expansion.terms();
    let derivatives: Vec<Array2<f64>> = terms[..=n].iter().map(derivative_x_field).collect();
    let s = terms[n].values();
    let mut worst: f64 = 0.0;
    for j in 1..nt - 1 {
        let t = grid.t(j);
        for i in 1..nx - 1 {
            let x = grid.x(i);
            let s_t = (s[[j + 1, i]] - s[[j - 1, i]]) / (2.0 * dt);
            let s_xx = (s[[j, i + 1]] - 2.0 * s[[j, i]] + s[[j, i - 1]]) / (dx * dx);
            let products: f64 = (0..=n)
                .map(|k| derivatives[k][[j, i]] * derivatives[n - k][[j, i]])
                .sum();
            let rhs = d * s_xx + products + transform::effective_potential_order(drift, d, n, x, t);
            worst = worst.max((s_t - rhs).abs());
        }
    }
    Ok(worst)
}
