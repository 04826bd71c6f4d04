//! Reference solvers that do not use the action expansion: a finite-difference
//! integrator of the Fokker-Planck equation and an Euler-Maruyama simulation
//! of the underlying SDE `dx = -U'(x, t) dt + sqrt(2D) dB`.
//!
//! Both start at `t0 > 0` from the Gaussian the exact solution has there (the
//! free-diffusion kernel for drifts without a closed form), since a delta is
//! not representable on a grid.

use ndarray::Array2;
use rayon::prelude::*;

use crate::analysis::{edge_to_peak_ratio, trapezoid};
use crate::banded::{BandedMatrix, SingularRow};
use crate::error::{Error, Result};
use crate::model::{DensityField, DriftSpec, Grid, Tolerances};
use crate::oracles::{self, Gaussian};
use crate::substream::NormalStream;

/// The density both references start from at time `t0`.
pub fn initial_gaussian(drift: &DriftSpec, d: f64, lambda: f64, t0: f64) -> Gaussian {
    oracles::exact_gaussian(drift, d, lambda, t0).unwrap_or(Gaussian {
        mean: 0.0,
        variance: 2.0 * d * t0,
    })
}

/// Step control and runtime checks for [`fp_fd_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Crank-Nicolson steps per grid time interval.
    pub substeps: usize,
    pub mass_tolerance: f64,
    pub boundary_ratio: f64,
    pub undershoot: f64,
}

impl FdOptions {
    /// Substeps chosen so that the internal step satisfies `dt <= safety * dx^2 / (2D)`.
    pub fn from_tolerances(grid: &Grid, d: f64, tol: &Tolerances) -> Self {
        let limit = tol.fd_step_safety * grid.dx() * grid.dx() / (2.0 * d);
        FdOptions {
            substeps: ((grid.dt() / limit).ceil() as usize).max(1),
            mass_tolerance: tol.fd_mass,
            boundary_ratio: tol.boundary_ratio,
            undershoot: tol.undershoot,
        }
    }
}

/// Integrate `W_t = (U' W)' + D W''` with Crank-Nicolson in flux form.
///
/// Fluxes live on cell faces, `F = U'(face) (W_i + W_{i+1})/2 + D (W_{i+1} - W_i)/dx`,
/// with `U'` taken at the half step. The two edge nodes are held at zero.
/// Every internal step checks mass, undershoot and how much density sits next
/// to the edges.
pub fn fp_fd_solve(
    drift: &DriftSpec,
    d: f64,
    lambda: f64,
    grid: &Grid,
    w_init: &[f64],
    opts: &FdOptions,
) -> Result<DensityField> {
    let nx = grid.nx();
    assert_eq!(w_init.len(), nx, "initial slice length");
    let dx = grid.dx();

    let mut w = w_init.to_vec();
    w[0] = 0.0;
    w[nx - 1] = 0.0;
    if let Some(i) = w.iter().position(|&v| v < -opts.undershoot || !v.is_finite()) {
        return Err(Error::InitialData(format!("value {} at node {i}", w[i])));
    }
    let mass = trapezoid(ndarray::ArrayView1::from(&w), dx);
    if (mass - 1.0).abs() > opts.mass_tolerance {
        return Err(Error::InitialData(format!("mass {mass} is not 1")));
    }
    let ratio = edge_to_peak_ratio(ndarray::ArrayView1::from(&w));
    if ratio > opts.boundary_ratio {
        return Err(Error::BoundaryLeak { step: 0, ratio });
    }

    let mut values = Array2::zeros((grid.nt(), nx));
    values.row_mut(0).iter_mut().zip(&w).for_each(|(o, &v)| *o = v);

    let h = grid.dt() / opts.substeps as f64;
    let faces: Vec<f64> = (0..nx - 1).map(|i| grid.x(i) + 0.5 * dx).collect();
    let mut face_speed = vec![0.0; nx - 1];
    let mut rhs = vec![0.0; nx];
    let diff = d / dx;
    let mut step = 0;
    for j in 0..grid.nt() - 1 {
        for k in 0..opts.substeps {
            step += 1;
            let t_half = grid.t(j) + (k as f64 + 0.5) * h;
            for (a, &xf) in face_speed.iter_mut().zip(&faces) {
                *a = drift.potential_dx(lambda, xf, t_half);
            }
            let mut matrix = BandedMatrix::tridiagonal(nx);
            matrix.set(0, 0, 1.0);
            matrix.set(nx - 1, nx - 1, 1.0);
            rhs[0] = 0.0;
            rhs[nx - 1] = 0.0;
            for i in 1..nx - 1 {
                let (am, ap) = (face_speed[i - 1], face_speed[i]);
                let lower = (-0.5 * am + diff) / dx;
                let centre = (0.5 * ap - 0.5 * am - 2.0 * diff) / dx;
                let upper = (0.5 * ap + diff) / dx;
                matrix.set(i, i - 1, -0.5 * h * lower);
                matrix.set(i, i, 1.0 - 0.5 * h * centre);
                matrix.set(i, i + 1, -0.5 * h * upper);
                rhs[i] = w[i] + 0.5 * h * (lower * w[i - 1] + centre * w[i] + upper * w[i + 1]);
            }
            matrix
                .solve(&mut rhs)
                .map_err(|SingularRow(row)| Error::SolverBreakdown { step, row })?;
            std::mem::swap(&mut w, &mut rhs);

            let view = ndarray::ArrayView1::from(&w);
            let mass = trapezoid(view, dx);
            if (mass - 1.0).abs() > opts.mass_tolerance {
                return Err(Error::MassDrift {
                    step,
                    mass,
                    tolerance: opts.mass_tolerance,
                });
            }
            if let Some(i) = w.iter().position(|&v| v < -opts.undershoot) {
                return Err(Error::Undershoot { step, i, value: w[i] });
            }
            let ratio = edge_to_peak_ratio(view);
            if ratio > opts.boundary_ratio {
                return Err(Error::BoundaryLeak { step, ratio });
            }
        }
        values.row_mut(j + 1).iter_mut().zip(&w).for_each(|(o, &v)| *o = v);
    }
    Ok(DensityField::new(grid, values))
}

/// Particle positions recorded at a list of checkpoint times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnsemble {
    pub times: Vec<f64>,
    /// `positions[k][p]` is path `p` at `times[k]`.
    pub positions: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SampleEnsemble {
    pub fn n_paths(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Sample mean and unbiased sample variance at checkpoint `k`.
    pub fn moments(&self, k: usize) -> (f64, f64) {
        let xs = &self.positions[k];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }
}

/// Euler-Maruyama paths of `dx = -U'(x, t) dt + sqrt(2D) dB` from `t0`.
///
/// Between consecutive checkpoints the interval is split into equal steps no
/// longer than `dt`. Path `p` draws its initial position and all increments
/// from its own substream, so the result does not depend on how paths are
/// spread over threads.
#[allow(clippy::too_many_arguments)]
pub fn em_simulate(
    drift: &DriftSpec,
    d: f64,
    lambda: f64,
    t0: f64,
    checkpoints: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SampleEnsemble> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if n_paths == 0 {
        return Err(Error::Config("at least one path is required".into()));
    }
    let ascending = checkpoints.windows(2).all(|w| w[0] < w[1]);
    if !ascending || checkpoints.first().is_some_and(|&c| c < t0) {
        return Err(Error::Config("checkpoints must be ascending and not before t0".into()));
    }
    let start = initial_gaussian(drift, d, lambda, t0);
    let spread = start.variance.sqrt();

    // Step schedule shared by every path.
    let mut legs = Vec::with_capacity(checkpoints.len());
    let mut from = t0;
    for &to in checkpoints {
        let steps = ((to - from) / dt * (1.0 - 1e-12)).ceil().max(0.0) as usize;
        legs.push((from, steps, if steps > 0 { (to - from) / steps as f64 } else { 0.0 }));
        from = to;
    }

    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut normals = NormalStream::for_path(seed, p);
            let mut x = start.mean + spread * normals.next_normal();
            let mut out = Vec::with_capacity(legs.len());
            for &(from, steps, h) in &legs {
                let noise = (2.0 * d * h).sqrt();
                for s in 0..steps {
                    let t = from + s as f64 * h;
                    x += -drift.potential_dx(lambda, x, t) * h + noise * normals.next_normal();
                }
                out.push(x);
            }
            out
        })
        .collect();

    let positions = (0..checkpoints.len())
        .map(|k| per_path.iter().map(|path| path[k]).collect())
        .collect();
    Ok(SampleEnsemble {
        times: checkpoints.to_vec(),
        positions,
        seed,
    })
}

/// Histogram of each checkpoint on the grid's x-nodes, normalized to unit trapezoid mass.
///
/// Bin `i` is `[x_i - dx/2, x_i + dx/2)`; samples outside every bin are
/// dropped. Slices without a checkpoint are marked absent.
pub fn density_from_samples(ensemble: &SampleEnsemble, grid: &Grid) -> Result<DensityField> {
    let nx = grid.nx();
    let dx = grid.dx();
    let x_min = grid.x(0);
    let mut values = Array2::zeros((grid.nt(), nx));
    let mut populated = vec![false; grid.nt()];
    for (k, (&t, samples)) in ensemble.times.iter().zip(&ensemble.positions).enumerate() {
        let j = grid.time_index(t).ok_or(Error::CheckpointOffGrid(t))?;
        if samples.is_empty() {
            return Err(Error::EmptyCheckpoint(k));
        }
        let mut row = values.row_mut(j);
        for &x in samples {
            let bin = ((x - x_min) / dx).round();
            if bin >= 0.0 && bin < nx as f64 {
                row[bin as usize] += 1.0;
            }
        }
        let mass = trapezoid(row.view(), dx);
        if mass <= 0.0 {
            return Err(Error::Domain(format!(
                "no sample of checkpoint {k} falls inside the x-domain"
            )));
        }
        row /= mass;
        populated[j] = true;
    }
    Ok(DensityField::with_populated(grid, values, populated))
}
