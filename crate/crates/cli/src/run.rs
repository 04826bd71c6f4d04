use fpcascade::analysis::{scaling_order_fit, slice_distance, Metric};
use fpcascade::hierarchy::{assemble_density, assemble_density_raw, solve_expansion};
use fpcascade::oracles;
use fpcascade::reference::{
    density_from_samples, em_simulate, fp_fd_solve, initial_gaussian, FdOptions, SampleEnsemble,
};
use fpcascade::{DensityField, DriftFamily, ValidatedConfig};

use crate::Failure;

pub const COLUMNS: [&str; 5] = ["w_pert", "w_pert_numeric", "w_exact", "w_fd", "w_mc"];

pub struct Results {
    /// One entry per name in [`COLUMNS`]; `None` when that solver has nothing to offer.
    pub columns: Vec<Option<DensityField>>,
    pub ensemble: SampleEnsemble,
    pub translation_residual: Option<f64>,
    pub scaling: Option<Scaling>,
}

pub struct Scaling {
    pub t: f64,
    pub lambdas: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
    pub gaps: Vec<f64>,
}

fn in_module<T>(module: &str, r: fpcascade::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Solver(m) => Failure::Solver(format!("{module}: {m}")),
        other => other,
    })
}

pub fn run(v: &ValidatedConfig) -> Result<Results, Failure> {
    let cfg = &v.config;
    let (drift, grid, d, lambda) = (&v.drift, &v.grid, cfg.d, cfg.lambda);

    let w_pert = match oracles::analytic_expansion(drift, d, lambda, cfg.order, grid) {
        Some(e) => Some(in_module("hierarchy", assemble_density(&e, drift))?),
        None => None,
    };
    let numeric = in_module("hierarchy", solve_expansion(drift, d, lambda, cfg.order, grid))?;
    let w_numeric = in_module("hierarchy", assemble_density(&numeric, drift))?;
    let w_exact = oracles::exact_density_field(drift, d, lambda, grid);

    let start = initial_gaussian(drift, d, lambda, grid.t0());
    let init: Vec<f64> = grid.xs().iter().map(|&x| start.pdf(x)).collect();
    let opts = FdOptions::from_tolerances(grid, d, &cfg.tolerances);
    let w_fd = in_module("reference", fp_fd_solve(drift, d, lambda, grid, &init, &opts))?;

    let mc = &cfg.monte_carlo;
    let ensemble = in_module(
        "reference",
        em_simulate(
            drift,
            d,
            lambda,
            grid.t0(),
            &v.checkpoint_times(),
            mc.dt,
            mc.paths,
            mc.seed,
        ),
    )?;
    let w_mc = in_module("reference", density_from_samples(&ensemble, grid))?;

    let translation_residual = match &cfg.drift {
        DriftFamily::LinearTimeModulated { v: modulation } => {
            let e = oracles::analytic_expansion(drift, d, lambda, 2, grid).expect("closed form exists");
            let w = in_module("hierarchy", assemble_density_raw(&e, drift))?;
            let worst = (0..grid.nt())
                .map(|j| {
                    let shift = lambda * modulation.integral(grid.t(j));
                    let shifted: Vec<f64> = grid
                        .xs()
                        .iter()
                        .map(|&x| oracles::w0_diffusion(x + shift, grid.t(j), d))
                        .collect();
                    slice_distance(
                        w.slice(j).unwrap(),
                        (&shifted).into(),
                        grid.dx(),
                        Metric::PeakRelativeLinf,
                    )
                })
                .fold(0.0, f64::max);
            Some(worst)
        }
        _ => None,
    };

    let scaling = match &cfg.drift {
        DriftFamily::QuadraticOu => Some(in_module("analysis", ou_scaling(v))?),
        _ => None,
    };

    Ok(Results {
        columns: vec![w_pert, Some(w_numeric), w_exact, Some(w_fd), Some(w_mc)],
        ensemble,
        translation_residual,
        scaling,
    })
}

/// Perturbative vs exact OU density at `t = 1` (or the last grid time if the
/// run ends earlier) for each coupling in the sweep, plus the fitted power.
fn ou_scaling(v: &ValidatedConfig) -> fpcascade::Result<Scaling> {
    let cfg = &v.config;
    let grid = &v.grid;
    let t = if (grid.t0()..=grid.t_max()).contains(&1.0) {
        1.0
    } else {
        grid.t_max()
    };
    let mut errors = Vec::new();
    let mut gaps = Vec::new();
    for &lambda in &cfg.lambda_sweep {
        let mut pert = Vec::with_capacity(grid.nx());
        for &x in grid.xs().iter() {
            pert.push(oracles::ou_density_pert(x, t, cfg.d, lambda)?);
        }
        let exact: Vec<f64> = grid
            .xs()
            .iter()
            .map(|&x| oracles::ou_density_exact(x, t, cfg.d, lambda))
            .collect();
        errors.push(slice_distance(
            (&pert).into(),
            (&exact).into(),
            grid.dx(),
            Metric::PeakRelativeLinf,
        ));
        gaps.push(oracles::log_resummation_gap(lambda, t)?);
    }
    let points: Vec<(f64, f64)> = cfg.lambda_sweep.iter().copied().zip(errors.iter().copied()).collect();
    Ok(Scaling {
        t,
        lambdas: cfg.lambda_sweep.clone(),
        slope: scaling_order_fit(&points).ok(),
        errors,
        gaps,
    })
}
