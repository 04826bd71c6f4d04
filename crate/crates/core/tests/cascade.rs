use fpcascade::analysis::{slice_mass, trapezoid};
use fpcascade::hierarchy::{assemble_density, assemble_density_raw, cascade_residual, solve_expansion};
use fpcascade::oracles::{self, ModulationV};
use fpcascade::{DriftSpec, Error, Grid, GridParams, PotentialTerm};
use proptest::prelude::*;

fn grid(x: f64, nx: usize, t0: f64, t_max: f64, nt: usize) -> Grid {
    Grid::new(GridParams {
        x_min: -x,
        x_max: x,
        nx,
        t0,
        t_max,
        nt,
    })
    .unwrap()
}

#[test]
fn translation_identity_holds_node_by_node() {
    let g = grid(10.0, 801, 0.01, 5.0, 500);
    let v = ModulationV::Cos { omega: 1.0 };
    let lambda = 0.5;
    let drift = DriftSpec::linear_time_modulated(v);
    let e = oracles::analytic_expansion(&drift, 1.0, lambda, 2, &g).unwrap();
    let w = assemble_density_raw(&e, &drift).unwrap();
    let mut worst: f64 = 0.0;
    for ((j, i), value) in w.values().indexed_iter() {
        let (x, t) = (g.x(i), g.t(j));
        let shifted = oracles::w0_diffusion(x + lambda * v.integral(t), t, 1.0);
        if shifted > f64::MIN_POSITIVE {
            worst = worst.max((value / shifted - 1.0).abs());
        }
    }
    assert!(worst <= 1e-12, "worst relative deviation {worst:e}");
}

#[test]
fn analytic_ou_density_is_the_resummed_gaussian() {
    let g = grid(20.0, 801, 0.01, 2.0, 200);
    let drift = DriftSpec::quadratic_ou();
    let e = oracles::analytic_expansion(&drift, 1.0, 0.1, 2, &g).unwrap();
    let w = assemble_density(&e, &drift).unwrap();
    let mut worst: f64 = 0.0;
    for (j, row) in w.values().outer_iter().enumerate() {
        let t = g.t(j);
        let pert: Vec<f64> = g
            .xs()
            .iter()
            .map(|&x| oracles::ou_density_pert(x, t, 1.0, 0.1).unwrap())
            .collect();
        let mass = trapezoid((&pert).into(), g.dx());
        let peak = pert.iter().cloned().fold(0.0, f64::max);
        for (a, b) in row.iter().zip(&pert) {
            if *b > 1e-12 * peak {
                worst = worst.max((a / (b / mass) - 1.0).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "worst relative deviation {worst:e}");
}

#[test]
fn exact_first_order_term_has_second_order_residual() {
    let drift = DriftSpec::linear_time_modulated(ModulationV::Cos { omega: 1.0 });
    let residual = |refine: usize| {
        let g = grid(10.0, 200 * refine + 1, 0.5, 5.0, 100 * refine + 1);
        let e = oracles::analytic_expansion(&drift, 1.0, 0.5, 1, &g).unwrap();
        let h = g.dx().powi(2) + g.dt().powi(2);
        (cascade_residual(1, &e, &drift).unwrap(), h)
    };
    let (coarse, h) = residual(1);
    let (fine, _) = residual(2);
    assert!(coarse <= 10.0 * h, "residual {coarse:e} vs dx^2 + dt^2 = {h:e}");
    assert!(coarse / fine >= 3.5, "refinement ratio {}", coarse / fine);
}

#[test]
fn solved_ou_terms_satisfy_their_equations() {
    let g = grid(10.0, 801, 0.01, 5.0, 500);
    let drift = DriftSpec::quadratic_ou();
    let e = solve_expansion(&drift, 1.0, 0.1, 2, &g).unwrap();
    let tolerance = fpcascade::model::Tolerances::default().cascade_residual;
    for n in 1..=2 {
        let r = cascade_residual(n, &e, &drift).unwrap();
        assert!(r <= 10.0 * tolerance, "order {n}: residual {r:e}");
    }
}

#[test]
fn custom_drift_matches_builtin_family() {
    // A custom drift starts its terms from zero rather than the closed form, so the
    // last slice is compared against the exact density only loosely.
    let v = ModulationV::Sin { omega: 2.0 };
    let g = grid(10.0, 401, 0.01, 2.0, 200);
    let custom = DriftSpec::custom(vec![PotentialTerm::Zero, PotentialTerm::Linear { v }]);
    let e = solve_expansion(&custom, 1.0, 0.3, 2, &g).unwrap();
    let w = assemble_density(&e, &custom).unwrap();
    for j in 0..g.nt() {
        assert!((slice_mass(&w, j).unwrap() - 1.0).abs() <= 1e-12);
    }
    let builtin = DriftSpec::linear_time_modulated(v);
    let reference = oracles::exact_density_field(&builtin, 1.0, 0.3, &g).unwrap();
    let j = g.nt() - 1;
    let l1: f64 = w
        .slice(j)
        .unwrap()
        .iter()
        .zip(reference.slice(j).unwrap())
        .map(|(a, b)| (a - b).abs() * g.dx())
        .sum();
    assert!(l1 <= 1e-2, "L1 {l1:e}");
}

#[test]
fn base_potential_is_rejected_by_the_cascade() {
    let g = grid(5.0, 51, 0.1, 1.0, 10);
    let drift = DriftSpec::custom(vec![PotentialTerm::Quadratic { stiffness: 1.0 }]);
    assert!(matches!(
        solve_expansion(&drift, 1.0, 0.1, 1, &g),
        Err(Error::NonzeroBasePotential)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembled_densities_are_normalized_and_nonnegative(
        lambda in 0.0..0.6f64,
        omega in 0.2..3.0f64,
        family in 0..3usize,
        d in 0.3..2.0f64,
    ) {
        let g = grid(12.0, 241, 0.05, 1.5, 30);
        let drift = match family {
            0 => DriftSpec::linear_time_modulated(ModulationV::Cos { omega }),
            1 => DriftSpec::linear_time_modulated(ModulationV::Sin { omega }),
            _ => DriftSpec::quadratic_ou(),
        };
        let e = solve_expansion(&drift, d, lambda, 2, &g).unwrap();
        let w = assemble_density(&e, &drift).unwrap();
        for j in 0..g.nt() {
            prop_assert!((slice_mass(&w, j).unwrap() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(w.values().iter().all(|v| *v >= 0.0));
    }
}
