//! Masses, moments, field distances and the power-law fit used for the λ-scaling checks.
//!
//! All integrals use the trapezoid rule on the grid's x-nodes.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DensityField;

pub fn trapezoid(values: ArrayView1<'_, f64>, dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    dx * (values.sum() - 0.5 * (values[0] + values[n - 1]))
}

pub fn slice_mass(w: &DensityField, j: usize) -> Result<f64> {
    let slice = w.slice(j).ok_or(Error::AbsentSlice(j))?;
    Ok(trapezoid(slice, w.grid().dx()))
}

/// Mean and variance of slice `j`. The slice mass must be within `1e-6` of 1.
pub fn slice_moments(w: &DensityField, j: usize) -> Result<(f64, f64)> {
    let mass = slice_mass(w, j)?;
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::MassPrecondition { slice: j, mass });
    }
    let slice = w.slice(j).ok_or(Error::AbsentSlice(j))?;
    let xs = w.grid().xs();
    let dx = w.grid().dx();
    let weighted = |f: &dyn Fn(f64) -> f64| {
        let vals: ndarray::Array1<f64> = slice.iter().zip(xs).map(|(&v, &x)| v * f(x)).collect();
        trapezoid(vals.view(), dx)
    };
    let mean = weighted(&|x| x);
    let variance = weighted(&|x| (x - mean) * (x - mean));
    Ok((mean, variance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    Linf,
    /// `max |a - b| / max(a, b)`.
    PeakRelativeLinf,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::L1, Metric::Linf, Metric::PeakRelativeLinf];

    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::Linf => "linf",
            Metric::PeakRelativeLinf => "peak_relative_linf",
        }
    }
}

/// Distance between two slices on the same x-nodes. The peak in
/// [`Metric::PeakRelativeLinf`] is the larger of the two slice maxima.
pub fn slice_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, dx: f64, metric: Metric) -> f64 {
    let diff: ndarray::Array1<f64> = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).collect();
    match metric {
        Metric::L1 => trapezoid(diff.view(), dx),
        Metric::Linf => diff.iter().copied().fold(0.0, f64::max),
        Metric::PeakRelativeLinf => {
            let peak = a.iter().chain(b.iter()).copied().fold(0.0, f64::max);
            let worst = diff.iter().copied().fold(0.0, f64::max);
            if worst == 0.0 {
                0.0
            } else {
                worst / peak
            }
        }
    }
}

/// Per-slice distances; `None` where either field lacks the slice.
pub fn field_distance(a: &DensityField, b: &DensityField, metric: Metric) -> Result<Vec<Option<f64>>> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let dx = a.grid().dx();
    Ok((0..a.grid().nt())
        .map(|j| match (a.slice(j), b.slice(j)) {
            (Some(sa), Some(sb)) => Some(slice_distance(sa, sb, dx, metric)),
            _ => None,
        })
        .collect())
}

/// Least-squares slope of `ln(error)` against `ln(lambda)`.
pub fn scaling_order_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "a scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(l, e)) = points.iter().find(|&&(l, e)| !(l > 0.0 && e > 0.0)) {
        return Err(Error::Domain(format!(
            "scaling fit needs positive values, got lambda = {l}, error = {e}"
        )));
    }
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(l, e)| (l.ln(), e.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("scaling fit needs distinct lambda values".into()));
    }
    Ok(sxy / sxx)
}

/// Largest density on the nodes next to either edge, relative to the slice peak.
pub fn edge_to_peak_ratio(slice: ArrayView1<'_, f64>) -> f64 {
    let n = slice.len();
    let peak = slice.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0.0;
    }
    let edge = [slice[0], slice[1], slice[n - 2], slice[n - 1]]
        .into_iter()
        .fold(0.0, f64::max);
    edge / peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Grid, GridParams};
    use crate::oracles;
    use proptest::prelude::*;

    fn grid(x_min: f64, x_max: f64, nx: usize) -> Grid {
        Grid::new(GridParams {
            x_min,
            x_max,
            nx,
            t0: 1.0,
            t_max: 2.0,
            nt: 2,
        })
        .unwrap()
    }

    #[test]
    fn uniform_mass() {
        let g = grid(-3.0, 5.0, 17);
        let w = DensityField::from_fn(&g, |_, _| 1.0 / 8.0);
        assert!((slice_mass(&w, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_mass_and_moments() {
        let g = grid(-10.0, 10.0, 2001);
        let w = DensityField::from_fn(&g, |x, t| oracles::w0_diffusion(x, t, 1.0));
        assert!((slice_mass(&w, 0).unwrap() - 1.0).abs() < 1e-10);
        let (mean, var) = slice_moments(&w, 0).unwrap();
        assert!(mean.abs() < 1e-12);
        assert!((var - 2.0).abs() < 1e-8);
    }

    #[test]
    fn example1_mean_tracks_shift() {
        let t = std::f64::consts::FRAC_PI_2;
        let g = Grid::new(GridParams {
            x_min: -12.0,
            x_max: 12.0,
            nx: 2401,
            t0: t,
            t_max: t + 1.0,
            nt: 2,
        })
        .unwrap();
        let v = oracles::ModulationV::Cos { omega: 1.0 };
        let w = DensityField::from_fn(&g, |x, t| oracles::example1_density_exact(x, t, 1.0, 0.5, &v));
        let (mean, _) = slice_moments(&w, 0).unwrap();
        assert!((mean + 0.5).abs() < 1e-8, "{mean}");
    }

    #[test]
    fn ou_variance_by_quadrature() {
        let g = grid(-15.0, 15.0, 3001);
        let w = DensityField::from_fn(&g, |x, t| oracles::ou_density_exact(x, t, 1.0, 0.1));
        let (_, var) = slice_moments(&w, 0).unwrap();
        assert!((var - 1.812_692_5).abs() < 1e-6, "{var}");
    }

    #[test]
    fn moments_check_mass() {
        let g = grid(-1.0, 1.0, 11);
        let w = DensityField::from_fn(&g, |_, _| 3.0);
        assert!(matches!(
            slice_moments(&w, 1),
            Err(Error::MassPrecondition { slice: 1, .. })
        ));
    }

    #[test]
    fn shifted_kernel_l1() {
        let g = grid(-10.0, 10.0, 2001);
        let dx = g.dx();
        let a = DensityField::from_fn(&g, |x, t| oracles::w0_diffusion(x, t, 1.0));
        let b = DensityField::from_fn(&g, |x, t| oracles::w0_diffusion(x - dx, t, 1.0));
        let l1 = field_distance(&a, &b, Metric::L1).unwrap()[0].unwrap();
        let estimate = 2.0 * dx * oracles::w0_diffusion(0.0, 1.0, 1.0);
        assert!((l1 / estimate - 1.0).abs() < 0.2, "{l1} vs {estimate}");
    }

    #[test]
    fn ou_pert_within_bound() {
        let g = grid(-12.0, 12.0, 4801);
        let pert = DensityField::from_fn(&g, |x, _| oracles::ou_density_pert(x, 1.0, 1.0, 0.1).unwrap());
        let exact = DensityField::from_fn(&g, |x, _| oracles::ou_density_exact(x, 1.0, 1.0, 0.1));
        let d = field_distance(&pert, &exact, Metric::PeakRelativeLinf).unwrap()[0].unwrap();
        assert!(d <= 2e-5, "{d}");
    }

    #[test]
    fn grids_must_match() {
        let a = DensityField::from_fn(&grid(-1.0, 1.0, 11), |_, _| 0.5);
        let b = DensityField::from_fn(&grid(-1.0, 1.0, 21), |_, _| 0.5);
        assert_eq!(field_distance(&a, &b, Metric::L1), Err(Error::GridMismatch));
    }

    #[test]
    fn power_law_fits() {
        let ls = [0.02, 0.04, 0.08, 0.16];
        let cubic: Vec<_> = ls.iter().map(|&l| (l, l * l * l)).collect();
        assert!((scaling_order_fit(&cubic).unwrap() - 3.0).abs() < 1e-9);
        let quad: Vec<_> = ls.iter().map(|&l| (l, 7.5 * l * l)).collect();
        assert!((scaling_order_fit(&quad).unwrap() - 2.0).abs() < 1e-9);
        assert!(scaling_order_fit(&cubic[..2]).is_err());
        assert!(scaling_order_fit(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric_and_vanish_on_self(
            a in proptest::collection::vec(0.0..1.0f64, 11),
            b in proptest::collection::vec(0.0..1.0f64, 11),
        ) {
            let g = grid(0.0, 1.0, 11);
            let fa = DensityField::new(&g, ndarray::Array2::from_shape_fn((2, 11), |(_, i)| a[i]));
            let fb = DensityField::new(&g, ndarray::Array2::from_shape_fn((2, 11), |(_, i)| b[i]));
            for m in Metric::ALL {
                prop_assert_eq!(field_distance(&fa, &fb, m).unwrap(), field_distance(&fb, &fa, m).unwrap());
                prop_assert_eq!(field_distance(&fa, &fa, m).unwrap()[0], Some(0.0));
            }
        }
    }
}
