//! Grids, fields, drift potentials and run configuration.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::ModulationV;

/// Highest perturbative order a run may request.
pub const MAX_ORDER: usize = 8;

/// One order `U_n(x, t)` of the drift potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum PotentialTerm {
    Zero,
    /// `x * V(t)`.
    Linear {
        v: ModulationV,
    },
    /// `stiffness * x^2 / 2`.
    Quadratic {
        stiffness: f64,
    },
}

impl PotentialTerm {
    pub fn value(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialTerm::Zero => 0.0,
            PotentialTerm::Linear { v } => x * v.value(t),
            PotentialTerm::Quadratic { stiffness } => 0.5 * stiffness * x * x,
        }
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialTerm::Zero => 0.0,
            PotentialTerm::Linear { v } => v.value(t),
            PotentialTerm::Quadratic { stiffness } => stiffness * x,
        }
    }

    pub fn dxx(&self, _x: f64, _t: f64) -> f64 {
        match self {
            PotentialTerm::Zero | PotentialTerm::Linear { .. } => 0.0,
            PotentialTerm::Quadratic { stiffness } => *stiffness,
        }
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialTerm::Zero | PotentialTerm::Quadratic { .. } => 0.0,
            PotentialTerm::Linear { v } => x * v.rate(t),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PotentialTerm::Zero => Ok(()),
            PotentialTerm::Linear { v } => match *v {
                ModulationV::Cos { omega } | ModulationV::Sin { omega } if !(omega > 0.0 && omega.is_finite()) => {
                    Err(Error::Config(format!("omega must be positive and finite, got {omega}")))
                }
                ModulationV::Const { v0 } if !v0.is_finite() => {
                    Err(Error::Config(format!("v0 must be finite, got {v0}")))
                }
                _ => Ok(()),
            },
            PotentialTerm::Quadratic { stiffness } if !stiffness.is_finite() => Err(Error::Config(format!(
                "quadratic stiffness must be finite, got {stiffness}"
            ))),
            PotentialTerm::Quadratic { .. } => Ok(()),
        }
    }
}

/// Which drift potential a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DriftFamily {
    /// Free diffusion.
    Zero,
    /// `U = lambda x V(t)`.
    LinearTimeModulated { v: ModulationV },
    /// `U = lambda x^2 / 2`.
    QuadraticOu,
    /// Arbitrary per-order terms; entry `n` is `U_n`.
    Custom { orders: Vec<PotentialTerm> },
}

/// Drift potential `U(x, t) = sum_n lambda^n U_n(x, t)` with analytic derivatives per order.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    family: DriftFamily,
    orders: Vec<PotentialTerm>,
}

impl DriftSpec {
    pub fn new(family: DriftFamily) -> Self {
        let orders = match &family {
            DriftFamily::Zero => vec![PotentialTerm::Zero],
            DriftFamily::LinearTimeModulated { v } => {
                vec![PotentialTerm::Zero, PotentialTerm::Linear { v: *v }]
            }
            DriftFamily::QuadraticOu => vec![PotentialTerm::Zero, PotentialTerm::Quadratic { stiffness: 1.0 }],
            DriftFamily::Custom { orders } if orders.is_empty() => vec![PotentialTerm::Zero],
            DriftFamily::Custom { orders } => orders.clone(),
        };
        DriftSpec { family, orders }
    }

    pub fn zero() -> Self {
        Self::new(DriftFamily::Zero)
    }

    pub fn linear_time_modulated(v: ModulationV) -> Self {
        Self::new(DriftFamily::LinearTimeModulated { v })
    }

    pub fn quadratic_ou() -> Self {
        Self::new(DriftFamily::QuadraticOu)
    }

    pub fn custom(orders: Vec<PotentialTerm>) -> Self {
        Self::new(DriftFamily::Custom { orders })
    }

    pub fn family(&self) -> &DriftFamily {
        &self.family
    }

    pub fn max_order(&self) -> usize {
        self.orders.len() - 1
    }

    /// `U_n`, which is identically zero beyond `max_order`.
    pub fn term(&self, n: usize) -> PotentialTerm {
        self.orders.get(n).copied().unwrap_or(PotentialTerm::Zero)
    }

    pub fn has_base_potential(&self) -> bool {
        self.orders[0] != PotentialTerm::Zero
    }

    fn sum(&self, lambda: f64, f: impl Fn(&PotentialTerm) -> f64) -> f64 {
        // Horner in lambda.
        self.orders.iter().rev().fold(0.0, |acc, u| acc * lambda + f(u))
    }

    pub fn potential(&self, lambda: f64, x: f64, t: f64) -> f64 {
        self.sum(lambda, |u| u.value(x, t))
    }

    /// `U'`; the drift coefficient is its negative.
    pub fn potential_dx(&self, lambda: f64, x: f64, t: f64) -> f64 {
        self.sum(lambda, |u| u.dx(x, t))
    }

    pub fn potential_dxx(&self, lambda: f64, x: f64, t: f64) -> f64 {
        self.sum(lambda, |u| u.dxx(x, t))
    }

    pub fn potential_dt(&self, lambda: f64, x: f64, t: f64) -> f64 {
        self.sum(lambda, |u| u.dt(x, t))
    }

    pub fn validate(&self) -> Result<()> {
        self.orders.iter().try_for_each(PotentialTerm::validate)
    }
}

/// Parameters of a uniform space-time lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t0: f64,
    pub t_max: f64,
    pub nt: usize,
}

/// Uniform lattice `x_i = x_min + i dx`, `t_j = t0 + j dt` with `t0 > 0`.
#[derive(Debug, Clone)]
pub struct Grid {
    params: GridParams,
    dx: f64,
    dt: f64,
    xs: Vec<f64>,
    ts: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl Grid {
    pub fn new(params: GridParams) -> Result<Self> {
        let GridParams {
            x_min,
            x_max,
            nx,
            t0,
            t_max,
            nt,
        } = params;
        let all_finite = [x_min, x_max, t0, t_max].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(Error::Config(format!("x_min = {x_min} must be below x_max = {x_max}")));
        }
        if nx < 3 {
            return Err(Error::Config(format!(
                "nx = {nx}: at least 3 nodes are needed to form a second difference"
            )));
        }
        if t0 <= 0.0 {
            return Err(Error::Config(format!(
                "t0 = {t0}: the start time must be positive, the action is singular at t = 0"
            )));
        }
        if t_max <= t0 {
            return Err(Error::Config(format!("t_max = {t_max} must exceed t0 = {t0}")));
        }
        if nt < 2 {
            return Err(Error::Config(format!("nt = {nt}: at least 2 time levels are needed")));
        }
        let dx = (x_max - x_min) / (nx - 1) as f64;
        let dt = (t_max - t0) / (nt - 1) as f64;
        let xs = (0..nx).map(|i| x_min + i as f64 * dx).collect();
        let ts = (0..nt).map(|j| t0 + j as f64 * dt).collect();
        Ok(Grid { params, dx, dt, xs, ts })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn nx(&self) -> usize {
        self.params.nx
    }

    pub fn nt(&self) -> usize {
        self.params.nt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.params.t0
    }

    pub fn t_max(&self) -> f64 {
        self.params.t_max
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xs[i]
    }

    pub fn t(&self, j: usize) -> f64 {
        self.ts[j]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    /// Index of the time level equal to `t`, allowing for rounding in how `t` was produced.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let k = ((t - self.params.t0) / self.dt).round();
        if k < 0.0 || k >= self.params.nt as f64 {
            return None;
        }
        let j = k as usize;
        ((self.ts[j] - t).abs() <= 1e-9 * self.dt).then_some(j)
    }

    /// Same time axis, x-nodes reduced to every `stride`-th node.
    pub fn coarsened(&self, stride: usize) -> Result<Grid> {
        if stride == 0 || !(self.params.nx - 1).is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "stride {stride} does not divide the {} x-intervals",
                self.params.nx - 1
            )));
        }
        Grid::new(GridParams {
            nx: (self.params.nx - 1) / stride + 1,
            ..self.params
        })
    }
}

/// What a [`ScalarField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    ActionTerm(usize),
    EffectivePotentialOrder(usize),
    Source(usize),
    Density,
    Wavefunction,
}

/// One scalar quantity sampled on a grid, rows indexed by time level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    quantity: Quantity,
    values: Array2<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, quantity: Quantity, values: Array2<f64>) -> Self {
        assert_eq!(values.dim(), (grid.nt(), grid.nx()), "field shape must match grid");
        ScalarField {
            grid: grid.clone(),
            quantity,
            values,
        }
    }

    pub fn zeros(grid: &Grid, quantity: Quantity) -> Self {
        Self::new(grid, quantity, Array2::zeros((grid.nt(), grid.nx())))
    }

    pub fn from_fn(grid: &Grid, quantity: Quantity, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nt(), grid.nx()), |(j, i)| f(grid.x(i), grid.t(j)));
        Self::new(grid, quantity, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn slice(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.row(j)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute value over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The solved family `S0..S_N` together with `D` and `lambda`.
#[derive(Debug, Clone)]
pub struct ActionExpansion {
    d_coeff: f64,
    lambda: f64,
    terms: Vec<ScalarField>,
}

impl ActionExpansion {
    pub fn new(d_coeff: f64, lambda: f64, terms: Vec<ScalarField>) -> Self {
        assert!(!terms.is_empty(), "an expansion holds at least S0");
        let grid = terms[0].grid();
        for (n, s) in terms.iter().enumerate() {
            assert_eq!(s.grid(), grid, "all action terms share one grid");
            assert_eq!(s.quantity(), Quantity::ActionTerm(n), "term {n} is tagged S{n}");
        }
        ActionExpansion { d_coeff, lambda, terms }
    }

    pub fn d_coeff(&self) -> f64 {
        self.d_coeff
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn grid(&self) -> &Grid {
        self.terms[0].grid()
    }

    pub fn terms(&self) -> &[ScalarField] {
        &self.terms
    }

    pub fn term(&self, n: usize) -> Option<&ScalarField> {
        self.terms.get(n)
    }

    /// Same terms with a different `lambda`; the `S_n` do not depend on it.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        ActionExpansion { lambda, ..self.clone() }
    }

    /// `S = sum_n lambda^n S_n`.
    pub fn partial_sum(&self) -> Array2<f64> {
        let mut sum = Array2::zeros(self.terms[0].values().dim());
        for s in self.terms.iter().rev() {
            sum *= self.lambda;
            sum += s.values();
        }
        sum
    }
}

/// A probability density on a grid. Slices may be absent (Monte Carlo fills only its checkpoints).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Array2<f64>,
    populated: Vec<bool>,
}

impl DensityField {
    pub fn new(grid: &Grid, values: Array2<f64>) -> Self {
        let populated = vec![true; grid.nt()];
        Self::with_populated(grid, values, populated)
    }

    pub fn with_populated(grid: &Grid, values: Array2<f64>, populated: Vec<bool>) -> Self {
        assert_eq!(values.dim(), (grid.nt(), grid.nx()), "field shape must match grid");
        assert_eq!(populated.len(), grid.nt());
        DensityField {
            grid: grid.clone(),
            values,
            populated,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nt(), grid.nx()), |(j, i)| f(grid.x(i), grid.t(j)));
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn is_populated(&self, j: usize) -> bool {
        self.populated[j]
    }

    pub fn populated_slices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.nt()).filter(|&j| self.populated[j])
    }

    pub fn slice(&self, j: usize) -> Option<ArrayView1<'_, f64>> {
        self.populated[j].then(|| self.values.row(j))
    }

    pub fn value(&self, j: usize, i: usize) -> Option<f64> {
        self.populated[j].then(|| self.values[[j, i]])
    }

    /// Keep every `stride`-th x-node. Used to compare a fine solve with a coarse histogram.
    pub fn coarsened(&self, stride: usize) -> Result<DensityField> {
        let grid = self.grid.coarsened(stride)?;
        let values = Array2::from_shape_fn((grid.nt(), grid.nx()), |(j, i)| self.values[[j, i * stride]]);
        Ok(Self::with_populated(&grid, values, self.populated.clone()))
    }

    /// Same values with every slice outside `keep` marked absent.
    pub fn restricted_to(&self, keep: &[usize]) -> DensityField {
        let populated = (0..self.grid.nt())
            .map(|j| self.populated[j] && keep.contains(&j))
            .collect();
        Self::with_populated(&self.grid, self.values.clone(), populated)
    }
}

/// Solver tolerances and step controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed per-slice mass drift of the finite-difference reference.
    pub fd_mass: f64,
    /// Largest density next to the domain edge, relative to the slice peak.
    pub boundary_ratio: f64,
    /// Most negative value a density may take.
    pub undershoot: f64,
    /// Allowed deviation of an emitted density's mass from 1.
    pub emission_mass: f64,
    /// Bound for the discrete residual of each solved cascade order.
    pub cascade_residual: f64,
    /// Finite-difference sub-step: `dt <= fd_step_safety * dx^2 / (2 D)`.
    pub fd_step_safety: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fd_mass: 1e-8,
            boundary_ratio: 1e-12,
            undershoot: 1e-12,
            emission_mass: 1e-8,
            cascade_residual: 1e-6,
            fd_step_safety: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub paths: usize,
    pub seed: u64,
    /// Euler-Maruyama step.
    pub dt: f64,
    /// Times at which positions are recorded; must be grid times. Defaults to four evenly spaced slices.
    pub checkpoints: Option<Vec<f64>>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            paths: 20_000,
            seed: 42,
            dt: 2e-3,
            checkpoints: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

/// Everything a run needs. Loadable from JSON; missing keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub drift: DriftFamily,
    pub d: f64,
    pub lambda: f64,
    pub grid: GridParams,
    pub order: usize,
    pub tolerances: Tolerances,
    pub monte_carlo: MonteCarloConfig,
    pub output: OutputConfig,
    /// Couplings for the OU scaling fit.
    pub lambda_sweep: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            drift: DriftFamily::LinearTimeModulated {
                v: ModulationV::Cos { omega: 1.0 },
            },
            d: 1.0,
            lambda: 0.2,
            grid: GridParams {
                x_min: -25.0,
                x_max: 25.0,
                nx: 1001,
                t0: 0.05,
                t_max: 5.0,
                nt: 101,
            },
            order: 2,
            tolerances: Tolerances::default(),
            monte_carlo: MonteCarloConfig::default(),
            output: OutputConfig::default(),
            lambda_sweep: vec![0.02, 0.04, 0.08, 0.16],
        }
    }
}

/// A [`RunConfig`] whose bounds have been checked, with the derived grid and drift.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub config: RunConfig,
    pub grid: Grid,
    pub drift: DriftSpec,
    /// Time indices of the Monte Carlo checkpoints.
    pub checkpoint_slices: Vec<usize>,
}

impl ValidatedConfig {
    pub fn checkpoint_times(&self) -> Vec<f64> {
        self.checkpoint_slices.iter().map(|&j| self.grid.t(j)).collect()
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

pub fn validate_config(cfg: RunConfig) -> Result<ValidatedConfig> {
    positive("D", cfg.d)?;
    if !cfg.lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be finite, got {}", cfg.lambda)));
    }
    let grid = Grid::new(cfg.grid)?;
    if cfg.order > MAX_ORDER {
        return Err(Error::Config(format!(
            "order {} exceeds the cap of {MAX_ORDER}",
            cfg.order
        )));
    }
    let tol = &cfg.tolerances;
    positive("tolerances.fd_mass", tol.fd_mass)?;
    positive("tolerances.boundary_ratio", tol.boundary_ratio)?;
    positive("tolerances.undershoot", tol.undershoot)?;
    positive("tolerances.emission_mass", tol.emission_mass)?;
    positive("tolerances.cascade_residual", tol.cascade_residual)?;
    positive("tolerances.fd_step_safety", tol.fd_step_safety)?;

    let mc = &cfg.monte_carlo;
    if mc.paths < 1 {
        return Err(Error::Config("monte_carlo.paths must be at least 1".into()));
    }
    positive("monte_carlo.dt", mc.dt)?;
    let checkpoint_slices = match &mc.checkpoints {
        Some(times) => {
            if times.is_empty() {
                return Err(Error::Config("monte_carlo.checkpoints is empty".into()));
            }
            let slices = times
                .iter()
                .map(|&t| {
                    grid.time_index(t)
                        .ok_or_else(|| Error::Config(format!("checkpoint time {t} is not a grid time")))
                })
                .collect::<Result<Vec<_>>>()?;
            if slices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(
                    "monte_carlo.checkpoints must be strictly ascending".into(),
                ));
            }
            slices
        }
        None => default_checkpoints(grid.nt()),
    };

    for &l in &cfg.lambda_sweep {
        positive("lambda_sweep entry", l)?;
    }

    let drift = DriftSpec::new(cfg.drift.clone());
    drift.validate()?;
    if drift.has_base_potential() {
        return Err(Error::NonzeroBasePotential);
    }

    Ok(ValidatedConfig {
        config: cfg,
        grid,
        drift,
        checkpoint_slices,
    })
}

fn default_checkpoints(nt: usize) -> Vec<usize> {
    let mut slices: Vec<usize> = (1..=4).map(|k| k * (nt - 1) / 4).filter(|&j| j > 0).collect();
    slices.dedup();
    slices
}
