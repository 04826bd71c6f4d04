//! `fpcascade`: run the perturbative cascade and both reference solvers for one
//! drift, then write `density.csv` and `summary.json`.
//!
//! Exit status: 0 success, 1 I/O failure, 2 rejected configuration,
//! 3 solver abort, 4 an emitted density failed its mass or positivity check.

mod emit;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpcascade::{DriftFamily, ModulationV, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "fpcascade",
    version,
    about = "Perturbative Fokker-Planck solver with reference checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Linear potential U = lambda x V(t).
    Example1(Flags),
    /// Ornstein-Uhlenbeck potential U = lambda x^2 / 2, with the lambda scaling sweep.
    Ou(Flags),
    /// Any drift family, read from --config.
    Custom(Flags),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VKind {
    Cos,
    Sin,
    Const,
}

#[derive(Args, Debug)]
struct Flags {
    /// Time modulation of the linear potential.
    #[arg(long, value_enum)]
    v: Option<VKind>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Comma-separated couplings for the scaling fit.
    #[arg(long, value_delimiter = ',')]
    lambda_sweep: Option<Vec<f64>>,
    /// Diffusion coefficient.
    #[arg(long)]
    d: Option<f64>,
    /// Highest cascade order.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Solver(String),
    Emission(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Emission(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Config(m) => write!(f, "configuration rejected: {m}"),
            Failure::Solver(m) => write!(f, "solver aborted: {m}"),
            Failure::Emission(m) => write!(f, "output check failed: {m}"),
        }
    }
}

impl From<fpcascade::Error> for Failure {
    fn from(e: fpcascade::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

fn modulation(flags: &Flags, base: Option<ModulationV>) -> ModulationV {
    let (base_kind, base_omega, base_v0) = match base {
        Some(ModulationV::Cos { omega }) => (VKind::Cos, omega, 1.0),
        Some(ModulationV::Sin { omega }) => (VKind::Sin, omega, 1.0),
        Some(ModulationV::Const { v0 }) => (VKind::Const, 1.0, v0),
        None => (VKind::Cos, 1.0, 1.0),
    };
    let omega = flags.omega.unwrap_or(base_omega);
    match flags.v.unwrap_or(base_kind) {
        VKind::Cos => ModulationV::Cos { omega },
        VKind::Sin => ModulationV::Sin { omega },
        VKind::Const => ModulationV::Const {
            v0: flags.v0.unwrap_or(base_v0),
        },
    }
}

fn build_config(command: &Command) -> Result<RunConfig, Failure> {
    let flags = match command {
        Command::Example1(f) | Command::Ou(f) | Command::Custom(f) => f,
    };
    let mut cfg = match &flags.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None if matches!(command, Command::Custom(_)) => {
            return Err(Failure::Config("custom runs need --config".into()));
        }
        None => RunConfig::default(),
    };
    let modulation_flags = flags.v.is_some() || flags.omega.is_some() || flags.v0.is_some();
    let current = match &cfg.drift {
        DriftFamily::LinearTimeModulated { v } => Some(*v),
        _ => None,
    };
    match command {
        Command::Example1(_) => {
            cfg.drift = DriftFamily::LinearTimeModulated {
                v: modulation(flags, current),
            };
        }
        Command::Ou(_) => {
            if modulation_flags {
                return Err(Failure::Config("--v, --omega and --v0 do not apply to ou".into()));
            }
            cfg.drift = DriftFamily::QuadraticOu;
        }
        Command::Custom(_) => {
            if modulation_flags {
                if current.is_none() {
                    return Err(Failure::Config(
                        "--v, --omega and --v0 need a linear_time_modulated drift".into(),
                    ));
                }
                cfg.drift = DriftFamily::LinearTimeModulated {
                    v: modulation(flags, current),
                };
            }
        }
    }

    let set = |slot: &mut f64, value: Option<f64>| {
        if let Some(v) = value {
            *slot = v;
        }
    };
    set(&mut cfg.lambda, flags.lambda);
    set(&mut cfg.d, flags.d);
    set(&mut cfg.grid.x_min, flags.x_min);
    set(&mut cfg.grid.x_max, flags.x_max);
    set(&mut cfg.grid.t0, flags.t0);
    set(&mut cfg.grid.t_max, flags.t_max);
    if let Some(n) = flags.nx {
        cfg.grid.nx = n;
    }
    if let Some(n) = flags.nt {
        cfg.grid.nt = n;
    }
    if let Some(n) = flags.order {
        cfg.order = n;
    }
    if let Some(n) = flags.paths {
        cfg.monte_carlo.paths = n;
    }
    if let Some(s) = flags.seed {
        cfg.monte_carlo.seed = s;
    }
    if let Some(sweep) = &flags.lambda_sweep {
        cfg.lambda_sweep = sweep.clone();
    }
    if let Some(out) = &flags.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = build_config(&cli.command)?;
    let validated = fpcascade::validate_config(cfg)?;
    let results = run::run(&validated)?;
    emit::check(&results, &validated.config.tolerances)?;
    emit::write(&results, &validated)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("fpcascade: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
