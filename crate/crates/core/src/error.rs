use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A run configuration or grid violates one of its bounds.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The drift carries a nonzero base potential U0, which the cascade cannot start from.
    #[error(
        "drift has a nonzero base potential U0; the cascade only supports U0 = 0 \
         (S0 is the free-diffusion action)"
    )]
    NonzeroBasePotential,

    #[error("exp({exponent}) overflows computing {quantity} at node (t-index {j}, x-index {i})")]
    Overflow {
        quantity: &'static str,
        exponent: f64,
        i: usize,
        j: usize,
    },

    #[error("linear solve broke down at time step {step} (zero pivot in row {row})")]
    SolverBreakdown { step: usize, row: usize },

    /// Wraps a failure raised while solving a particular cascade order.
    #[error("order {order}: {source}")]
    AtOrder {
        order: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("action term S{0} is required but has not been solved")]
    MissingOrder(usize),

    #[error("mass drifted to {mass} at time step {step} (tolerance {tolerance})")]
    MassDrift { step: usize, mass: f64, tolerance: f64 },

    #[error(
        "density near the domain edge reached {ratio:e} of the peak at time step {step}; \
         widen the x-domain"
    )]
    BoundaryLeak { step: usize, ratio: f64 },

    #[error("density undershoot {value:e} at time step {step}, node {i}")]
    Undershoot { step: usize, i: usize, value: f64 },

    #[error("initial density is invalid: {0}")]
    InitialData(String),

    #[error("checkpoint {0} holds no samples")]
    EmptyCheckpoint(usize),

    #[error("checkpoint time {0} does not coincide with a grid time")]
    CheckpointOffGrid(f64),

    #[error("time slice {0} is not populated")]
    AbsentSlice(usize),

    #[error("slice {slice} has mass {mass}, moments need mass within 1e-6 of 1")]
    MassPrecondition { slice: usize, mass: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn at_order(self, order: usize) -> Error {
        Error::AtOrder {
            order,
            source: Box::new(self),
        }
    }

    /// True for errors caused by rejected input rather than by a solver failing.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::NonzeroBasePotential => true,
            Error::AtOrder { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
