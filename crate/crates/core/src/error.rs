use thiserror::Error;

/// Errors surfaced by the simulation and estimation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A position was asked for outside the (open) domain.
    #[error("position ({x}, {y}) is outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    /// A trajectory was evaluated past its terminal time.
    #[error("time {s} is past the end of the trajectory (t_end = {t_end})")]
    OutOfLife { s: f64, t_end: f64 },

    /// Inconsistent or invalid configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An h-transform rate became singular (h = 0 at an interior evaluation).
    #[error("singular transformed rate: h = 0 at ({x}, {y})")]
    SingularRate { x: f64, y: f64 },

    /// A branching simulation exceeded the configured population cap.
    #[error("population cap of {cap} particles exceeded at t = {t}")]
    PopulationCap { cap: u64, t: f64 },

    /// Every path or particle died; the requested estimate is undefined.
    #[error("estimate undefined: all {k} cycles returned zero ({survivors} survivors)")]
    UndefinedEstimate { k: u64, survivors: u64 },

    /// The SMC ensemble lost all its mass.
    #[error("particle ensemble went extinct at t = {t}")]
    Extinction { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
