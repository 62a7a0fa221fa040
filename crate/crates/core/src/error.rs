use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: domain error: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("ambiguous sideband assignment for mode {mode}: sidebands {first} and {second} are equidistant")]
    AmbiguousSideband { mode: usize, first: i32, second: i32 },

    #[error("inverse Green's function is singular at omega = {omega} (condition number {condition:e})")]
    Singular { omega: f64, condition: f64 },

    #[error("{0}: eigenvalue iteration did not converge")]
    NoConvergence(&'static str),

    #[error("minimal eigenvalue is degenerate ({0:e} apart)")]
    DegenerateEigenvalue(f64),

    #[error("no instability found for lambda up to {0}")]
    NoInstability(f64),

    #[error("no avoided crossing found in the swept range")]
    NoCrossing,

    #[error("peaks unresolved: splitting {splitting} is below 2 kappa = {limit}")]
    PeaksUnresolved { splitting: f64, limit: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Domain { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
