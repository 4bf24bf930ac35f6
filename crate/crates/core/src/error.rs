use thiserror::Error;

/// Errors raised by the solvers, the symmetry machinery and the CLI plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("potential family `{family}` cannot be used as {role} potential")]
    PotentialRole { family: &'static str, role: &'static str },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid isotropy group: {0}")]
    InvalidGroup(String),

    #[error("projector is not idempotent (defect {0:.3e})")]
    NotIdempotent(f64),

    #[error("mode {k} is resonant: {l}*nu_{k} = nu_{j}")]
    Resonant { k: usize, l: usize, j: usize },

    #[error("degenerate spectrum: all linear frequencies coincide")]
    DegenerateSpectrum,

    #[error("truncation exhausted: l0 = {0} does not meet the tail tolerance")]
    Truncation(usize),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
