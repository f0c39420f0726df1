use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("validation failed: {condition}: {detail}")]
    Validation { condition: String, detail: String },

    #[error("μ = {mu} is not admissible for d = {dim}: need μ ∈ Γ_d = [2,∞] ∩ ((d+2)/2, ∞]")]
    Admissibility { mu: String, dim: usize },

    #[error("degenerate coefficients: viscosity must be positive (got ε = {epsilon})")]
    Degenerate { epsilon: f64 },

    #[error("Poisson solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    PoissonSolver { iterations: usize, residual: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("time step failed at t = {time}: {source}")]
    Step {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("path {path} failed: {source}")]
    Path {
        path: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}
