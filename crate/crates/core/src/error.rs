use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("sphere grid degree {0} outside supported range [4, 256]")]
    DegreeOutOfRange(usize),
    #[error("coefficients of degree {given} exceed grid degree {max}; truncation refused")]
    Truncation { given: usize, max: usize },
    #[error("quadrature under-resolves the phase: need degree >= {required}, grid has {available}")]
    Resolution { required: usize, available: usize },
    #[error("Born series failed to converge after {order} orders (contraction estimate {contraction:.3e})")]
    NonConvergence { order: usize, contraction: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
