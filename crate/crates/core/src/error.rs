use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no lattice node lies inside the domain")]
    EmptyDomain,
    #[error("grid has {cells} cells, budget is {cap}")]
    BudgetExceeded { cells: usize, cap: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid exponent {0}")]
    InvalidExponent(f64),
    #[error("grid functions live on different grids")]
    GridMismatch,
    #[error("ambient grid is incompatible: {0}")]
    IncompatibleSpacing(String),
    #[error("potential has a nonzero imaginary part")]
    ComplexPotential,
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("eigensolver failure: {0}")]
    SolverFailure(String),
    #[error("dense path needs N = {n} <= dense cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },
    #[error("operator has no eigendata")]
    MissingEigendata,
    #[error("chebyshev expansion reached degree {degree} with sup error {error:e} > tolerance {tolerance:e}")]
    ChebyshevToleranceUnmet { degree: usize, error: f64, tolerance: f64 },
    #[error("function has weight {weight:e} on the non-positive spectrum")]
    NegativeSpectrumComponent { weight: f64 },
    #[error("invalid spectrum bounds: {0}")]
    InvalidSpectrumBounds(String),
    #[error("spectrum is not strictly positive (lambda_min = {lambda_min:e})")]
    ZeroEigenvaluePresent { lambda_min: f64 },
    #[error("shifted operator has eigenvalue {0:e} <= 0")]
    NegativeShiftedEigenvalue(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index constraint violated: {0}")]
    IndexConstraintViolated(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("malformed operator cache: {0}")]
    CacheFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
