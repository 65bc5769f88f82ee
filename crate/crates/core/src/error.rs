use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("constraint matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("degenerate point: {0}")]
    DegeneratePoint(String),

    #[error("normal matrix is not positive definite at pivot {pivot} (value {value:e})")]
    Factorization { pivot: usize, value: f64 },

    #[error("KKT solve residual {residual:e} exceeds tolerance")]
    SolveAccuracy { residual: f64 },

    #[error("degenerate secant pair: y'y = {0:e}")]
    DegenerateSecant(f64),

    #[error("iterates are inconsistent with the recorded step: {0}")]
    StepContract(String),

    #[error("dense Broyden forms disagree: relative difference {0:e}")]
    OracleMismatch(f64),

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("start point is outside the neighbourhood: {0}")]
    StartOutsideNeighborhood(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("complexity fit needs at least 3 distinct sizes, got {0}")]
    TooFewSizes(usize),

    #[error("trace does not match the problem: {0}")]
    TraceMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CoreError {
    fn from(e: serde_json::Error) -> Self {
        CoreError::Parse(e.to_string())
    }
}

impl From<csv::Error> for CoreError {
    fn from(e: csv::Error) -> Self {
        CoreError::Parse(e.to_string())
    }
}
