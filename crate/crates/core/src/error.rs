use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("Hörmander condition fails at bracket depth {depth}: span reaches {achieved} of {dim}")]
    HormanderViolation {
        achieved: usize,
        dim: usize,
        depth: usize,
    },

    #[error("coordinates are not privileged: field X{field} has monomial {monomial} of order {order}")]
    NotPrivileged {
        field: usize,
        monomial: String,
        order: i64,
    },

    #[error("field is not a remainder: monomial {monomial} has negative order {order}")]
    NotARemainder { monomial: String, order: i64 },

    #[error("field has non-polynomial coefficients; {0} needs a polynomial frame")]
    NonPolynomial(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory left the safety box at t = {time}")]
    LeftSafetyBox { time: f64 },

    #[error("volume weight is not positive at {point:?}")]
    NonPositiveWeight { point: Vec<f64> },

    #[error("test function support touches the grid boundary")]
    SupportTouchesBoundary,

    #[error("test function is negative at {point:?}")]
    NegativeTestFunction { point: Vec<f64> },

    #[error("vector is not in the span of the frame at {point:?} (residual {residual:e})")]
    NotInSpan { point: Vec<f64>, residual: f64 },

    #[error("characteristic point {point:?}: every frame field is tangent to the boundary")]
    CharacteristicPoint { point: Vec<f64> },

    #[error("degenerate level set near {point:?}: |grad| = {gradient:e}")]
    DegenerateLevelSet { point: Vec<f64>, gradient: f64 },

    #[error("isotropy not verified: Lie algebra of the truncated frame has dimension {lie_dim}, ambient {dim}")]
    IsotropyNotVerified { lie_dim: usize, dim: usize },

    #[error("step {0} is not supported here (step-2 structures only)")]
    UnsupportedStep(usize),

    #[error("degenerate horizontal normal: the combined field vanishes at the origin")]
    DegenerateNormal,

    #[error("dimension {0} is not supported by this estimator")]
    UnsupportedDimension(usize),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
