//! Crate-wide error type.

use crate::model::Frame;

/// Errors produced by any operation in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("fractional order {0} outside (0, 2)")]
    OrderOutOfRange(f64),

    #[error("tempering rate {0} must be finite and nonnegative")]
    InvalidTemperingRate(f64),

    #[error("time step {0} must be finite and positive")]
    InvalidStep(f64),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("non-finite value in input data")]
    NonFiniteData,

    #[error("invalid laplacian spec: {0}")]
    InvalidLaplacianSpec(String),

    #[error("truncation radius {radius} smaller than the near-field width 2*dx = {near}")]
    TruncationRadiusTooSmall { radius: f64, near: f64 },

    #[error("argument z = {z} outside the declared evaluation window for alpha = {alpha}")]
    ArgumentOutsideWindow { alpha: f64, z: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("trajectory is in the {found} frame, expected {expected}")]
    WrongFrame { expected: Frame, found: Frame },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("fractional order {alpha} unsupported by the PDE core (requires 0 < alpha <= 1)")]
    UnsupportedPdeOrder { alpha: f64 },

    #[error("field norm {norm:.3e} exceeded {limit:.1e} at step {step}: blow-up or instability")]
    BlowUp { step: usize, norm: f64, limit: f64 },

    #[error("newton iteration did not converge in {max_iter} iterations (last residual {residual:.3e})")]
    NewtonDiverged { max_iter: usize, residual: f64 },

    #[error("singular jacobian in newton iteration")]
    SingularJacobian,

    #[error("parameter regime violation: {0}")]
    RegimeViolation(String),

    #[error("parameter degeneracy: tau_c * lambda equals kappa")]
    TauLambdaKappaDegenerate,

    #[error(
        "formal traveling-wave identity is not validated for alpha = {alpha}; \
         solving is refused (residual evaluation remains available)"
    )]
    FormalIdentityNotValidated { alpha: f64 },

    #[error("basis index {index} out of range for a {dim}-dimensional algebra")]
    BasisIndexOutOfRange { index: usize, dim: usize },

    #[error("subalgebra coefficients must not both be zero")]
    ZeroSubalgebra,

    #[error("flow image leaves the grid: {0}")]
    FlowDomainExit(String),

    #[error("whole-cell flow requires an integer cell shift, got {cells} cells")]
    NonIntegerCellShift { cells: f64 },

    #[error("generator is not one of the catalog flow forms: {0}")]
    UnsupportedFlowGenerator(String),

    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
