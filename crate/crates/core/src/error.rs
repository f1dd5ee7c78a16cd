use thiserror::Error;

/// Every failure the solver stack can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("digits below minimum: {digits} < {minimum}")]
    DigitsBelowMinimum { digits: u32, minimum: u32 },
    #[error("guard digits below minimum: {guard} < {minimum}")]
    GuardDigitsBelowMinimum { guard: u32, minimum: u32 },
    #[error("cannot parse decimal value {0:?}")]
    Parse(String),

    #[error("basis index {index} out of range for basis of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("quadrature order {order} too low (need at least {required})")]
    QuadratureOrderTooLow { order: usize, required: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operator is already resolved in a non-real frame")]
    FrameAlreadyApplied,
    #[error("size mismatch: need {needed} basis states, have {available}")]
    SizeMismatch { needed: usize, available: usize },

    #[error("block B_{block} is numerically singular")]
    SingularB { block: usize },
    #[error("P_(n-1)(0) is singular; lower-bound correction undefined at n = {n}")]
    SingularP { n: usize },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("iterate left the basin disk: |lambda - lambda0| = {distance:.3e} > {radius:.3e}")]
    BasinEscape { distance: f64, radius: f64 },
    #[error("dense oracle limited to 64x64, got {size}")]
    OracleTooLarge { size: usize },
    #[error("no stabilization plateau: minimal step {min_step:.3e} above threshold {threshold:.3e}")]
    NoPlateau { min_step: f64, threshold: f64 },

    #[error("1 + 4*lambda*Omega left the principal branch domain")]
    NegativeDiscriminant,
    #[error("dilation-angle plateau check failed: |E(theta) - E(theta')| = {difference:.3e} > {allowed:.3e}")]
    ThetaPlateauFail { difference: f64, allowed: f64 },
    #[error("wrong frame: {0}")]
    WrongFrame(String),

    #[error("E_t0 - Re(E_d0) is not positive at working precision ({0})")]
    NonpositiveGap(String),
    #[error("missing levels: {0}")]
    MissingLevels(String),
    #[error("input vector is not a converged eigenvector (residual {residual:.3e} > {tolerance:.3e})")]
    NotConverged { residual: f64, tolerance: f64 },
    #[error("invalid domain: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
