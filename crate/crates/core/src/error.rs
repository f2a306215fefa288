use thiserror::Error;

/// Errors produced by the model, the integrator and the analysis tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("density slope {alpha} outside the open bound |alpha| < {bound}")]
    SlopeOutOfRange { alpha: f64, bound: f64 },

    #[error("{name} must be positive, got {value}")]
    NonPositiveDimension { name: &'static str, value: f64 },

    #[error("density parameter A = {0} outside [0, 1/3)")]
    ParameterOutOfRange(f64),

    #[error("point lies on the segment (s - 2 = {gap:e})")]
    OnSegment { gap: f64 },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("quadrature did not converge (error estimate {estimate:e})")]
    QuadratureNotConverged { estimate: f64 },

    #[error("axis singularity: r = {r:e} with nonzero angular momentum")]
    AxisSingularity { r: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxStepsExceeded(usize),

    #[error("angular momentum must be nonzero")]
    ZeroAngularMomentum,

    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),

    #[error("seed outside the energy shell (P_x^2 = {discriminant:e})")]
    OutsideEnergyShell { discriminant: f64 },

    #[error("trajectory did not return to the section ({0})")]
    NoReturn(String),

    #[error("reconstruction crossed the axis at t = {t}")]
    AxisCrossing { t: f64 },

    #[error("invalid tolerance {0:e}; expected a value in [1e-14, 1e-3]")]
    InvalidTolerance(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of a numerical procedure, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNotConverged { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::MaxStepsExceeded(_)
                | Error::NewtonDiverged(_)
                | Error::NoReturn(_)
                | Error::AxisCrossing { .. }
                | Error::AxisSingularity { .. }
        )
    }
}
