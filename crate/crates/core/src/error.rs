use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The input model or request is invalid or unsupported.
    Validation,
    /// A numerical procedure failed to reach its tolerance.
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Total load `rho0 >= 1`.
    Unstable {
        rho0: f64,
    },
    /// The analytic path does not cover this model.
    UnsupportedAnalytic(String),
    /// `r0 = 0` while some timer is positive.
    ZeroSwitchover,
    InvalidParameter(String),
    /// Symmetry preconditions of a worth-waiting criterion do not hold.
    AsymmetricModel(String),
    /// Simulation too short for the requested batching.
    HorizonTooSmall {
        served: u64,
        required: u64,
    },
    /// A truncated series or quadrature did not meet its tolerance.
    ToleranceNotReached {
        what: &'static str,
        achieved: f64,
    },
    /// A grid density lost or misplaced more mass than allowed.
    GridTooCoarse {
        mass_error: f64,
        mean_error: f64,
    },
    /// An operator column lost more than the allowed mass at the size cap.
    TruncationInsufficient {
        size: usize,
        deficit: f64,
    },
    NoConvergence {
        iterations: usize,
        residual: f64,
    },
    SingularSystem,
    /// Conditioning event with (numerically) zero probability.
    DegenerateCondition {
        log_probability: f64,
    },
    /// Two algebraic routes to the same value disagree.
    ReconciliationFailure {
        left: f64,
        right: f64,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Unstable { .. }
            | Error::UnsupportedAnalytic(_)
            | Error::ZeroSwitchover
            | Error::InvalidParameter(_)
            | Error::AsymmetricModel(_)
            | Error::HorizonTooSmall { .. } => ErrorKind::Validation,
            _ => ErrorKind::Numeric,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedAnalytic(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Unstable { rho0 } => write!(f, "unstable model: total load {rho0} >= 1"),
            Error::UnsupportedAnalytic(why) => write!(f, "no analytic evaluation: {why}"),
            Error::ZeroSwitchover => {
                f.write_str("total mean switchover time is zero but a timer is positive")
            }
            Error::InvalidParameter(why) => write!(f, "invalid parameter: {why}"),
            Error::AsymmetricModel(why) => write!(f, "model is not symmetric: {why}"),
            Error::HorizonTooSmall { served, required } => write!(
                f,
                "simulation horizon too small: {served} messages served after warmup, {required} required"
            ),
            Error::ToleranceNotReached { what, achieved } => {
                write!(f, "{what}: tolerance not reached (error estimate {achieved:e})")
            }
            Error::GridTooCoarse { mass_error, mean_error } => write!(
                f,
                "busy-period grid too coarse (mass error {mass_error:e}, mean error {mean_error:e})"
            ),
            Error::TruncationInsufficient { size, deficit } => write!(
                f,
                "truncation at {size} states loses {deficit:e} probability mass"
            ),
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::SingularSystem => f.write_str("singular linear system"),
            Error::DegenerateCondition { log_probability } => write!(
                f,
                "conditioning event has negligible probability (log p = {log_probability})"
            ),
            Error::ReconciliationFailure { left, right } => {
                write!(f, "delay decomposition does not reconcile: {left} vs {right}")
            }
        }
    }
}

impl core::error::Error for Error {}
