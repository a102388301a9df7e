//! Error types shared by the solver stack.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Everything that can go wrong while solving the model.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scenario or solver parameter violates its documented range.
    InvalidParameter { name: &'static str, message: String },
    /// An operation was called outside its mathematical domain
    /// (non-finite input, non-positive standard deviation, ...).
    Domain { message: String },
    /// The existence condition fails for this fitness realization: the
    /// investor's net demand exceeds the maximal possible survivor supply.
    NoEquilibrium { theta: f64, alpha: f64, gamma: f64 },
    /// An iterative solver hit its iteration cap before reaching tolerance.
    ConvergenceFailure { what: &'static str, residual: f64 },
    /// One or more quadrature nodes have no market-clearing solution for the
    /// requested (γ, α); node indices are reported, never silently dropped.
    InfeasibleScenario { node_indices: Vec<usize> },
    /// Investor capital base is exactly zero (only possible when both
    /// `alpha = 0` and `c_s = 0`), so the investor return is undefined.
    DegenerateInvestor,
    /// The closed-form expression was evaluated outside its validity region
    /// (bracket term non-positive).
    OutOfValidity { bracket: f64 },
    /// The analytic return denominator is numerically zero.
    SingularDenominator,
    /// The demand-level bisection cannot reach the requested default-rate
    /// target; `floor` is the smallest attainable value found.
    CalibrationFailure { target: f64, floor: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, message } => {
                write!(f, "invalid parameter `{name}`: {message}")
            }
            Error::Domain { message } => write!(f, "domain error: {message}"),
            Error::NoEquilibrium { theta, alpha, gamma } => write!(
                f,
                "no market-clearing price exists at theta={theta}, alpha={alpha}, gamma={gamma}"
            ),
            Error::ConvergenceFailure { what, residual } => {
                write!(f, "{what} failed to converge (residual {residual:e})")
            }
            Error::InfeasibleScenario { node_indices } => write!(
                f,
                "no equilibrium at {} grid node(s): {:?}",
                node_indices.len(),
                node_indices
            ),
            Error::DegenerateInvestor => {
                write!(f, "investor capital base is zero (alpha = 0 and c_s = 0)")
            }
            Error::OutOfValidity { bracket } => write!(
                f,
                "closed form outside validity region (bracket term {bracket} <= 0)"
            ),
            Error::SingularDenominator => write!(f, "analytic return denominator is zero"),
            Error::CalibrationFailure { target, floor } => write!(
                f,
                "default-rate target {target} unreachable; attainable floor is ~{floor:.4}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub(crate) fn domain(message: impl Into<String>) -> Error {
    Error::Domain {
        message: message.into(),
    }
}
