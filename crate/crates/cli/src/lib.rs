//! Command implementations behind the `agrofin` binary, exposed as a library
//! so integration tests can drive them directly.

pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;

use agrofin_core::{GridConfig, ScenarioParams, SolverConfig};
use std::path::PathBuf;

/// Everything a command needs after config + flag resolution.
#[derive(Debug, Clone)]
pub struct Context {
    pub params: ScenarioParams,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
    pub config: config::RunConfig,
}

/// Map solver errors onto the documented exit codes:
/// 0 ok, 1 validation failure, 2 config error, 3 infeasible scenario or
/// mostly-infeasible sweep, 4 convergence/calibration failure.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    use agrofin_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::InvalidParameter { .. }) | Some(E::Domain { .. }) => 2,
        Some(E::NoEquilibrium { .. }) | Some(E::InfeasibleScenario { .. }) => 3,
        Some(E::ConvergenceFailure { .. })
        | Some(E::CalibrationFailure { .. })
        | Some(E::OutOfValidity { .. })
        | Some(E::SingularDenominator)
        | Some(E::DegenerateInvestor) => 4,
        None => 2,
    }
}
