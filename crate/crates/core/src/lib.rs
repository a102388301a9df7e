//! Equilibrium model of an agricultural commodity market with partially
//! integrated financial investors.
//!
//! Farmers commit an investment `m = (γ/2)²` one production cycle before the
//! market clears, where `γ = E₀[p_τ θ_τ]` is their self-consistent expectation
//! of price times fitness. Fitness moves by a Gaussian aggregate shock shared
//! by everyone plus an idiosyncratic one per farmer; farmers whose realized
//! profit is negative default and their output leaves the market. A financial
//! investor observes the aggregate shock just before clearing and takes the
//! contingent position `Q_S = α(θ₀ − θ_τ)`, where `α` measures how integrated
//! the financial and commodity markets are.
//!
//! The crate is organized bottom-up:
//!
//! - [`gauss`]: normal CDF and truncated first/second moments, the closed
//!   forms every population average in the model reduces to;
//! - [`grid`]: the quadrature grid over aggregate-fitness realizations;
//! - [`clearing`]: the per-realization market clearing price;
//! - [`expectation`]: the outer secant fixed point for `γ` and the resulting
//!   price schedule;
//! - [`metrics`]: production, default and return observables;
//! - [`analytic`]: the closed-form single-farmer model used as an oracle;
//! - [`sweep`]: comparative statics over `α` (or `β`, `σ̄`, `w`).
//!
//! Everything is pure `f64` computation (`no_std` + `alloc` compatible; all
//! transcendentals go through `libm` so results are bit-identical across
//! platforms and thread counts).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytic;
pub mod clearing;
pub mod error;
pub mod expectation;
pub mod gauss;
pub mod grid;
pub mod math;
pub mod metrics;
pub mod params;
pub mod sweep;

pub use clearing::{solve_price, ClearingPoint, PriceMethod};
pub use error::Error;
pub use expectation::{
    clear_schedule, evaluate_f, solve_gamma, solve_gamma_multistart, solve_gamma_naive,
    GammaSolution, PriceSchedule,
};
pub use grid::{build_grid, GridConfig, QuadratureGrid};
pub use metrics::{compute_metrics, solve_scenario, EquilibriumMetrics, FarmerMode, ScenarioRun};
pub use params::{CostBasis, FitnessDistributions, ScenarioParams, SolverConfig};
pub use sweep::{
    assemble_sweep, calibrate_market_b, default_alpha_values, prepare_context, run_sweep,
    solve_sweep_point, SweepContext, SweepMode, SweepPoint, SweepResult, SweepRow, SweepSpec,
    SweptParameter,
};

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
