//! Scenario parameters and derived fitness distributions.

use crate::error::Error;
use crate::math;
use crate::Result;
use alloc::format;

/// How the farmer fixed cost `c_f` is interpreted.
///
/// The baseline convention expresses `c_f` in units of the optimal investment
/// `m = (γ/2)²`, so the effective cost re-scales with the expectation as it
/// converges. `Absolute` pins the cost in capital units instead; demand-level
/// calibration (market B) relies on it, because in the ratio convention the
/// zero-integration equilibrium is exactly scale invariant in `w` and the
/// default rate cannot respond to demand at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CostBasis {
    #[default]
    RatioOfInvestment,
    Absolute,
}

/// The exogenous parameter vector of one market scenario.
///
/// Defaults (via [`ScenarioParams::baseline`]) are the reference calibration:
/// β=0.6, w=0.02, σ̄=0.1, σ=0.2, θ₀=0.5, c_f=0.6, c_s=0.0002, α=0, τ=1.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioParams {
    /// Demand elasticity β (> 0).
    pub beta: f64,
    /// Demand scale w (> 0).
    pub w: f64,
    /// Aggregate fitness volatility σ̄ (≥ 0).
    pub sigma_bar: f64,
    /// Idiosyncratic fitness volatility σ (≥ 0).
    pub sigma: f64,
    /// Initial fitness θ₀ (> 0).
    pub theta0: f64,
    /// Farmer fixed cost c_F (≥ 0); see [`CostBasis`].
    pub c_f: f64,
    /// Financial transaction cost c_S (≥ 0).
    pub c_s: f64,
    /// Market-integration coefficient α (≥ 0).
    pub alpha: f64,
    /// Time to produce τ (> 0).
    pub tau: f64,
    /// Interpretation of `c_f`.
    pub cost_basis: CostBasis,
}

impl ScenarioParams {
    /// Reference parameter set.
    pub fn baseline() -> Self {
        Self {
            beta: 0.6,
            w: 0.02,
            sigma_bar: 0.1,
            sigma: 0.2,
            theta0: 0.5,
            c_f: 0.6,
            c_s: 0.0002,
            alpha: 0.0,
            tau: 1.0,
            cost_basis: CostBasis::RatioOfInvestment,
        }
    }

    /// Check every range invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 9] = [
            ("beta", self.beta, self.beta > 0.0),
            ("w", self.w, self.w > 0.0),
            ("sigma_bar", self.sigma_bar, self.sigma_bar >= 0.0),
            ("sigma", self.sigma, self.sigma >= 0.0),
            ("theta0", self.theta0, self.theta0 > 0.0),
            ("c_f", self.c_f, self.c_f >= 0.0),
            ("c_s", self.c_s, self.c_s >= 0.0),
            ("alpha", self.alpha, self.alpha >= 0.0),
            ("tau", self.tau, self.tau > 0.0),
        ];
        for (name, value, ok) in checks {
            if !value.is_finite() || !ok {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!("out of range (got {value})"),
                });
            }
        }
        Ok(())
    }

    /// Marginal laws of the fitness process at the production horizon.
    pub fn fitness(&self) -> FitnessDistributions {
        FitnessDistributions::new(self.theta0, self.sigma_bar, self.sigma, self.tau)
    }

    /// Effective fixed cost in capital units for a candidate expectation γ.
    pub fn effective_fixed_cost(&self, gamma: f64) -> f64 {
        match self.cost_basis {
            CostBasis::RatioOfInvestment => self.c_f * (gamma / 2.0) * (gamma / 2.0),
            CostBasis::Absolute => self.c_f,
        }
    }

    /// Copy with a different integration coefficient.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

/// Marginal Gaussian laws of the fitness at time τ.
///
/// The aggregate fitness is `Normal(θ₀, σ̄²τ)`; conditional on its realization
/// θ_τ, a single farmer's fitness is `Normal(θ_τ, σ²τ)`. Only these marginals
/// matter: the driving processes never appear elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitnessDistributions {
    /// Mean of the aggregate law (θ₀).
    pub aggregate_mean: f64,
    /// Standard deviation of the aggregate law (σ̄√τ).
    pub aggregate_std: f64,
    /// Conditional standard deviation of a single farmer's fitness (σ√τ).
    pub idiosyncratic_std: f64,
}

impl FitnessDistributions {
    pub fn new(theta0: f64, sigma_bar: f64, sigma: f64, tau: f64) -> Self {
        let sqrt_tau = math::sqrt(tau);
        Self {
            aggregate_mean: theta0,
            aggregate_std: sigma_bar * sqrt_tau,
            idiosyncratic_std: sigma * sqrt_tau,
        }
    }
}

/// Iteration caps and tolerances for the two nested solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Stopping tolerance for the inner price iteration (absolute, on price).
    pub price_tol: f64,
    /// Stopping tolerance on the outer residual |γ − F(γ)|.
    pub gamma_tol: f64,
    /// Inner iteration cap.
    pub max_price_iterations: usize,
    /// Outer iteration cap.
    pub max_gamma_iterations: usize,
    /// Initial guess for γ.
    pub gamma_guess: f64,
    /// Inner solver algorithm.
    pub price_method: crate::clearing::PriceMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            price_tol: 1e-7,
            gamma_tol: 1e-7,
            max_price_iterations: 200,
            max_gamma_iterations: 10_000,
            gamma_guess: 1.0,
            price_method: crate::clearing::PriceMethod::Bracketed,
        }
    }
}
