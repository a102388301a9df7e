//! Market clearing for one aggregate-fitness realization.
//!
//! For a realization θ_τ, a candidate expectation γ and scenario parameters,
//! the equilibrium price solves
//!
//! ```text
//! w / p^β  =  Q_τ(θ_τ, p)  +  Q_S(θ_τ)
//! ```
//!
//! Consumer demand is strictly decreasing in `p` and survivor supply `Q_τ` is
//! nondecreasing in `p` (the default threshold falls as the price rises), so
//! the excess demand has at most one root. The primary algorithm brackets the
//! root and refines with Illinois false position; the literal fixed-point
//! iteration `p ← (w/(Q_τ+Q_S))^{1/β}` is kept as an alternate mode for
//! fidelity testing.

use crate::error::{domain, Error};
use crate::gauss::gaussian_partial_moment;
use crate::math;
use crate::params::{ScenarioParams, SolverConfig};
use crate::Result;
use alloc::format;

/// Inner solver algorithm selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PriceMethod {
    /// Bracketed root-find on excess demand (robust, the default).
    #[default]
    Bracketed,
    /// Direct fixed-point iteration on the clearing identity.
    FixedPoint,
}

/// A solved market clearing at one fitness realization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClearingPoint {
    /// Aggregate fitness realization θ_τ.
    pub theta: f64,
    /// Equilibrium price.
    pub price: f64,
    /// Survivor production brought to the market.
    pub q_supply: f64,
    /// Investor net position α(θ₀ − θ_τ); positive means extra supply.
    pub q_financial: f64,
    /// Default threshold θ* at the equilibrium price.
    pub theta_star: f64,
    /// Inner iterations spent (bracket expansion + refinement).
    pub iterations: usize,
    /// |w/p^β − Q_τ − Q_S| at the returned price.
    pub residual: f64,
}

/// Investor contingent position `Q_S = α(θ₀ − θ_τ)`.
///
/// Positive when θ_τ < θ₀ (extra supply), negative when θ_τ > θ₀ (extra
/// demand), exactly as it enters the clearing identity.
pub fn financial_demand(theta: f64, params: &ScenarioParams) -> f64 {
    params.alpha * (params.theta0 - theta)
}

/// Default threshold `θ* = max[0, (γ/2 + c_F·2/γ) / p]`, with the fixed cost
/// resolved to capital units via the scenario's cost basis.
pub fn default_threshold(price: f64, gamma: f64, params: &ScenarioParams) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(domain(format!("default_threshold requires gamma > 0, got {gamma}")));
    }
    if !(price > 0.0) || !price.is_finite() {
        return Err(domain(format!("default_threshold requires price > 0, got {price}")));
    }
    let c_eff = params.effective_fixed_cost(gamma);
    Ok(((gamma / 2.0 + c_eff * 2.0 / gamma) / price).max(0.0))
}

/// Survivor supply `Q_τ = (γ/2)·E^I[ θ^i · χ_(θ*,∞)(θ^i) ]`, evaluated in
/// closed form via the upper partial moment of the idiosyncratic law.
///
/// σ = 0 degenerates to a step: full supply `(γ/2)θ` above the threshold,
/// nothing at or below it.
pub fn survivor_supply(theta: f64, price: f64, gamma: f64, params: &ScenarioParams) -> Result<f64> {
    let threshold = default_threshold(price, gamma, params)?;
    let std = params.fitness().idiosyncratic_std;
    if std == 0.0 {
        return Ok(if theta > threshold {
            gamma / 2.0 * theta
        } else {
            0.0
        });
    }
    Ok(gamma / 2.0 * gaussian_partial_moment(threshold, theta, std)?)
}

/// Supremum of survivor supply over all prices: `(γ/2)·∫₀^∞ x N_x(θ, σ²τ) dx`.
pub fn supply_capacity(theta: f64, gamma: f64, params: &ScenarioParams) -> f64 {
    let std = params.fitness().idiosyncratic_std;
    if std == 0.0 {
        return gamma / 2.0 * theta.max(0.0);
    }
    gamma / 2.0
        * gaussian_partial_moment(0.0, theta, std)
            .expect("positive std checked above")
}

/// Existence condition for the equilibrium price: the maximal possible
/// survivor supply must cover the investor's net demand,
/// `(γ/2)∫₀^∞ x N_x(θ, σ²τ) dx ≥ α(θ − θ₀)`.
///
/// Always true for α = 0 and for θ ≤ θ₀.
pub fn check_existence(theta: f64, gamma: f64, params: &ScenarioParams) -> bool {
    supply_capacity(theta, gamma, params) >= params.alpha * (theta - params.theta0)
}

/// Excess demand `g(p) = w/p^β − Q_τ(p) − Q_S` at a candidate price.
pub fn excess_demand(price: f64, theta: f64, gamma: f64, params: &ScenarioParams) -> Result<f64> {
    let demand = params.w * math::powf(price, -params.beta);
    Ok(demand - survivor_supply(theta, price, gamma, params)? - financial_demand(theta, params))
}

/// Largest price the bracket expansion will try before giving up.
const BRACKET_CAP: f64 = 1e12;
const BRACKET_FLOOR: f64 = 1e-280;

/// Solve the clearing equation at one fitness realization.
///
/// Deterministic: identical inputs yield bit-identical outputs.
pub fn solve_price(
    theta: f64,
    gamma: f64,
    params: &ScenarioParams,
    solver: &SolverConfig,
) -> Result<ClearingPoint> {
    params.validate()?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(domain(format!("solve_price requires gamma > 0, got {gamma}")));
    }
    if !check_existence(theta, gamma, params) {
        return Err(Error::NoEquilibrium {
            theta,
            alpha: params.alpha,
            gamma,
        });
    }

    let g = |p: f64| excess_demand(p, theta, gamma, params);

    // Expand a sign bracket [lo, hi] outward from p = 1: g(lo) > 0 > g(hi).
    // g(p) → +∞ as p → 0 and → −(capacity + Q_S) < 0 as p → ∞ when the
    // existence condition holds strictly.
    let mut iterations = 0usize;
    let mut hi = 1.0;
    let mut g_hi = g(hi)?;
    iterations += 1;
    while g_hi >= 0.0 {
        hi *= 4.0;
        if hi > BRACKET_CAP {
            return Err(Error::ConvergenceFailure {
                what: "clearing price bracket expansion",
                residual: g_hi,
            });
        }
        g_hi = g(hi)?;
        iterations += 1;
    }
    let mut lo = hi / 4.0;
    let mut g_lo = g(lo)?;
    iterations += 1;
    while g_lo <= 0.0 {
        lo /= 4.0;
        if lo < BRACKET_FLOOR {
            return Err(Error::ConvergenceFailure {
                what: "clearing price bracket expansion",
                residual: g_lo,
            });
        }
        g_lo = g(lo)?;
        iterations += 1;
    }

    let price = match solver.price_method {
        PriceMethod::Bracketed => refine_bracketed(
            &g,
            lo,
            hi,
            g_lo,
            g_hi,
            solver.price_tol,
            solver.max_price_iterations,
            &mut iterations,
        )?,
        PriceMethod::FixedPoint => fixed_point(
            theta,
            gamma,
            params,
            lo,
            hi,
            solver.price_tol,
            solver.max_price_iterations,
            &mut iterations,
        )?,
    };

    let q_supply = survivor_supply(theta, price, gamma, params)?;
    let q_financial = financial_demand(theta, params);
    let theta_star = default_threshold(price, gamma, params)?;
    let residual = math::abs(params.w * math::powf(price, -params.beta) - q_supply - q_financial);

    Ok(ClearingPoint {
        theta,
        price,
        q_supply,
        q_financial,
        theta_star,
        iterations,
        residual,
    })
}

/// Illinois false position with a bisection fallback; the bracket invariant
/// g(lo) > 0 > g(hi) is maintained throughout.
#[allow(clippy::too_many_arguments)]
fn refine_bracketed(
    g: &dyn Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    mut g_lo: f64,
    mut g_hi: f64,
    tol: f64,
    max_iterations: usize,
    iterations: &mut usize,
) -> Result<f64> {
    // For very large prices the absolute tolerance can be below one ulp.
    let width_tol = |hi: f64| tol.max(4.0 * f64::EPSILON * hi);
    let mut side = 0i8; // which endpoint moved last: -1 lo, +1 hi

    for _ in 0..max_iterations {
        if hi - lo <= width_tol(hi) {
            return Ok(0.5 * (lo + hi));
        }
        let denom = g_hi - g_lo;
        let mut candidate = if denom != 0.0 {
            (lo * g_hi - hi * g_lo) / denom
        } else {
            0.5 * (lo + hi)
        };
        // interpolant outside or hugging an endpoint: bisect instead
        let margin = 0.01 * (hi - lo);
        if !candidate.is_finite() || candidate <= lo + margin || candidate >= hi - margin {
            candidate = 0.5 * (lo + hi);
        }
        let g_mid = g(candidate)?;
        *iterations += 1;
        if g_mid > 0.0 {
            lo = candidate;
            g_lo = g_mid;
            if side == -1 {
                g_hi *= 0.5; // Illinois trick: unstick the stale endpoint
            }
            side = -1;
        } else {
            hi = candidate;
            g_hi = g_mid;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::ConvergenceFailure {
        what: "clearing price refinement",
        residual: hi - lo,
    })
}

/// The literal fixed-point iteration `p ← (w/(Q_τ(p)+Q_S))^{1/β}`.
///
/// Iterates with non-positive net supply are clamped toward the upper
/// bracket edge instead of taking a fractional power of a non-positive
/// number. The iterate direction also carries the excess-demand sign
/// (`T(p) > p ⇔ g(p) > 0`), so each step tightens the sign bracket; a step
/// that leaves the bracket or stops contracting is replaced by its midpoint.
#[allow(clippy::too_many_arguments)]
fn fixed_point(
    theta: f64,
    gamma: f64,
    params: &ScenarioParams,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iterations: usize,
    iterations: &mut usize,
) -> Result<f64> {
    let q_fin = financial_demand(theta, params);
    let mut p = math::sqrt(lo * hi);
    let mut prev_step = f64::INFINITY;
    for _ in 0..max_iterations {
        let net_supply = survivor_supply(theta, p, gamma, params)? + q_fin;
        *iterations += 1;
        let candidate = if net_supply <= 0.0 {
            0.5 * (p + hi)
        } else {
            math::powf(params.w / net_supply, 1.0 / params.beta)
        };
        if candidate > p {
            lo = lo.max(p);
        } else {
            hi = hi.min(p);
        }
        // keep the literal step only while it contracts at least as fast as
        // bisection; otherwise bisect the sign bracket
        let step = math::abs(candidate - p);
        let next = if candidate <= lo || candidate >= hi || step >= 0.5 * prev_step {
            0.5 * (lo + hi)
        } else {
            candidate
        };
        if math::abs(next - p) < tol {
            return Ok(next);
        }
        prev_step = math::abs(next - p);
        p = next;
    }
    Err(Error::ConvergenceFailure {
        what: "clearing price fixed-point iteration",
        residual: hi - lo,
    })
}
