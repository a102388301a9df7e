//! Equilibrium observables: production, defaults, farmer and investor
//! returns with their dispersions.

use crate::error::domain;
use crate::expectation::{clear_schedule, solve_gamma, solve_gamma_naive, GammaSolution, PriceSchedule};
use crate::gauss::{
    gaussian_partial_moment, gaussian_partial_second_moment, normal_cdf,
};
use crate::grid::{build_grid, GridConfig};
use crate::math;
use crate::params::{ScenarioParams, SolverConfig};
use crate::Result;
use alloc::format;
use alloc::vec::Vec;

/// Whether the farmer's expectation anticipates the true market integration
/// (`Rational`) or is formed ignoring it (`Naive`, γ solved at α = 0 and then
/// exposed to the market at the true α).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FarmerMode {
    Rational,
    Naive,
}

/// All observables for one converged scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquilibriumMetrics {
    /// Expected survivor production E^A[Q_τ].
    pub q_mean: f64,
    /// Production dispersion σ_Q over the aggregate law.
    pub q_std: f64,
    pub price_mean: f64,
    pub price_std: f64,
    /// Expected fraction of defaulting farmers.
    pub default_frac: f64,
    /// Dispersion of the conditional default fraction across aggregate
    /// realizations.
    pub default_frac_std: f64,
    /// Expected farmer profit Π_F.
    pub pi_f: f64,
    /// Invested capital per farmer M_F = (γ/2)² + c_F.
    pub m_f: f64,
    /// Farmer return μ_F = Π_F / M_F.
    pub mu_f: f64,
    /// Per-farmer return dispersion under the joint aggregate×idiosyncratic
    /// law (law of total variance with exact truncated second moments).
    pub sigma_f: f64,
    /// Dispersion of the population-mean farmer return across aggregate
    /// realizations only (the error-bar dispersion on μ_F).
    pub sigma_f_aggregate: f64,
    /// Expected investor capital gain Π_S.
    pub pi_s: f64,
    /// Expected capital committed to long positions M_S.
    pub m_s: f64,
    /// Investor return μ_S = Π_S / M_S; `None` when M_S = 0.
    pub mu_s: Option<f64>,
    /// Dispersion of π_S/M_S over the aggregate law; `None` when M_S = 0.
    pub sigma_s: Option<f64>,
    /// Set when α = 0: the investor never trades, so μ_S only measures
    /// transaction cost and is not a meaningful return.
    pub investor_degenerate: bool,
}

/// Farmer-side observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarmerMetrics {
    pub pi_f: f64,
    pub m_f: f64,
    pub mu_f: f64,
    pub sigma_f: f64,
    pub sigma_f_aggregate: f64,
}

/// Investor-side observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvestorMetrics {
    pub pi_s: f64,
    pub m_s: f64,
    pub mu_s: Option<f64>,
    pub sigma_s: Option<f64>,
    pub investor_degenerate: bool,
}

/// (mean, dispersion) of the per-realization default fraction
/// `Φ((θ*(θ) − θ)/(σ√τ))` over the aggregate grid.
pub fn compute_default_fraction(
    sol: &GammaSolution,
    params: &ScenarioParams,
) -> Result<(f64, f64)> {
    let points = sol.schedule.require_feasible()?;
    default_fraction_from_points(&points, &sol.schedule, params)
}

fn default_fraction_from_points(
    points: &[&crate::clearing::ClearingPoint],
    schedule: &PriceSchedule,
    params: &ScenarioParams,
) -> Result<(f64, f64)> {
    let std = params.fitness().idiosyncratic_std;
    let per_node: Vec<f64> = points
        .iter()
        .map(|pt| {
            if std == 0.0 {
                if pt.theta <= pt.theta_star {
                    Ok(1.0)
                } else {
                    Ok(0.0)
                }
            } else {
                normal_cdf((pt.theta_star - pt.theta) / std)
            }
        })
        .collect::<Result<_>>()?;
    Ok(schedule.grid.mean_std(&per_node))
}

/// Farmer profit, capital, return and dispersions from a converged solution.
pub fn compute_farmer_metrics(sol: &GammaSolution, params: &ScenarioParams) -> Result<FarmerMetrics> {
    let points = sol.schedule.require_feasible()?;
    farmer_from_points(sol.gamma, &points, &sol.schedule, params)
}

fn farmer_from_points(
    gamma: f64,
    points: &[&crate::clearing::ClearingPoint],
    schedule: &PriceSchedule,
    params: &ScenarioParams,
) -> Result<FarmerMetrics> {
    let std = params.fitness().idiosyncratic_std;
    let half = gamma / 2.0;
    let m = half * half;
    let c_eff = params.effective_fixed_cost(gamma);
    let m_f = m + c_eff;

    let n = points.len();
    let mut mean_profit = Vec::with_capacity(n);
    let mut within_var = Vec::with_capacity(n);
    for pt in points {
        let scale = half * pt.price;
        let (pm, sm) = if std == 0.0 {
            if pt.theta > pt.theta_star {
                (pt.theta, pt.theta * pt.theta)
            } else {
                (0.0, 0.0)
            }
        } else {
            (
                gaussian_partial_moment(pt.theta_star, pt.theta, std)?,
                gaussian_partial_second_moment(pt.theta_star, pt.theta, std)?,
            )
        };
        // π_F = scale·θ^i·χ − (m + c_eff): the capital loss applies in both
        // branches, so only the revenue term is truncated
        mean_profit.push(scale * pm - m - c_eff);
        within_var.push(scale * scale * (sm - pm * pm).max(0.0));
    }

    let pi_f = schedule.grid.average(&mean_profit);
    let (_, between_std) = schedule.grid.mean_std(&mean_profit);
    let within = schedule.grid.average(&within_var);
    let total_var = within + between_std * between_std;

    Ok(FarmerMetrics {
        pi_f,
        m_f,
        mu_f: pi_f / m_f,
        sigma_f: math::sqrt(total_var) / m_f,
        sigma_f_aggregate: between_std / m_f,
    })
}

/// Investor profit, committed capital and return from a converged solution.
pub fn compute_investor_metrics(
    sol: &GammaSolution,
    params: &ScenarioParams,
) -> Result<InvestorMetrics> {
    let points = sol.schedule.require_feasible()?;
    investor_from_points(&points, &sol.schedule, params)
}

fn investor_from_points(
    points: &[&crate::clearing::ClearingPoint],
    schedule: &PriceSchedule,
    params: &ScenarioParams,
) -> Result<InvestorMetrics> {
    let gains: Vec<f64> = points
        .iter()
        .map(|pt| pt.q_financial * pt.price - params.c_s)
        .collect();
    let (pi_s, gain_std) = schedule.grid.mean_std(&gains);

    // capital committed on the long side: realizations below θ₀ only
    let m_s: f64 = schedule
        .grid
        .weights
        .iter()
        .zip(points)
        .filter(|(_, pt)| pt.theta < params.theta0)
        .map(|(w, pt)| w * (pt.q_financial * pt.price + params.c_s))
        .sum();

    let (mu_s, sigma_s) = if m_s > 0.0 {
        (Some(pi_s / m_s), Some(gain_std / m_s))
    } else {
        (None, None)
    };

    Ok(InvestorMetrics {
        pi_s,
        m_s,
        mu_s,
        sigma_s,
        investor_degenerate: params.alpha == 0.0,
    })
}

/// Assemble the full observable set from an expectation and a price schedule
/// cleared at the scenario's true α.
pub fn metrics_from_schedule(
    gamma: f64,
    schedule: &PriceSchedule,
    params: &ScenarioParams,
) -> Result<EquilibriumMetrics> {
    if !(gamma > 0.0) {
        return Err(domain(format!("metrics require gamma > 0, got {gamma}")));
    }
    let points = schedule.require_feasible()?;

    let q: Vec<f64> = points.iter().map(|pt| pt.q_supply).collect();
    let prices: Vec<f64> = points.iter().map(|pt| pt.price).collect();
    let (q_mean, q_std) = schedule.grid.mean_std(&q);
    let (price_mean, price_std) = schedule.grid.mean_std(&prices);

    let (default_frac, default_frac_std) =
        default_fraction_from_points(&points, schedule, params)?;
    let farmer = farmer_from_points(gamma, &points, schedule, params)?;
    let investor = investor_from_points(&points, schedule, params)?;

    Ok(EquilibriumMetrics {
        q_mean,
        q_std,
        price_mean,
        price_std,
        default_frac,
        default_frac_std,
        pi_f: farmer.pi_f,
        m_f: farmer.m_f,
        mu_f: farmer.mu_f,
        sigma_f: farmer.sigma_f,
        sigma_f_aggregate: farmer.sigma_f_aggregate,
        pi_s: investor.pi_s,
        m_s: investor.m_s,
        mu_s: investor.mu_s,
        sigma_s: investor.sigma_s,
        investor_degenerate: investor.investor_degenerate,
    })
}

/// Observables for a solved expectation under the given mode.
///
/// Rational mode reads the solution's own schedule; naive mode re-clears the
/// market at the scenario's true α with the α=0 expectation (prices and all
/// observables are recomputed, only γ is carried over).
pub fn compute_metrics(
    sol: &GammaSolution,
    params: &ScenarioParams,
    mode: FarmerMode,
    solver: &SolverConfig,
) -> Result<EquilibriumMetrics> {
    match mode {
        FarmerMode::Rational => metrics_from_schedule(sol.gamma, &sol.schedule, params),
        FarmerMode::Naive => {
            let schedule = clear_schedule(sol.gamma, &sol.schedule.grid, params, solver);
            metrics_from_schedule(sol.gamma, &schedule, params)
        }
    }
}

/// A fully solved scenario: the expectation, the trading schedule at the true
/// α, and all observables.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioRun {
    pub mode: FarmerMode,
    pub gamma: GammaSolution,
    /// Schedule cleared at the scenario's true α (identical to
    /// `gamma.schedule` in rational mode).
    pub schedule: PriceSchedule,
    pub metrics: EquilibriumMetrics,
}

/// Solve one scenario end to end.
pub fn solve_scenario(
    params: &ScenarioParams,
    grid_config: &GridConfig,
    solver: &SolverConfig,
    mode: FarmerMode,
) -> Result<ScenarioRun> {
    let grid = build_grid(params, grid_config)?;
    let gamma = match mode {
        FarmerMode::Rational => solve_gamma(params, &grid, solver.gamma_guess, solver)?,
        FarmerMode::Naive => solve_gamma_naive(params, &grid, solver)?,
    };
    let schedule = match mode {
        FarmerMode::Rational => gamma.schedule.clone(),
        FarmerMode::Naive => {
            let sched = clear_schedule(gamma.gamma, &grid, params, solver);
            sched.require_feasible()?;
            sched
        }
    };
    let metrics = metrics_from_schedule(gamma.gamma, &schedule, params)?;
    Ok(ScenarioRun {
        mode,
        gamma,
        schedule,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::ClearingPoint;
    use crate::params::ScenarioParams;

    fn baseline_run(alpha: f64, mode: FarmerMode) -> ScenarioRun {
        let params = ScenarioParams::baseline().with_alpha(alpha);
        solve_scenario(
            &params,
            &GridConfig::default(),
            &SolverConfig::default(),
            mode,
        )
        .unwrap()
    }

    /// Hand-built schedule where every point has the same price and a
    /// threshold far outside the population.
    fn synthetic_schedule(
        params: &ScenarioParams,
        gamma: f64,
        price: f64,
        theta_star: f64,
    ) -> PriceSchedule {
        let grid = build_grid(params, &GridConfig::default()).unwrap();
        let points = grid
            .nodes
            .iter()
            .map(|&theta| {
                Some(ClearingPoint {
                    theta,
                    price,
                    q_supply: 0.0,
                    q_financial: params.alpha * (params.theta0 - theta),
                    theta_star,
                    iterations: 0,
                    residual: 0.0,
                })
            })
            .collect();
        let _ = gamma;
        PriceSchedule { grid, points }
    }

    #[test]
    fn all_defaults_lose_exactly_the_invested_capital() {
        // threshold far above every farmer: μ_F = −1 exactly
        let params = ScenarioParams::baseline();
        let gamma = 0.18;
        let schedule = synthetic_schedule(&params, gamma, 0.01, 1e6);
        let m = metrics_from_schedule(gamma, &schedule, &params).unwrap();
        // weighted sums carry the ~1e-16 slack of the weight normalization
        assert!((m.mu_f + 1.0).abs() < 1e-12, "mu_f = {}", m.mu_f);
        assert!((m.default_frac - 1.0).abs() < 1e-12);
        assert!(m.default_frac_std < 1e-7);
    }

    #[test]
    fn no_defaults_constant_price_profit_is_linear() {
        let params = ScenarioParams::baseline();
        let gamma = 0.18;
        let price = 3.0;
        // threshold far below every farmer
        let schedule = synthetic_schedule(&params, gamma, price, -1e6);
        let m = metrics_from_schedule(gamma, &schedule, &params).unwrap();
        let grid_mean: f64 = schedule.grid.average(&schedule.grid.nodes);
        let c_eff = params.effective_fixed_cost(gamma);
        let want = gamma / 2.0 * price * grid_mean - gamma * gamma / 4.0 - c_eff;
        assert!((m.pi_f - want).abs() < 1e-14);
        assert!(m.default_frac < 1e-14);
    }

    #[test]
    fn zero_net_supply_to_machine_precision() {
        let run = baseline_run(0.08, FarmerMode::Rational);
        let points = run.schedule.require_feasible().unwrap();
        let mean_qs: f64 = run
            .schedule
            .grid
            .weights
            .iter()
            .zip(&points)
            .map(|(w, pt)| w * pt.q_financial)
            .sum();
        assert!(mean_qs.abs() < 1e-12, "mean Q_S = {mean_qs}");
    }

    #[test]
    fn accounting_identity_at_every_node() {
        let params = ScenarioParams::baseline();
        let run = baseline_run(0.06, FarmerMode::Rational);
        for pt in run.schedule.require_feasible().unwrap() {
            let demand = params.w * crate::math::powf(pt.price, -params.beta);
            assert!(
                (demand - pt.q_supply - pt.q_financial).abs() <= 1e-6,
                "residual {} at theta {}",
                demand - pt.q_supply - pt.q_financial,
                pt.theta
            );
        }
    }

    #[test]
    fn degenerate_investor_at_alpha_zero() {
        let run = baseline_run(0.0, FarmerMode::Rational);
        let m = &run.metrics;
        assert!(m.investor_degenerate);
        // Π_S = −c_S, M_S = c_S · P(θ < θ₀)
        let params = ScenarioParams::baseline();
        assert!((m.pi_s + params.c_s).abs() < 1e-18);
        let p_below: f64 = run
            .schedule
            .grid
            .weights
            .iter()
            .zip(&run.schedule.grid.nodes)
            .filter(|(_, &th)| th < params.theta0)
            .map(|(w, _)| w)
            .sum();
        assert!((m.m_s - params.c_s * p_below).abs() < 1e-18);
        let mu = m.mu_s.unwrap();
        assert!((mu + 1.0 / p_below).abs() < 1e-9, "mu_S = {mu}");
    }

    #[test]
    fn zero_cost_zero_alpha_has_no_capital_base() {
        let params = ScenarioParams {
            c_s: 0.0,
            ..ScenarioParams::baseline()
        };
        let run = solve_scenario(
            &params,
            &GridConfig::default(),
            &SolverConfig::default(),
            FarmerMode::Rational,
        )
        .unwrap();
        assert_eq!(run.metrics.pi_s, 0.0);
        assert_eq!(run.metrics.m_s, 0.0);
        assert!(run.metrics.mu_s.is_none());
        assert!(run.metrics.investor_degenerate);
    }

    #[test]
    fn rational_and_naive_coincide_at_alpha_zero() {
        let r = baseline_run(0.0, FarmerMode::Rational);
        let n = baseline_run(0.0, FarmerMode::Naive);
        assert_eq!(r.metrics, n.metrics);
    }

    #[test]
    fn naive_farmer_earns_less_with_integration() {
        let r = baseline_run(0.06, FarmerMode::Rational);
        let n = baseline_run(0.06, FarmerMode::Naive);
        assert!(
            n.metrics.mu_f < r.metrics.mu_f,
            "naive {} vs rational {}",
            n.metrics.mu_f,
            r.metrics.mu_f
        );
        // the two expectations genuinely differ
        assert!(n.gamma.gamma != r.gamma.gamma);
    }

    #[test]
    fn default_rate_near_thirty_percent_at_baseline() {
        let run = baseline_run(0.0, FarmerMode::Rational);
        let f = run.metrics.default_frac;
        assert!((f - 0.30).abs() < 0.05, "default fraction {f}");
    }
}
