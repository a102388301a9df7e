//! The outer self-consistency γ = F(γ).
//!
//! `F(γ)` clears the market at every quadrature node with the candidate
//! expectation and averages `p_τ(θ)·θ` under the aggregate law. The root of
//! `r(γ) = γ − F(γ)` is found with a secant iteration, safeguarded in three
//! layers: a damped Picard step when the secant step is wild, a residual sign
//! bracket with bisection once both signs have been seen (`r` is monotone
//! because supply grows with γ, so prices and hence `F` fall), and a retreat
//! rule for trial γ values that make extreme nodes infeasible.

use crate::clearing::{solve_price, ClearingPoint};
use crate::error::Error;
use crate::grid::QuadratureGrid;
use crate::math;
use crate::params::{ScenarioParams, SolverConfig};
use crate::Result;
use alloc::vec::Vec;

/// Equilibrium price per quadrature node; infeasible nodes are flagged by a
/// missing point, never silently filled.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriceSchedule {
    pub grid: QuadratureGrid,
    pub points: Vec<Option<ClearingPoint>>,
}

impl PriceSchedule {
    /// Indices of nodes with no market-clearing solution.
    pub fn infeasible_nodes(&self) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_none())
            .map(|(k, _)| k)
            .collect()
    }

    pub fn all_feasible(&self) -> bool {
        self.points.iter().all(|p| p.is_some())
    }

    /// Borrow every clearing point, erroring with the offending node indices
    /// if any node is infeasible.
    pub fn require_feasible(&self) -> Result<Vec<&ClearingPoint>> {
        if self.all_feasible() {
            Ok(self.points.iter().map(|p| p.as_ref().unwrap()).collect())
        } else {
            Err(Error::InfeasibleScenario {
                node_indices: self.infeasible_nodes(),
            })
        }
    }
}

/// Converged farmer expectation with diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaSolution {
    /// The fixed point γ = E^A[p_τ(θ)·θ].
    pub gamma: f64,
    /// Fully feasible price schedule at γ.
    pub schedule: PriceSchedule,
    /// Accepted outer iterations.
    pub outer_iterations: usize,
    /// |γ − F(γ)| at the returned point.
    pub residual: f64,
    /// Max pairwise difference across starting guesses (multi-start runs).
    pub multistart_spread: Option<f64>,
}

/// Clear the market at every grid node for a candidate γ, recording
/// infeasible nodes instead of aborting.
pub fn clear_schedule(
    gamma: f64,
    grid: &QuadratureGrid,
    params: &ScenarioParams,
    solver: &SolverConfig,
) -> PriceSchedule {
    let points = grid
        .nodes
        .iter()
        .map(|&theta| solve_price(theta, gamma, params, solver).ok())
        .collect();
    PriceSchedule {
        grid: grid.clone(),
        points,
    }
}

/// One evaluation of F(γ) = E^A[p_τ(θ)·θ] over the grid.
///
/// Errors with the offending node indices if any node is infeasible.
pub fn evaluate_f(
    gamma: f64,
    grid: &QuadratureGrid,
    params: &ScenarioParams,
    solver: &SolverConfig,
) -> Result<f64> {
    let schedule = clear_schedule(gamma, grid, params, solver);
    let points = schedule.require_feasible()?;
    Ok(weighted_expectation(grid, &points))
}

fn weighted_expectation(grid: &QuadratureGrid, points: &[&ClearingPoint]) -> f64 {
    grid.weights
        .iter()
        .zip(points)
        .map(|(w, pt)| w * pt.price * pt.theta)
        .sum()
}

struct Evaluation {
    gamma: f64,
    f_value: f64,
    residual: f64,
    schedule: PriceSchedule,
}

fn evaluate(
    gamma: f64,
    grid: &QuadratureGrid,
    params: &ScenarioParams,
    solver: &SolverConfig,
) -> Result<Evaluation> {
    let schedule = clear_schedule(gamma, grid, params, solver);
    let f_value = {
        let points = schedule.require_feasible()?;
        weighted_expectation(grid, &points)
    };
    Ok(Evaluation {
        gamma,
        f_value,
        residual: gamma - f_value,
        schedule,
    })
}

/// Evaluate at `target`, halving back toward the feasible `anchor` when the
/// trial γ has no equilibrium at some node.
fn evaluate_with_retreat(
    target: f64,
    anchor: f64,
    grid: &QuadratureGrid,
    params: &ScenarioParams,
    solver: &SolverConfig,
) -> Result<(Evaluation, bool)> {
    let mut gamma = target;
    let mut retreated = false;
    let mut last_err = None;
    for _ in 0..64 {
        match evaluate(gamma, grid, params, solver) {
            Ok(eval) => return Ok((eval, retreated)),
            Err(err @ Error::InfeasibleScenario { .. })
            | Err(err @ Error::ConvergenceFailure { .. }) => {
                retreated = true;
                last_err = Some(err);
                gamma = 0.5 * (gamma + anchor);
            }
            Err(other) => return Err(other),
        }
    }
    Err(last_err.expect("retreat loop only exits after at least one failure"))
}

/// Outer γ window the secant step may move in before the Picard safeguard
/// takes over; generous relative to the (0, 10000] guess range.
const GAMMA_WINDOW_MAX: f64 = 1e5;
/// Consecutive stagnant retreats tolerated before declaring the scenario
/// infeasible (the iteration is pinned at the existence boundary).
const MAX_STAGNANT_RETREATS: usize = 8;
/// Minimum relative existence margin a converged solution must keep at every
/// node. The truncated grid admits spurious fixed points where the extreme
/// node sits a hair inside the existence boundary and carries an unbounded
/// price into the aggregate average; genuine solutions keep a margin of
/// several percent, the spurious branch well under 0.1%.
const MIN_EXISTENCE_MARGIN: f64 = 0.01;

/// Node indices whose existence margin at γ is below [`MIN_EXISTENCE_MARGIN`].
fn boundary_pinned_nodes(
    gamma: f64,
    grid: &QuadratureGrid,
    params: &ScenarioParams,
) -> Vec<usize> {
    grid.nodes
        .iter()
        .enumerate()
        .filter(|(_, &theta)| {
            let net_demand = params.alpha * (theta - params.theta0);
            net_demand > 0.0
                && crate::clearing::supply_capacity(theta, gamma, params)
                    < (1.0 + MIN_EXISTENCE_MARGIN) * net_demand
        })
        .map(|(k, _)| k)
        .collect()
}

/// Solve γ = F(γ) by safeguarded secant from `guess` (second start point is
/// `1.01·guess`). Converges when |γ − F(γ)| < `solver.gamma_tol`.
pub fn solve_gamma(
    params: &ScenarioParams,
    grid: &QuadratureGrid,
    guess: f64,
    solver: &SolverConfig,
) -> Result<GammaSolution> {
    params.validate()?;
    if !(guess > 0.0) || !guess.is_finite() {
        return Err(crate::error::domain(alloc::format!(
            "gamma guess must be positive, got {guess}"
        )));
    }

    // residual sign bracket: tightest (γ with r<0, γ with r>0) seen so far
    let mut below: Option<f64> = None;
    let mut above: Option<f64> = None;
    let note = |gamma: f64, residual: f64, below: &mut Option<f64>, above: &mut Option<f64>| {
        if residual < 0.0 {
            *below = Some(below.map_or(gamma, |b: f64| b.max(gamma)));
        } else {
            *above = Some(above.map_or(gamma, |a: f64| a.min(gamma)));
        }
    };

    let accept = |eval: Evaluation, iterations: usize| -> Result<GammaSolution> {
        let pinned = boundary_pinned_nodes(eval.gamma, grid, params);
        if !pinned.is_empty() {
            return Err(Error::InfeasibleScenario {
                node_indices: pinned,
            });
        }
        let residual = math::abs(eval.residual);
        Ok(GammaSolution {
            gamma: eval.gamma,
            schedule: eval.schedule,
            outer_iterations: iterations,
            residual,
            multistart_spread: None,
        })
    };

    let mut prev = evaluate(guess, grid, params, solver)?;
    if math::abs(prev.residual) < solver.gamma_tol {
        return accept(prev, 0);
    }
    note(prev.gamma, prev.residual, &mut below, &mut above);

    let (mut cur, _) = evaluate_with_retreat(guess * 1.01, guess, grid, params, solver)?;
    let mut stagnant_retreats = 0usize;

    for iteration in 1..=solver.max_gamma_iterations {
        note(cur.gamma, cur.residual, &mut below, &mut above);
        if math::abs(cur.residual) < solver.gamma_tol {
            return accept(cur, iteration);
        }

        // secant candidate
        let denom = cur.residual - prev.residual;
        let mut candidate = if denom != 0.0 {
            cur.gamma - cur.residual * (cur.gamma - prev.gamma) / denom
        } else {
            f64::NAN
        };
        let mut secant_step = true;
        if !candidate.is_finite() || candidate <= 0.0 || candidate > GAMMA_WINDOW_MAX {
            candidate = 0.5 * cur.gamma + 0.5 * cur.f_value; // damped Picard
            secant_step = false;
        }
        if let (Some(b), Some(a)) = (below, above) {
            let (lo, hi) = if b < a { (b, a) } else { (a, b) };
            if candidate <= lo || candidate >= hi {
                candidate = 0.5 * (lo + hi);
                secant_step = false;
            }
        }

        let (mut next, retreated) =
            evaluate_with_retreat(candidate, cur.gamma, grid, params, solver)?;

        // secant step made things worse: replace with damped Picard or, once
        // a sign bracket exists, its midpoint
        if secant_step && math::abs(next.residual) > math::abs(cur.residual) {
            let fallback = match (below, above) {
                (Some(b), Some(a)) => 0.5 * (b + a),
                _ => 0.5 * cur.gamma + 0.5 * cur.f_value,
            };
            if fallback != next.gamma {
                let (alt, _) = evaluate_with_retreat(fallback, cur.gamma, grid, params, solver)?;
                if math::abs(alt.residual) < math::abs(next.residual) {
                    next = alt;
                }
            }
        }

        // pinned at the existence boundary: residual cannot shrink
        if retreated && math::abs(next.residual) > 0.9 * math::abs(cur.residual) {
            stagnant_retreats += 1;
            if stagnant_retreats >= MAX_STAGNANT_RETREATS {
                // the fixed point sits on the infeasible side; report the
                // nodes blocking it, probed at the Picard target F(γ)
                let nodes = clear_schedule(next.f_value, grid, params, solver).infeasible_nodes();
                if nodes.is_empty() {
                    return Err(Error::ConvergenceFailure {
                        what: "gamma fixed point",
                        residual: math::abs(next.residual),
                    });
                }
                return Err(Error::InfeasibleScenario {
                    node_indices: nodes,
                });
            }
        } else {
            stagnant_retreats = 0;
        }

        prev = cur;
        cur = next;
    }

    Err(Error::ConvergenceFailure {
        what: "gamma fixed point",
        residual: math::abs(cur.residual),
    })
}

/// Run [`solve_gamma`] from several guesses and report the max pairwise
/// spread of the converged values. The returned solution is the first
/// guess's, with `multistart_spread` filled in.
pub fn solve_gamma_multistart(
    params: &ScenarioParams,
    grid: &QuadratureGrid,
    guesses: &[f64],
    solver: &SolverConfig,
) -> Result<GammaSolution> {
    let first = guesses.first().ok_or_else(|| Error::InvalidParameter {
        name: "guesses",
        message: alloc::string::String::from("need at least one starting guess"),
    })?;
    let mut solution = solve_gamma(params, grid, *first, solver)?;
    let mut lo = solution.gamma;
    let mut hi = solution.gamma;
    for &guess in &guesses[1..] {
        let other = solve_gamma(params, grid, guess, solver)?;
        lo = lo.min(other.gamma);
        hi = hi.max(other.gamma);
    }
    solution.multistart_spread = Some(hi - lo);
    Ok(solution)
}

/// The naive-farmer expectation: γ solved with market integration ignored
/// (α forced to 0). Independent of the scenario's true α by construction.
pub fn solve_gamma_naive(
    params: &ScenarioParams,
    grid: &QuadratureGrid,
    solver: &SolverConfig,
) -> Result<GammaSolution> {
    solve_gamma(&params.with_alpha(0.0), grid, solver.gamma_guess, solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridConfig};
    use crate::math;

    fn baseline_setup() -> (ScenarioParams, QuadratureGrid, SolverConfig) {
        let params = ScenarioParams::baseline();
        let grid = build_grid(&params, &GridConfig::default()).unwrap();
        (params, grid, SolverConfig::default())
    }

    #[test]
    fn degenerate_grid_single_farmer_closed_form() {
        // σ̄ = 0 collapses E^A to a point mass; with σ = 0, c_F = 0, α = 0 the
        // fixed point is γ = (2w)^{1/(1+β)} θ₀^{(β−1)/(β+1)} exactly.
        let params = ScenarioParams {
            sigma_bar: 0.0,
            sigma: 0.0,
            c_f: 0.0,
            ..ScenarioParams::baseline()
        };
        let grid = build_grid(&params, &GridConfig::default()).unwrap();
        let solver = SolverConfig::default();
        let sol = solve_gamma(&params, &grid, 1.0, &solver).unwrap();
        let want = math::powf(2.0 * params.w, 1.0 / (1.0 + params.beta))
            * math::powf(params.theta0, (params.beta - 1.0) / (params.beta + 1.0));
        assert!(
            (sol.gamma - want).abs() < 1e-6,
            "got {}, closed form {want}",
            sol.gamma
        );
        assert!(sol.residual < solver.gamma_tol);
    }

    #[test]
    fn f_is_invariant_under_weight_renormalization() {
        let (params, grid, solver) = baseline_setup();
        let mut doubled = grid.clone();
        for w in &mut doubled.weights {
            *w *= 2.0;
        }
        let total: f64 = doubled.weights.iter().sum();
        for w in &mut doubled.weights {
            *w /= total;
        }
        let a = evaluate_f(0.2, &grid, &params, &solver).unwrap();
        let b = evaluate_f(0.2, &doubled, &params, &solver).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f_is_positive_and_continuous_in_gamma() {
        let (params, grid, solver) = baseline_setup();
        let f = evaluate_f(0.2, &grid, &params, &solver).unwrap();
        assert!(f > 0.0);
        let nudged = evaluate_f(0.2 * (1.0 + 1e-6), &grid, &params, &solver).unwrap();
        assert!(
            (nudged - f).abs() < 1e-4,
            "F moved by {} under a 1e-6 relative nudge",
            (nudged - f).abs()
        );
    }

    #[test]
    fn fixed_point_certificate() {
        let (params, grid, solver) = baseline_setup();
        let sol = solve_gamma(&params, &grid, 1.0, &solver).unwrap();
        // recompute F from the stored schedule
        let points = sol.schedule.require_feasible().unwrap();
        let f_from_schedule = weighted_expectation(&grid, &points);
        assert!((sol.gamma - f_from_schedule).abs() < 2.0 * solver.gamma_tol);
        // direct re-evaluation agrees too
        let f_again = evaluate_f(sol.gamma, &grid, &params, &solver).unwrap();
        assert!((sol.gamma - f_again).abs() < 2.0 * solver.gamma_tol);
    }

    #[test]
    fn damped_picard_oracle_reaches_same_fixed_point() {
        // independent outer algorithm: γ ← (γ + F(γ))/2 from a cold start
        let (params, grid, solver) = baseline_setup();
        let mut gamma = 1.0;
        for _ in 0..500 {
            let f = evaluate_f(gamma, &grid, &params, &solver).unwrap();
            if (gamma - f).abs() < 1e-9 {
                break;
            }
            gamma = 0.5 * gamma + 0.5 * f;
        }
        let sol = solve_gamma(&params, &grid, 1.0, &solver).unwrap();
        assert!(
            (sol.gamma - gamma).abs() < 1e-6,
            "secant {} vs picard oracle {gamma}",
            sol.gamma
        );
    }

    #[test]
    fn multistart_guesses_agree() {
        let (params, grid, solver) = baseline_setup();
        let sol =
            solve_gamma_multistart(&params, &grid, &[0.01, 0.5, 3.0, 80.0], &solver).unwrap();
        assert!(sol.multistart_spread.unwrap() < 1e-6);
    }

    #[test]
    fn naive_matches_rational_at_alpha_zero_and_ignores_true_alpha() {
        let (params, grid, solver) = baseline_setup();
        let rational = solve_gamma(&params, &grid, solver.gamma_guess, &solver).unwrap();
        let naive = solve_gamma_naive(&params, &grid, &solver).unwrap();
        assert_eq!(rational.gamma, naive.gamma);

        let at_03 = solve_gamma_naive(&params.with_alpha(0.3), &grid, &solver).unwrap();
        let at_07 = solve_gamma_naive(&params.with_alpha(0.7), &grid, &solver).unwrap();
        assert_eq!(at_03.gamma, at_07.gamma);
    }

    #[test]
    fn infeasible_integration_level_fails_loudly() {
        let (params, grid, solver) = baseline_setup();
        let err = solve_gamma(&params.with_alpha(0.4), &grid, 1.0, &solver).unwrap_err();
        match err {
            Error::InfeasibleScenario { node_indices } => {
                assert!(!node_indices.is_empty());
                // the offending nodes are at the top of the grid
                assert!(node_indices.iter().all(|&k| k > 100));
            }
            other => panic!("expected InfeasibleScenario, got {other:?}"),
        }
    }

    #[test]
    fn reference_value_from_independent_implementation() {
        // 0.18001671 was obtained from a from-scratch implementation of the
        // same equations (different language, different root-finders).
        let (params, grid, solver) = baseline_setup();
        let sol = solve_gamma(&params, &grid, 1.0, &solver).unwrap();
        assert!(
            (sol.gamma - 0.180_016_71).abs() < 2e-5,
            "gamma = {}",
            sol.gamma
        );
    }
}
