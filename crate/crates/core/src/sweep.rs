//! Comparative statics: sweep one parameter, detect the critical and optimal
//! integration levels, and calibrate the low-default contrast market.

use crate::clearing::supply_capacity;
use crate::error::Error;
use crate::expectation::{clear_schedule, solve_gamma, solve_gamma_naive, GammaSolution};
use crate::grid::{build_grid, GridConfig};
use crate::metrics::{metrics_from_schedule, EquilibriumMetrics, FarmerMode};
use crate::params::{CostBasis, ScenarioParams, SolverConfig};
use crate::Result;
use alloc::format;
use alloc::vec::Vec;

/// Which scenario field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweptParameter {
    Alpha,
    Beta,
    SigmaBar,
    W,
}

impl SweptParameter {
    pub fn apply(&self, base: &ScenarioParams, value: f64) -> ScenarioParams {
        let mut p = *base;
        match self {
            SweptParameter::Alpha => p.alpha = value,
            SweptParameter::Beta => p.beta = value,
            SweptParameter::SigmaBar => p.sigma_bar = value,
            SweptParameter::W => p.w = value,
        }
        p
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweptParameter::Alpha => "alpha",
            SweptParameter::Beta => "beta",
            SweptParameter::SigmaBar => "sigma_bar",
            SweptParameter::W => "w",
        }
    }
}

/// Which farmer expectation(s) each sweep point solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepMode {
    Rational,
    Naive,
    Both,
}

impl SweepMode {
    pub fn includes_rational(&self) -> bool {
        matches!(self, SweepMode::Rational | SweepMode::Both)
    }
    pub fn includes_naive(&self) -> bool {
        matches!(self, SweepMode::Naive | SweepMode::Both)
    }
}

/// Full description of one comparative-statics run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepSpec {
    pub base: ScenarioParams,
    pub parameter: SweptParameter,
    /// Strictly increasing parameter values.
    pub values: Vec<f64>,
    pub mode: SweepMode,
    pub grid: GridConfig,
    pub solver: SolverConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "values",
                message: alloc::string::String::from("sweep needs at least one value"),
            });
        }
        for (k, pair) in self.values.windows(2).enumerate() {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidParameter {
                    name: "values",
                    message: format!("values must be strictly increasing at index {k}"),
                });
            }
        }
        for &v in &self.values {
            self.parameter.apply(&self.base, v).validate()?;
        }
        Ok(())
    }
}

/// One mode's converged outcome at one swept value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeRow {
    pub gamma: f64,
    pub metrics: EquilibriumMetrics,
}

/// Outcome at one swept value, for whichever modes the run requested.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub value: f64,
    pub rational: Option<ModeRow>,
    pub naive: Option<ModeRow>,
}

/// A per-value solver failure; the sweep continues past it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InfeasibleRecord {
    pub value: f64,
    pub mode: FarmerMode,
    /// Offending grid node indices when the failure is an existence failure;
    /// empty for other solver failures.
    pub node_indices: Vec<usize>,
    pub message: alloc::string::String,
}

/// Comparative-statics output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub parameter: SweptParameter,
    pub mode: SweepMode,
    pub rows: Vec<SweepRow>,
    pub infeasible: Vec<InfeasibleRecord>,
    /// Smallest α with μ_S ≥ 0, bisection-refined (α sweeps only).
    pub alpha_c: Option<f64>,
    /// Interior argmax of μ_S, golden-section-refined (α sweeps only).
    pub alpha_star: Option<f64>,
}

/// Shared per-sweep state: the naive expectation is independent of α, so an
/// α sweep solves it once.
pub struct SweepContext {
    naive_for_alpha_sweep: Option<GammaSolution>,
}

/// Solve whatever the context can share across points.
pub fn prepare_context(spec: &SweepSpec) -> Result<SweepContext> {
    let naive_for_alpha_sweep = if spec.mode.includes_naive()
        && spec.parameter == SweptParameter::Alpha
    {
        let grid = build_grid(&spec.base, &spec.grid)?;
        Some(solve_gamma_naive(&spec.base, &grid, &spec.solver)?)
    } else {
        None
    };
    Ok(SweepContext {
        naive_for_alpha_sweep,
    })
}

// A sweep point bundles its own failures so parallel execution needs no
// shared collector; `assemble_sweep` splits them back out in value order.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub row: SweepRow,
    pub failures: Vec<InfeasibleRecord>,
}

fn record(value: f64, mode: FarmerMode, err: Error) -> InfeasibleRecord {
    let node_indices = match &err {
        Error::InfeasibleScenario { node_indices } => node_indices.clone(),
        _ => Vec::new(),
    };
    InfeasibleRecord {
        value,
        mode,
        node_indices,
        message: format!("{err}"),
    }
}

/// Solve a single sweep point. Pure given (spec, context, value): safe to run
/// points concurrently; results do not depend on execution order.
pub fn solve_sweep_point(spec: &SweepSpec, context: &SweepContext, value: f64) -> SweepPoint {
    let params = spec.parameter.apply(&spec.base, value);
    let mut row = SweepRow {
        value,
        rational: None,
        naive: None,
    };
    let mut failures = Vec::new();

    match build_grid(&params, &spec.grid) {
        Ok(grid) => {
            if spec.mode.includes_rational() {
                match solve_gamma(&params, &grid, spec.solver.gamma_guess, &spec.solver).and_then(
                    |sol| {
                        let metrics = metrics_from_schedule(sol.gamma, &sol.schedule, &params)?;
                        Ok(ModeRow {
                            gamma: sol.gamma,
                            metrics,
                        })
                    },
                ) {
                    Ok(mode_row) => row.rational = Some(mode_row),
                    Err(err) => failures.push(record(value, FarmerMode::Rational, err)),
                }
            }
            if spec.mode.includes_naive() {
                let naive_sol = match &context.naive_for_alpha_sweep {
                    Some(sol) => Ok(sol.clone()),
                    None => solve_gamma_naive(&params, &grid, &spec.solver),
                };
                match naive_sol.and_then(|sol| {
                    let schedule = clear_schedule(sol.gamma, &grid, &params, &spec.solver);
                    let metrics = metrics_from_schedule(sol.gamma, &schedule, &params)?;
                    Ok(ModeRow {
                        gamma: sol.gamma,
                        metrics,
                    })
                }) {
                    Ok(mode_row) => row.naive = Some(mode_row),
                    Err(err) => failures.push(record(value, FarmerMode::Naive, err)),
                }
            }
        }
        Err(err) => {
            if spec.mode.includes_rational() {
                failures.push(record(value, FarmerMode::Rational, err.clone()));
            }
            if spec.mode.includes_naive() {
                failures.push(record(value, FarmerMode::Naive, err));
            }
        }
    }

    SweepPoint { row, failures }
}

/// Assemble solved points (in value order) into a [`SweepResult`], running
/// the α_c / α* detection for rational α sweeps.
pub fn assemble_sweep(spec: &SweepSpec, points: Vec<SweepPoint>) -> SweepResult {
    let mut rows = Vec::with_capacity(points.len());
    let mut infeasible = Vec::new();
    for point in points {
        rows.push(point.row);
        infeasible.extend(point.failures);
    }

    let (alpha_c, alpha_star) =
        if spec.parameter == SweptParameter::Alpha && spec.mode.includes_rational() {
            (
                detect_alpha_c(spec, &rows),
                detect_alpha_star(spec, &rows),
            )
        } else {
            (None, None)
        };

    SweepResult {
        parameter: spec.parameter,
        mode: spec.mode,
        rows,
        infeasible,
        alpha_c,
        alpha_star,
    }
}

/// Run a whole sweep sequentially.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let context = prepare_context(spec)?;
    let points = spec
        .values
        .iter()
        .map(|&v| solve_sweep_point(spec, &context, v))
        .collect();
    Ok(assemble_sweep(spec, points))
}

/// Fresh rational solve of μ_S at one α (used by the refiners).
fn mu_s_at_alpha(spec: &SweepSpec, alpha: f64) -> Option<f64> {
    let params = spec.base.with_alpha(alpha);
    let grid = build_grid(&params, &spec.grid).ok()?;
    let sol = solve_gamma(&params, &grid, spec.solver.gamma_guess, &spec.solver).ok()?;
    metrics_from_schedule(sol.gamma, &sol.schedule, &params)
        .ok()
        .and_then(|m| m.mu_s)
}

/// Smallest α with μ_S ≥ 0: grid scan for the first sign change, then
/// bisection on fresh solves to width 1e-4.
pub fn detect_alpha_c(spec: &SweepSpec, rows: &[SweepRow]) -> Option<f64> {
    let defined: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.rational
                .as_ref()
                .and_then(|m| m.metrics.mu_s.map(|mu| (r.value, mu)))
        })
        .collect();
    let first = defined.first()?;
    if first.1 >= 0.0 {
        // no transaction cost: the return is already nonnegative in the
        // small-α limit
        return if spec.base.c_s == 0.0 {
            Some(0.0)
        } else {
            Some(first.0)
        };
    }
    let change = defined.windows(2).find(|w| w[0].1 < 0.0 && w[1].1 >= 0.0)?;
    let (mut lo, mut hi) = (change[0].0, change[1].0);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        match mu_s_at_alpha(spec, mid) {
            Some(mu) if mu < 0.0 => lo = mid,
            Some(_) => hi = mid,
            None => return Some(hi), // solver failure mid-bracket: keep the grid bound
        }
    }
    Some(0.5 * (lo + hi))
}

/// Interior argmax of μ_S over the sweep grid, golden-section-refined on
/// fresh solves to width 1e-4. Boundary maxima are not reported.
pub fn detect_alpha_star(spec: &SweepSpec, rows: &[SweepRow]) -> Option<f64> {
    let defined: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.rational
                .as_ref()
                .and_then(|m| m.metrics.mu_s.map(|mu| (r.value, mu)))
        })
        .collect();
    if defined.len() < 3 {
        return None;
    }
    let best = defined
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).expect("mu_s is finite"))?
        .0;
    if best == 0 || best == defined.len() - 1 {
        return None;
    }

    let (mut lo, mut hi) = (defined[best - 1].0, defined[best + 1].0);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let eval = |alpha: f64| mu_s_at_alpha(spec, alpha).unwrap_or(f64::NEG_INFINITY);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = eval(c);
    let mut fd = eval(d);
    while hi - lo > 1e-4 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = eval(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = eval(d);
        }
    }
    Some(0.5 * (lo + hi))
}

/// Default α grid for sweeps: `count` evenly spaced values on
/// `[0, margin · α_bound]`, where `α_bound` makes the existence condition
/// marginal at the extreme grid node `θ₀ + truncation·σ̄√τ` under the α=0
/// expectation. The margin (default 0.5) keeps the sweep out of the
/// supply-saturated regime next to the boundary.
pub fn default_alpha_values(
    base: &ScenarioParams,
    grid_config: &GridConfig,
    solver: &SolverConfig,
    margin: f64,
    count: usize,
) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidParameter {
            name: "count",
            message: format!("need at least 2 sweep values, got {count}"),
        });
    }
    let grid = build_grid(base, grid_config)?;
    let naive = solve_gamma_naive(base, &grid, solver)?;
    let top = grid.top_node();
    let bound = if top > base.theta0 {
        supply_capacity(top, naive.gamma, base) / (top - base.theta0)
    } else {
        f64::INFINITY
    };
    let alpha_max = (margin * bound).min(1.0);
    Ok((0..count)
        .map(|k| alpha_max * k as f64 / (count - 1) as f64)
        .collect())
}

/// Calibrate the low-default contrast market: scale up the aggregate
/// volatility, freeze the farmer fixed cost at the base market's absolute
/// value, and bisect the demand level `w` until the α=0 default fraction is
/// within ±0.005 of `target_default`.
///
/// The returned parameters use [`CostBasis::Absolute`]; in the ratio basis
/// the α=0 equilibrium is exactly scale invariant in `w` and the default
/// rate cannot respond to demand at all.
pub fn calibrate_market_b(
    base: &ScenarioParams,
    target_default: f64,
    sigma_bar_multiplier: f64,
    grid_config: &GridConfig,
    solver: &SolverConfig,
) -> Result<ScenarioParams> {
    base.validate()?;
    if !(target_default > 0.0 && target_default < 1.0) {
        return Err(Error::InvalidParameter {
            name: "target_default",
            message: format!("target must lie in (0,1), got {target_default}"),
        });
    }
    if !(sigma_bar_multiplier > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma_bar_multiplier",
            message: format!("multiplier must be positive, got {sigma_bar_multiplier}"),
        });
    }
    const TOL: f64 = 0.005;

    // freeze the base market's fixed cost in capital units
    let base_at_zero = base.with_alpha(0.0);
    let base_grid = build_grid(&base_at_zero, grid_config)?;
    let base_gamma = solve_gamma(&base_at_zero, &base_grid, solver.gamma_guess, solver)?.gamma;
    let c_abs = base.effective_fixed_cost(base_gamma);

    let template = ScenarioParams {
        sigma_bar: base.sigma_bar * sigma_bar_multiplier,
        c_f: c_abs,
        cost_basis: CostBasis::Absolute,
        ..*base
    };

    let default_at = |w: f64| -> Result<f64> {
        let params = ScenarioParams {
            w,
            ..template.with_alpha(0.0)
        };
        let grid = build_grid(&params, grid_config)?;
        let sol = solve_gamma(&params, &grid, solver.gamma_guess, solver)?;
        Ok(metrics_from_schedule(sol.gamma, &sol.schedule, &params)?.default_frac)
    };

    let f_base = default_at(base.w)?;
    if (f_base - target_default).abs() <= TOL {
        return Ok(template);
    }

    // defaults fall as demand rises; expand geometrically toward the target,
    // watching for the irreducible variable-cost floor
    let (mut w_lo, mut w_hi);
    if f_base > target_default {
        w_lo = base.w;
        let mut w = base.w;
        let mut f_prev = f_base;
        loop {
            w *= 2.0;
            let f = default_at(w)?;
            if f <= target_default {
                w_hi = w;
                break;
            }
            if (f_prev - f < 1e-5 && f - target_default > TOL) || w > base.w * 1e18 {
                return Err(Error::CalibrationFailure {
                    target: target_default,
                    floor: f,
                });
            }
            w_lo = w;
            f_prev = f;
        }
    } else {
        w_hi = base.w;
        let mut w = base.w;
        let mut f_prev = f_base;
        loop {
            w *= 0.5;
            let f = default_at(w)?;
            if f >= target_default {
                w_lo = w;
                break;
            }
            if (f - f_prev < 1e-5 && target_default - f > TOL) || w < base.w * 1e-18 {
                return Err(Error::CalibrationFailure {
                    target: target_default,
                    floor: f,
                });
            }
            w_hi = w;
            f_prev = f;
        }
    }

    // bisection: f is decreasing in w on [w_lo, w_hi]
    for _ in 0..200 {
        let mid = 0.5 * (w_lo + w_hi);
        let f = default_at(mid)?;
        if (f - target_default).abs() <= TOL {
            return Ok(ScenarioParams { w: mid, ..template });
        }
        if f > target_default {
            w_lo = mid;
        } else {
            w_hi = mid;
        }
    }
    Err(Error::CalibrationFailure {
        target: target_default,
        floor: default_at(w_hi)?,
    })
}
