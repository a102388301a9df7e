//! Run configuration: a strict TOML file plus command-line overrides.
//!
//! Unknown keys are rejected everywhere — in a nine-parameter model a typo
//! that silently falls back to a default is worse than an error.

use agrofin_core::{
    CostBasis, GridConfig, PriceMethod, ScenarioParams, SolverConfig, SweepMode, SweptParameter,
};
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Option<ScenarioSection>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub market_b: Option<MarketBSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

/// Scenario parameters. When the section is present, the seven headline
/// parameters are required; `alpha`, `tau` and `cost_basis` have defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub beta: f64,
    pub w: f64,
    pub sigma_bar: f64,
    pub sigma: f64,
    pub theta0: f64,
    pub c_f: f64,
    pub c_s: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub cost_basis: CostBasis,
}

fn default_tau() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub price_tol: Option<f64>,
    pub gamma_tol: Option<f64>,
    pub max_price_iterations: Option<usize>,
    pub max_gamma_iterations: Option<usize>,
    pub gamma_guess: Option<f64>,
    pub price_method: Option<PriceMethod>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: Option<usize>,
    pub truncation: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: Option<SweptParameter>,
    pub mode: Option<SweepMode>,
    /// Explicit values, or a min/max/count range; omitting both picks the
    /// feasibility-probed default α range.
    pub values: Option<Vec<f64>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: Option<usize>,
    /// Safety margin applied to the existence-bound α cap (default 0.5).
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MarketBSection {
    pub target_default: Option<f64>,
    pub sigma_bar_multiplier: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        Ok(config)
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        match &self.scenario {
            None => ScenarioParams::baseline(),
            Some(s) => ScenarioParams {
                beta: s.beta,
                w: s.w,
                sigma_bar: s.sigma_bar,
                sigma: s.sigma,
                theta0: s.theta0,
                c_f: s.c_f,
                c_s: s.c_s,
                alpha: s.alpha,
                tau: s.tau,
                cost_basis: s.cost_basis,
            },
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut solver = SolverConfig::default();
        if let Some(s) = &self.solver {
            if let Some(v) = s.price_tol {
                solver.price_tol = v;
            }
            if let Some(v) = s.gamma_tol {
                solver.gamma_tol = v;
            }
            if let Some(v) = s.max_price_iterations {
                solver.max_price_iterations = v;
            }
            if let Some(v) = s.max_gamma_iterations {
                solver.max_gamma_iterations = v;
            }
            if let Some(v) = s.gamma_guess {
                solver.gamma_guess = v;
            }
            if let Some(v) = s.price_method {
                solver.price_method = v;
            }
        }
        solver
    }

    pub fn grid_config(&self) -> GridConfig {
        let mut grid = GridConfig::default();
        if let Some(g) = &self.grid {
            if let Some(v) = g.points {
                grid.n_points = v;
            }
            if let Some(v) = g.truncation {
                grid.truncation = v;
            }
        }
        grid
    }

    pub fn sweep_margin(&self) -> f64 {
        self.sweep
            .as_ref()
            .and_then(|s| s.margin)
            .unwrap_or(0.5)
    }

    /// Resolve the swept values: explicit list, min/max/count range, or the
    /// caller-provided default.
    pub fn sweep_values(&self, fallback: impl FnOnce() -> anyhow::Result<Vec<f64>>) -> anyhow::Result<Vec<f64>> {
        let section = self.sweep.clone().unwrap_or_default();
        if let Some(values) = section.values {
            if section.min.is_some() || section.max.is_some() || section.count.is_some() {
                bail!("sweep: give either `values` or `min`/`max`/`count`, not both");
            }
            return Ok(values);
        }
        match (section.min, section.max, section.count) {
            (None, None, None) => fallback(),
            (Some(min), Some(max), count) => {
                let count = count.unwrap_or(51);
                if count < 2 || !(max > min) {
                    bail!("sweep: need max > min and count >= 2");
                }
                Ok((0..count)
                    .map(|k| min + (max - min) * k as f64 / (count - 1) as f64)
                    .collect())
            }
            _ => bail!("sweep: `min` and `max` must be given together"),
        }
    }
}
