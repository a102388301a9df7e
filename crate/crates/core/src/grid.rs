//! Quadrature grid over aggregate-fitness realizations.
//!
//! The aggregate average `E^A[·]` is the only integral in the model done
//! numerically: a uniform grid truncated at ±`truncation` standard deviations
//! around θ₀, weighted by the normal density times the node spacing and
//! renormalized (the weight construction is what realizes the constant
//! interpolation between nodes).

use crate::error::Error;
use crate::gauss::normal_pdf;
use crate::params::ScenarioParams;
use crate::Result;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Grid size and truncation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridConfig {
    /// Number of nodes (default 133).
    pub n_points: usize,
    /// Truncation half-width in aggregate standard deviations (default 4).
    pub truncation: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 133,
            truncation: 4.0,
        }
    }
}

/// Nodes and probability weights for the aggregate average.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureGrid {
    /// Strictly increasing θ_τ values spanning θ₀ ± truncation·σ̄√τ.
    pub nodes: Vec<f64>,
    /// Probability mass per node; sums to 1 after renormalization.
    pub weights: Vec<f64>,
    /// Node count.
    pub n_points: usize,
    /// Truncation half-width in standard deviations.
    pub truncation: f64,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest node, θ₀ + truncation·σ̄√τ (θ₀ itself when σ̄ = 0).
    pub fn top_node(&self) -> f64 {
        *self.nodes.last().expect("grid has at least one node")
    }

    /// Weighted aggregate average of per-node values.
    pub fn average(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Weighted mean and standard deviation of per-node values.
    pub fn mean_std(&self, values: &[f64]) -> (f64, f64) {
        let mean = self.average(values);
        let second: f64 = self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v * v)
            .sum();
        let var = (second - mean * mean).max(0.0);
        (mean, crate::math::sqrt(var))
    }
}

/// Build the aggregate quadrature grid for a scenario.
///
/// Degenerate case: σ̄ = 0 collapses to the single node θ₀ with weight 1.
pub fn build_grid(params: &ScenarioParams, config: &GridConfig) -> Result<QuadratureGrid> {
    params.validate()?;
    if config.n_points < 3 {
        return Err(Error::InvalidParameter {
            name: "n_points",
            message: format!("need at least 3 grid points, got {}", config.n_points),
        });
    }
    if !(config.truncation > 0.0) {
        return Err(Error::InvalidParameter {
            name: "truncation",
            message: format!("truncation must be positive, got {}", config.truncation),
        });
    }

    let fit = params.fitness();
    if fit.aggregate_std == 0.0 {
        return Ok(QuadratureGrid {
            nodes: vec![fit.aggregate_mean],
            weights: vec![1.0],
            n_points: 1,
            truncation: config.truncation,
        });
    }

    let n = config.n_points;
    let half_width = config.truncation * fit.aggregate_std;
    let lo = fit.aggregate_mean - half_width;
    let spacing = 2.0 * half_width / (n - 1) as f64;

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let x = lo + k as f64 * spacing;
        nodes.push(x);
        let z = (x - fit.aggregate_mean) / fit.aggregate_std;
        weights.push(normal_pdf(z) / fit.aggregate_std * spacing);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    Ok(QuadratureGrid {
        nodes,
        weights,
        n_points: n,
        truncation: config.truncation,
    })
}
