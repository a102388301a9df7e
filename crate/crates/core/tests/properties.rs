//! Property tests for the Gaussian primitives and the grid.

use agrofin_core::clearing::supply_capacity;
use agrofin_core::gauss::{
    gaussian_partial_moment, normal_pdf, survival_probability,
};
use agrofin_core::{build_grid, solve_price, GridConfig, ScenarioParams, SolverConfig};
use proptest::prelude::*;

/// Simpson rule for the lower partial moment ∫_{mean−14σ}^a x N dx.
fn lower_partial_moment_quadrature(a: f64, mean: f64, std: f64) -> f64 {
    let lo = mean - 14.0 * std;
    let n = 20_000usize; // even
    let h = (a - lo) / n as f64;
    let f = |x: f64| x * normal_pdf((x - mean) / std) / std;
    let mut s = f(lo) + f(a);
    for i in 1..n {
        let x = lo + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Upper partial moment (closed form) plus lower partial moment (dense
    /// quadrature) recovers the full mean.
    #[test]
    fn partial_moment_decomposition(
        mean in -1.0f64..2.0,
        std in 0.05f64..1.0,
        offset in -3.0f64..3.0,
    ) {
        let a = mean + offset * std;
        let upper = gaussian_partial_moment(a, mean, std).unwrap();
        let lower = lower_partial_moment_quadrature(a, mean, std);
        prop_assert!(
            (upper + lower - mean).abs() < 1e-8,
            "upper {upper} + lower {lower} != mean {mean}"
        );
    }

    /// Survival probability is monotone nonincreasing in the lower limit.
    #[test]
    fn survival_monotone_in_threshold(
        mean in -1.0f64..2.0,
        std in 0.05f64..1.0,
    ) {
        let mut prev = f64::INFINITY;
        for k in 0..41 {
            let a = mean + (k as f64 / 5.0 - 4.0) * std;
            let s = survival_probability(a, mean, std).unwrap();
            prop_assert!(s <= prev + 1e-15, "survival increased at a={a}");
            prop_assert!((0.0..=1.0).contains(&s));
            prev = s;
        }
    }

    /// Every returned clearing point satisfies the residual contract and the
    /// threshold clamp, across random feasible scenarios.
    #[test]
    fn clearing_contract_holds_on_random_feasible_inputs(
        theta in 0.05f64..1.5,
        gamma in 0.05f64..5.0,
        alpha in 0.0f64..0.15,
        c_f in 0.0f64..2.0,
    ) {
        let params = ScenarioParams {
            alpha,
            c_f,
            ..ScenarioParams::baseline()
        };
        // stay a hair inside the existence region so the price is bounded
        let capacity = supply_capacity(theta, gamma, &params);
        prop_assume!(capacity >= 1.001 * alpha * (theta - params.theta0));
        let point = solve_price(theta, gamma, &params, &SolverConfig::default()).unwrap();
        prop_assert!(point.price > 0.0);
        prop_assert!(point.theta_star >= 0.0);
        prop_assert!(point.residual <= 1e-6, "residual {}", point.residual);
    }

    /// Grid weights are a probability vector; quadrature integrates constants
    /// exactly and the identity to within the truncation-bias bound.
    #[test]
    fn grid_weights_are_valid_quadrature(
        sigma_bar in 0.01f64..0.5,
        theta0 in 0.1f64..2.0,
        n_points in 33usize..300,
        truncation in 3.0f64..6.0,
    ) {
        let params = ScenarioParams {
            sigma_bar,
            theta0,
            ..ScenarioParams::baseline()
        };
        let grid = build_grid(&params, &GridConfig { n_points, truncation }).unwrap();
        let total: f64 = grid.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let ones = vec![1.0; grid.len()];
        prop_assert!((grid.average(&ones) - 1.0).abs() < 1e-12);
        let mean = grid.average(&grid.nodes);
        prop_assert!(
            (mean - theta0).abs() / theta0 < 1e-3,
            "grid mean {mean} vs theta0 {theta0}"
        );
    }
}
