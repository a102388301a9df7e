//! Closed-form single-farmer model.
//!
//! With one farmer (no idiosyncratic spread, no defaults) the clearing
//! equation inverts in closed form and the expectation has the single
//! solution
//!
//! ```text
//! γ = (2w)^{1/(1+β)} θ₀^{(β−1)/(β+1)} [1 − (1/2β)(1 − 1/β) x²]^{β/(β+1)},
//! x = σ̄√τ/θ₀
//! ```
//!
//! together with a rational approximation of the investor return
//! `μ_S = (Ax² − c_S)/(Bx − Ax² + c_S)`, `A = αγ₀/β − 2α²/β`,
//! `B = αγ₀/√(2π)`. Both serve as oracles for the numeric pipeline.
//!
//! `x` is the *aggregate* relative volatility: a single farmer has no
//! idiosyncratic component, so σ plays no role here.

use crate::error::Error;
use crate::math;
use crate::params::ScenarioParams;
use crate::Result;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Closed-form solution pieces for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalyticSolution {
    /// Exact closed-form γ.
    pub gamma_exact: f64,
    /// Zeroth-order series coefficient γ₀ = (2w)^{1/(1+β)} θ₀^{(β−1)/(β+1)}.
    pub gamma0: f64,
    /// First-order coefficient; identically zero (odd moments cancel).
    pub gamma1_coef: f64,
    /// Second-order term −γ₀ (β−1)/(2β(β+1)) x².
    pub gamma2: f64,
    /// Relative aggregate volatility σ̄√τ/θ₀.
    pub x: f64,
    /// Return-numerator coefficient A = αγ₀/β − 2α²/β.
    pub a_coef: f64,
    /// Return-denominator coefficient B = αγ₀/√(2π).
    pub b_coef: f64,
    /// Approximate investor return at this parameter set.
    pub mu_s_approx: f64,
}

impl AnalyticSolution {
    pub fn for_params(params: &ScenarioParams) -> Result<Self> {
        params.validate()?;
        let x = relative_volatility(params);
        let gamma0 = gamma_zeroth(params);
        let gamma_exact = analytic_gamma(params)?;
        let beta = params.beta;
        let gamma2 = -gamma0 * (beta - 1.0) / (2.0 * beta * (beta + 1.0)) * x * x;
        let (a_coef, b_coef) = return_coefficients(params, gamma0);
        let mu_s_approx = analytic_mu_s(params)?;
        Ok(Self {
            gamma_exact,
            gamma0,
            gamma1_coef: 0.0,
            gamma2,
            x,
            a_coef,
            b_coef,
            mu_s_approx,
        })
    }
}

fn relative_volatility(params: &ScenarioParams) -> f64 {
    params.sigma_bar * math::sqrt(params.tau) / params.theta0
}

fn gamma_zeroth(params: &ScenarioParams) -> f64 {
    let beta = params.beta;
    math::powf(2.0 * params.w, 1.0 / (1.0 + beta))
        * math::powf(params.theta0, (beta - 1.0) / (beta + 1.0))
}

fn return_coefficients(params: &ScenarioParams, gamma0: f64) -> (f64, f64) {
    let (alpha, beta) = (params.alpha, params.beta);
    let a = (alpha * gamma0 - 2.0 * alpha * alpha) / beta;
    let b = alpha * gamma0 / SQRT_2PI;
    (a, b)
}

/// Exact closed-form expectation of the single-farmer model.
///
/// Errors with `OutOfValidity` when the bracket term is non-positive.
pub fn analytic_gamma(params: &ScenarioParams) -> Result<f64> {
    params.validate()?;
    let beta = params.beta;
    let x = relative_volatility(params);
    let bracket = 1.0 - (1.0 / (2.0 * beta)) * (1.0 - 1.0 / beta) * x * x;
    if bracket <= 0.0 {
        return Err(Error::OutOfValidity { bracket });
    }
    Ok(gamma_zeroth(params) * math::powf(bracket, beta / (beta + 1.0)))
}

/// Approximate investor return `(Ax² − c_S)/(Bx − Ax² + c_S)`.
///
/// Exactly −1 at x = 0 (or α = 0) whenever c_S > 0.
pub fn analytic_mu_s(params: &ScenarioParams) -> Result<f64> {
    params.validate()?;
    let x = relative_volatility(params);
    let (a, b) = return_coefficients(params, gamma_zeroth(params));
    let numerator = a * x * x - params.c_s;
    let denominator = b * x - a * x * x + params.c_s;
    if math::abs(denominator) <= 1e-12 {
        return Err(Error::SingularDenominator);
    }
    Ok(numerator / denominator)
}

/// Result of maximizing the approximate return over α.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaStar {
    pub alpha: f64,
    pub mu_s: f64,
    /// Set when the maximizer sits at the search boundary rather than at an
    /// interior maximum.
    pub boundary_maximum: bool,
}

/// Argmax of [`analytic_mu_s`] over α ∈ (0, `alpha_max`], to absolute
/// tolerance 1e-6, by coarse scan plus golden-section refinement.
///
/// α values where the approximation is singular are skipped during the scan.
pub fn analytic_alpha_star(params: &ScenarioParams, alpha_max: f64) -> Result<AlphaStar> {
    if !(alpha_max > 0.0) || !alpha_max.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha_max",
            message: alloc::format!("search bracket must be positive, got {alpha_max}"),
        });
    }
    let mu_at = |alpha: f64| analytic_mu_s(&params.with_alpha(alpha)).ok();

    const SCAN: usize = 512;
    let step = alpha_max / SCAN as f64;
    let mut best: Option<(f64, f64)> = None;
    for k in 1..=SCAN {
        let alpha = k as f64 * step;
        if let Some(mu) = mu_at(alpha) {
            if best.map_or(true, |(_, b)| mu > b) {
                best = Some((alpha, mu));
            }
        }
    }
    let (coarse_alpha, _) = best.ok_or(Error::SingularDenominator)?;

    // golden-section refinement inside the neighboring scan cells
    let mut lo = (coarse_alpha - step).max(step * 1e-6);
    let mut hi = (coarse_alpha + step).min(alpha_max);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let eval = |alpha: f64| mu_at(alpha).unwrap_or(f64::NEG_INFINITY);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = eval(c);
    let mut fd = eval(d);
    while hi - lo > 1e-6 {
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
    let alpha = 0.5 * (lo + hi);
    let mu_s = eval(alpha);
    let boundary_maximum = alpha_max - alpha <= 2e-6 || alpha <= 2.0 * step * 1e-6 + 1e-9;
    Ok(AlphaStar {
        alpha,
        mu_s,
        boundary_maximum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioParams {
        ScenarioParams::baseline()
    }

    #[test]
    fn gamma0_matches_direct_evaluation() {
        // (0.04)^{0.625} · 0.5^{−0.25}, computed through logs
        let p = ScenarioParams {
            sigma_bar: 0.0,
            ..base()
        };
        let want = math::exp(0.625 * math::ln(0.04) - 0.25 * math::ln(0.5));
        let got = analytic_gamma(&p).unwrap();
        assert!((got - want).abs() < 1e-14, "got {got}, want {want}");
        assert!((got - 0.159_054_1).abs() < 1e-6);
    }

    #[test]
    fn unit_elasticity_kills_the_correction() {
        let p = ScenarioParams {
            beta: 1.0,
            sigma_bar: 0.45,
            ..base()
        };
        let got = analytic_gamma(&p).unwrap();
        assert!((got - math::sqrt(2.0 * p.w)).abs() < 1e-15);
    }

    #[test]
    fn bracket_must_stay_positive() {
        // β > 1 with huge relative volatility drives the bracket negative
        let p = ScenarioParams {
            beta: 4.0,
            sigma_bar: 3.0,
            ..base()
        };
        assert!(matches!(
            analytic_gamma(&p),
            Err(Error::OutOfValidity { .. })
        ));
    }

    #[test]
    fn gamma1_is_identically_zero_and_gamma2_signs() {
        for (beta, expect_sign) in [(0.6, 1.0), (1.0, 0.0), (2.0, -1.0)] {
            let p = ScenarioParams {
                beta,
                sigma_bar: 0.05,
                ..base()
            };
            let sol = AnalyticSolution::for_params(&p).unwrap();
            assert_eq!(sol.gamma1_coef, 0.0);
            if expect_sign == 0.0 {
                assert_eq!(sol.gamma2, 0.0);
            } else {
                assert!(sol.gamma2 * expect_sign > 0.0, "beta {beta}: {}", sol.gamma2);
            }
        }
    }

    #[test]
    fn series_truncation_error_scales_as_x_fourth() {
        // log-log slope of |γ(x) − (γ₀ + γ₂(x))| on x ∈ [1e-3, 1e-1]
        let mut pts = alloc::vec::Vec::new();
        for k in 0..9 {
            let x: f64 = 1e-3 * math::powf(10.0, k as f64 / 4.0);
            let p = ScenarioParams {
                sigma_bar: x * 0.5,
                ..base()
            };
            let sol = AnalyticSolution::for_params(&p).unwrap();
            let err = math::abs(sol.gamma_exact - (sol.gamma0 + sol.gamma2));
            pts.push((math::ln(x), math::ln(err)));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            (slope - 4.0).abs() <= 0.3,
            "truncation error log-log slope {slope}"
        );
    }

    #[test]
    fn return_is_minus_one_at_zero_volatility() {
        let p = ScenarioParams {
            sigma_bar: 0.0,
            alpha: 0.05,
            ..base()
        };
        assert_eq!(analytic_mu_s(&p).unwrap(), -1.0);
    }

    #[test]
    fn return_is_minus_one_without_integration() {
        for sigma_bar in [0.02, 0.1, 0.3] {
            let p = ScenarioParams {
                sigma_bar,
                alpha: 0.0,
                ..base()
            };
            assert_eq!(analytic_mu_s(&p).unwrap(), -1.0);
        }
    }

    #[test]
    fn zero_cost_zero_alpha_is_singular() {
        let p = ScenarioParams {
            c_s: 0.0,
            alpha: 0.0,
            ..base()
        };
        assert!(matches!(
            analytic_mu_s(&p),
            Err(Error::SingularDenominator)
        ));
    }

    #[test]
    fn numerator_coefficient_peaks_at_quarter_gamma0() {
        // A(α) = (αγ₀ − 2α²)/β is concave quadratic with argmax γ₀/4
        let gamma0 = AnalyticSolution::for_params(&base()).unwrap().gamma0;
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..4000 {
            let alpha = k as f64 * gamma0 / 4000.0;
            let sol = AnalyticSolution::for_params(&base().with_alpha(alpha)).unwrap();
            if sol.a_coef > best.1 {
                best = (alpha, sol.a_coef);
            }
        }
        assert!(
            (best.0 - gamma0 / 4.0).abs() < gamma0 / 1000.0,
            "argmax {} vs {}",
            best.0,
            gamma0 / 4.0
        );
    }

    #[test]
    fn alpha_star_is_interior_at_baseline() {
        let star = analytic_alpha_star(&base(), 0.12).unwrap();
        assert!(!star.boundary_maximum);
        assert!(star.mu_s > 0.0);
        // cross-check against a fine grid scan
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 1..=24_000 {
            let alpha = k as f64 * 0.12 / 24_000.0;
            if let Ok(mu) = analytic_mu_s(&base().with_alpha(alpha)) {
                if mu > best.1 {
                    best = (alpha, mu);
                }
            }
        }
        assert!(
            (star.alpha - best.0).abs() < 1e-5,
            "golden {} vs scan {}",
            star.alpha,
            best.0
        );
    }

    #[test]
    fn negative_everywhere_still_returns_a_maximizer() {
        // huge transaction cost: μ_S < 0 on the whole bracket
        let p = ScenarioParams { c_s: 10.0, ..base() };
        let star = analytic_alpha_star(&p, 0.1).unwrap();
        assert!(star.mu_s < 0.0);
    }

    #[test]
    fn qualitative_shape_low_elasticity_and_high_volatility_pay_more() {
        // at the per-β optimum: μ_S rises with σ̄, and falls as β rises in
        // the region where the return turns positive
        let at = |beta: f64, sigma_bar: f64| {
            let p = ScenarioParams {
                beta,
                sigma_bar,
                ..base()
            };
            analytic_alpha_star(&p, 0.12).unwrap().mu_s
        };
        let (a, b, c) = (at(0.2, 0.1), at(0.4, 0.1), at(0.6, 0.1));
        assert!(a > b && b > c && c > 0.0, "{a} {b} {c}");
        for beta in [0.2, 0.4, 0.6] {
            let (lo, mid, hi) = (at(beta, 0.05), at(beta, 0.075), at(beta, 0.1));
            assert!(lo < mid && mid < hi, "beta {beta}: {lo} {mid} {hi}");
        }
    }
}
