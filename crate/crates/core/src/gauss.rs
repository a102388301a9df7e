//! Gaussian integral primitives.
//!
//! Every population average in the model is an integral of a polynomial (of
//! degree ≤ 2) against a normal density over a half line, so everything here
//! is closed form. The idiosyncratic averages are *never* done by numerical
//! quadrature; only the outer aggregate average uses a grid (see [`crate::grid`]).

use crate::error::domain;
use crate::math;
use crate::Result;
use alloc::format;

const SQRT_2: f64 = core::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF Φ(z).
///
/// Computed as `erfc(−z/√2)/2`, accurate to well under 1e-12 absolute error
/// over the whole real line.
pub fn normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(domain(format!("normal_cdf requires finite input, got {z}")));
    }
    Ok(0.5 * math::erfc(-z / SQRT_2))
}

/// Standard normal density φ(z).
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * math::exp(-0.5 * z * z)
}

/// Upper tail Φ̅(z) = 1 − Φ(z), evaluated directly for accuracy in the tail.
#[inline]
pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * math::erfc(z / SQRT_2)
}

/// P(X > a) for X ~ Normal(mean, std²).
///
/// Nonincreasing in `a`; tends to 1 as `a → −∞`.
pub fn survival_probability(a: f64, mean: f64, std: f64) -> Result<f64> {
    check_std(std)?;
    Ok(normal_sf((a - mean) / std))
}

/// Upper partial first moment `∫_a^∞ x N_x(mean, std²) dx`.
///
/// Closed form `mean·Φ̅(u) + std·φ(u)` with `u = (a − mean)/std`. Recovers the
/// full mean as `a → −∞` and is nonnegative whenever `a ≥ 0`.
pub fn gaussian_partial_moment(a: f64, mean: f64, std: f64) -> Result<f64> {
    check_std(std)?;
    let u = (a - mean) / std;
    Ok(mean * normal_sf(u) + std * normal_pdf(u))
}

/// Upper partial second moment `∫_a^∞ x² N_x(mean, std²) dx`.
///
/// Closed form `(mean² + std²)·Φ̅(u) + std·(mean + a)·φ(u)`.
pub fn gaussian_partial_second_moment(a: f64, mean: f64, std: f64) -> Result<f64> {
    check_std(std)?;
    let u = (a - mean) / std;
    Ok((mean * mean + std * std) * normal_sf(u) + std * (mean + a) * normal_pdf(u))
}

fn check_std(std: f64) -> Result<()> {
    if !(std > 0.0) || !std.is_finite() {
        return Err(domain(format!("standard deviation must be positive, got {std}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent Φ oracle: Taylor series around 0 for |z| ≤ 6, continued
    /// fraction for the tail. Shares no code with the erfc-based path.
    fn cdf_oracle(z: f64) -> f64 {
        if z < 0.0 {
            return 1.0 - cdf_oracle(-z);
        }
        if z <= 6.0 {
            // Φ(z) = 1/2 + φ(z)·Σ_{k≥0} z^{2k+1} / (1·3·5···(2k+1))
            let mut term = z;
            let mut sum = z;
            let mut k = 1.0;
            while term.abs() > 1e-20 {
                term *= z * z / (2.0 * k + 1.0);
                sum += term;
                k += 1.0;
            }
            0.5 + normal_pdf(z) * sum
        } else {
            // Mills-ratio continued fraction for the upper tail.
            let mut cf = 0.0;
            for n in (1..=60).rev() {
                cf = n as f64 / (z + cf);
            }
            1.0 - normal_pdf(z) / (z + cf)
        }
    }

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
    }

    #[test]
    fn cdf_tail_bound() {
        assert!(1.0 - normal_cdf(8.0).unwrap() < 1e-14);
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for &z in &[-4.0, -2.5, -1.0, -0.3, 0.1, 0.5, 1.0, 1.7, 2.9, 4.2, 5.5, 7.0] {
            let got = normal_cdf(z).unwrap();
            let want = cdf_oracle(z);
            assert!(
                (got - want).abs() <= 1e-12,
                "z={z}: got {got}, oracle {want}"
            );
        }
        // Frozen from the series oracle.
        assert!((normal_cdf(1.0).unwrap() - 0.841_344_746_068_542_9).abs() < 1e-13);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    /// Simpson quadrature of x^pow · N(mean, std²) over [a, mean + 14 std].
    fn moment_quadrature(a: f64, mean: f64, std: f64, pow: i32) -> f64 {
        let hi = mean + 14.0 * std;
        let n = 40_000; // even
        let h = (hi - a) / n as f64;
        let f = |x: f64| {
            let z = (x - mean) / std;
            x.powi(pow) * normal_pdf(z) / std
        };
        let mut s = f(a) + f(hi);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn partial_moment_recovers_full_mean() {
        let (mean, std) = (0.5, 0.2);
        let got = gaussian_partial_moment(mean - 12.0 * std, mean, std).unwrap();
        assert!((got - mean).abs() < 1e-9);
    }

    #[test]
    fn partial_moment_half_moment_identity() {
        let (mean, std) = (0.7, 0.3);
        let got = gaussian_partial_moment(mean, mean, std).unwrap();
        let want = mean / 2.0 + std * INV_SQRT_2PI;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn partial_moment_matches_dense_quadrature() {
        let got = gaussian_partial_moment(0.3, 0.5, 0.2).unwrap();
        let want = moment_quadrature(0.3, 0.5, 0.2, 1);
        assert!((got - want).abs() < 1e-8, "got {got}, quadrature {want}");
    }

    #[test]
    fn partial_second_moment_matches_dense_quadrature() {
        for &(a, mean, std) in &[(0.3, 0.5, 0.2), (-0.4, 0.1, 0.7), (1.2, 0.5, 0.2)] {
            let got = gaussian_partial_second_moment(a, mean, std).unwrap();
            let want = moment_quadrature(a, mean, std, 2);
            assert!((got - want).abs() < 1e-8, "got {got}, quadrature {want}");
        }
    }

    #[test]
    fn survival_probability_basics() {
        let (mean, std) = (0.5, 0.2);
        assert_eq!(survival_probability(mean, mean, std).unwrap(), 0.5);
        assert!(survival_probability(mean - 12.0 * std, mean, std).unwrap() > 1.0 - 1e-14);
        let got = survival_probability(0.55, 0.5, 0.2).unwrap();
        let want = 1.0 - normal_cdf(0.25).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn zero_std_rejected() {
        assert!(survival_probability(0.1, 0.0, 0.0).is_err());
        assert!(gaussian_partial_moment(0.1, 0.0, -1.0).is_err());
        assert!(gaussian_partial_second_moment(0.1, 0.0, 0.0).is_err());
    }
}
