//! Thin wrappers over `libm` for the handful of transcendentals the model
//! needs. Routed through `libm` unconditionally (not only under `no_std`) so
//! that solver output is bit-identical across platforms: golden files and the
//! determinism contract rely on it.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
