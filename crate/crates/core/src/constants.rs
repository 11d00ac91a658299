//! Physical constants (exact SI values) and unit helpers.

use std::f64::consts::PI;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Superconducting flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);
/// Reduced flux quantum Φ0/2π, Wb.
pub const REDUCED_FLUX_QUANTUM: f64 = FLUX_QUANTUM / (2.0 * PI);

pub const TWO_PI: f64 = 2.0 * PI;

#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    TWO_PI * f
}

#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}

#[inline]
pub fn ghz_to_rad(f_ghz: f64) -> f64 {
    TWO_PI * f_ghz * 1e9
}

#[inline]
pub fn rad_to_ghz(w: f64) -> f64 {
    w / TWO_PI / 1e9
}

#[inline]
pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    TWO_PI * f_mhz * 1e6
}

#[inline]
pub fn rad_to_mhz(w: f64) -> f64 {
    w / TWO_PI / 1e6
}
