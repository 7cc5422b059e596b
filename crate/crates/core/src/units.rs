//! Physical constants and I/O-boundary unit conversions. Everything inside
//! the crate is SI; dBm only appears at configuration and output edges.

use std::f64::consts::PI;

/// Elementary charge [C].
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant [J s].
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant [J s].
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `2e/ħ` [rad s⁻¹ V⁻¹].
pub const JOSEPHSON_RATE: f64 = 2.0 * ELEMENTARY_CHARGE / HBAR;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Josephson frequency of a DC voltage, `f = 2eV/h`.
pub fn josephson_frequency(voltage: f64) -> f64 {
    2.0 * ELEMENTARY_CHARGE * voltage / PLANCK
}

/// DC voltage producing Josephson frequency `f`.
pub fn josephson_voltage(frequency: f64) -> f64 {
    PLANCK * frequency / (2.0 * ELEMENTARY_CHARGE)
}

/// Peak voltage-wave amplitude carrying `watts` on a line of impedance `z`
/// (`P = |a|² / 2Z`).
pub fn wave_amplitude(watts: f64, z: f64) -> f64 {
    (2.0 * z * watts).sqrt()
}

/// Power of a peak voltage wave `a` on a line of impedance `z`.
pub fn wave_power(amplitude: f64, z: f64) -> f64 {
    amplitude * amplitude / (2.0 * z)
}

/// Photon rate carried by `watts` at frequency `f`.
pub fn photon_rate(watts: f64, frequency: f64) -> f64 {
    watts / (PLANCK * frequency)
}
