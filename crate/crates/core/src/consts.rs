//! SI physical constants (CODATA 2018 exact values where defined).

use core::f64::consts::PI;

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass constant (kg).
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Mass of a sodium-23 atom (kg).
pub const SODIUM_23_MASS: f64 = 22.989_769_282 * AMU;

/// Contact coupling `u = 4πħ²a/m` (J m³) for s-wave scattering length `a`.
pub fn contact_coupling(scattering_length: f64, mass: f64) -> f64 {
    4.0 * PI * HBAR * HBAR * scattering_length / mass
}
