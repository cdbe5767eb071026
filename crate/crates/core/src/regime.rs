//! Length scales and validity inequalities of the kinetic description.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::consts::{contact_coupling, BOLTZMANN, PLANCK};
use crate::error::{require_positive, Result};

/// Default factor standing for `≫` and `≪`.
pub const DEFAULT_THRESHOLD: f64 = 10.0;

/// `λ_T = h/√(2mkT)` (m).
pub fn thermal_wavelength(mass: f64, temperature: f64) -> Result<f64> {
    let m = require_positive("m", mass)?;
    let t = require_positive("T", temperature)?;
    Ok(PLANCK / libm::sqrt(2.0 * m * BOLTZMANN * t))
}

/// Bosonic s-wave cross-section `σ = 8πa²` (m²).
pub fn cross_section(scattering_length: f64) -> f64 {
    8.0 * PI * scattering_length * scattering_length
}

/// `λ_mfp = 1/(√2 ρ σ)` (m).
pub fn mean_free_path(density: f64, scattering_length: f64) -> Result<f64> {
    let rho = require_positive("rho", density)?;
    let a = require_positive("a", scattering_length)?;
    Ok(1.0 / (SQRT_2 * rho * cross_section(a)))
}

/// Weak-condensation length `ξ = √(π/8aρ)` (m).
pub fn weak_condensation_length(density: f64, scattering_length: f64) -> Result<f64> {
    let rho = require_positive("rho", density)?;
    let a = require_positive("a", scattering_length)?;
    Ok(libm::sqrt(PI / (8.0 * a * rho)))
}

/// Density at which `ξ = l_c`: `ρ = π/(8 a l_c²)` (1/m³).
pub fn weak_condensation_density(scattering_length: f64, cell_length: f64) -> Result<f64> {
    let a = require_positive("a", scattering_length)?;
    let l = require_positive("l_c", cell_length)?;
    Ok(PI / (8.0 * a * l * l))
}

/// Cell size `(a λ_mfp λ_T)^{1/3}` at which `k_diag = 1` (m).
pub fn critical_cell_length(
    scattering_length: f64,
    mean_free_path: f64,
    thermal_wavelength: f64,
) -> f64 {
    libm::cbrt(scattering_length * mean_free_path * thermal_wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GasParameters {
    /// Atomic mass (kg).
    pub mass: f64,
    /// s-wave scattering length (m).
    pub scattering_length: f64,
    /// Temperature (K).
    pub temperature: f64,
    /// Number density (1/m³).
    pub density: f64,
    /// Cell size `l_c` (m).
    pub cell_length: f64,
    /// Replaces `1/(√2ρσ)` when set (m).
    pub mean_free_path: Option<f64>,
}

impl GasParameters {
    pub fn validate(&self) -> Result<()> {
        require_positive("m", self.mass)?;
        require_positive("a", self.scattering_length)?;
        require_positive("T", self.temperature)?;
        require_positive("rho", self.density)?;
        require_positive("l_c", self.cell_length)?;
        if let Some(l) = self.mean_free_path {
            require_positive("lambda_mfp", l)?;
        }
        Ok(())
    }

    /// `u = 4πħ²a/m` (J m³).
    pub fn coupling(&self) -> f64 {
        contact_coupling(self.scattering_length, self.mass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Want {
    /// Ratio should be `≫ 1`.
    MuchGreater,
    /// Ratio should be `≪ 1`.
    MuchLess,
    /// Ratio should be `≤ 1`.
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Status {
    Satisfied,
    /// Within a factor `threshold` of the boundary on the wrong side of it
    /// or short of the required separation.
    Marginal,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Condition {
    pub name: &'static str,
    pub ratio: f64,
    pub want: Want,
    pub threshold: f64,
    pub status: Status,
}

impl Condition {
    fn new(name: &'static str, ratio: f64, want: Want, threshold: f64) -> Self {
        let status = match want {
            Want::MuchGreater => grade(ratio, threshold),
            Want::MuchLess => grade(1.0 / ratio, threshold),
            Want::AtMost if ratio <= 1.0 => Status::Satisfied,
            Want::AtMost => Status::Violated,
        };
        Self {
            name,
            ratio,
            want,
            threshold,
            status,
        }
    }

    pub fn passes(&self) -> bool {
        self.status == Status::Satisfied
    }
}

fn grade(x: f64, threshold: f64) -> Status {
    if x >= threshold {
        Status::Satisfied
    } else if x > 1.0 / threshold {
        Status::Marginal
    } else {
        Status::Violated
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RegimeReport {
    pub params: GasParameters,
    pub threshold: f64,
    /// `u = 4πħ²a/m` (J m³).
    pub coupling: f64,
    pub lambda_t: f64,
    pub lambda_mfp: f64,
    pub xi: f64,
    /// `a λ_mfp λ_T / l_c³`.
    pub k_diag: f64,
    /// `(a λ_mfp λ_T)^{1/3}` (m).
    pub critical_cell_length: f64,
    /// `ρ` at which `ξ = l_c` (1/m³).
    pub weak_condensation_density: f64,
    /// `l_c/λ_T`, `λ_mfp/λ_T`, `λ_mfp/l_c`, `k_diag`, `l_c/ξ` (weak
    /// condensation read as `l_c ≤ ξ`).
    pub conditions: Vec<Condition>,
    /// The weak-condensation inequality read the other way, `l_c ≫ ξ`.
    /// Reported alongside because the two readings disagree.
    pub weak_condensation_alternative: Condition,
}

impl RegimeReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(Condition::passes)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub fn regime_report(params: GasParameters) -> Result<RegimeReport> {
    regime_report_with(params, DEFAULT_THRESHOLD)
}

pub fn regime_report_with(params: GasParameters, threshold: f64) -> Result<RegimeReport> {
    params.validate()?;
    let threshold = require_positive("threshold", threshold)?;
    let a = params.scattering_length;
    let l = params.cell_length;
    let lambda_t = thermal_wavelength(params.mass, params.temperature)?;
    let lambda_mfp = match params.mean_free_path {
        Some(v) => v,
        None => mean_free_path(params.density, a)?,
    };
    let xi = weak_condensation_length(params.density, a)?;
    let k_diag = a * lambda_mfp * lambda_t / (l * l * l);
    let conditions = alloc::vec![
        Condition::new(
            "cell_over_thermal",
            l / lambda_t,
            Want::MuchGreater,
            threshold
        ),
        Condition::new(
            "mfp_over_thermal",
            lambda_mfp / lambda_t,
            Want::MuchGreater,
            threshold
        ),
        Condition::new(
            "mfp_over_cell",
            lambda_mfp / l,
            Want::MuchGreater,
            threshold
        ),
        Condition::new("k_diagonal", k_diag, Want::MuchLess, threshold),
        Condition::new("weak_condensation", l / xi, Want::AtMost, threshold),
    ];
    Ok(RegimeReport {
        params,
        threshold,
        coupling: params.coupling(),
        lambda_t,
        lambda_mfp,
        xi,
        k_diag,
        critical_cell_length: critical_cell_length(a, lambda_mfp, lambda_t),
        weak_condensation_density: weak_condensation_density(a, l)?,
        conditions,
        weak_condensation_alternative: Condition::new(
            "weak_condensation_alternative",
            l / xi,
            Want::MuchGreater,
            threshold,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::SODIUM_23_MASS;

    #[test]
    fn sodium_thermal_wavelength() {
        let l = thermal_wavelength(SODIUM_23_MASS, 2e-6).unwrap();
        assert!((l - 4.565e-7).abs() < 0.005e-7);
        let l4 = thermal_wavelength(SODIUM_23_MASS, 8e-6).unwrap();
        assert!((l / l4 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cross_section_value() {
        assert!((cross_section(4.9e-9) - 6.034e-16).abs() < 0.001e-16);
    }

    #[test]
    fn grading() {
        let c = Condition::new("x", 0.988, Want::MuchLess, 10.0);
        assert_eq!(c.status, Status::Marginal);
        let c = Condition::new("x", 1e-3, Want::MuchLess, 10.0);
        assert_eq!(c.status, Status::Satisfied);
        let c = Condition::new("x", 50.0, Want::MuchLess, 10.0);
        assert_eq!(c.status, Status::Violated);
        assert!(thermal_wavelength(-1.0, 1.0).is_err());
    }
}
