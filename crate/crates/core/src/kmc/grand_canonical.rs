use alloc::vec::Vec;

use super::lattice::{ModeLattice, OccupationConfig};
use crate::consts::{BOLTZMANN, HBAR};
use crate::error::{require_positive, Error, Result};

/// Drifting grand-canonical ensemble `exp(-(E - μN - u·P)/kT)`.
///
/// The weight factorizes over modes with per-particle exponent
/// `x_i = (ħω_i - μ - ħK_i·u)/kT`.
#[derive(Debug, Clone)]
pub struct GrandCanonical {
    exponents: Vec<f64>,
    mu: f64,
    kt: f64,
}

impl GrandCanonical {
    /// `temperature = f64::INFINITY` is accepted and gives unit weights.
    pub fn new(lattice: &ModeLattice, temperature: f64, mu: f64, drift: [f64; 3]) -> Result<Self> {
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "T",
                requirement: "> 0",
                value: temperature,
            });
        }
        let kt = BOLTZMANN * temperature;
        let exponents = (0..lattice.len())
            .map(|i| {
                let k = lattice.wavevector(i);
                let doppler = HBAR * (k[0] * drift[0] + k[1] * drift[1] + k[2] * drift[2]);
                let x = (lattice.mode_energy(i) - mu - doppler) / kt;
                if x == 0.0 {
                    0.0
                } else {
                    x
                }
            })
            .collect();
        Ok(Self { exponents, mu, kt })
    }

    /// Per-particle exponents `x_i`.
    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// `exp(-n x_i)`.
    pub fn mode_factor(&self, mode: usize, n: u32) -> f64 {
        libm::exp(-f64::from(n) * self.exponents[mode])
    }

    pub fn log_weight(&self, config: &OccupationConfig) -> f64 {
        -config
            .occupations()
            .iter()
            .zip(&self.exponents)
            .map(|(&n, &x)| f64::from(n) * x)
            .sum::<f64>()
    }

    pub fn weight(&self, config: &OccupationConfig) -> f64 {
        libm::exp(self.log_weight(config))
    }

    /// Errors unless every `x_i > 0`, i.e. the ensemble is normalizable. The
    /// reported level is the offending Doppler-shifted energy `μ + x_i kT`.
    pub fn check_normalizable(&self) -> Result<()> {
        match self.exponents.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            None => Ok(()),
            Some((_, &x)) => Err(Error::DivergentOccupation {
                mu: self.mu,
                lowest: self.mu + x * self.kt,
            }),
        }
    }

    /// `⟨n_i⟩ = 1/(e^{x_i} - 1)`.
    pub fn mean_occupation(&self, mode: usize) -> Result<f64> {
        let x = self.exponents[mode];
        if !(x > 0.0) {
            return Err(Error::DivergentOccupation {
                mu: self.mu,
                lowest: self.mu + x * self.kt,
            });
        }
        Ok(1.0 / libm::expm1(x))
    }
}

/// `exp(-(E - μN - u·P)/kT)` with `E`, `P` in SI units.
pub fn grand_canonical_weight(
    lattice: &ModeLattice,
    config: &OccupationConfig,
    temperature: f64,
    mu: f64,
    drift: [f64; 3],
) -> Result<f64> {
    if temperature != f64::INFINITY {
        require_positive("T", temperature)?;
    }
    if config.len() != lattice.len() {
        return Err(Error::LengthMismatch {
            expected: lattice.len(),
            found: config.len(),
        });
    }
    let kt = BOLTZMANN * temperature;
    let e = lattice.energy_quantum() * config.energy() as f64;
    let q = lattice.momentum_quantum();
    let p = config.momentum();
    let up = q * (drift[0] * p[0] as f64 + drift[1] * p[1] as f64 + drift[2] * p[2] as f64);
    let x = (e - mu * config.particles() as f64 - up) / kt;
    Ok(libm::exp(-x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::{ChannelTable, Direction};

    #[test]
    fn infinite_temperature_gives_unit_weight() {
        let l = ModeLattice::cube(1e-5, 3.8e-26, 1).unwrap();
        let c = OccupationConfig::uniform(&l, 3);
        let w = grand_canonical_weight(&l, &c, f64::INFINITY, -1e-30, [0.01, 0.0, 0.0]).unwrap();
        assert_eq!(w, 1.0);
    }

    #[test]
    fn factorizes_and_is_channel_invariant() {
        let l = ModeLattice::cube(2e-6, 3.8e-26, 1).unwrap();
        let t = ChannelTable::new(&l).unwrap();
        let (temp, mu, u) = (1e-7, -2.0 * l.energy_quantum(), [1e-4, -2e-4, 5e-5]);
        let gc = GrandCanonical::new(&l, temp, mu, u).unwrap();
        let n: Vec<u32> = (0..l.len() as u32).map(|i| i % 3 + 1).collect();
        let mut c = OccupationConfig::new(&l, n).unwrap();
        let whole = grand_canonical_weight(&l, &c, temp, mu, u).unwrap();
        let product: f64 = (0..l.len()).map(|i| gc.mode_factor(i, c.get(i))).product();
        assert!((whole / product - 1.0).abs() < 1e-12);
        assert!((gc.weight(&c) / whole - 1.0).abs() < 1e-12);
        let before = whole;
        c.apply(t.get(0), Direction::Minus).unwrap();
        let after = grand_canonical_weight(&l, &c, temp, mu, u).unwrap();
        assert!((after / before - 1.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_flagged() {
        let l = ModeLattice::cube(2e-6, 3.8e-26, 1).unwrap();
        let gc = GrandCanonical::new(&l, 1e-7, 0.0, [0.0; 3]).unwrap();
        assert!(gc.check_normalizable().is_err());
        let gc = GrandCanonical::new(&l, 1e-7, -1e-32, [0.0; 3]).unwrap();
        assert!(gc.check_normalizable().is_ok());
    }
}
