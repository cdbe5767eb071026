use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::consts::HBAR;
use crate::error::{require_positive, Error, Result};

/// Integer momentum index `z`; the band centre is `K = (2π/L) z`.
pub type Mode = [i32; 3];

/// Largest accepted `z_max` for cubic lattices.
pub const MAX_Z: u32 = 64;

/// Discrete momentum grid of one spatial cell of side `L`.
///
/// Mode energies are kept as integers `|z|²` in units of
/// `ε0 = ħ²(2π/L)²/2m`, so energy and momentum conservation are exact
/// integer predicates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeLattice {
    box_length: f64,
    mass: f64,
    modes: Vec<Mode>,
    energies: Vec<u32>,
}

impl ModeLattice {
    /// All modes with `|z|∞ ≤ z_max`, in lexicographic order.
    pub fn cube(box_length: f64, mass: f64, z_max: u32) -> Result<Self> {
        if z_max > MAX_Z {
            return Err(Error::InvalidLattice(format!(
                "z_max = {z_max} exceeds {MAX_Z}"
            )));
        }
        let z = z_max as i32;
        let mut modes = Vec::with_capacity((2 * z_max as usize + 1).pow(3));
        for x in -z..=z {
            for y in -z..=z {
                for w in -z..=z {
                    modes.push([x, y, w]);
                }
            }
        }
        Self::from_modes(box_length, mass, modes)
    }

    /// Lattice from an explicit mode list; order is preserved.
    pub fn from_modes(box_length: f64, mass: f64, modes: Vec<Mode>) -> Result<Self> {
        let box_length = require_positive("box_length", box_length)?;
        let mass = require_positive("mass", mass)?;
        if modes.is_empty() {
            return Err(Error::InvalidLattice("no modes".into()));
        }
        let mut seen = BTreeMap::new();
        for (i, z) in modes.iter().enumerate() {
            if z.iter().any(|c| c.unsigned_abs() > MAX_Z) {
                return Err(Error::InvalidLattice(format!(
                    "mode {z:?} exceeds |z| <= {MAX_Z}"
                )));
            }
            if let Some(prev) = seen.insert(*z, i) {
                return Err(Error::InvalidLattice(format!(
                    "mode {z:?} repeated at positions {prev} and {i}"
                )));
            }
        }
        let energies = modes
            .iter()
            .map(|z| z.iter().map(|&c| (c * c) as u32).sum())
            .collect();
        Ok(Self {
            box_length,
            mass,
            modes,
            energies,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> Mode {
        self.modes[i]
    }

    /// Integer energies `|z|²` (units of [`energy_quantum`](Self::energy_quantum)).
    pub fn energies(&self) -> &[u32] {
        &self.energies
    }

    pub fn energy(&self, i: usize) -> u32 {
        self.energies[i]
    }

    pub fn min_energy(&self) -> u32 {
        self.energies.iter().copied().min().unwrap_or(0)
    }

    pub fn index_of(&self, z: Mode) -> Option<usize> {
        self.modes.iter().position(|m| *m == z)
    }

    /// Index of `z = 0`, the condensate band, if present.
    pub fn zero_mode(&self) -> Option<usize> {
        self.index_of([0, 0, 0])
    }

    /// Wavevector spacing `2π/L` (1/m).
    pub fn k_unit(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Band half-width `Δ = π/L`; bands of width `2Δ` tile the grid.
    pub fn band_half_width(&self) -> f64 {
        PI / self.box_length
    }

    pub fn wavevector(&self, i: usize) -> [f64; 3] {
        let k = self.k_unit();
        self.modes[i].map(|c| k * c as f64)
    }

    /// `ε0 = ħ²(2π/L)²/2m` (J).
    pub fn energy_quantum(&self) -> f64 {
        let k = self.k_unit();
        HBAR * HBAR * k * k / (2.0 * self.mass)
    }

    /// Momentum quantum `ħ 2π/L` (kg m/s).
    pub fn momentum_quantum(&self) -> f64 {
        HBAR * self.k_unit()
    }

    /// `ħω_K = ħ²K²/2m` (J).
    pub fn mode_energy(&self, i: usize) -> f64 {
        self.energy_quantum() * self.energies[i] as f64
    }
}

/// Occupation numbers with cached conserved totals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OccupationConfig {
    n: Vec<u32>,
    particles: u64,
    energy: u64,
    momentum: [i64; 3],
}

impl OccupationConfig {
    pub fn new(lattice: &ModeLattice, n: Vec<u32>) -> Result<Self> {
        if n.len() != lattice.len() {
            return Err(Error::LengthMismatch {
                expected: lattice.len(),
                found: n.len(),
            });
        }
        let (particles, energy, momentum) = totals(lattice, &n);
        Ok(Self {
            n,
            particles,
            energy,
            momentum,
        })
    }

    pub fn uniform(lattice: &ModeLattice, per_mode: u32) -> Self {
        Self::new(lattice, alloc::vec![per_mode; lattice.len()]).expect("length matches lattice")
    }

    pub fn occupations(&self) -> &[u32] {
        &self.n
    }

    pub fn get(&self, mode: usize) -> u32 {
        self.n[mode]
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// `N = Σ n`.
    pub fn particles(&self) -> u64 {
        self.particles
    }

    /// `E = Σ |z|² n` in units of `ε0`.
    pub fn energy(&self) -> u64 {
        self.energy
    }

    /// `P = Σ z n` in units of `ħ 2π/L`.
    pub fn momentum(&self) -> [i64; 3] {
        self.momentum
    }

    /// True when the cached totals equal freshly recomputed sums.
    pub fn is_consistent(&self, lattice: &ModeLattice) -> bool {
        self.n.len() == lattice.len()
            && totals(lattice, &self.n) == (self.particles, self.energy, self.momentum)
    }

    /// Applies `±e` of a conserving channel. Cached totals are invariant.
    pub fn apply(
        &mut self,
        channel: &super::CollisionChannel,
        direction: super::Direction,
    ) -> Result<()> {
        let (up, down) = match direction {
            super::Direction::Plus => (channel.gain(), channel.loss()),
            super::Direction::Minus => (channel.loss(), channel.gain()),
        };
        for &m in &down {
            if self.n[m] == 0 {
                return Err(Error::NegativeOccupation { mode: m });
            }
        }
        for m in down {
            self.n[m] -= 1;
        }
        for m in up {
            self.n[m] += 1;
        }
        Ok(())
    }

    pub fn into_occupations(self) -> Vec<u32> {
        self.n
    }
}

fn totals(lattice: &ModeLattice, n: &[u32]) -> (u64, u64, [i64; 3]) {
    let mut particles = 0u64;
    let mut energy = 0u64;
    let mut momentum = [0i64; 3];
    for (i, &ni) in n.iter().enumerate() {
        let ni64 = u64::from(ni);
        particles += ni64;
        energy += u64::from(lattice.energy(i)) * ni64;
        for (p, &z) in momentum.iter_mut().zip(&lattice.mode(i)) {
            *p += i64::from(z) * ni as i64;
        }
    }
    (particles, energy, momentum)
}
