//! Factorized mean-occupation (Uehling-Uhlenbeck) kinetics on the KMC
//! channel table, and Bose-Einstein fields.
//!
//! The channel convention is the one of [`crate::kmc::mean_occupation_rhs_exact`]:
//! every stored channel contributes its net `Plus` flux
//! `γ[(n1+1)(n2+1)n3n4 - n1n2(n3+1)(n4+1)]` with sign `+1` to its gain pair and
//! `-1` to its loss pair, so `Σ rhs` and `Σ e rhs` vanish channel by channel.

use alloc::vec::Vec;

use crate::consts::BOLTZMANN;
use crate::error::{require_positive, Error, Result};
use crate::kmc::{ChannelTable, ModeLattice};

/// Per-entry floor below which a mean occupation counts as negative.
pub const NEGATIVITY_FLOOR: f64 = -1e-9;

/// Mean occupations `n̄` per mode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OccupationField {
    values: Vec<f64>,
}

impl OccupationField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (mode, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < NEGATIVITY_FLOOR {
                return Err(Error::NegativeField { mode, value: v });
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            values: alloc::vec![0.0; modes],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `Σ n̄`.
    pub fn particles(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `Σ e n̄` in units of the lattice energy quantum.
    pub fn energy(&self, lattice: &ModeLattice) -> f64 {
        reduced_energy(lattice.energies(), &self.values)
    }
}

fn reduced_energy(energies: &[u32], n: &[f64]) -> f64 {
    energies
        .iter()
        .zip(n)
        .map(|(&e, &x)| f64::from(e) * x)
        .sum()
}

/// Thermal bath: temperature (K) and chemical potential (J).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathSpec {
    pub temperature: f64,
    pub mu: f64,
}

impl BathSpec {
    pub fn new(temperature: f64, mu: f64) -> Result<Self> {
        require_positive("T", temperature)?;
        if !mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                requirement: "finite",
                value: mu,
            });
        }
        Ok(Self { temperature, mu })
    }

    pub fn kt(&self) -> f64 {
        BOLTZMANN * self.temperature
    }

    /// Fugacity `e^{μ/kT}`.
    pub fn fugacity(&self) -> f64 {
        libm::exp(self.mu / self.kt())
    }

    /// `n̄ = 1/(e^{(ε-μ)/kT} - 1)` for a level at energy `ε` (J).
    pub fn occupation(&self, energy: f64) -> f64 {
        1.0 / libm::expm1((energy - self.mu) / self.kt())
    }
}

/// Bose-Einstein field `n̄_K = 1/(e^{(ħω_K - μ)/kT} - 1)` on every mode.
pub fn be_field(lattice: &ModeLattice, bath: BathSpec) -> Result<OccupationField> {
    let lowest = lattice.energy_quantum() * f64::from(lattice.min_energy());
    if !(bath.mu < lowest) {
        return Err(Error::DivergentOccupation {
            mu: bath.mu,
            lowest,
        });
    }
    let values = (0..lattice.len())
        .map(|i| bath.occupation(lattice.mode_energy(i)))
        .collect();
    Ok(OccupationField { values })
}

/// Bose-Einstein occupations in lattice units: `1/(e^{β(e - μ)} - 1)` with
/// `β = ε0/kT` and `μ` in units of `ε0`.
pub fn be_occupations(energies: &[u32], beta: f64, mu: f64) -> Vec<f64> {
    energies
        .iter()
        .map(|&e| 1.0 / libm::expm1(beta * (f64::from(e) - mu)))
        .collect()
}

/// Factorized collision rate `dn̄/dt` for every mode.
pub fn uu_rhs(field: &OccupationField, table: &ChannelTable, gamma: f64) -> Vec<f64> {
    let mut out = alloc::vec![0.0; field.len()];
    uu_rhs_into(field.values(), table, gamma, &mut out);
    out
}

/// [`uu_rhs`] on raw slices, overwriting `out`.
pub fn uu_rhs_into(n: &[f64], table: &ChannelTable, gamma: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for ch in table.channels() {
        let [a, b, c, d] = ch.modes();
        let plus = (n[a] + 1.0) * (n[b] + 1.0) * n[c] * n[d];
        let minus = n[a] * n[b] * (n[c] + 1.0) * (n[d] + 1.0);
        let s = gamma * (plus - minus);
        out[a] += s;
        out[b] += s;
        out[c] -= s;
        out[d] -= s;
    }
}

/// Step control for [`integrate_uu`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UuOptions {
    /// Local error tolerance per step, relative to `max(1, n̄)`.
    pub tolerance: f64,
    /// Allowed relative drift of `N` and `E` per unit of `1/γ`.
    pub drift_rate: f64,
    /// Initial step (s); `None` picks one from the initial rates.
    pub initial_step: Option<f64>,
}

impl Default for UuOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            drift_rate: 1e-8,
            initial_step: None,
        }
    }
}

/// One recorded point of a UU trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UuSample {
    pub time: f64,
    pub particles: f64,
    pub energy: f64,
    pub field: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UuTrajectory {
    pub samples: Vec<UuSample>,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// `max |N(t) - N(0)|/N(0)` over recorded samples.
    pub particle_drift: f64,
    /// `max |E(t) - E(0)|/E(0)` over recorded samples.
    pub energy_drift: f64,
}

impl UuTrajectory {
    pub fn last(&self) -> &UuSample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }
}

/// Integrates the UU equation with classic RK4 and step doubling.
///
/// A step is rejected (and halved) when the doubling error exceeds the
/// tolerance, when `N` or `E` drift faster than `drift_rate` per `1/γ`, or
/// when any occupation falls below [`NEGATIVITY_FLOOR`]. Samples are recorded
/// exactly at `sample_times` (sorted within `[0, t_end]`).
pub fn integrate_uu(
    field0: &OccupationField,
    lattice: &ModeLattice,
    table: &ChannelTable,
    gamma: f64,
    t_end: f64,
    sample_times: &[f64],
    options: UuOptions,
) -> Result<UuTrajectory> {
    let gamma = require_positive("gamma", gamma)?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            requirement: "finite and >= 0",
            value: t_end,
        });
    }
    if field0.len() != lattice.len() || table.mode_count() != lattice.len() {
        return Err(Error::LengthMismatch {
            expected: lattice.len(),
            found: field0.len(),
        });
    }
    let energies = lattice.energies();
    let mut stepper = Rk4::new(field0.len(), table, gamma);
    let mut y = field0.values().to_vec();
    let n0 = field0.particles();
    let e0 = reduced_energy(energies, &y);
    let mut t = 0.0;
    let mut h = match options.initial_step {
        Some(h) => require_positive("initial_step", h)?,
        None => initial_step(&mut stepper, &y, t_end),
    };
    let min_step = 1e-12 * t_end;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut traj = UuTrajectory {
        samples: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
        particle_drift: 0.0,
        energy_drift: 0.0,
    };
    let mut full = alloc::vec![0.0; y.len()];
    let mut half = alloc::vec![0.0; y.len()];
    let mut last = 0.0;
    for &target in sample_times {
        if !(target >= last && target <= t_end) {
            return Err(Error::InvalidParameter {
                name: "sample_times",
                requirement: "sorted within [0, t_end]",
                value: target,
            });
        }
        last = target;
        while t < target {
            let step = h.min(target - t);
            stepper.step(&y, step, &mut full);
            stepper.step(&y, 0.5 * step, &mut half);
            let mid = half.clone();
            stepper.step(&mid, 0.5 * step, &mut half);
            let err = half
                .iter()
                .zip(&full)
                .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                .fold(0.0, f64::max)
                / 15.0;
            let dn = (half.iter().sum::<f64>() - y.iter().sum::<f64>()).abs() / n0.max(1e-300);
            let de = (reduced_energy(energies, &half) - reduced_energy(energies, &y)).abs()
                / e0.max(1e-300);
            let drift_ok = dn.max(de) <= options.drift_rate * (gamma * step).max(1.0);
            let negative = half
                .iter()
                .enumerate()
                .find(|(_, &v)| v < NEGATIVITY_FLOOR || !v.is_finite());
            if err <= options.tolerance && drift_ok && negative.is_none() {
                y.copy_from_slice(&half);
                t += step;
                traj.accepted_steps += 1;
                if err < options.tolerance / 64.0 && step == h {
                    h *= 2.0;
                }
            } else {
                traj.rejected_steps += 1;
                h = 0.5 * step;
                if h < min_step {
                    if let Some((mode, &value)) = negative {
                        return Err(Error::NegativeField { mode, value });
                    }
                    return Err(Error::StepUnderflow { time: t, dt: h });
                }
            }
        }
        let particles: f64 = y.iter().sum();
        let energy = reduced_energy(energies, &y);
        if n0 > 0.0 {
            traj.particle_drift = traj.particle_drift.max((particles - n0).abs() / n0);
        }
        if e0 > 0.0 {
            traj.energy_drift = traj.energy_drift.max((energy - e0).abs() / e0);
        }
        samples.push(UuSample {
            time: target,
            particles,
            energy,
            field: y.clone(),
        });
    }
    traj.samples = samples;
    Ok(traj)
}

fn initial_step(stepper: &mut Rk4<'_>, y: &[f64], t_end: f64) -> f64 {
    let mut k = alloc::vec![0.0; y.len()];
    uu_rhs_into(y, stepper.table, stepper.gamma, &mut k);
    let rate = y
        .iter()
        .zip(&k)
        .map(|(n, dn)| dn.abs() / n.max(1.0))
        .fold(0.0, f64::max);
    if rate > 0.0 {
        (0.01 / rate).min(t_end.max(f64::MIN_POSITIVE))
    } else {
        t_end.max(f64::MIN_POSITIVE)
    }
}

struct Rk4<'a> {
    table: &'a ChannelTable,
    gamma: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(len: usize, table: &'a ChannelTable, gamma: f64) -> Self {
        let z = alloc::vec![0.0; len];
        Self {
            table,
            gamma,
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    fn step(&mut self, y: &[f64], h: f64, out: &mut [f64]) {
        let (table, gamma) = (self.table, self.gamma);
        uu_rhs_into(y, table, gamma, &mut self.k[0]);
        for (s, c) in [(0usize, 0.5), (1, 0.5), (2, 1.0)] {
            for ((t, &yi), &ki) in self.tmp.iter_mut().zip(y).zip(&self.k[s]) {
                *t = yi + c * h * ki;
            }
            let (_, rest) = self.k.split_at_mut(s + 1);
            uu_rhs_into(&self.tmp, table, gamma, &mut rest[0]);
        }
        for i in 0..y.len() {
            out[i] = y[i]
                + h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }
}

/// Bose-Einstein parameters in lattice units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReducedBath {
    /// `ε0/kT`.
    pub beta: f64,
    /// `μ/ε0`.
    pub mu: f64,
}

impl ReducedBath {
    pub fn to_bath(&self, lattice: &ModeLattice) -> BathSpec {
        let eps0 = lattice.energy_quantum();
        BathSpec {
            temperature: eps0 / (BOLTZMANN * self.beta),
            mu: self.mu * eps0,
        }
    }
}

/// Finds the positive-temperature Bose-Einstein field with the given
/// particle number and energy (units of `ε0`) by nested bisection: for each
/// `β` the chemical potential is fixed by `N`, and the resulting energy is
/// monotone decreasing in `β`.
pub fn fit_be(energies: &[u32], particles: f64, energy: f64) -> Result<ReducedBath> {
    let unreachable = Error::UnreachableEquilibrium { particles, energy };
    if energies.is_empty() || !(particles > 0.0) || !(energy >= 0.0) {
        return Err(unreachable);
    }
    let e_min = f64::from(*energies.iter().min().unwrap_or(&0));
    let mean_level = energies.iter().map(|&e| f64::from(e)).sum::<f64>() / energies.len() as f64;
    // E/N ranges over (e_min, mean level) as β runs over (∞, 0)
    let per = energy / particles;
    if !(per > e_min && per < mean_level) {
        return Err(unreachable);
    }
    let energy_at = |beta: f64| -> (f64, f64) {
        let mu = chemical_potential(energies, e_min, beta, particles);
        (
            reduced_energy(energies, &be_occupations(energies, beta, mu)),
            mu,
        )
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while energy_at(lo).0 < energy {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(unreachable);
        }
    }
    while energy_at(hi).0 > energy {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(unreachable);
        }
    }
    for _ in 0..200 {
        let mid = libm::sqrt(lo * hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if energy_at(mid).0 > energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = libm::sqrt(lo * hi);
    Ok(ReducedBath {
        beta,
        mu: energy_at(beta).1,
    })
}

/// `μ` (units of `ε0`, below `e_min`) with `Σ n̄ = particles` at fixed `β`.
fn chemical_potential(energies: &[u32], e_min: f64, beta: f64, particles: f64) -> f64 {
    // Bisection on the reduced gap g = β(e_min - μ) > 0; N decreases with g.
    let count = |g: f64| -> f64 {
        let mu = e_min - g / beta;
        be_occupations(energies, beta, mu).iter().sum()
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while count(lo) < particles && lo > 1e-300 {
        lo *= 0.5;
    }
    while count(hi) > particles && hi < 1e300 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = libm::sqrt(lo * hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) > particles {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    e_min - libm::sqrt(lo * hi) / beta
}
