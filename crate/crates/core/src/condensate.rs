//! Condensate band in contact with a thermalized bath.
//!
//! Two representations of the bath are used. Discrete triad sums over the
//! cell's mode lattice give the kernels `G±(x)` that drive the density
//! moment `ρ̄`; continuum integrals over the thermal momentum distribution
//! give the gain-minus-loss rate of the mean amplitude `φ`.
//!
//! For the continuum integrals the energy delta `δ(ω1 + ω2 - ω_{K1+K2})`
//! forces `K1 ⊥ K2`. With `ε = ħω/kT` and `s = ε1 + ε2`, `t = ε2/s`, every
//! such integral reduces to
//!
//! ```text
//! ∫d³K1 d³K2 δ(...) f = (8π² m κ⁴/ħ) · ½ ∫₀^∞ s ds ∫₀^½ dt f(s(1-t), st, s)
//! ```
//!
//! (using the `1 ↔ 2` symmetry) with `κ² = 2mkT/ħ²`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::basis::g_kernel;
use crate::consts::{contact_coupling, BOLTZMANN, HBAR};
use crate::error::{require_positive, Error, Result};
use crate::kmc::ModeLattice;
use crate::meanfield::BathSpec;
use crate::quadrature::{graded_breaks, GaussLegendre};

/// Ceiling on `ρ̄/g(0)` beyond which growth is reported as unbounded.
pub const GROWTH_CEILING: f64 = 1e6;

/// Discrete triad sums `Σ n̄1 n̄2 (n̄3+1)` and `Σ (n̄1+1)(n̄2+1) n̄3` over
/// ordered `K1, K2 ≠ 0` with `K3 = K1 + K2 ≠ 0` on the lattice and
/// `|ħω1 + ħω2 - ħω3| ≤ η`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TriadSums {
    pub s_plus: f64,
    pub s_minus: f64,
    pub triads: usize,
    /// Energy window (J).
    pub eta: f64,
}

/// Default energy window: half the smallest nonzero level spacing.
pub fn default_eta(lattice: &ModeLattice) -> f64 {
    0.5 * lattice.energy_quantum()
}

pub fn triad_sums(lattice: &ModeLattice, bath: BathSpec, eta: f64) -> Result<TriadSums> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            requirement: "finite and >= 0",
            value: eta,
        });
    }
    if bath.mu > 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            requirement: "<= 0",
            value: bath.mu,
        });
    }
    let index: BTreeMap<[i32; 3], usize> = lattice
        .modes()
        .iter()
        .enumerate()
        .map(|(i, &z)| (z, i))
        .collect();
    let eps0 = lattice.energy_quantum();
    let nbar: Vec<f64> = (0..lattice.len())
        .map(|i| {
            if lattice.energy(i) == 0 {
                0.0
            } else {
                bath.occupation(lattice.mode_energy(i))
            }
        })
        .collect();
    let (mut s_plus, mut s_minus, mut triads) = (0.0, 0.0, 0);
    for (i, &zi) in lattice.modes().iter().enumerate() {
        if lattice.energy(i) == 0 {
            continue;
        }
        for (j, &zj) in lattice.modes().iter().enumerate() {
            if lattice.energy(j) == 0 {
                continue;
            }
            let z3 = [zi[0] + zj[0], zi[1] + zj[1], zi[2] + zj[2]];
            let Some(&k) = index.get(&z3) else { continue };
            if lattice.energy(k) == 0 {
                continue;
            }
            let mismatch = (i64::from(lattice.energy(i)) + i64::from(lattice.energy(j))
                - i64::from(lattice.energy(k)))
            .unsigned_abs() as f64
                * eps0;
            if mismatch > eta {
                continue;
            }
            let (n1, n2, n3) = (nbar[i], nbar[j], nbar[k]);
            s_plus += n1 * n2 * (n3 + 1.0);
            s_minus += (n1 + 1.0) * (n2 + 1.0) * n3;
            triads += 1;
        }
    }
    Ok(TriadSums {
        s_plus,
        s_minus,
        triads,
        eta,
    })
}

/// Bath kernels at one displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathKernelSample {
    pub x: [f64; 3],
    pub g_plus: f64,
    pub g_minus: f64,
    pub temperature: f64,
    pub mu: f64,
    pub triads: usize,
    pub eta: f64,
    /// Set when no triad falls inside the window; the kernels are then zero.
    pub no_triads: bool,
}

impl BathKernelSample {
    /// `|g_plus/(e^{μ/kT} g_minus) - 1|`, or zero when both kernels vanish.
    pub fn kms_residual(&self) -> f64 {
        let expected = libm::exp(self.mu / (BOLTZMANN * self.temperature)) * self.g_minus;
        if expected == 0.0 && self.g_plus == 0.0 {
            0.0
        } else {
            (self.g_plus / expected - 1.0).abs()
        }
    }
}

/// Precomputed kernel `G±(x) = (πu²/ħ²)(ħ/2η) g(x)³ S±`.
///
/// The energy delta is represented by a box of width `2η/ħ` in frequency.
/// On-lattice triads have `K1 + K2 - K3 = 0`, so the phase factor is one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathKernels {
    pub sums: TriadSums,
    pub bath: BathSpec,
    pub coupling: f64,
    pub delta: f64,
}

impl BathKernels {
    pub fn new(
        lattice: &ModeLattice,
        bath: BathSpec,
        coupling: f64,
        eta: Option<f64>,
    ) -> Result<Self> {
        let coupling = require_positive("u", coupling)?;
        let eta = eta.unwrap_or_else(|| default_eta(lattice));
        if eta == 0.0 {
            return Err(Error::InvalidParameter {
                name: "eta",
                requirement: "> 0 for kernel normalization",
                value: eta,
            });
        }
        Ok(Self {
            sums: triad_sums(lattice, bath, eta)?,
            bath,
            coupling,
            delta: lattice.band_half_width(),
        })
    }

    /// `(πu²/ħ²)(ħ/2η)`.
    pub fn prefactor(&self) -> f64 {
        PI * self.coupling * self.coupling / (HBAR * HBAR) * HBAR / (2.0 * self.sums.eta)
    }

    pub fn at(&self, x: [f64; 3]) -> BathKernelSample {
        let g = g_kernel(x, self.delta);
        let common = self.prefactor() * g * g * g;
        BathKernelSample {
            x,
            g_plus: common * self.sums.s_plus,
            g_minus: common * self.sums.s_minus,
            temperature: self.bath.temperature,
            mu: self.bath.mu,
            triads: self.sums.triads,
            eta: self.sums.eta,
            no_triads: self.sums.triads == 0,
        }
    }

    /// `∫ G⁺(x) g(x) d³x = prefactor · S⁺ · ∫ g⁴`, with
    /// `∫ g⁴ d³x = (2Δ³/3π³)³` in closed form.
    pub fn gain_moment(&self) -> f64 {
        let per_axis = 2.0 * self.delta * self.delta * self.delta / (3.0 * PI * PI * PI);
        self.prefactor() * self.sums.s_plus * per_axis * per_axis * per_axis
    }
}

/// Evaluates both kernels at displacement `x`.
pub fn bath_kernels(
    x: [f64; 3],
    lattice: &ModeLattice,
    bath: BathSpec,
    coupling: f64,
    eta: Option<f64>,
) -> Result<BathKernelSample> {
    Ok(BathKernels::new(lattice, bath, coupling, eta)?.at(x))
}

/// Occupation of the non-condensed bath as a function of `ε = ħω/kT`.
pub trait OccupationProfile {
    fn occupation(&self, eps: f64) -> f64;

    /// `F(ε) = ln(n̄/(1 + n̄))`.
    fn log_ratio(&self, eps: f64) -> f64 {
        let n = self.occupation(eps);
        libm::log(n / (1.0 + n))
    }

    /// `F(ε1) + F(ε2) - F(ε1 + ε2)`.
    fn margin(&self, e1: f64, e2: f64) -> f64 {
        self.log_ratio(e1) + self.log_ratio(e2) - self.log_ratio(e1 + e2)
    }
}

/// Bose-Einstein bath with `α = μ/kT ≤ 0`; the margin is exactly `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub alpha: f64,
}

impl OccupationProfile for Equilibrium {
    fn occupation(&self, eps: f64) -> f64 {
        1.0 / libm::expm1(eps - self.alpha)
    }

    fn log_ratio(&self, eps: f64) -> f64 {
        self.alpha - eps
    }

    fn margin(&self, _: f64, _: f64) -> f64 {
        self.alpha
    }
}

/// `F(ε) = -ε - λε²` (dimensionless curvature `λ`); the margin is `2λε1ε2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticF {
    pub curvature: f64,
}

impl QuadraticF {
    /// From `F(ω) = (-ħω - λω²)/kT` with `λ` in J s².
    pub fn from_si(lambda: f64, temperature: f64) -> Self {
        Self {
            curvature: lambda * BOLTZMANN * temperature / (HBAR * HBAR),
        }
    }
}

impl OccupationProfile for QuadraticF {
    fn occupation(&self, eps: f64) -> f64 {
        1.0 / libm::expm1(eps + self.curvature * eps * eps)
    }

    fn log_ratio(&self, eps: f64) -> f64 {
        -eps - self.curvature * eps * eps
    }

    fn margin(&self, e1: f64, e2: f64) -> f64 {
        2.0 * self.curvature * e1 * e2
    }
}

/// Tabulated `n̄(ε)`; `F` is interpolated linearly and extended linearly
/// past both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    eps: Vec<f64>,
    log_ratio: Vec<f64>,
}

impl Tabulated {
    pub fn new(eps: Vec<f64>, occupation: Vec<f64>) -> Result<Self> {
        if eps.len() != occupation.len() {
            return Err(Error::LengthMismatch {
                expected: eps.len(),
                found: occupation.len(),
            });
        }
        if eps.len() < 2 || eps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter {
                name: "eps",
                requirement: "at least two strictly increasing points",
                value: eps.first().copied().unwrap_or(f64::NAN),
            });
        }
        let log_ratio = occupation
            .iter()
            .enumerate()
            .map(|(mode, &n)| {
                if n.is_finite() && n > 0.0 {
                    Ok(libm::log(n / (1.0 + n)))
                } else {
                    Err(Error::NegativeField { mode, value: n })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { eps, log_ratio })
    }
}

impl OccupationProfile for Tabulated {
    fn occupation(&self, eps: f64) -> f64 {
        let f = self.log_ratio(eps);
        // n = e^F / (1 - e^F)
        1.0 / libm::expm1(-f)
    }

    fn log_ratio(&self, eps: f64) -> f64 {
        let n = self.eps.len();
        let i = match self.eps.partition_point(|&e| e <= eps) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.eps[i], self.eps[i + 1]);
        let (f0, f1) = (self.log_ratio[i], self.log_ratio[i + 1]);
        f0 + (f1 - f0) * (eps - x0) / (x1 - x0)
    }
}

/// Verdict of [`convexity_gain_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GainVerdict {
    /// Every margin positive: gain on every pair.
    Gain,
    /// Every margin zero within rounding: no net gain.
    Neutral,
    /// Every margin negative: loss on every pair.
    Loss,
    Mixed,
    /// No grid pair sums onto the grid.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairMargin {
    pub i: usize,
    pub j: usize,
    /// Grid index of `ω_i + ω_j`.
    pub k: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvexityReport {
    pub pairs: Vec<PairMargin>,
    pub positive: usize,
    pub zero: usize,
    pub negative: usize,
    pub verdict: GainVerdict,
}

/// Checks `F(ω_i) + F(ω_j) > F(ω_i + ω_j)` for every pair `i ≤ j` whose sum
/// lies on the grid (to `1e-12` relative). Margins within
/// `1e-12·(|F_i| + |F_j| + |F_k|)` of zero count as zero.
pub fn convexity_gain_check(f: &[f64], omega: &[f64]) -> Result<ConvexityReport> {
    if f.len() != omega.len() {
        return Err(Error::LengthMismatch {
            expected: omega.len(),
            found: f.len(),
        });
    }
    if let Some((i, &v)) = f.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NegativeField { mode: i, value: v });
    }
    let mut pairs = Vec::new();
    let (mut positive, mut zero, mut negative) = (0, 0, 0);
    for i in 0..omega.len() {
        for j in i..omega.len() {
            let target = omega[i] + omega[j];
            let tol = 1e-12 * target.abs().max(f64::MIN_POSITIVE);
            let Some(k) = omega.iter().position(|&w| (w - target).abs() <= tol) else {
                continue;
            };
            let margin = f[i] + f[j] - f[k];
            let scale = f[i].abs() + f[j].abs() + f[k].abs();
            if margin.abs() <= 1e-12 * scale {
                zero += 1;
            } else if margin > 0.0 {
                positive += 1;
            } else {
                negative += 1;
            }
            pairs.push(PairMargin { i, j, k, margin });
        }
    }
    let verdict = match (positive, zero, negative) {
        (0, 0, 0) => GainVerdict::Empty,
        (_, 0, 0) => GainVerdict::Gain,
        (0, _, 0) => GainVerdict::Neutral,
        (0, 0, _) => GainVerdict::Loss,
        _ => GainVerdict::Mixed,
    };
    Ok(ConvexityReport {
        pairs,
        positive,
        zero,
        negative,
        verdict,
    })
}

/// Quadrature knobs for the perpendicular-momentum integrals.
const S_MAX: f64 = 60.0;
const S_LEVELS: u32 = 48;
const T_LEVELS: u32 = 52;
const TAIL_PANELS: usize = 12;
const REL_TOLERANCE: f64 = 1e-8;

/// Continuum prefactor `(u²/2ħ²π⁵)(8π² m κ⁴/ħ)` (1/s).
pub fn continuum_prefactor(temperature: f64, mass: f64, coupling: f64) -> f64 {
    let kappa2 = 2.0 * mass * BOLTZMANN * temperature / (HBAR * HBAR);
    coupling * coupling / (2.0 * HBAR * HBAR * libm::pow(PI, 5.0)) * 8.0 * PI * PI * mass / HBAR
        * kappa2
        * kappa2
}

/// `½ ∫ s ds ∫₀^½ dt f(s(1-t), st, s)` with a residual from two rule orders.
pub fn perpendicular_integral<F: Fn(f64, f64, f64) -> f64>(
    f: F,
) -> Result<crate::basis::QuadratureEstimate> {
    let s_breaks = graded_breaks(S_MAX, S_LEVELS, TAIL_PANELS);
    let t_breaks = graded_breaks(0.5, T_LEVELS, 2);
    let eval = |rule: &GaussLegendre| -> f64 {
        let t_nodes = rule.mapped(&t_breaks);
        let mut total = 0.0;
        for (s, ws) in rule.mapped(&s_breaks) {
            let inner: f64 = t_nodes
                .iter()
                .map(|&(t, wt)| wt * f(s * (1.0 - t), s * t, s))
                .sum();
            total += ws * s * inner;
        }
        0.5 * total
    };
    let coarse = eval(&GaussLegendre::new(12));
    let fine = eval(&GaussLegendre::new(20));
    let residual = (fine - coarse).abs();
    if !fine.is_finite() || residual > REL_TOLERANCE * fine.abs() {
        return Err(Error::Quadrature {
            value: fine,
            residual,
        });
    }
    Ok(crate::basis::QuadratureEstimate {
        value: fine,
        residual,
    })
}

/// Gain-minus-loss rate of the condensate amplitude (1/s):
/// `(e^{μ/kT} - 1) (u²/2ħ²π⁵) ∫d³K1 d³K2 n̄1 n̄2 (1 + n̄_{K1+K2}) δ(ω1 + ω2 - ω_{K1+K2})`.
///
/// Exactly zero at `μ = 0` and negative for `μ < 0`.
pub fn gain_minus_loss_rate(bath: BathSpec, scattering_length: f64, mass: f64) -> Result<f64> {
    let a = require_positive("a", scattering_length)?;
    let mass = require_positive("m", mass)?;
    if bath.mu > 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            requirement: "<= 0",
            value: bath.mu,
        });
    }
    if bath.mu == 0.0 {
        return Ok(0.0);
    }
    let alpha = bath.mu / bath.kt();
    let p = Equilibrium { alpha };
    let integral = perpendicular_integral(|e1, e2, e3| {
        p.occupation(e1) * p.occupation(e2) * (1.0 + p.occupation(e3))
    })?;
    let u = contact_coupling(a, mass);
    Ok(libm::expm1(alpha) * continuum_prefactor(bath.temperature, mass, u) * integral.value)
}

/// Net forward-minus-backward condensate gain (1/s) for an arbitrary bath
/// profile, written as `(1+n̄1)(1+n̄2)n̄3 · expm1(margin)` so that the sign is
/// the sign of the convexity margin and an exactly zero margin gives exactly
/// zero.
pub fn net_gain_nonequilibrium<P: OccupationProfile + ?Sized>(
    profile: &P,
    temperature: f64,
    mass: f64,
    coupling: f64,
) -> Result<f64> {
    let temperature = require_positive("T", temperature)?;
    let mass = require_positive("m", mass)?;
    let coupling = require_positive("u", coupling)?;
    let integral = perpendicular_integral(|e1, e2, e3| net_integrand(profile, e1, e2, e3))?;
    Ok(continuum_prefactor(temperature, mass, coupling) * integral.value)
}

/// `(1+n̄1)(1+n̄2)n̄3 · expm1(margin)` in log space: far out in the tail the
/// occupations underflow while the margin factor overflows.
fn net_integrand<P: OccupationProfile + ?Sized>(profile: &P, e1: f64, e2: f64, e3: f64) -> f64 {
    let m = profile.margin(e1, e2);
    if m == 0.0 {
        return 0.0;
    }
    // ln(1 + n̄) = -ln(1 - e^F)
    let ln_one_plus = |f: f64| -libm::log(-libm::expm1(f));
    let f3 = profile.log_ratio(e3);
    let ln_occ = ln_one_plus(profile.log_ratio(e1))
        + ln_one_plus(profile.log_ratio(e2))
        + f3
        + ln_one_plus(f3);
    let ln_factor = if m > 1.0 {
        m + libm::log1p(-libm::exp(-m))
    } else if m > 0.0 {
        libm::log(libm::expm1(m))
    } else {
        libm::log(-libm::expm1(m))
    };
    libm::copysign(libm::exp(ln_occ + ln_factor), m)
}

/// Forward term alone, `∫ n̄1 n̄2 (1 + n̄3)` with the same prefactor (1/s).
/// For [`QuadraticF`] this is the exponentially enhanced gain
/// `∫ e^{2λε1ε2} n̄1 n̄2 (1 + n̄3)` of the quadratic family.
pub fn forward_gain<P: OccupationProfile + ?Sized>(
    profile: &P,
    temperature: f64,
    mass: f64,
    coupling: f64,
) -> Result<f64> {
    let temperature = require_positive("T", temperature)?;
    let mass = require_positive("m", mass)?;
    let coupling = require_positive("u", coupling)?;
    let integral = perpendicular_integral(|e1, e2, e3| {
        profile.occupation(e1) * profile.occupation(e2) * (1.0 + profile.occupation(e3))
    })?;
    Ok(continuum_prefactor(temperature, mass, coupling) * integral.value)
}

/// `ρ̄ = g(0)/(1 - e^{μ/kT})` for `μ < 0`.
pub fn stationary_rho(bath: BathSpec, g0: f64) -> Result<f64> {
    if !(bath.mu < 0.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            requirement: "< 0",
            value: bath.mu,
        });
    }
    Ok(g0 / -libm::expm1(bath.mu / bath.kt()))
}

/// Mean amplitude `φ` and density `ρ̄` of the condensate band.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CondensateState {
    pub phi: Complex64,
    pub rho_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RhoStatus {
    /// Within `1e-9` relative of the stationary value at the final time.
    Converged,
    Running,
    /// Crossed the growth ceiling `GROWTH_CEILING·g(0)`.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RhoTrajectory {
    pub samples: Vec<(f64, f64)>,
    pub status: RhoStatus,
    pub stationary: Option<f64>,
    /// Time at which `ρ̄` crossed the ceiling.
    pub ceiling_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhiTrajectory {
    pub samples: Vec<(f64, Complex64)>,
}

/// Spatially homogeneous moment equations of the condensate band.
///
/// ```text
/// dρ̄/dt = 2C [(e^{μ/kT} - 1) ρ̄/g(0) + 1],          C = ∫ G⁺ g d³x
/// dφ/dt = -i(Ω0 + 2uρ̄/ħ) φ + Γ φ,                 Ω0 = u g(0) Σ n̄_K / ħ
/// ```
///
/// Both are linear with constant coefficients (`ρ̄` affine), so they are
/// solved in closed form at every sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CondensateModel {
    pub bath: BathSpec,
    pub coupling: f64,
    /// `g(0) = (Δ/π)³` (1/m³).
    pub g0: f64,
    /// `C` (1/(m³ s)).
    pub gain_moment: f64,
    /// `Γ` (1/s).
    pub gain_minus_loss: f64,
    /// `Ω0` (1/s).
    pub mean_field_frequency: f64,
}

impl CondensateModel {
    pub fn new(
        lattice: &ModeLattice,
        bath: BathSpec,
        scattering_length: f64,
        eta: Option<f64>,
    ) -> Result<Self> {
        let u = contact_coupling(require_positive("a", scattering_length)?, lattice.mass());
        let kernels = BathKernels::new(lattice, bath, u, eta)?;
        let delta = lattice.band_half_width();
        let g0 = g_kernel([0.0; 3], delta);
        let thermal: f64 = (0..lattice.len())
            .filter(|&i| lattice.energy(i) != 0)
            .map(|i| bath.occupation(lattice.mode_energy(i)))
            .sum();
        Ok(Self {
            bath,
            coupling: u,
            g0,
            gain_moment: kernels.gain_moment(),
            gain_minus_loss: gain_minus_loss_rate(bath, scattering_length, lattice.mass())?,
            mean_field_frequency: u * g0 * thermal / HBAR,
        })
    }

    /// Relaxation rate `λ = 2C(e^{μ/kT} - 1)/g(0) ≤ 0` of the `ρ̄` equation.
    pub fn rho_slope(&self) -> f64 {
        2.0 * self.gain_moment * libm::expm1(self.bath.mu / self.bath.kt()) / self.g0
    }

    pub fn rho_rhs(&self, rho: f64) -> f64 {
        self.rho_slope() * rho + 2.0 * self.gain_moment
    }

    /// `ρ̄(t)` and `∫₀ᵗ ρ̄` from `ρ̄(0) = rho0`.
    fn rho_at(&self, rho0: f64, t: f64) -> (f64, f64) {
        let lambda = self.rho_slope();
        let source = 2.0 * self.gain_moment;
        if lambda == 0.0 {
            return (rho0 + source * t, rho0 * t + 0.5 * source * t * t);
        }
        let fixed = -source / lambda;
        let decay = libm::expm1(lambda * t);
        // ρ(t) = ρ* + (ρ0 - ρ*) e^{λt}
        let rho = rho0 + (rho0 - fixed) * decay;
        let integral = fixed * t + (rho0 - fixed) * decay / lambda;
        (rho, integral)
    }

    pub fn integrate_rho(&self, rho0: f64, sample_times: &[f64]) -> Result<RhoTrajectory> {
        if !(rho0.is_finite() && rho0 >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rho_bar",
                requirement: "finite and >= 0",
                value: rho0,
            });
        }
        check_times(sample_times)?;
        let ceiling = GROWTH_CEILING * self.g0;
        let stationary = stationary_rho(self.bath, self.g0).ok();
        let mut samples = Vec::with_capacity(sample_times.len());
        let mut ceiling_time = None;
        // Sampling continues past the ceiling; only non-finite values stop it.
        for &t in sample_times {
            let (rho, _) = self.rho_at(rho0, t);
            if rho > ceiling && ceiling_time.is_none() {
                ceiling_time = Some(self.ceiling_crossing(rho0, ceiling, t));
            }
            if !rho.is_finite() {
                break;
            }
            samples.push((t, rho));
        }
        let status = if ceiling_time.is_some() {
            RhoStatus::Unbounded
        } else {
            match (stationary, samples.last()) {
                (Some(s), Some(&(_, r))) if (r - s).abs() <= 1e-9 * s => RhoStatus::Converged,
                _ => RhoStatus::Running,
            }
        };
        Ok(RhoTrajectory {
            samples,
            status,
            stationary,
            ceiling_time,
        })
    }

    fn ceiling_crossing(&self, rho0: f64, ceiling: f64, t_hi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, t_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.rho_at(rho0, mid).0 > ceiling {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Evolves `φ` with `ρ̄` from `state0`. With `dissipation = false` only
    /// the coherent rotation is kept.
    pub fn integrate_phi(
        &self,
        state0: CondensateState,
        sample_times: &[f64],
        dissipation: bool,
    ) -> Result<PhiTrajectory> {
        check_times(sample_times)?;
        let gamma = if dissipation {
            self.gain_minus_loss
        } else {
            0.0
        };
        let samples = sample_times
            .iter()
            .map(|&t| {
                let (_, rho_int) = self.rho_at(state0.rho_bar, t);
                let phase = self.mean_field_frequency * t + 2.0 * self.coupling * rho_int / HBAR;
                let rotation = Complex64::new(libm::cos(phase), -libm::sin(phase));
                (t, state0.phi * rotation * libm::exp(gamma * t))
            })
            .collect();
        Ok(PhiTrajectory { samples })
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    let mut last = 0.0;
    for &t in times {
        if !(t.is_finite() && t >= last) {
            return Err(Error::InvalidParameter {
                name: "sample_times",
                requirement: "finite, sorted and >= 0",
                value: t,
            });
        }
        last = t;
    }
    Ok(())
}
