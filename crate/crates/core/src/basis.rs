//! Band-limited wavelet cells.
//!
//! A cell is labelled by a band centre `K = 2Δ·j` (bands of width `2Δ` tile
//! momentum space) and a position `r = nπ/Δ`. Each cell function is the
//! inverse Fourier transform of the band indicator, shifted to `r`:
//!
//! ```text
//! v_K(x, r) = e^{iK(x-r)} sin(Δ(x-r)) / (√(πΔ) (x-r))
//! ```
//!
//! Overlaps are evaluated in momentum space, where they reduce to interval
//! algebra on band indicators and are exact.

use core::f64::consts::PI;

use num_complex::Complex64;

use crate::consts::{HBAR, PLANCK};
use crate::error::{require_positive, Error, Result};
use crate::quadrature::{uniform_breaks, GaussLegendre};

/// Below this `|Δ s|` the sinc ratio is evaluated from its Taylor series.
const SINC_SERIES_CUTOFF: f64 = 1e-4;

/// Relative tolerance for accepting a position as lying on the cell grid.
const GRID_TOLERANCE: f64 = 1e-9;

/// `sin(Δ s) / s`, continuous through `s = 0` where it equals `Δ`.
pub fn sinc_ratio(delta: f64, s: f64) -> f64 {
    let arg = delta * s;
    if arg.abs() < SINC_SERIES_CUTOFF {
        let a2 = arg * arg;
        delta * (1.0 - a2 / 6.0 + a2 * a2 / 120.0)
    } else {
        libm::sin(arg) / s
    }
}

/// Band half-width and the matching cell length `l_c = π/Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSpec {
    delta: f64,
    cell_length: f64,
}

impl CellSpec {
    pub fn new(delta: f64) -> Result<Self> {
        let delta = require_positive("delta", delta)?;
        Ok(Self {
            delta,
            cell_length: PI / delta,
        })
    }

    pub fn from_cell_length(cell_length: f64) -> Result<Self> {
        let cell_length = require_positive("cell_length", cell_length)?;
        Ok(Self {
            delta: PI / cell_length,
            cell_length,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cell_length(&self) -> f64 {
        self.cell_length
    }

    /// Spacing between band centres, `2Δ`.
    pub fn band_spacing(&self) -> f64 {
        2.0 * self.delta
    }
}

/// Phase-space cell spacing: position `δx` (m) and momentum `δp` (kg m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub dx: f64,
    pub dp: f64,
}

impl CellGeometry {
    /// `δx·δp`, equal to Planck's constant.
    pub fn product(&self) -> f64 {
        self.dx * self.dp
    }
}

/// Cell spacings `δx = π/Δ`, `δp = 2Δħ`; their product is `h`.
pub fn cell_geometry(delta: f64) -> Result<CellGeometry> {
    let delta = require_positive("delta", delta)?;
    Ok(CellGeometry {
        dx: PI / delta,
        dp: 2.0 * delta * HBAR,
    })
}

/// `δx δp / h`, which is one up to rounding.
pub fn phase_space_ratio(delta: f64) -> Result<f64> {
    Ok(cell_geometry(delta)?.product() / PLANCK)
}

fn grid_index(what: &'static str, value: f64, spacing: f64) -> Result<i64> {
    let ratio = value / spacing;
    let n = libm::round(ratio);
    if !ratio.is_finite() || (ratio - n).abs() > GRID_TOLERANCE * n.abs().max(1.0) {
        return Err(Error::OffGrid {
            what,
            value,
            spacing,
        });
    }
    Ok(n as i64)
}

/// One-dimensional cell function `v_K(x, r)`.
///
/// `r` must lie on the grid `nπ/Δ`; `K` is unrestricted.
pub fn wavelet_1d(k: f64, r: f64, x: f64, delta: f64) -> Result<Complex64> {
    let delta = require_positive("delta", delta)?;
    grid_index("cell position r", r, PI / delta)?;
    Ok(wavelet_value(k, r, x, delta))
}

fn wavelet_value(k: f64, r: f64, x: f64, delta: f64) -> Complex64 {
    let s = x - r;
    let amp = sinc_ratio(delta, s) / libm::sqrt(PI * delta);
    let phase = k * s;
    Complex64::new(amp * libm::cos(phase), amp * libm::sin(phase))
}

/// A three-dimensional cell: band indices `j` (`K = 2Δ j`) and cell indices
/// `n` (`r = nπ/Δ`) per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaveletIndex {
    delta: f64,
    band: [i64; 3],
    cell: [i64; 3],
}

impl WaveletIndex {
    /// Builds an index from physical `K` and `r`, rejecting off-grid values.
    pub fn new(delta: f64, k: [f64; 3], r: [f64; 3]) -> Result<Self> {
        let delta = require_positive("delta", delta)?;
        let mut band = [0; 3];
        let mut cell = [0; 3];
        for axis in 0..3 {
            band[axis] = grid_index("band centre K", k[axis], 2.0 * delta)?;
            cell[axis] = grid_index("cell position r", r[axis], PI / delta)?;
        }
        Ok(Self { delta, band, cell })
    }

    pub fn from_indices(delta: f64, band: [i64; 3], cell: [i64; 3]) -> Result<Self> {
        let delta = require_positive("delta", delta)?;
        Ok(Self { delta, band, cell })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn band(&self) -> [i64; 3] {
        self.band
    }

    pub fn cell(&self) -> [i64; 3] {
        self.cell
    }

    pub fn k(&self) -> [f64; 3] {
        self.band.map(|j| 2.0 * self.delta * j as f64)
    }

    pub fn r(&self) -> [f64; 3] {
        self.cell.map(|n| n as f64 * PI / self.delta)
    }

    /// Value of the 3-D cell function (product over axes) at `x`.
    pub fn value(&self, x: [f64; 3]) -> Complex64 {
        let k = self.k();
        let r = self.r();
        (0..3)
            .map(|a| wavelet_value(k[a], r[a], x[a], self.delta))
            .product()
    }
}

/// Inner product `∫ v_a* v_b d³x`, evaluated on band indicators.
pub fn overlap(a: &WaveletIndex, b: &WaveletIndex) -> Result<Complex64> {
    if a.delta != b.delta {
        return Err(Error::DeltaMismatch {
            left: a.delta,
            right: b.delta,
        });
    }
    Ok((0..3)
        .map(|axis| grid_axis_overlap(a.band[axis], a.cell[axis], b.band[axis], b.cell[axis]))
        .product())
}

/// Per-axis overlap for on-grid indices.
///
/// In units of `Δ` band `j` covers `[2j-1, 2j+1]`, so two bands share an
/// interval of positive length only when `j_a = j_b`. Within a shared band the
/// overlap is `e^{iKd} sin(Δd)/(Δd)` with `Δd = (n_a - n_b)π`, which vanishes
/// exactly for any nonzero integer difference.
fn grid_axis_overlap(band_a: i64, cell_a: i64, band_b: i64, cell_b: i64) -> Complex64 {
    let lo = (2 * band_a - 1).max(2 * band_b - 1);
    let hi = (2 * band_a + 1).min(2 * band_b + 1);
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    // Shared band: hi - lo == 2.
    if cell_a == cell_b {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Per-axis overlap for arbitrary band centres and positions:
/// `(1/2Δ) ∫_{I_a ∩ I_b} e^{ik(r_a - r_b)} dk`.
pub fn band_overlap_1d(k_a: f64, r_a: f64, k_b: f64, r_b: f64, delta: f64) -> Result<Complex64> {
    let delta = require_positive("delta", delta)?;
    let lo = (k_a - delta).max(k_b - delta);
    let hi = (k_a + delta).min(k_b + delta);
    if hi <= lo {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let d = r_a - r_b;
    if (d * (hi - lo)).abs() < SINC_SERIES_CUTOFF {
        let mid = 0.5 * (hi + lo);
        let scale = (hi - lo) / (2.0 * delta);
        return Ok(Complex64::new(libm::cos(mid * d), libm::sin(mid * d)) * scale);
    }
    // (e^{i hi d} - e^{i lo d}) / (2Δ i d)
    let re = (libm::sin(hi * d) - libm::sin(lo * d)) / (2.0 * delta * d);
    let im = -(libm::cos(hi * d) - libm::cos(lo * d)) / (2.0 * delta * d);
    Ok(Complex64::new(re, im))
}

/// In-band kernel `g(x) = π⁻³ ∏ sin(Δx_i)/x_i`, with `g(0) = (Δ/π)³`.
pub fn g_kernel(x: [f64; 3], delta: f64) -> f64 {
    x.iter().map(|&xi| g_kernel_1d(xi, delta)).product()
}

/// One-axis factor `sin(Δx)/(πx)`.
pub fn g_kernel_1d(x: f64, delta: f64) -> f64 {
    sinc_ratio(delta, x) / PI
}

/// Per-axis smearing weight for a band offset: 2/3 for 0, 1/6 for ±1.
pub fn m_delta_axis_weight(band_offset: i64) -> f64 {
    match band_offset {
        0 => 2.0 / 3.0,
        1 | -1 => 1.0 / 6.0,
        _ => 0.0,
    }
}

/// Momentum-smearing function `M_Δ` at a band-offset vector `Q = 2Δ·offset`.
pub fn m_delta_weight(band_offset: [i64; 3], delta: f64) -> f64 {
    let scale = delta / PI;
    scale
        * scale
        * scale
        * band_offset
            .iter()
            .map(|&q| m_delta_axis_weight(q))
            .product::<f64>()
}

/// Quadrature result with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub residual: f64,
}

/// Panels per unit of `π/Δ` are fixed; the half-range is `HALF_PERIODS·π/Δ`.
const ORACLE_HALF_PERIODS: usize = 400;

/// One-dimensional smearing integral by quadrature,
///
/// ```text
/// I(Q) = ∫dy ∫dy' g(y') g(y) g(y'-y)³ e^{iQ(y-y')},   Q = 2Δ·band_offset
/// ```
///
/// with `g(y) = sin(Δy)/(πy)`. The `y` integral is collapsed with the band
/// projector identity `∫ g(y) g(y+s) dy = g(s)`, leaving
/// `I(Q) = ∫ g(s)⁴ cos(Qs) ds`, which decays as `s⁻⁴`.
pub fn m_delta_oracle_1d(band_offset: i64, delta: f64) -> Result<QuadratureEstimate> {
    let delta = require_positive("delta", delta)?;
    let q = 2.0 * delta * band_offset as f64;
    let integrand = |s: f64| {
        let g = g_kernel_1d(s, delta);
        let g2 = g * g;
        g2 * g2 * libm::cos(q * s)
    };
    let half_range = ORACLE_HALF_PERIODS as f64 * PI / delta;
    let coarse = GaussLegendre::new(12);
    let fine = GaussLegendre::new(20);
    // Even integrand: integrate [0, S] and double.
    let breaks = uniform_breaks(0.0, half_range, ORACLE_HALF_PERIODS);
    let v_coarse = 2.0 * coarse.integrate_panels(&breaks, integrand);
    let v_fine = 2.0 * fine.integrate_panels(&breaks, integrand);
    // |∫_{|s|>S} g⁴| ≤ 2/(3π⁴S³)
    let tail = 2.0 / (3.0 * libm::pow(PI, 4.0) * libm::pow(half_range, 3.0));
    let residual = (v_fine - v_coarse).abs() + tail;
    let scale = libm::pow(delta / PI, 3.0);
    if residual > 1e-6 * scale {
        return Err(Error::Quadrature {
            value: v_fine,
            residual,
        });
    }
    Ok(QuadratureEstimate {
        value: v_fine,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn wavelet_at_origin_is_sinc_limit() {
        let v = wavelet_1d(0.0, 0.0, 0.0, 1.0).unwrap();
        assert!(close(v.re, libm::sqrt(1.0 / PI), 1e-15));
        assert_eq!(v.im, 0.0);
        assert!(close(v.re, 0.5642, 1e-4));
    }

    #[test]
    fn wavelet_vanishes_at_first_zero() {
        let v = wavelet_1d(0.0, 0.0, PI, 1.0).unwrap();
        assert!(v.norm() < 1e-16);
    }

    #[test]
    fn wavelet_rejects_off_grid_position() {
        let err = wavelet_1d(0.0, 0.5, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::OffGrid { .. }));
        assert!(wavelet_1d(0.0, 3.0 * PI / 2.0, 0.0, 2.0).is_ok());
    }

    #[test]
    fn sinc_series_matches_direct_formula_at_cutoff() {
        let delta = 3.0;
        let s = 0.99 * SINC_SERIES_CUTOFF / delta;
        let direct = libm::sin(delta * s) / s;
        assert!(close(sinc_ratio(delta, s), direct, 1e-14));
    }

    #[test]
    fn overlap_normalized_and_shifted_cells_orthogonal() {
        let delta = 1.7;
        let a = WaveletIndex::from_indices(delta, [1, 0, -1], [0, 2, 0]).unwrap();
        assert_eq!(overlap(&a, &a).unwrap(), Complex64::new(1.0, 0.0));
        let mut shifted = a.cell();
        shifted[0] += 1;
        let b = WaveletIndex::from_indices(delta, a.band(), shifted).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), Complex64::new(0.0, 0.0));
        let c = WaveletIndex::from_indices(delta, [2, 0, -1], a.cell()).unwrap();
        assert_eq!(overlap(&a, &c).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn overlap_rejects_mismatched_delta() {
        let a = WaveletIndex::from_indices(1.0, [0; 3], [0; 3]).unwrap();
        let b = WaveletIndex::from_indices(2.0, [0; 3], [0; 3]).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::DeltaMismatch { .. })));
    }

    #[test]
    fn index_from_physical_coordinates() {
        let delta = 0.5;
        let idx = WaveletIndex::new(delta, [1.0, 0.0, -2.0], [2.0 * PI, 0.0, -4.0 * PI]).unwrap();
        assert_eq!(idx.band(), [1, 0, -2]);
        assert_eq!(idx.cell(), [1, 0, -2]);
        assert!(WaveletIndex::new(delta, [0.7, 0.0, 0.0], [0.0; 3]).is_err());
    }

    #[test]
    fn general_band_overlap_agrees_with_grid_path() {
        let delta = 1.3;
        for (ja, jb) in [(0, 0), (0, 1), (2, 2)] {
            for (na, nb) in [(0, 0), (1, 0), (-2, 3)] {
                let g = grid_axis_overlap(ja, na, jb, nb);
                let f = band_overlap_1d(
                    2.0 * delta * ja as f64,
                    na as f64 * PI / delta,
                    2.0 * delta * jb as f64,
                    nb as f64 * PI / delta,
                    delta,
                )
                .unwrap();
                assert!((g - f).norm() < 1e-14, "{ja} {jb} {na} {nb}: {g} vs {f}");
            }
        }
        // half-overlapping bands at the same position: half the norm
        let half = band_overlap_1d(0.0, 0.0, delta, 0.0, delta).unwrap();
        assert!(close(half.re, 0.5, 1e-15));
    }

    #[test]
    fn g_kernel_values() {
        let delta = 2.0;
        let g0 = (delta / PI).powi(3);
        assert!(close(g_kernel([0.0; 3], delta), g0, 1e-16));
        assert!(g_kernel([PI / delta, 0.0, 0.0], delta).abs() < 1e-15 * g0);
        let half = g_kernel([PI / (2.0 * delta), 0.0, 0.0], delta);
        assert!(close(half, g0 * 2.0 / PI, 1e-15));
    }

    #[test]
    fn cell_geometry_product_is_planck() {
        let g = cell_geometry(1.0).unwrap();
        assert!(close(g.dx, PI, 0.0));
        assert!(close(g.dp, 2.0 * HBAR, 0.0));
        let g2 = cell_geometry(2.0).unwrap();
        assert!(close(g2.dx, PI / 2.0, 0.0));
        assert!(close(g2.dp, 4.0 * HBAR, 0.0));
        for d in [1e-3, 0.37, 1.0, 2.0, 9.1e6] {
            assert!(close(
                phase_space_ratio(d).unwrap(),
                1.0,
                4.0 * f64::EPSILON
            ));
        }
        assert!(cell_geometry(0.0).is_err());
    }

    #[test]
    fn m_delta_weights() {
        let delta = 1.0;
        let s = (delta / PI).powi(3);
        assert!(close(m_delta_weight([0; 3], delta), s * 8.0 / 27.0, 1e-17));
        assert!(close(
            m_delta_weight([1, 0, 0], delta),
            s * (1.0 / 6.0) * (4.0 / 9.0),
            1e-17
        ));
        assert_eq!(m_delta_weight([2, 0, 0], delta), 0.0);
        let axis: f64 = (-3..=3).map(m_delta_axis_weight).sum();
        assert!(close(axis, 1.0, 1e-15));
    }

    #[test]
    fn cell_spec_length() {
        let c = CellSpec::new(2.0).unwrap();
        assert_eq!(c.cell_length(), PI / 2.0);
        let d = CellSpec::from_cell_length(1e-5).unwrap();
        assert!(close(d.delta() * d.cell_length(), PI, 1e-15));
        assert!(CellSpec::new(-1.0).is_err());
    }
}
