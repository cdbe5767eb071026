//! Coarse-grained quantum kinetics of a weakly interacting Bose gas.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerics:
//!
//! - [`basis`]: band-limited wavelet cells, the in-band kernel `g` and the
//!   momentum-smearing weights.
//! - [`kmc`]: mode lattice, conserving collision channels, exact-conservation
//!   kinetic Monte Carlo of the quantum Boltzmann master equation and an exact
//!   stationary-distribution solver for small energy shells.
//! - [`meanfield`]: factorized (Uehling-Uhlenbeck) mean-occupation kinetics on
//!   the same channel table, Bose-Einstein fields and fixed-point fitting.
//! - [`condensate`]: condensate band against a thermal bath (bath kernels,
//!   gain/loss, amplitude and density moment equations, gain criterion).
//! - [`regime`]: validity-regime length scales and inequalities.
//!
//! File formats, configuration and the command-line driver live in the
//! companion `qkinetic` crate.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod condensate;
pub mod consts;
mod error;
pub mod kmc;
pub mod meanfield;
pub mod quadrature;
pub mod regime;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
