use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("{what}: {value} is not on the grid (spacing {spacing})")]
    OffGrid {
        what: &'static str,
        value: f64,
        spacing: f64,
    },
    #[error("band half-widths differ: {left} vs {right}")]
    DeltaMismatch { left: f64, right: f64 },
    #[error("{what} exceeds capacity guard: {found} > {limit}")]
    CapacityExceeded {
        what: &'static str,
        found: usize,
        limit: usize,
    },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("occupation vector has {found} entries, lattice has {expected} modes")]
    LengthMismatch { expected: usize, found: usize },
    #[error("transition would empty mode {mode} below zero")]
    NegativeOccupation { mode: usize },
    #[error(
        "occupation diverges: chemical potential {mu:e} J is not below lowest level {lowest:e} J"
    )]
    DivergentOccupation { mu: f64, lowest: f64 },
    #[error("mean occupation of mode {mode} went negative ({value:e})")]
    NegativeField { mode: usize, value: f64 },
    #[error("quadrature did not converge: value {value:e}, residual {residual:e}")]
    Quadrature { value: f64, residual: f64 },
    #[error("step size underflow at t = {time:e} (dt = {dt:e})")]
    StepUnderflow { time: f64, dt: f64 },
    #[error("no Bose-Einstein field reproduces N = {particles}, E = {energy}")]
    UnreachableEquilibrium { particles: f64, energy: f64 },
    #[error("iterative solver stalled with residual {residual:e}")]
    SolverStalled { residual: f64 },
}

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            requirement: "finite and > 0",
            value,
        })
    }
}
