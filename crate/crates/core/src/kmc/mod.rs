//! Exact-conservation kinetic Monte Carlo of the quantum Boltzmann master
//! equation on a single cell, with exact small-shell stationary solutions.

mod channels;
mod engine;
mod grand_canonical;
mod lattice;
mod moments;
mod stationary;

pub use channels::{
    enumerate_channels, rate_minus, rate_plus, ChannelTable, CollisionChannel, Direction,
    MAX_CHANNELS,
};
pub use engine::{
    kmc_step, occupancy_histogram, simulate, trajectory_rng, uniform_sample_times, EngineStep,
    Event, KmcEngine, KmcProblem, KmcRun, Sample, StepOutcome,
};
pub use grand_canonical::{grand_canonical_weight, GrandCanonical};
pub use lattice::{Mode, ModeLattice, OccupationConfig, MAX_Z};
pub use moments::{mean_occupation_rhs_all, mean_occupation_rhs_exact};
pub use stationary::{
    enumerate_shell, stationary_exact, ShellTarget, StationaryShell, MAX_SHELL_SEARCH_NODES,
    MAX_SHELL_STATES,
};
