//! Exact stochastic simulation of the quantum Boltzmann master equation.
//!
//! Event selection is the direct method of Gillespie. Each transition weight
//! is an integer (`γ` factored out), so the cumulative table is a `u128`
//! Fenwick tree and selection is exact: a uniform integer in `[0, W)` picks
//! the event, `W = Σ weights`, and the waiting time is `Exp(γW)`.
//!
//! Leaf `2c` holds the `Plus` weight of channel `c`, leaf `2c + 1` its
//! `Minus` weight. Channels are lexicographically ordered, which fixes the
//! selection order for reproducibility.
//!
//! # RNG contract
//!
//! Trajectories use ChaCha8 seeded with `seed_from_u64(seed)` and stream
//! `set_stream(index)`; see [`trajectory_rng`]. Per event, one `f64` is drawn
//! for the waiting time and then one `u128` in `[0, W)` for the selection.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::channels::{ChannelTable, CollisionChannel, Direction};
use super::lattice::{ModeLattice, OccupationConfig};
use crate::error::{require_positive, Error, Result};

/// Deterministic RNG for trajectory `stream` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // U in [0, 1) so 1 - U in (0, 1].
    let u: f64 = rng.random();
    -libm::log1p(-u) / rate
}

#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<u128>,
    leaves: Vec<u128>,
}

impl Fenwick {
    fn new(leaves: Vec<u128>) -> Self {
        let n = leaves.len();
        let mut tree = alloc::vec![0u128; n + 1];
        for (i, &w) in leaves.iter().enumerate() {
            let k = i + 1;
            tree[k] += w;
            let parent = k + (k & k.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[k];
            }
        }
        Self { tree, leaves }
    }

    fn total(&self) -> u128 {
        let mut k = self.leaves.len();
        let mut s = 0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    fn set(&mut self, i: usize, value: u128) {
        let old = self.leaves[i];
        if old == value {
            return;
        }
        self.leaves[i] = value;
        let mut k = i + 1;
        let n = self.leaves.len();
        if value > old {
            let d = value - old;
            while k <= n {
                self.tree[k] += d;
                k += k & k.wrapping_neg();
            }
        } else {
            let d = old - value;
            while k <= n {
                self.tree[k] -= d;
                k += k & k.wrapping_neg();
            }
        }
    }

    /// Leaf `i` with `prefix(i) <= target < prefix(i + 1)`.
    fn find(&self, mut target: u128) -> usize {
        let n = self.leaves.len();
        let mut pos = 0;
        let mut step = if n == 0 {
            0
        } else {
            1usize << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// One accepted event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub waiting_time: f64,
    pub channel: usize,
    pub direction: Direction,
}

/// Result of a direct-method step from a given configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Moved {
        event: Event,
        config: OccupationConfig,
    },
    /// Total rate is zero: no further events.
    Absorbing,
}

/// Single direct-method step, evaluating every channel (`O(C)`).
///
/// [`KmcEngine`] gives identical results for the same RNG state in
/// `O(log C)` per event.
pub fn kmc_step<R: Rng + ?Sized>(
    config: &OccupationConfig,
    table: &ChannelTable,
    gamma: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    let gamma = require_positive("gamma", gamma)?;
    let n = config.occupations();
    let weights: Vec<u128> = table
        .channels()
        .iter()
        .flat_map(|ch| [ch.weight_plus(n), ch.weight_minus(n)])
        .collect();
    let total: u128 = weights.iter().sum();
    if total == 0 {
        return Ok(StepOutcome::Absorbing);
    }
    let waiting_time = exponential(rng, gamma * total as f64);
    let mut target = rng.random_range(0..total);
    let mut leaf = 0;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            leaf = i;
            break;
        }
        target -= w;
    }
    let event = Event {
        waiting_time,
        channel: leaf / 2,
        direction: leaf_direction(leaf),
    };
    let mut next = config.clone();
    next.apply(table.get(event.channel), event.direction)?;
    Ok(StepOutcome::Moved {
        event,
        config: next,
    })
}

fn leaf_direction(leaf: usize) -> Direction {
    if leaf % 2 == 0 {
        Direction::Plus
    } else {
        Direction::Minus
    }
}

/// Outcome of [`KmcEngine::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EngineStep {
    Event(Event),
    Absorbing,
}

/// Incremental KMC state: one trajectory with its own RNG.
#[derive(Debug, Clone)]
pub struct KmcEngine<'a, R> {
    table: &'a ChannelTable,
    gamma: f64,
    config: OccupationConfig,
    weights: Fenwick,
    time: f64,
    events: u64,
    rng: R,
    touched: Vec<u32>,
}

impl<'a, R: Rng> KmcEngine<'a, R> {
    pub fn new(
        lattice: &ModeLattice,
        table: &'a ChannelTable,
        gamma: f64,
        config: OccupationConfig,
        rng: R,
    ) -> Result<Self> {
        let gamma = require_positive("gamma", gamma)?;
        if config.len() != lattice.len() || table.mode_count() != lattice.len() {
            return Err(Error::LengthMismatch {
                expected: lattice.len(),
                found: config.len(),
            });
        }
        let n = config.occupations();
        let leaves = table
            .channels()
            .iter()
            .flat_map(|ch| [ch.weight_plus(n), ch.weight_minus(n)])
            .collect();
        Ok(Self {
            table,
            gamma,
            config,
            weights: Fenwick::new(leaves),
            time: 0.0,
            events: 0,
            rng,
            touched: Vec::new(),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn config(&self) -> &OccupationConfig {
        &self.config
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn total_rate(&self) -> f64 {
        self.gamma * self.weights.total() as f64
    }

    pub fn into_config(self) -> OccupationConfig {
        self.config
    }

    /// Draws and applies one event.
    pub fn step(&mut self) -> Result<EngineStep> {
        let total = self.weights.total();
        if total == 0 {
            return Ok(EngineStep::Absorbing);
        }
        let waiting_time = exponential(&mut self.rng, self.gamma * total as f64);
        let event = self.select(total, waiting_time);
        self.fire(event)?;
        self.time += waiting_time;
        Ok(EngineStep::Event(event))
    }

    /// Runs events until `t_stop`. An event whose waiting time overshoots is
    /// discarded and the clock set to `t_stop`; by memorylessness this leaves
    /// the process law unchanged. Returns `false` if the state is absorbing.
    pub fn advance_to(&mut self, t_stop: f64) -> Result<bool> {
        loop {
            let total = self.weights.total();
            if total == 0 {
                if self.time < t_stop {
                    self.time = t_stop;
                }
                return Ok(false);
            }
            let waiting_time = exponential(&mut self.rng, self.gamma * total as f64);
            if self.time + waiting_time > t_stop {
                self.time = t_stop;
                return Ok(true);
            }
            let event = self.select(total, waiting_time);
            self.fire(event)?;
            self.time += waiting_time;
        }
    }

    fn select(&mut self, total: u128, waiting_time: f64) -> Event {
        let target = self.rng.random_range(0..total);
        let leaf = self.weights.find(target);
        Event {
            waiting_time,
            channel: leaf / 2,
            direction: leaf_direction(leaf),
        }
    }

    fn fire(&mut self, event: Event) -> Result<()> {
        let ch: CollisionChannel = *self.table.get(event.channel);
        self.config.apply(&ch, event.direction)?;
        self.events += 1;
        self.touched.clear();
        for m in ch.modes() {
            self.touched.extend_from_slice(self.table.touching(m));
        }
        self.touched.sort_unstable();
        self.touched.dedup();
        let n = self.config.occupations();
        for &c in &self.touched {
            let c = c as usize;
            let ch = self.table.get(c);
            self.weights.set(2 * c, ch.weight_plus(n));
            self.weights.set(2 * c + 1, ch.weight_minus(n));
        }
        Ok(())
    }
}

/// Observables recorded at one sample time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub time: f64,
    pub particles: u64,
    pub energy: u64,
    pub momentum: [i64; 3],
    /// Occupation of `z = 0`, when the lattice contains it.
    pub condensate: Option<u32>,
    pub occupations: Vec<u32>,
}

impl Sample {
    fn record(time: f64, config: &OccupationConfig, zero: Option<usize>) -> Self {
        Self {
            time,
            particles: config.particles(),
            energy: config.energy(),
            momentum: config.momentum(),
            condensate: zero.map(|z| config.get(z)),
            occupations: config.occupations().to_vec(),
        }
    }
}

/// A simulated trajectory; a pure function of its inputs and `(seed, stream)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KmcRun {
    pub seed: u64,
    pub stream: u64,
    pub gamma: f64,
    pub t_end: f64,
    pub samples: Vec<Sample>,
    pub events: u64,
    /// Time at which an absorbing state was reached; later samples repeat it.
    pub absorbed_at: Option<f64>,
}

impl KmcRun {
    pub fn truncated(&self) -> bool {
        self.absorbed_at.is_some()
    }
}

/// `count + 1` equally spaced times on `[0, t_end]`.
pub fn uniform_sample_times(t_end: f64, count: usize) -> Vec<f64> {
    if count == 0 || t_end == 0.0 {
        return alloc::vec![0.0];
    }
    (0..=count)
        .map(|i| t_end * i as f64 / count as f64)
        .collect()
}

/// Inputs shared by every trajectory of a run.
#[derive(Debug, Clone, Copy)]
pub struct KmcProblem<'a> {
    pub lattice: &'a ModeLattice,
    pub table: &'a ChannelTable,
    pub gamma: f64,
    pub t_end: f64,
}

/// Simulates one trajectory and records [`Sample`]s at `sample_times`
/// (sorted, within `[0, t_end]`).
pub fn simulate(
    problem: KmcProblem<'_>,
    initial: &OccupationConfig,
    seed: u64,
    stream: u64,
    sample_times: &[f64],
) -> Result<KmcRun> {
    let KmcProblem {
        lattice,
        table,
        gamma,
        t_end,
    } = problem;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            requirement: "finite and >= 0",
            value: t_end,
        });
    }
    let mut last = 0.0;
    for &t in sample_times {
        if !(t >= last && t <= t_end) {
            return Err(Error::InvalidParameter {
                name: "sample_times",
                requirement: "sorted within [0, t_end]",
                value: t,
            });
        }
        last = t;
    }
    if !initial.is_consistent(lattice) {
        return Err(Error::LengthMismatch {
            expected: lattice.len(),
            found: initial.len(),
        });
    }
    let zero = lattice.zero_mode();
    let mut engine = KmcEngine::new(
        lattice,
        table,
        gamma,
        initial.clone(),
        trajectory_rng(seed, stream),
    )?;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut absorbed_at = None;
    for &t in sample_times {
        if absorbed_at.is_none() {
            let before = engine.time();
            if !engine.advance_to(t)? {
                absorbed_at = Some(before.max(0.0));
            }
        }
        samples.push(Sample::record(t, engine.config(), zero));
    }
    if absorbed_at.is_none() && !engine.advance_to(t_end)? {
        absorbed_at = Some(engine.time());
    }
    Ok(KmcRun {
        seed,
        stream,
        gamma,
        t_end,
        samples,
        events: engine.events(),
        absorbed_at,
    })
}

/// Time-sampled occupancy histogram over a single trajectory: after
/// `burn_in`, the state is recorded every `spacing` for `samples` samples.
pub fn occupancy_histogram<R: Rng>(
    engine: &mut KmcEngine<'_, R>,
    burn_in: f64,
    spacing: f64,
    samples: usize,
) -> Result<alloc::collections::BTreeMap<Vec<u32>, u64>> {
    let mut hist = alloc::collections::BTreeMap::new();
    let mut t = engine.time() + burn_in;
    engine.advance_to(t)?;
    for _ in 0..samples {
        t += spacing;
        engine.advance_to(t)?;
        *hist
            .entry(engine.config().occupations().to_vec())
            .or_insert(0) += 1;
    }
    Ok(hist)
}
