use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::lattice::{ModeLattice, OccupationConfig};
use crate::error::{Error, Result};

/// Total momentum and energy of a mode pair.
type Key = ([i32; 3], u32);

/// Upper bound on the number of stored channels.
pub const MAX_CHANNELS: usize = 10_000_000;

/// A conserving collision `1 + 2 ↔ 3 + 4`.
///
/// The `Plus` direction fills the gain pair `(1, 2)` and empties the loss
/// pair `(3, 4)`. Stored channels are canonical: each pair is sorted and the
/// gain pair precedes the loss pair lexicographically, which removes the
/// `(1↔2)`, `(3↔4)` and direction-reversal duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollisionChannel {
    modes: [usize; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Direction {
    /// `n → n + e`: modes 1, 2 gain a particle.
    Plus,
    /// `n → n - e`: modes 1, 2 lose a particle.
    Minus,
}

impl CollisionChannel {
    /// Canonicalizes `{a, b} ↔ {c, d}`. Returns `None` for no-op channels
    /// (identical pairs) or repeated modes.
    pub fn new(a: usize, b: usize, c: usize, d: usize) -> Option<Self> {
        let p = if a <= b { [a, b] } else { [b, a] };
        let q = if c <= d { [c, d] } else { [d, c] };
        if p == q || p[0] == p[1] || q[0] == q[1] {
            return None;
        }
        if p.iter().any(|m| q.contains(m)) {
            return None;
        }
        let (g, l) = if p < q { (p, q) } else { (q, p) };
        Some(Self {
            modes: [g[0], g[1], l[0], l[1]],
        })
    }

    pub fn modes(&self) -> [usize; 4] {
        self.modes
    }

    pub fn gain(&self) -> [usize; 2] {
        [self.modes[0], self.modes[1]]
    }

    pub fn loss(&self) -> [usize; 2] {
        [self.modes[2], self.modes[3]]
    }

    /// `+1` if `mode` is in the gain pair, `-1` if in the loss pair.
    pub fn side(&self, mode: usize) -> Option<i32> {
        if self.gain().contains(&mode) {
            Some(1)
        } else if self.loss().contains(&mode) {
            Some(-1)
        } else {
            None
        }
    }

    /// Integer weight of the `Plus` transition: `(n1+1)(n2+1) n3 n4`.
    pub fn weight_plus(&self, n: &[u32]) -> u128 {
        let [a, b, c, d] = self.modes;
        (u128::from(n[a]) + 1) * (u128::from(n[b]) + 1) * u128::from(n[c]) * u128::from(n[d])
    }

    /// Integer weight of the `Minus` transition: `n1 n2 (n3+1)(n4+1)`.
    pub fn weight_minus(&self, n: &[u32]) -> u128 {
        let [a, b, c, d] = self.modes;
        u128::from(n[a]) * u128::from(n[b]) * (u128::from(n[c]) + 1) * (u128::from(n[d]) + 1)
    }

    pub fn weight(&self, n: &[u32], direction: Direction) -> u128 {
        match direction {
            Direction::Plus => self.weight_plus(n),
            Direction::Minus => self.weight_minus(n),
        }
    }
}

/// Rate `t⁺(n) = γ (n1+1)(n2+1) n3 n4` of `n → n + e`.
pub fn rate_plus(config: &OccupationConfig, channel: &CollisionChannel, gamma: f64) -> f64 {
    gamma * channel.weight_plus(config.occupations()) as f64
}

/// Rate `t⁻(n) = γ n1 n2 (n3+1)(n4+1)` of `n → n - e`.
pub fn rate_minus(config: &OccupationConfig, channel: &CollisionChannel, gamma: f64) -> f64 {
    gamma * channel.weight_minus(config.occupations()) as f64
}

/// All canonical channels conserving `z1+z2 = z3+z4` and
/// `|z1|²+|z2|² = |z3|²+|z4|²`, sorted lexicographically by mode index.
///
/// Pairs are bucketed by `(momentum sum, energy sum)`; every two distinct
/// pairs in a bucket form a channel. Under exact conservation two pairs in a
/// bucket never share a mode (equal sums with one common mode force the other
/// to coincide too).
pub fn enumerate_channels(lattice: &ModeLattice) -> Result<Vec<CollisionChannel>> {
    let m = lattice.len();
    let key = |i: usize, j: usize| {
        let (zi, zj) = (lattice.mode(i), lattice.mode(j));
        (
            [zi[0] + zj[0], zi[1] + zj[1], zi[2] + zj[2]],
            lattice.energy(i) + lattice.energy(j),
        )
    };
    // Count first so that the guard fires before the pairs are stored.
    let mut sizes: BTreeMap<Key, usize> = BTreeMap::new();
    for i in 0..m {
        for j in (i + 1)..m {
            *sizes.entry(key(i, j)).or_default() += 1;
        }
    }
    let count: usize = sizes.values().map(|&b| b * b.saturating_sub(1) / 2).sum();
    if count > MAX_CHANNELS {
        return Err(Error::CapacityExceeded {
            what: "collision channels",
            found: count,
            limit: MAX_CHANNELS,
        });
    }
    let mut buckets: BTreeMap<Key, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let k = key(i, j);
            if sizes[&k] > 1 {
                buckets.entry(k).or_default().push((i, j));
            }
        }
    }
    let mut channels = Vec::with_capacity(count);
    for pairs in buckets.values() {
        for (x, p) in pairs.iter().enumerate() {
            for q in &pairs[x + 1..] {
                if let Some(ch) = CollisionChannel::new(p.0, p.1, q.0, q.1) {
                    channels.push(ch);
                }
            }
        }
    }
    channels.sort_unstable();
    Ok(channels)
}

/// Immutable channel list with a mode → channel adjacency index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    channels: Vec<CollisionChannel>,
    by_mode: Vec<Vec<u32>>,
}

impl ChannelTable {
    pub fn new(lattice: &ModeLattice) -> Result<Self> {
        Ok(Self::from_channels(
            lattice.len(),
            enumerate_channels(lattice)?,
        ))
    }

    pub fn from_channels(modes: usize, channels: Vec<CollisionChannel>) -> Self {
        let mut by_mode = alloc::vec![Vec::new(); modes];
        for (c, ch) in channels.iter().enumerate() {
            for m in ch.modes() {
                by_mode[m].push(c as u32);
            }
        }
        Self { channels, by_mode }
    }

    pub fn channels(&self) -> &[CollisionChannel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn get(&self, c: usize) -> &CollisionChannel {
        &self.channels[c]
    }

    /// Indices of channels involving `mode`.
    pub fn touching(&self, mode: usize) -> &[u32] {
        &self.by_mode[mode]
    }

    pub fn mode_count(&self) -> usize {
        self.by_mode.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lat(modes: Vec<[i32; 3]>) -> ModeLattice {
        ModeLattice::from_modes(1.0, 1.0, modes).unwrap()
    }

    #[test]
    fn energy_violation_gives_no_channels() {
        let l = lat(vec![[0, 0, 0], [1, 0, 0], [-1, 0, 0]]);
        assert!(enumerate_channels(&l).unwrap().is_empty());
    }

    #[test]
    fn crossed_pairs_form_a_channel() {
        let l = lat(vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]]);
        let ch = enumerate_channels(&l).unwrap();
        assert_eq!(ch, vec![CollisionChannel::new(0, 1, 2, 3).unwrap()]);
    }

    #[test]
    fn canonical_form_is_symmetric() {
        let a = CollisionChannel::new(3, 2, 1, 0).unwrap();
        let b = CollisionChannel::new(0, 1, 2, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gain(), [0, 1]);
        assert_eq!(a.loss(), [2, 3]);
        assert!(CollisionChannel::new(0, 1, 1, 0).is_none());
        assert!(CollisionChannel::new(0, 0, 1, 2).is_none());
    }

    #[test]
    fn rates_match_formulas() {
        let l = lat(vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]]);
        let ch = CollisionChannel::new(0, 1, 2, 3).unwrap();
        let g = 0.5;
        let cfg = |n: Vec<u32>| OccupationConfig::new(&l, n).unwrap();
        assert_eq!(rate_minus(&cfg(vec![1, 1, 0, 0]), &ch, g), g);
        assert_eq!(rate_minus(&cfg(vec![0, 5, 9, 9]), &ch, g), 0.0);
        assert_eq!(rate_minus(&cfg(vec![2, 3, 1, 0]), &ch, g), 12.0 * g);
        assert_eq!(rate_plus(&cfg(vec![0, 0, 1, 1]), &ch, g), g);
        assert_eq!(rate_plus(&cfg(vec![4, 4, 0, 1]), &ch, g), 0.0);
    }

    #[test]
    fn table_adjacency() {
        let l = ModeLattice::cube(1.0, 1.0, 1).unwrap();
        let t = ChannelTable::new(&l).unwrap();
        for (c, ch) in t.channels().iter().enumerate() {
            for m in ch.modes() {
                assert!(t.touching(m).contains(&(c as u32)));
            }
        }
        let total: usize = (0..l.len()).map(|m| t.touching(m).len()).sum();
        assert_eq!(total, 4 * t.len());
    }
}
