use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use super::channels::{ChannelTable, Direction};
use super::lattice::{ModeLattice, OccupationConfig};
use crate::error::{Error, Result};

/// Largest shell accepted by [`enumerate_shell`] and [`stationary_exact`].
pub const MAX_SHELL_STATES: usize = 200_000;

/// Search-tree nodes visited before [`enumerate_shell`] gives up.
pub const MAX_SHELL_SEARCH_NODES: u64 = 50_000_000;

/// Components up to this size are solved by dense elimination.
const DENSE_LIMIT: usize = 600;

/// Conserved totals selecting an energy shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShellTarget {
    pub particles: u64,
    pub energy: u64,
    pub momentum: [i64; 3],
}

impl ShellTarget {
    pub fn of(config: &OccupationConfig) -> Self {
        Self {
            particles: config.particles(),
            energy: config.energy(),
            momentum: config.momentum(),
        }
    }
}

/// All configurations with the given `N`, `E`, `P`, in lexicographic order
/// of the occupation vectors.
pub fn enumerate_shell(
    lattice: &ModeLattice,
    target: ShellTarget,
) -> Result<Vec<OccupationConfig>> {
    let m = lattice.len();
    let e: Vec<u64> = lattice.energies().iter().map(|&x| u64::from(x)).collect();
    // suffix minima / maxima of mode energy, for pruning
    let mut min_tail = alloc::vec![u64::MAX; m + 1];
    let mut max_tail = alloc::vec![0u64; m + 1];
    for i in (0..m).rev() {
        min_tail[i] = min_tail[i + 1].min(e[i]);
        max_tail[i] = max_tail[i + 1].max(e[i]);
    }
    let mut z_min = alloc::vec![[i64::MAX; 3]; m + 1];
    let mut z_max = alloc::vec![[i64::MIN; 3]; m + 1];
    for i in (0..m).rev() {
        let z = lattice.mode(i);
        for k in 0..3 {
            z_min[i][k] = z_min[i + 1][k].min(i64::from(z[k]));
            z_max[i][k] = z_max[i + 1][k].max(i64::from(z[k]));
        }
    }
    let mut out = Vec::new();
    let mut n = alloc::vec![0u32; m];
    let mut search = Search {
        lattice,
        e: &e,
        min_tail: &min_tail,
        max_tail: &max_tail,
        z_min: &z_min,
        z_max: &z_max,
        out: &mut out,
        nodes: 0,
    };
    search.visit(0, &mut n, target.particles, target.energy, target.momentum)?;
    out.reverse();
    Ok(out)
}

struct Search<'a> {
    lattice: &'a ModeLattice,
    e: &'a [u64],
    min_tail: &'a [u64],
    max_tail: &'a [u64],
    z_min: &'a [[i64; 3]],
    z_max: &'a [[i64; 3]],
    out: &'a mut Vec<OccupationConfig>,
    nodes: u64,
}

impl Search<'_> {
    fn visit(
        &mut self,
        i: usize,
        n: &mut [u32],
        left_n: u64,
        left_e: u64,
        left_p: [i64; 3],
    ) -> Result<()> {
        let m = n.len();
        self.nodes += 1;
        if self.nodes > MAX_SHELL_SEARCH_NODES {
            return Err(Error::CapacityExceeded {
                what: "energy shell search nodes",
                found: self.nodes as usize,
                limit: MAX_SHELL_SEARCH_NODES as usize,
            });
        }
        if left_n == 0 {
            if left_e != 0 || left_p != [0; 3] {
                return Ok(());
            }
            if self.out.len() >= MAX_SHELL_STATES {
                return Err(Error::CapacityExceeded {
                    what: "energy shell states",
                    found: MAX_SHELL_STATES + 1,
                    limit: MAX_SHELL_STATES,
                });
            }
            self.out
                .push(OccupationConfig::new(self.lattice, n.to_vec())?);
            return Ok(());
        }
        if i == m {
            return Ok(());
        }
        if left_n * self.min_tail[i] > left_e || left_n * self.max_tail[i] < left_e {
            return Ok(());
        }
        let ln = left_n as i64;
        let (lo, hi) = (self.z_min[i], self.z_max[i]);
        if (0..3).any(|k| ln * lo[k] > left_p[k] || ln * hi[k] < left_p[k]) {
            return Ok(());
        }
        let z = self.lattice.mode(i);
        // descending so that the final reversal gives ascending order
        let cap = left_e
            .checked_div(self.e[i])
            .map_or(left_n, |c| left_n.min(c));
        for k in (0..=cap).rev() {
            n[i] = k as u32;
            let kk = k as i64;
            let p = [
                left_p[0] - kk * i64::from(z[0]),
                left_p[1] - kk * i64::from(z[1]),
                left_p[2] - kk * i64::from(z[2]),
            ];
            self.visit(i + 1, n, left_n - k, left_e - k * self.e[i], p)?;
        }
        n[i] = 0;
        Ok(())
    }
}

/// Exact stationary solution of the master equation restricted to one shell.
///
/// Each connected component of the transition graph carries its own
/// normalized stationary distribution (`probabilities` sums to one within
/// every component).
#[derive(Debug, Clone)]
pub struct StationaryShell {
    states: Vec<OccupationConfig>,
    component: Vec<usize>,
    component_sizes: Vec<usize>,
    probabilities: Vec<f64>,
    edges: Vec<(usize, usize, u128, u128)>,
}

impl StationaryShell {
    pub fn states(&self) -> &[OccupationConfig] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Component label of each state.
    pub fn components(&self) -> &[usize] {
        &self.component
    }

    pub fn component_count(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn component_size(&self, c: usize) -> usize {
        self.component_sizes[c]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn index_of(&self, config: &OccupationConfig) -> Option<usize> {
        self.states
            .binary_search_by(|s| s.occupations().cmp(config.occupations()))
            .ok()
    }

    /// `max |w(n) - 1/|component||` over all states.
    pub fn uniformity_deviation(&self) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.component)
            .map(|(&p, &c)| (p - 1.0 / self.component_sizes[c] as f64).abs())
            .fold(0.0, f64::max)
    }

    /// `max |t⁺(n-e) w(n-e) - t⁻(n) w(n)|` over all edges, in units of `γ`.
    pub fn detailed_balance_residual(&self) -> f64 {
        self.edges
            .iter()
            .map(|&(from, to, w_fwd, w_back)| {
                (w_fwd as f64 * self.probabilities[from] - w_back as f64 * self.probabilities[to])
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Stationary distribution of the component containing `config`.
    pub fn component_distribution(&self, c: usize) -> Vec<(OccupationConfig, f64)> {
        self.states
            .iter()
            .zip(&self.component)
            .zip(&self.probabilities)
            .filter(|((_, &k), _)| k == c)
            .map(|((s, _), &p)| (s.clone(), p))
            .collect()
    }

    /// The distribution reached from `config`, or `None` if it is off-shell.
    pub fn distribution_from(
        &self,
        config: &OccupationConfig,
    ) -> Option<Vec<(OccupationConfig, f64)>> {
        let i = self.index_of(config)?;
        Some(self.component_distribution(self.component[i]))
    }

    /// Uniform weight over the whole shell.
    pub fn microcanonical(&self) -> Vec<(OccupationConfig, f64)> {
        let w = 1.0 / self.states.len() as f64;
        self.states.iter().map(|s| (s.clone(), w)).collect()
    }
}

/// Enumerates the shell, builds the generator from the transition rates and
/// solves for its null vector on every connected component.
///
/// Nothing in the solver assumes uniformity: small components are solved by
/// Gaussian elimination, large ones by Gauss-Seidel from a non-uniform start.
pub fn stationary_exact(
    lattice: &ModeLattice,
    table: &ChannelTable,
    target: ShellTarget,
) -> Result<StationaryShell> {
    let states = enumerate_shell(lattice, target)?;
    let index: BTreeMap<&[u32], usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.occupations(), i))
        .collect();
    // Each undirected edge is stored once as a Minus move n → n - e:
    // (from, to, t⁻(from)/γ, t⁺(to)/γ).
    let mut edges = Vec::new();
    let mut adjacency: Vec<Vec<usize>> = alloc::vec![Vec::new(); states.len()];
    for (i, s) in states.iter().enumerate() {
        for ch in table.channels() {
            let w_minus = ch.weight_minus(s.occupations());
            if w_minus == 0 {
                continue;
            }
            let mut next = s.clone();
            next.apply(ch, Direction::Minus)?;
            let j = index[next.occupations()];
            let w_plus = ch.weight_plus(next.occupations());
            edges.push((i, j, w_minus, w_plus));
            adjacency[i].push(edges.len() - 1);
            adjacency[j].push(edges.len() - 1);
        }
    }

    let mut component = alloc::vec![usize::MAX; states.len()];
    let mut component_sizes = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..states.len() {
        if component[start] != usize::MAX {
            continue;
        }
        let c = members.len();
        let mut list = alloc::vec![start];
        component[start] = c;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &k in &adjacency[v] {
                let (a, b, _, _) = edges[k];
                let w = if a == v { b } else { a };
                if component[w] == usize::MAX {
                    component[w] = c;
                    list.push(w);
                    queue.push_back(w);
                }
            }
        }
        list.sort_unstable();
        component_sizes.push(list.len());
        members.push(list);
    }

    let mut probabilities = alloc::vec![0.0; states.len()];
    for list in &members {
        let local: BTreeMap<usize, usize> = list.iter().enumerate().map(|(k, &g)| (g, k)).collect();
        // off-diagonal generator entries q[from][to] within the component
        let mut flows: Vec<(usize, usize, f64)> = Vec::new();
        for &g in list {
            for &k in &adjacency[g] {
                let (a, b, w_fwd, w_back) = edges[k];
                if a == g {
                    flows.push((local[&a], local[&b], w_fwd as f64));
                    flows.push((local[&b], local[&a], w_back as f64));
                }
            }
        }
        let p = if list.len() <= DENSE_LIMIT {
            solve_dense(list.len(), &flows)?
        } else {
            solve_gauss_seidel(list.len(), &flows)?
        };
        for (k, &g) in list.iter().enumerate() {
            probabilities[g] = p[k];
        }
    }

    Ok(StationaryShell {
        states,
        component,
        component_sizes,
        probabilities,
        edges,
    })
}

/// Solves `Qᵀw = 0`, `Σw = 1` with partial pivoting.
fn solve_dense(n: usize, flows: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
    if n == 1 {
        return Ok(alloc::vec![1.0]);
    }
    // a[row][col] = Qᵀ: row = target state
    let mut a = alloc::vec![0.0; n * n];
    for &(from, to, r) in flows {
        a[to * n + from] += r;
        a[from * n + from] -= r;
    }
    let mut b = alloc::vec![0.0; n];
    for col in 0..n {
        a[(n - 1) * n + col] = 1.0;
    }
    b[n - 1] = 1.0;
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap_or(k);
        if a[pivot * n + k] == 0.0 {
            return Err(Error::SolverStalled {
                residual: f64::INFINITY,
            });
        }
        if pivot != k {
            for col in 0..n {
                a.swap(k * n + col, pivot * n + col);
            }
            b.swap(k, pivot);
        }
        let d = a[k * n + k];
        for i in (k + 1)..n {
            let f = a[i * n + k] / d;
            if f == 0.0 {
                continue;
            }
            for col in k..n {
                a[i * n + col] -= f * a[k * n + col];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for col in (i + 1)..n {
            s -= a[i * n + col] * x[col];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}

fn solve_gauss_seidel(n: usize, flows: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
    let mut inflow: Vec<Vec<(usize, f64)>> = alloc::vec![Vec::new(); n];
    let mut out_rate = alloc::vec![0.0; n];
    for &(from, to, r) in flows {
        inflow[to].push((from, r));
        out_rate[from] += r;
    }
    // deliberately non-uniform start
    let mut w: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..100_000 {
        for j in 0..n {
            let s: f64 = inflow[j].iter().map(|&(i, r)| w[i] * r).sum();
            w[j] = s / out_rate[j];
        }
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        residual = (0..n)
            .map(|j| {
                let s: f64 = inflow[j].iter().map(|&(i, r)| w[i] * r).sum();
                (s - w[j] * out_rate[j]).abs()
            })
            .fold(0.0, f64::max);
        let scale = out_rate.iter().cloned().fold(0.0, f64::max) / n as f64;
        if residual <= 1e-14 * scale {
            return Ok(w);
        }
    }
    Err(Error::SolverStalled { residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn four_mode() -> (ModeLattice, ChannelTable) {
        let l =
            ModeLattice::from_modes(1.0, 1.0, vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]])
                .unwrap();
        let t = ChannelTable::new(&l).unwrap();
        (l, t)
    }

    #[test]
    fn shell_enumeration_respects_totals() {
        let (l, _) = four_mode();
        let c = OccupationConfig::new(&l, vec![1, 1, 0, 0]).unwrap();
        let shell = enumerate_shell(&l, ShellTarget::of(&c)).unwrap();
        let occ: Vec<&[u32]> = shell.iter().map(|s| s.occupations()).collect();
        assert_eq!(occ, vec![&[0, 0, 1, 1][..], &[1, 1, 0, 0][..]]);
    }

    #[test]
    fn single_state_shell_has_probability_one() {
        let (l, t) = four_mode();
        let c = OccupationConfig::new(&l, vec![2, 0, 0, 0]).unwrap();
        let s = stationary_exact(&l, &t, ShellTarget::of(&c)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.probabilities(), &[1.0]);
    }

    #[test]
    fn four_mode_shell_is_uniform() {
        let (l, t) = four_mode();
        let c = OccupationConfig::new(&l, vec![2, 2, 1, 1]).unwrap();
        let s = stationary_exact(&l, &t, ShellTarget::of(&c)).unwrap();
        assert_eq!(s.component_count(), 1);
        assert_eq!(s.len(), 4);
        assert!(s.uniformity_deviation() < 1e-12);
        assert!(s.detailed_balance_residual() < 1e-12);
    }

    #[test]
    fn gauss_seidel_agrees_with_dense() {
        let l = ModeLattice::cube(1.0, 1.0, 1).unwrap();
        let t = ChannelTable::new(&l).unwrap();
        let mut n = vec![0u32; l.len()];
        for z in [
            [1, 0, 0],
            [-1, 0, 0],
            [0, 1, 0],
            [0, -1, 0],
            [1, 1, 0],
            [-1, -1, 0],
        ] {
            n[l.index_of(z).unwrap()] = 1;
        }
        let c = OccupationConfig::new(&l, n).unwrap();
        let s = stationary_exact(&l, &t, ShellTarget::of(&c)).unwrap();
        let c0 = s.components()[s.index_of(&c).unwrap()];
        let idx: Vec<usize> = (0..s.len()).filter(|&i| s.components()[i] == c0).collect();
        let local: BTreeMap<usize, usize> = idx.iter().enumerate().map(|(k, &g)| (g, k)).collect();
        let mut flows = Vec::new();
        for &(a, b, wf, wb) in &s.edges {
            if let (Some(&x), Some(&y)) = (local.get(&a), local.get(&b)) {
                flows.push((x, y, wf as f64));
                flows.push((y, x, wb as f64));
            }
        }
        let gs = solve_gauss_seidel(idx.len(), &flows).unwrap();
        let dense = solve_dense(idx.len(), &flows).unwrap();
        for (x, y) in gs.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
