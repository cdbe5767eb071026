use alloc::vec::Vec;

use super::channels::ChannelTable;
use super::lattice::OccupationConfig;

/// Exact `d⟨n_a⟩/dt` under a distribution over configurations.
///
/// Each channel containing `a` is oriented so that `a` sits on its gaining
/// side; the contribution is `γ⟨(n_a+1)(n_2+1)n_3n_4 - n_a n_2(n_3+1)(n_4+1)⟩`
/// with the correlators taken from `dist` as given (no factorization).
/// Weights need not be normalized; they are used as is.
pub fn mean_occupation_rhs_exact(
    dist: &[(OccupationConfig, f64)],
    mode: usize,
    table: &ChannelTable,
    gamma: f64,
) -> f64 {
    let mut total = 0.0;
    for &c in table.touching(mode) {
        let ch = table.get(c as usize);
        let side = f64::from(ch.side(mode).unwrap_or(0));
        let mut acc = 0.0;
        for (config, p) in dist {
            let n = config.occupations();
            let net = ch.weight_plus(n) as f64 - ch.weight_minus(n) as f64;
            acc += p * net;
        }
        total += side * acc;
    }
    gamma * total
}

/// [`mean_occupation_rhs_exact`] for every mode.
pub fn mean_occupation_rhs_all(
    dist: &[(OccupationConfig, f64)],
    table: &ChannelTable,
    gamma: f64,
) -> Vec<f64> {
    let mut out = alloc::vec![0.0; table.mode_count()];
    for ch in table.channels() {
        let mut acc = 0.0;
        for (config, p) in dist {
            let n = config.occupations();
            acc += p * (ch.weight_plus(n) as f64 - ch.weight_minus(n) as f64);
        }
        let [a, b, c, d] = ch.modes();
        out[a] += gamma * acc;
        out[b] += gamma * acc;
        out[c] -= gamma * acc;
        out[d] -= gamma * acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::ModeLattice;
    use alloc::vec;

    #[test]
    fn delta_distribution_matches_hand_sum() {
        let l =
            ModeLattice::from_modes(1.0, 1.0, vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]])
                .unwrap();
        let t = ChannelTable::new(&l).unwrap();
        let c = OccupationConfig::new(&l, vec![2, 3, 1, 0]).unwrap();
        let dist = vec![(c, 1.0)];
        // t⁺ = 3·4·1·0 = 0, t⁻ = 2·3·2·1 = 12
        let g = 0.25;
        assert_eq!(mean_occupation_rhs_exact(&dist, 0, &t, g), -12.0 * g);
        assert_eq!(mean_occupation_rhs_exact(&dist, 3, &t, g), 12.0 * g);
        assert_eq!(
            mean_occupation_rhs_all(&dist, &t, g),
            vec![-3.0, -3.0, 3.0, 3.0]
        );
    }
}
