use std::f64::consts::PI;

use num_complex::Complex64;
use qkinetic_core::basis::g_kernel;
use qkinetic_core::condensate::{
    bath_kernels, convexity_gain_check, forward_gain, gain_minus_loss_rate,
    net_gain_nonequilibrium, stationary_rho, BathKernels, CondensateModel, CondensateState,
    Equilibrium, GainVerdict, OccupationProfile, QuadraticF, RhoStatus, Tabulated,
};
use qkinetic_core::consts::{contact_coupling, BOLTZMANN, HBAR, SODIUM_23_MASS};
use qkinetic_core::kmc::ModeLattice;
use qkinetic_core::meanfield::BathSpec;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

const A_NA: f64 = 2.75e-9;
const T0: f64 = 1e-6;

fn lattice(z: u32) -> ModeLattice {
    ModeLattice::cube(2e-6, SODIUM_23_MASS, z).unwrap()
}

fn bath(alpha: f64) -> BathSpec {
    BathSpec::new(T0, alpha * BOLTZMANN * T0).unwrap()
}

fn u() -> f64 {
    contact_coupling(A_NA, SODIUM_23_MASS)
}

#[test]
fn kms_ratio_and_parity() {
    let l = lattice(2);
    let mut rng = SmallRng::seed_from_u64(2);
    for alpha in [-0.05, -0.5, -1.0, -2.0, -4.0] {
        let b = bath(alpha);
        let kernels = BathKernels::new(&l, b, u(), None).unwrap();
        for _ in 0..10 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3e-6..3e-6));
            let k = kernels.at(x);
            assert!(k.kms_residual() < 1e-10);
            let m = kernels.at([-x[0], -x[1], -x[2]]);
            assert_eq!(k.g_plus, m.g_plus);
        }
    }
}

#[test]
fn kernels_match_triple_loop() {
    let l = lattice(2);
    let b = bath(-0.7);
    let eta = 0.5 * l.energy_quantum();
    let k = bath_kernels([0.0; 3], &l, b, u(), Some(eta)).unwrap();
    let nbar = |i: usize| b.occupation(l.mode_energy(i));
    let (mut sp, mut sm, mut count) = (0.0, 0.0, 0usize);
    for i in 0..l.len() {
        for j in 0..l.len() {
            for m in 0..l.len() {
                if l.energy(i) == 0 || l.energy(j) == 0 || l.energy(m) == 0 {
                    continue;
                }
                let (zi, zj, zm) = (l.mode(i), l.mode(j), l.mode(m));
                if (0..3).any(|a| zi[a] + zj[a] != zm[a]) {
                    continue;
                }
                let de = (l.mode_energy(i) + l.mode_energy(j) - l.mode_energy(m)).abs();
                if de > eta * (1.0 + 1e-9) {
                    continue;
                }
                sp += nbar(i) * nbar(j) * (nbar(m) + 1.0);
                sm += (nbar(i) + 1.0) * (nbar(j) + 1.0) * nbar(m);
                count += 1;
            }
        }
    }
    let g0 = g_kernel([0.0; 3], l.band_half_width());
    let pref = PI * u() * u() / (HBAR * HBAR) * HBAR / (2.0 * eta) * g0 * g0 * g0;
    assert_eq!(k.triads, count);
    assert!((k.g_plus / (pref * sp) - 1.0).abs() < 1e-12);
    assert!((k.g_minus / (pref * sm) - 1.0).abs() < 1e-12);
}

#[test]
fn no_triads_flagged() {
    let l = ModeLattice::from_modes(2e-6, SODIUM_23_MASS, vec![[1, 0, 0], [0, 1, 0]]).unwrap();
    let k = bath_kernels([0.0; 3], &l, bath(-1.0), u(), None).unwrap();
    assert!(k.no_triads);
    assert_eq!(k.g_plus, 0.0);
    assert_eq!(k.g_minus, 0.0);
}

#[test]
fn gain_minus_loss_signs() {
    assert_eq!(
        gain_minus_loss_rate(bath(0.0), A_NA, SODIUM_23_MASS).unwrap(),
        0.0
    );
    for alpha in [-0.1, -1.0, -3.0] {
        assert!(gain_minus_loss_rate(bath(alpha), A_NA, SODIUM_23_MASS).unwrap() < 0.0);
    }
}

/// Monte Carlo estimate of `∫d³x1 d³x2 n1 n2 (1 + n_{x1+x2}) δ_w(2 x1·x2)` with
/// a Gaussian delta of width `w`, in units `ε = x²`.
fn smeared_integral(alpha: f64, w: f64, samples: usize, seed: u64) -> (f64, f64) {
    let n = |e: f64| 1.0 / (e - alpha).exp_m1();
    let mut rng = SmallRng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        // ε ~ Exp(1), r = √ε, density 2r e^{-r²}
        let r1 = (-(1.0 - rng.random::<f64>()).ln()).sqrt();
        let r2 = (-(1.0 - rng.random::<f64>()).ln()).sqrt();
        let c_max = (8.0 * w / (2.0 * r1 * r2)).min(1.0);
        let c = rng.random_range(-c_max..c_max);
        let dot = r1 * r2 * c;
        let e3 = r1 * r1 + r2 * r2 + 2.0 * dot;
        let delta = (-(2.0 * dot).powi(2) / (2.0 * w * w)).exp() / ((2.0 * PI).sqrt() * w);
        let f = n(r1 * r1) * n(r2 * r2) * (1.0 + n(e3)) * delta;
        let jac = (r1 * (r1 * r1).exp() / 2.0) * (r2 * (r2 * r2).exp() / 2.0);
        let v = 4.0 * PI * 2.0 * PI * 2.0 * c_max * f * jac;
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / samples as f64;
    let var = sum2 / samples as f64 - mean * mean;
    (mean, (var / samples as f64).sqrt())
}

#[test]
fn gain_minus_loss_matches_monte_carlo() {
    let alpha = -1.0;
    let (j1, s1) = smeared_integral(alpha, 0.1, 2_000_000, 1);
    let (j2, s2) = smeared_integral(alpha, 0.05, 2_000_000, 2);
    // Gaussian smearing is even in the width: extrapolate in w²
    let j0 = (4.0 * j2 - j1) / 3.0;
    let sigma = (16.0 * s2 * s2 + s1 * s1).sqrt() / 3.0;
    assert!(sigma < 0.003 * j0, "oracle too noisy: {sigma} vs {j0}");
    let kt = BOLTZMANN * T0;
    let kappa = (2.0 * SODIUM_23_MASS * kt).sqrt() / HBAR;
    let uu = u();
    let oracle = alpha.exp_m1() * uu * uu / (2.0 * HBAR * HBAR * PI.powi(5))
        * kappa.powi(6)
        * (HBAR / kt)
        * j0;
    let value = gain_minus_loss_rate(bath(alpha), A_NA, SODIUM_23_MASS).unwrap();
    assert!((value / oracle - 1.0).abs() < 0.01, "{value} vs {oracle}");
}

#[test]
fn net_gain_relations() {
    let (t, m, uu) = (T0, SODIUM_23_MASS, u());
    assert_eq!(
        net_gain_nonequilibrium(&Equilibrium { alpha: 0.0 }, t, m, uu).unwrap(),
        0.0
    );
    for alpha in [-0.3, -1.0, -2.5] {
        let net = net_gain_nonequilibrium(&Equilibrium { alpha }, t, m, uu).unwrap();
        let gml = gain_minus_loss_rate(bath(alpha), A_NA, m).unwrap();
        assert!((net / ((-alpha).exp() * gml) - 1.0).abs() < 1e-8);
        let fwd = forward_gain(&Equilibrium { alpha }, t, m, uu).unwrap();
        // forward - backward with backward = e^{-α} forward
        assert!((net / (fwd * (1.0 - (-alpha).exp())) - 1.0).abs() < 1e-8);
    }
    for curvature in [0.05, 0.3, 1.0] {
        let q = QuadraticF { curvature };
        assert!(net_gain_nonequilibrium(&q, t, m, uu).unwrap() > 0.0);
        // n ~ 1/ε at the origin: only the difference converges
        assert!(forward_gain(&q, t, m, uu).is_err());
    }
}

#[test]
fn convexity_matches_quadratic_formula_and_net_sign() {
    let q = QuadraticF { curvature: 0.4 };
    let omega: Vec<f64> = (1..=30).map(|i| 0.25 * i as f64).collect();
    let f: Vec<f64> = omega.iter().map(|&w| q.log_ratio(w)).collect();
    let report = convexity_gain_check(&f, &omega).unwrap();
    assert_eq!(report.verdict, GainVerdict::Gain);
    assert!(!report.pairs.is_empty());
    for p in &report.pairs {
        let expected = 2.0 * 0.4 * omega[p.i] * omega[p.j];
        assert!((p.margin - expected).abs() < 1e-12);
    }
    let e = Equilibrium { alpha: -0.4 };
    let f: Vec<f64> = omega.iter().map(|&w| e.log_ratio(w)).collect();
    let report = convexity_gain_check(&f, &omega).unwrap();
    assert_eq!(report.verdict, GainVerdict::Loss);
    for p in &report.pairs {
        assert!((p.margin + 0.4).abs() < 1e-12);
    }
    let net = net_gain_nonequilibrium(&e, T0, SODIUM_23_MASS, u()).unwrap();
    assert!(net < 0.0);

    // tabulated BE data through the generic path
    let grid: Vec<f64> = (1..=400).map(|i| 0.05 * i as f64).collect();
    let occ: Vec<f64> = grid.iter().map(|&x| e.occupation(x)).collect();
    let tab = Tabulated::new(grid.clone(), occ).unwrap();
    let f: Vec<f64> = grid.iter().map(|&w| tab.log_ratio(w)).collect();
    assert_eq!(
        convexity_gain_check(&f, &grid).unwrap().verdict,
        GainVerdict::Loss
    );
}

#[test]
fn rho_relaxes_to_stationary_value() {
    let l = lattice(2);
    let b = bath(-1.0);
    let model = CondensateModel::new(&l, b, A_NA, None).unwrap();
    let g0 = model.g0;
    assert!((g0 * l.box_length().powi(3) - 1.0).abs() < 1e-12);
    let target = g0 / (1.0 - (-1.0f64).exp());
    assert_eq!(stationary_rho(b, g0).unwrap(), target);
    let tau = 1.0 / -model.rho_slope();
    let times: Vec<f64> = (0..=50).map(|i| i as f64 * tau).collect();
    let run = model.integrate_rho(0.0, &times).unwrap();
    assert_eq!(run.status, RhoStatus::Converged);
    let last = run.samples.last().unwrap().1;
    assert!((last / target - 1.0).abs() < 1e-6);
    assert!(run.samples.windows(2).all(|w| w[1].1 >= w[0].1));

    // independent RK4 of the same affine ODE
    let (mut r, h) = (0.0, tau / 200.0);
    for _ in 0..400 {
        let f = |x: f64| model.rho_rhs(x);
        let k1 = f(r);
        let k2 = f(r + 0.5 * h * k1);
        let k3 = f(r + 0.5 * h * k2);
        let k4 = f(r + h * k3);
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    assert!((r / run.samples[2].1 - 1.0).abs() < 1e-10);

    let fixed = model.integrate_rho(target, &times).unwrap();
    assert!(fixed
        .samples
        .iter()
        .all(|&(_, x)| (x / target - 1.0).abs() < 1e-8));
}

#[test]
fn rho_grows_without_bound_at_zero_mu() {
    let l = lattice(2);
    let model = CondensateModel::new(&l, bath(0.0), A_NA, None).unwrap();
    assert_eq!(model.rho_slope(), 0.0);
    let horizon = 2e6 * model.g0 / (2.0 * model.gain_moment);
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * horizon / 100.0).collect();
    let run = model.integrate_rho(0.0, &times).unwrap();
    assert_eq!(run.status, RhoStatus::Unbounded);
    assert!(run.ceiling_time.is_some());
    assert!(run.samples.windows(2).all(|w| w[1].1 > w[0].1));
}

#[test]
fn phi_dynamics() {
    let l = lattice(2);
    let model = CondensateModel::new(&l, bath(-1.0), A_NA, None).unwrap();
    assert!(model.gain_minus_loss < 0.0);
    let horizon = 20.0 / -model.gain_minus_loss;
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * horizon / 200.0).collect();
    let zero = CondensateState {
        phi: Complex64::new(0.0, 0.0),
        rho_bar: model.g0,
    };
    let run = model.integrate_phi(zero, &times, true).unwrap();
    assert!(run
        .samples
        .iter()
        .all(|(_, p)| *p == Complex64::new(0.0, 0.0)));

    let s0 = CondensateState {
        phi: Complex64::new(3.0, -4.0),
        rho_bar: 2.0 * model.g0,
    };
    let run = model.integrate_phi(s0, &times, true).unwrap();
    let mods: Vec<f64> = run.samples.iter().map(|(_, p)| p.norm()).collect();
    assert!(mods.windows(2).all(|w| w[1] < w[0]));
    assert!(*mods.last().unwrap() < 1e-6 * 5.0);

    let run = model.integrate_phi(s0, &times, false).unwrap();
    assert!(run
        .samples
        .iter()
        .all(|(_, p)| (p.norm() - 5.0).abs() < 1e-10 * 5.0));
}
