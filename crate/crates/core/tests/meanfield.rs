use qkinetic_core::kmc::{ChannelTable, ModeLattice};
use qkinetic_core::meanfield::{
    be_field, be_occupations, fit_be, integrate_uu, uu_rhs, BathSpec, OccupationField, ReducedBath,
    UuOptions,
};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

fn cube(z: u32) -> (ModeLattice, ChannelTable) {
    let l = ModeLattice::cube(1e-5, 3.8e-26, z).unwrap();
    let t = ChannelTable::new(&l).unwrap();
    (l, t)
}

#[test]
fn be_field_is_a_fixed_point_of_the_rhs() {
    let (l, t) = cube(1);
    let mut rng = SmallRng::seed_from_u64(11);
    for _ in 0..20 {
        let reduced = ReducedBath {
            beta: rng.random_range(0.3..3.0),
            mu: rng.random_range(-3.0..-0.5),
        };
        let f = be_field(&l, reduced.to_bath(&l)).unwrap();
        let r = uu_rhs(&f, &t, 1.0);
        let worst = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{reduced:?}: {worst:e}");
    }
}

#[test]
fn rhs_conserves_particles_and_energy() {
    let (l, t) = cube(1);
    let mut rng = SmallRng::seed_from_u64(5);
    for _ in 0..10 {
        let n: Vec<f64> = (0..l.len()).map(|_| rng.random_range(0.0..4.0)).collect();
        let r = uu_rhs(&OccupationField::new(n).unwrap(), &t, 2.0);
        let scale: f64 = r.iter().map(|x| x.abs()).sum();
        let dn: f64 = r.iter().sum();
        let de: f64 = r.iter().zip(l.energies()).map(|(x, &e)| x * e as f64).sum();
        assert!(dn.abs() < 1e-12 * scale);
        assert!(de.abs() < 1e-12 * scale);
    }
}

#[test]
fn empty_mode_is_not_driven_negative() {
    let (l, t) = cube(1);
    let mut rng = SmallRng::seed_from_u64(8);
    let mut n: Vec<f64> = (0..l.len()).map(|_| rng.random_range(0.0..3.0)).collect();
    n[4] = 0.0;
    n[17] = 0.0;
    let r = uu_rhs(&OccupationField::new(n).unwrap(), &t, 1.0);
    assert!(r[4] >= 0.0 && r[17] >= 0.0);
}

#[test]
fn be_initial_condition_stays_put() {
    let (l, t) = cube(1);
    let f0 = be_field(
        &l,
        ReducedBath {
            beta: 0.8,
            mu: -1.0,
        }
        .to_bath(&l),
    )
    .unwrap();
    let times: Vec<f64> = (0..=4).map(|i| i as f64).collect();
    let run = integrate_uu(&f0, &l, &t, 1.0, 4.0, &times, UuOptions::default()).unwrap();
    for s in &run.samples {
        for (a, b) in s.field.iter().zip(f0.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn relaxes_to_the_matching_bose_einstein_field() {
    let (l, t) = cube(1);
    let mut rng = SmallRng::seed_from_u64(21);
    // Perturbed equilibrium, symmetric under z → -z so that P = 0 and the
    // limit has no drift.
    let base = be_occupations(l.energies(), 0.6, -1.0);
    let mut n0 = base.clone();
    for i in 0..l.len() {
        let z = l.mode(i);
        let j = l.index_of([-z[0], -z[1], -z[2]]).unwrap();
        if j >= i {
            let f = rng.random_range(0.5..1.5);
            n0[i] = base[i] * f;
            n0[j] = base[j] * f;
        }
    }
    let f0 = OccupationField::new(n0).unwrap();
    let (np, ne) = (f0.particles(), f0.energy(&l));
    let fit = fit_be(l.energies(), np, ne).unwrap();
    let target = be_occupations(l.energies(), fit.beta, fit.mu);
    let t_end = 60.0;
    let run = integrate_uu(&f0, &l, &t, 1.0, t_end, &[0.0, t_end], UuOptions::default()).unwrap();
    assert!(run.particle_drift < 1e-6 && run.energy_drift < 1e-6);
    let last = run.last();
    for (a, b) in last.field.iter().zip(&target) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn divergent_bath_rejected() {
    let (l, _) = cube(1);
    let eps0 = l.energy_quantum();
    assert!(be_field(&l, BathSpec::new(1e-6, 0.5 * eps0).unwrap()).is_err());
    // T → 0 with μ below every level empties the lattice
    let f = be_field(&l, BathSpec::new(1e-15, -eps0).unwrap()).unwrap();
    assert!(f.values().iter().all(|&x| x < 1e-100));
}
