//! Many-body states, correlators and the bound against full product-space operators.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{ed_geometry, ProductSpace};
use lattice_entanglement::bound::{
    entanglement_bound, momentum_density, MomentumSpec, DEFAULT_TAU, K_HAT,
};
use lattice_entanglement::fock::FockBasis;
use lattice_entanglement::hubbard::{thermal_one_body_dm, BoseHubbardParams};
use lattice_entanglement::states::{
    build_symmetric_state, build_two_mode_psi, data_hiding_success, one_body_dm,
    sample_separable_ssr_state, Site, StateVector, TWO_SITE_POSITIONS,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const POSITIONS: [Site; 3] = [[0, 0, 0], [1, 0, 0], [1, 1, 0]];

#[test]
fn symmetric_state_correlators_from_ladder_operators() {
    for (l, n) in [(2, 1), (2, 4), (3, 2), (3, 3)] {
        let psi = build_symmetric_state(l, n).unwrap();
        let space = ProductSpace::new(l, n);
        let v = space.embed(&psi);
        let g = one_body_dm(&psi, &POSITIONS[..l]).unwrap();
        for i in 0..l {
            for j in 0..l {
                let brute = space.correlator(&v, i, j);
                assert!((brute - Complex64::new(n as f64 / l as f64, 0.0)).norm() < 1e-12);
                assert!((g.matrix[(i, j)] - brute).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn two_mode_off_diagonal_from_ladder_operators() {
    for n in 1..=6 {
        let psi = build_two_mode_psi(n).unwrap();
        let space = ProductSpace::new(2, n);
        let v = space.embed(&psi);
        let closed: f64 = (0..n)
            .map(|m| ((m + 1) as f64).sqrt() * ((n - m) as f64).sqrt())
            .sum::<f64>()
            / (n + 1) as f64;
        let g = one_body_dm(&psi, &TWO_SITE_POSITIONS).unwrap();
        assert!((space.correlator(&v, 0, 1).re - closed).abs() < 1e-12);
        assert!((g.matrix[(0, 1)].re - closed).abs() < 1e-12);
    }
    let e = entanglement_bound(
        &one_body_dm(&build_two_mode_psi(2).unwrap(), &TWO_SITE_POSITIONS).unwrap(),
        &MomentumSpec::far_field([PI, 0.0]),
    )
    .unwrap()
    .e_of_k;
    assert!((e - 4.0 * 2f64.sqrt() / 3.0).abs() < 1e-12);
}

#[test]
fn data_hiding_closed_forms() {
    let p2 = data_hiding_success(&build_symmetric_state(2, 2).unwrap()).unwrap();
    assert!((p2 - 0.5 * (0.5f64.sqrt() + 0.5).powi(2)).abs() < 1e-12);
    let p1 = data_hiding_success(&build_symmetric_state(2, 1).unwrap()).unwrap();
    assert!((p1 - 0.5).abs() < 1e-12);
}

#[test]
fn hot_gibbs_state_approaches_uniform_sector_average() {
    // average of <s| b_i^dag b_j |s> over every Fock state with N = 3 on 3 sites
    let space = ProductSpace::new(3, 3);
    let mut avg = nalgebra::DMatrix::<f64>::zeros(3, 3);
    let mut count = 0.0;
    for idx in 0..space.dim() {
        let occ: Vec<usize> = (0..3).map(|s| (idx / 4usize.pow(s)) % 4).collect();
        if occ.iter().sum::<usize>() != 3 {
            continue;
        }
        let mut v = nalgebra::DVector::zeros(space.dim());
        v[idx] = Complex64::new(1.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                avg[(i, j)] += space.correlator(&v, i, j).re;
            }
        }
        count += 1.0;
    }
    avg /= count;
    let p = BoseHubbardParams::new(1.0, 2.0, 3, ed_geometry(3)).unwrap();
    let g = thermal_one_body_dm(&p, 1e5).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!(
                (g.matrix[(i, j)].re - avg[(i, j)]).abs() < 1e-3,
                "({i},{j})"
            );
        }
    }
    assert!((avg[(0, 0)] - 1.0).abs() < 1e-12 && avg[(0, 1)].abs() < 1e-12);
}

#[test]
fn staggered_pair_cancels_in_far_field() {
    let psi = build_symmetric_state(2, 2).unwrap();
    let g = one_body_dm(&psi, &[[0, 0, 0], [1, 0, 0]]).unwrap();
    let d = momentum_density(&g, &MomentumSpec::far_field([PI, 0.0])).unwrap();
    assert!(d.abs() < 1e-12);
}

fn random_state(l: usize, n: usize, seed: u64) -> StateVector {
    let basis = Arc::new(FockBasis::fixed(l, n).unwrap());
    StateVector::random(basis, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bound_matches_full_space_for_random_states(seed in any::<u64>(), kx in -PI..PI, ky in -PI..PI) {
        let psi = random_state(3, 2, seed);
        let space = ProductSpace::new(3, 2);
        let v = space.embed(&psi);
        let g = one_body_dm(&psi, &POSITIONS).unwrap();
        let spec = MomentumSpec::new([kx, ky], DEFAULT_TAU).unwrap();
        let lib = momentum_density(&g, &spec).unwrap();
        let brute = space.momentum_expectation(&v, &POSITIONS, [kx, ky], DEFAULT_TAU);
        prop_assert!((lib - brute.re).abs() < 1e-10);
    }

    #[test]
    fn bound_ignores_global_phase(seed in any::<u64>(), phase in 0.0..(2.0 * PI), kx in -PI..PI) {
        let psi = random_state(3, 3, seed);
        let spec = MomentumSpec::new([kx, 0.4], DEFAULT_TAU).unwrap();
        let a = entanglement_bound(&one_body_dm(&psi, &POSITIONS).unwrap(), &spec).unwrap();
        let b = entanglement_bound(&one_body_dm(&psi.with_global_phase(phase), &POSITIONS).unwrap(), &spec).unwrap();
        prop_assert!((a.witness_expectation - b.witness_expectation).abs() < 1e-12);
    }

    #[test]
    fn bound_ignores_site_relabeling(seed in any::<u64>(), perm_idx in 0usize..6, kx in -PI..PI, ky in -PI..PI) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[perm_idx];
        let g = one_body_dm(&random_state(3, 2, seed), &POSITIONS).unwrap();
        let relabeled = g.permuted(&perm);
        let spec = MomentumSpec::new([kx, ky], DEFAULT_TAU).unwrap();
        let a = entanglement_bound(&g, &spec).unwrap();
        let b = entanglement_bound(&relabeled, &spec).unwrap();
        prop_assert!((a.witness_expectation - b.witness_expectation).abs() < 1e-10);
    }

    #[test]
    fn separable_samples_never_certify_entanglement(seed in any::<u64>(), kx in -PI..PI, ky in -PI..PI) {
        let rho = sample_separable_ssr_state(3, 2, 3, seed).unwrap();
        let g = one_body_dm(&rho, &POSITIONS).unwrap();
        for k in [[kx, ky], K_HAT] {
            let w = entanglement_bound(&g, &MomentumSpec::new(k, DEFAULT_TAU).unwrap()).unwrap();
            prop_assert!(w.witness_expectation >= -1e-9);
            prop_assert!(w.e_of_k == 0.0);
        }
    }
}
