use entropic_time::chain::CollapseMode;
use entropic_time::dem::{DemSystem, SpectralProfile};
use entropic_time::energetics::{
    apply_hamiltonian, clausius_identity, conservation_audit, coupling_elements, dem_hamiltonian,
    energy_decomposition,
};
use entropic_time::linalg::{ComplexMatrix, ComplexVector, C64};
use entropic_time::random::{random_hermitian, random_probabilities, random_unit_vector, seeded_rng};
use entropic_time::relstate::{decompose, BipartiteHamiltonian, DiagonalInteraction};
use entropic_time::state::{Bipartition, PureState};
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn random_hamiltonian(ns: usize, ne: usize, seed: u64) -> BipartiteHamiltonian {
    let mut rng = seeded_rng(seed);
    let omega = (0..ns * ne).map(|_| rng.random_range(-2.0..2.0)).collect();
    BipartiteHamiltonian::new(
        random_hermitian(ns, &mut rng),
        random_hermitian(ne, &mut rng),
        DiagonalInteraction::new(ns, ne, omega).unwrap(),
    )
    .unwrap()
}

/// `|φ_i⟩ ⊗ |R_i⟩` in the full space.
fn product_vector(i: usize, r: &ComplexVector, ns: usize) -> ComplexVector {
    let ne = r.dim();
    let mut v = vec![C64::new(0.0, 0.0); ns * ne];
    v[i * ne..(i + 1) * ne].copy_from_slice(r.as_slice());
    ComplexVector::new(v)
}

#[test]
fn coupling_blocks_match_direct_inner_products() {
    let (ns, ne) = (3, 5);
    let h = random_hamiltonian(ns, ne, 11);
    let psi = random_unit_vector(ns * ne, &mut seeded_rng(12));
    let s = PureState::bipartite(psi, ns, ne).unwrap();
    let d = decompose(&s, Bipartition::FIRST).unwrap();
    let c = coupling_elements(&h, &d).unwrap();
    let parts = [
        (&c.system, h.system_part().unwrap()),
        (&c.environment, h.environment_part().unwrap()),
        (&c.interaction, h.interaction.to_matrix()),
    ];
    let vecs: Vec<ComplexVector> = c
        .support
        .iter()
        .map(|&i| product_vector(i, d.relative_state(i).unwrap(), ns))
        .collect();
    for (block, full) in parts {
        for (p, u) in vecs.iter().enumerate() {
            for (q, v) in vecs.iter().enumerate() {
                assert!((block[(p, q)] - full.expectation(u, v)).norm() < 1e-10);
            }
        }
    }
    for p in 0..ns {
        for q in 0..ns {
            if p != q {
                assert_eq!(c.environment[(p, q)], C64::new(0.0, 0.0));
                assert_eq!(c.interaction[(p, q)], C64::new(0.0, 0.0));
            }
        }
    }
    // The interaction diagonal is the |a_ij|²/|a_i|²-weighted mean of ω_ij.
    let a = s.amplitude_matrix(Bipartition::FIRST).unwrap();
    for (p, &i) in c.support.iter().enumerate() {
        let w: f64 = (0..ne).map(|j| a[(i, j)].norm_sqr()).sum();
        let mean: f64 = (0..ne).map(|j| a[(i, j)].norm_sqr() / w * h.interaction.frequency(i, j)).sum();
        assert!((c.interaction[(p, p)].re - mean).abs() < 1e-12);
    }
}

#[test]
fn orthogonal_relative_states_decouple_branches() {
    let (ns, ne) = (2, 6);
    let h = random_hamiltonian(ns, ne, 5);
    let mut v = vec![C64::new(0.0, 0.0); ns * ne];
    // Branch 0 lives on env levels 0..3, branch 1 on 3..6.
    for j in 0..3 {
        v[j] = C64::new(0.3, 0.1 * j as f64);
        v[ne + 3 + j] = C64::new(0.2, -0.2);
    }
    let v = ComplexVector::new(v);
    let v = v.scale(C64::new(1.0 / v.norm(), 0.0));
    let s = PureState::bipartite(v, ns, ne).unwrap();
    let d = decompose(&s, Bipartition::FIRST).unwrap();
    let c = coupling_elements(&h, &d).unwrap();
    let total = c.total();
    assert!(total[(0, 1)].norm() < 1e-15 && total[(1, 0)].norm() < 1e-15);
    let e = energy_decomposition(&s, &h).unwrap();
    assert!(e.gram_offdiag_max < 1e-15);
    assert!(e.identity_residual() < 1e-12);
    assert_eq!(e.identity_holds(1e-3, 1e-9), Some(true));
}

#[test]
fn overlapping_branches_are_flagged_not_asserted() {
    let h = random_hamiltonian(2, 4, 8);
    let s = PureState::bipartite(random_unit_vector(8, &mut seeded_rng(9)), 2, 4).unwrap();
    let e = energy_decomposition(&s, &h).unwrap();
    assert!(e.gram_offdiag_max > 1e-3);
    assert_eq!(e.identity_holds(1e-3, 1e-9), None);
}

#[test]
fn total_energy_two_ways() {
    let h = random_hamiltonian(3, 4, 21);
    let s = PureState::bipartite(random_unit_vector(12, &mut seeded_rng(22)), 3, 4).unwrap();
    let full = h.full().unwrap();
    let direct = full.expectation(s.vector(), s.vector()).re;
    let e = energy_decomposition(&s, &h).unwrap();
    assert!((e.total - direct).abs() < 1e-12);
    let hv = apply_hamiltonian(&h, s.vector().as_slice()).unwrap();
    let mv = full.matvec(s.vector());
    for (a, b) in hv.iter().zip(mv.as_slice()) {
        assert!((a - b).norm() < 1e-12);
    }
}

fn audited_system(center: f64, weights: [f64; 2], bare_system: Vec<f64>) -> DemSystem {
    let a = weights.iter().map(|w| C64::new(w.sqrt(), 0.0)).collect();
    let j = 256;
    let mut rng = seeded_rng(3);
    let bare_env = (0..j).map(|_| rng.random_range(0.0..1.0)).collect();
    DemSystem::from_profile(a, &SpectralProfile::step(center, 1.0).unwrap(), j)
        .unwrap()
        .with_bare_frequencies(bare_system, bare_env)
        .unwrap()
}

fn audit_times() -> Vec<f64> {
    (0..=40).map(|k| k as f64 * 0.1 * 2.0 * PI).collect()
}

#[test]
fn subjective_collapse_conserves_energy() {
    let sys = audited_system(2.0, [0.3, 0.7], vec![0.4, 1.3]);
    let audit = conservation_audit(&sys, &audit_times(), 4.0 * PI, CollapseMode::Subjective, 5).unwrap();
    assert!(audit.max_drift() <= 1e-9);
    assert!(audit.rows.iter().any(|r| r.branch.is_some()));
    assert!(audit.rows.iter().any(|r| r.branch.is_none()));
}

#[test]
fn decohered_dem_state_satisfies_branch_identity() {
    let sys = audited_system(2.0, [0.3, 0.7], vec![0.4, 1.3]);
    let h = dem_hamiltonian(&sys);
    let e = energy_decomposition(&sys.evolve_schrodinger(4.0 * PI), &h).unwrap();
    assert!(e.gram_offdiag_max < 1e-10);
    assert!(e.identity_residual() <= 1e-9);
}

#[test]
fn symmetric_branches_lose_no_energy() {
    let sys = audited_system(0.0, [0.5, 0.5], vec![0.8, 0.8]);
    let audit = conservation_audit(&sys, &audit_times(), 4.0 * PI, CollapseMode::Objective, 2).unwrap();
    for (_, jump) in audit.collapse.decomposition.jumps() {
        assert!(jump.abs() < 1e-12);
    }
    assert!(audit.max_drift() < 1e-12);
}

#[test]
fn objective_collapse_jumps_but_is_neutral_on_average() {
    let sys = audited_system(2.0, [0.3, 0.7], vec![0.4, 1.3]);
    let times = audit_times();
    let mut seen = [false; 2];
    for seed in 0..40 {
        let audit = conservation_audit(&sys, &times, 4.0 * PI, CollapseMode::Objective, seed).unwrap();
        let c = &audit.collapse;
        seen[c.outcome] = true;
        assert!(c.decomposition.jumps().iter().any(|(_, j)| j.abs() > 0.1));
        assert!(c.mean_jump().abs() <= 1e-10);
        let ek = c.decomposition.branch(c.outcome).unwrap().energy;
        let e0 = audit.rows[0].total;
        for r in &audit.rows {
            if r.branch.is_some() {
                assert!((r.total - ek).abs() < 1e-9);
                assert!((r.jump.unwrap() - (e0 - ek)).abs() < 1e-9);
            } else {
                assert!((r.total - e0).abs() < 1e-9);
            }
        }
        assert!(audit.max_drift() > 0.1);
    }
    assert!(seen[0] && seen[1]);
}

#[test]
fn clausius_pairs_by_hand() {
    let w = [0.1, 0.2, 0.3, 0.4];
    let t = 2.5;
    let pairs = clausius_identity(&w, t).unwrap();
    let e: Vec<f64> = w.iter().map(|p| -t * p.ln()).collect();
    let mean: f64 = w.iter().zip(&e).map(|(p, e)| p * e).sum();
    for (k, p) in pairs.iter().enumerate() {
        assert!((p.energy - e[k]).abs() < 1e-14);
        assert!((p.delta_e_over_t - (mean - e[k]) / t).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clausius_identity_is_exact(seed in any::<u64>(), n in 2usize..12, t in 0.05f64..20.0) {
        let w = random_probabilities(n, &mut seeded_rng(seed));
        prop_assume!(w.iter().all(|p| *p > 0.0));
        let pairs = clausius_identity(&w, t).unwrap();
        for p in &pairs {
            prop_assert!(p.residual() <= 1e-12 * p.delta_s.abs().max(1.0));
        }
        let mean: f64 = w.iter().zip(&pairs).map(|(w, p)| w * p.delta_s).sum();
        prop_assert!(mean.abs() <= 1e-12);
    }

    #[test]
    fn diagonal_system_hamiltonian_gives_neutral_mean_jump(seed in any::<u64>()) {
        let (ns, ne) = (3, 4);
        let mut rng = seeded_rng(seed);
        let bare: Vec<f64> = (0..ns).map(|_| rng.random_range(-1.0..1.0)).collect();
        let omega = (0..ns * ne).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h = BipartiteHamiltonian::new(
            ComplexMatrix::real_diagonal(&bare),
            random_hermitian(ne, &mut rng),
            DiagonalInteraction::new(ns, ne, omega).unwrap(),
        ).unwrap();
        let s = PureState::bipartite(random_unit_vector(ns * ne, &mut rng), ns, ne).unwrap();
        let e = energy_decomposition(&s, &h).unwrap();
        let mean: f64 = e.branches.iter().map(|b| b.weight * (e.total - b.energy)).sum();
        prop_assert!(mean.abs() <= 1e-10);
    }
}
