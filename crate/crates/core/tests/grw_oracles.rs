use entropic_time::grw::{
    decay_linkage, ensemble_vs_master, gallis_fleming_rhs, hit, hit_average_factor, hit_averaged,
    localization_density, qmsl_rhs, random_hit, run_trajectory, Grid, GridEvolution, GridWavefunction,
    HittingParams, MasterEquation, PositionDensityMatrix,
};
use entropic_time::linalg::{ComplexMatrix, ComplexVector, C64};
use entropic_time::random::{seeded_rng, stream_rng};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Exp};

fn cat_setup() -> (Grid, GridWavefunction, HittingParams) {
    let g = Grid::new(-10.0, 10.0, 81).unwrap();
    let psi = GridWavefunction::cat(g, &[-5.0, 5.0], 0.5).unwrap();
    (g, psi, HittingParams::new(1.0, 4.0).unwrap())
}

#[test]
fn narrow_hits_follow_the_born_rule() {
    let g = Grid::new(-6.0, 6.0, 241).unwrap();
    let psi = GridWavefunction::cat(g, &[-1.5, 2.0], 0.6).unwrap();
    let alpha = 100.0 / (g.dx() * g.dx());
    let p = localization_density(&psi, alpha).unwrap().weights(g.dx());
    let born = psi.probabilities();
    let tv: f64 = 0.5 * p.iter().zip(&born).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv <= 1e-3, "{tv:e}");
}

#[test]
fn hit_at_gaussian_centre_narrows_by_product_rule() {
    let g = Grid::new(-12.0, 12.0, 2401).unwrap();
    let sigma = 1.2;
    let alpha = 2.5;
    let psi = GridWavefunction::gaussian(g, 0.0, sigma, 0.0).unwrap();
    assert!((psi.position_variance() - sigma * sigma).abs() < 1e-9, "{}", psi.position_variance());
    let out = hit(&psi, 0.0, alpha).unwrap();
    let expected = 1.0 / (1.0 / (sigma * sigma) + alpha);
    assert!((out.collapsed.position_variance() - expected).abs() < 1e-9);
    assert!((out.collapsed.norm_sqr() - 1.0).abs() < 1e-9);
    let l2: f64 = out.localized.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dx();
    assert!((l2 - out.probability).abs() < 1e-15);
}

#[test]
fn hit_density_is_normalized_over_centres() {
    let (g, psi, params) = cat_setup();
    let d = localization_density(&psi, params.alpha).unwrap();
    let total: f64 = d.density.iter().sum::<f64>() * g.dx();
    assert!((total - 1.0).abs() < 1e-12);
    for (k, x) in g.points().iter().enumerate().step_by(7) {
        let out = hit(&psi, *x, params.alpha).unwrap();
        assert!((out.probability - d.density[k]).abs() < 1e-12);
    }
}

#[test]
fn single_hit_trajectory_matches_direct_hit() {
    let (g, psi, params) = cat_setup();
    let evo = GridEvolution::new(None).unwrap();
    let mut probe = seeded_rng(17);
    let clock = Exp::new(params.rate).unwrap();
    let first: f64 = clock.sample(&mut probe);
    let (center, out) = random_hit(&psi, params.alpha, &mut probe).unwrap();
    let second = first + clock.sample(&mut probe);
    let t = 0.5 * (first + second);
    let traj = run_trajectory(&psi, params, &evo, &[t], &mut seeded_rng(17)).unwrap();
    assert_eq!(traj.hits.len(), 1);
    assert_eq!(traj.hits[0].center, center);
    let expected = hit(&psi, center, params.alpha).unwrap().collapsed;
    let got = &traj.samples[0].1;
    let diff = got
        .values()
        .iter()
        .zip(expected.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-12);
    assert!(out.collapsed.values() == expected.values());
    assert_eq!(g.len(), got.values().len());
}

/// Upper 1% point of χ²_k by the Wilson–Hilferty approximation.
fn chi2_critical_1pct(k: f64) -> f64 {
    let z = 2.326_347_874;
    let h = 2.0 / (9.0 * k);
    k * (1.0 - h + z * h.sqrt()).powi(3)
}

#[test]
fn first_hit_centres_follow_the_hit_density() {
    let g = Grid::new(-4.0, 4.0, 41).unwrap();
    let psi = GridWavefunction::cat(g, &[-1.5, 1.0], 0.7).unwrap();
    let params = HittingParams::new(2.0, 3.0).unwrap();
    let evo = GridEvolution::new(None).unwrap();
    let n = 10_000;
    let mut counts = vec![0usize; g.len()];
    for k in 0..n {
        let mut rng = stream_rng(2024, k);
        let traj = run_trajectory(&psi, params, &evo, &[50.0], &mut rng).unwrap();
        counts[g.nearest(traj.hits[0].center).unwrap()] += 1;
    }
    let p = localization_density(&psi, params.alpha).unwrap().weights(g.dx());
    // Merge neighbouring cells until each expects at least 5 counts.
    let (mut chi2, mut bins) = (0.0, 0usize);
    let (mut obs, mut exp) = (0.0, 0.0);
    for (c, q) in counts.iter().zip(&p) {
        obs += *c as f64;
        exp += q * n as f64;
        if exp >= 5.0 {
            chi2 += (obs - exp).powi(2) / exp;
            bins += 1;
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 {
        chi2 += (obs - exp).powi(2) / exp.max(1e-12);
        bins += 1;
    }
    let dof = (bins - 1) as f64;
    assert!(chi2 < chi2_critical_1pct(dof), "χ² = {chi2} with {dof} dof");
}

#[test]
fn qmsl_without_hamiltonian_matches_elementwise_exponential() {
    let g = Grid::new(-3.0, 3.0, 25).unwrap();
    let psi = GridWavefunction::cat(g, &[-1.0, 1.2], 0.4).unwrap();
    let rho0 = PositionDensityMatrix::from_wavefunction(&psi);
    let params = HittingParams::new(1.3, 2.0).unwrap();
    let eq = MasterEquation::qmsl(&g, None, params);
    let t = 2.0;
    let rk = eq.integrate(rho0.matrix(), &[t], None).unwrap().remove(0);
    let pts = g.points();
    let mut worst: f64 = 0.0;
    for i in 0..g.len() {
        for j in 0..g.len() {
            let s = pts[i] - pts[j];
            let factor = (-params.rate * (1.0 - (-params.alpha * s * s / 4.0).exp()) * t).exp();
            worst = worst.max((rk[(i, j)] - rho0.matrix()[(i, j)] * factor).norm());
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn gallis_fleming_special_cases() {
    let g = Grid::new(-3.0, 3.0, 25).unwrap();
    let psi = GridWavefunction::gaussian(g, 0.3, 0.8, 0.9).unwrap();
    let rho = PositionDensityMatrix::from_wavefunction(&psi);
    let h = g.free_hamiltonian();
    let params = HittingParams::new(0.7, 1.9).unwrap();
    let (l, a) = (params.rate, params.alpha);
    let gf = gallis_fleming_rhs(&rho, Some(&h), |s| l * (1.0 - (-a * s * s / 4.0).exp())).unwrap();
    let qm = qmsl_rhs(&rho, Some(&h), params);
    assert_eq!(gf.as_slice(), qm.as_slice());

    let lvn = gallis_fleming_rhs(&rho, Some(&h), |_| 0.0).unwrap();
    let direct = h.commutator(rho.matrix()).scale(C64::new(0.0, -1.0));
    assert_eq!(lvn.as_slice(), direct.as_slice());

    let c = 0.6;
    let eq = MasterEquation::gallis_fleming(&g, None, |s| c * s * s).unwrap();
    let t = 1.5;
    let rk = eq.integrate(rho.matrix(), &[t], None).unwrap().remove(0);
    let pts = g.points();
    for i in 0..g.len() {
        for j in 0..g.len() {
            let s = pts[i] - pts[j];
            let expected = rho.matrix()[(i, j)] * (-c * s * s * t).exp();
            assert!((rk[(i, j)] - expected).norm() <= 1e-6);
        }
    }
}

#[test]
fn master_equation_preserves_trace_and_hermiticity() {
    let g = Grid::new(-3.0, 3.0, 21).unwrap();
    let psi = GridWavefunction::cat(g, &[-1.0, 1.0], 0.5).unwrap();
    let rho0 = PositionDensityMatrix::from_wavefunction(&psi);
    let eq = MasterEquation::qmsl(&g, Some(&g.free_hamiltonian()), HittingParams::new(1.0, 2.0).unwrap());
    let r = eq.rhs(rho0.matrix());
    assert!(r.trace().norm() < 1e-10);
    let out = eq.integrate(rho0.matrix(), &[0.25, 0.5], None).unwrap();
    for m in &out {
        let rho = PositionDensityMatrix::new(g, m.clone()).unwrap();
        assert!((rho.trace() - 1.0).abs() <= 1e-8);
        assert!(rho.min_eigenvalue().unwrap() >= -1e-8);
    }
}

#[test]
fn halving_rk4_step_converges() {
    let g = Grid::new(-3.0, 3.0, 17).unwrap();
    let psi = GridWavefunction::gaussian(g, 0.0, 0.6, 1.0).unwrap();
    let rho0 = PositionDensityMatrix::from_wavefunction(&psi);
    let eq = MasterEquation::qmsl(&g, Some(&g.free_hamiltonian()), HittingParams::new(1.0, 2.0).unwrap());
    let t = [0.2];
    let coarse = eq.integrate(rho0.matrix(), &t, Some(0.02)).unwrap().remove(0);
    let fine = eq.integrate(rho0.matrix(), &t, Some(0.01)).unwrap().remove(0);
    let finest = eq.integrate(rho0.matrix(), &t, Some(0.005)).unwrap().remove(0);
    let ratio = coarse.max_abs_diff(&fine) / fine.max_abs_diff(&finest);
    assert!((12.0..20.0).contains(&ratio), "{ratio}");
}

#[test]
fn without_hits_both_methods_are_unitary() {
    let g = Grid::new(-3.0, 3.0, 19).unwrap();
    let psi = GridWavefunction::gaussian(g, -0.5, 0.6, 1.5).unwrap();
    let h = g.free_hamiltonian();
    let params = HittingParams::new(1e-14, 1.0).unwrap();
    let times = [0.0, 0.1, 0.2];
    let report = ensemble_vs_master(&psi, params, Some(&h), &times, 16, 1, None).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let u = entropic_time::linalg::matrix_exponential_skew(&h, t).unwrap();
        let v = u.matvec(&ComplexVector::new(psi.values().to_vec()));
        let exact = v.outer(&v);
        assert!(report.monte_carlo[k].max_abs_diff(&exact) <= 1e-9);
        assert!(report.master[k].max_abs_diff(&exact) <= 1e-6);
    }
}

#[test]
fn ensemble_coherence_tracks_master_equation() {
    let (g, psi, params) = cat_setup();
    let times: Vec<f64> = (0..=15).map(|k| 0.2 * k as f64).collect();
    let n = 2000;
    let report = ensemble_vs_master(&psi, params, None, &times, n, 7, None).unwrap();
    let (i, j) = (g.nearest(5.0).unwrap(), g.nearest(-5.0).unwrap());
    let tol = 4.0 / (n as f64).sqrt();
    for (t, mc, me) in report.normalized_coherence(i, j) {
        assert!((mc - me).abs() <= tol, "t={t}: {mc} vs {me}");
        assert!((me - (-t).exp()).abs() < 1e-6);
    }
    // Populations: untouched by the master equation, conserved in mean by hits.
    let sigma_scale = 3.0 / (n as f64).sqrt();
    for (mc, me) in report.monte_carlo.iter().zip(&report.master) {
        for k in (0..g.len()).step_by(4) {
            assert!((me[(k, k)] - report.master[0][(k, k)]).norm() <= 1e-6);
            let p0 = report.master[0][(k, k)].re;
            assert!((mc[(k, k)].re - p0).abs() <= sigma_scale * p0.max(1e-3) * 10.0 + 1e-6);
        }
    }
}

#[test]
fn ensemble_is_independent_of_thread_count() {
    let (_, psi, params) = cat_setup();
    let times = [0.0, 0.5, 1.0];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble_vs_master(&psi, params, None, &times, 300, 3, None).unwrap())
    };
    let a = run(1);
    let b = run(4);
    for (x, y) in a.monte_carlo.iter().zip(&b.monte_carlo) {
        assert_eq!(x.as_slice(), y.as_slice());
    }
}

#[test]
fn one_hit_average_is_the_alpha_over_eight_kernel() {
    let g = Grid::new(-10.0, 10.0, 201).unwrap();
    let psi = GridWavefunction::cat(g, &[-1.0, 1.0], 0.8).unwrap();
    let rho = PositionDensityMatrix::from_wavefunction(&psi);
    let alpha = 1.5;
    let avg = hit_averaged(&rho, &psi, alpha).unwrap();
    // Brute force: weight every centre's collapsed projector by its probability.
    let n = g.len();
    let mut brute = ComplexMatrix::zeros(n, n);
    let dens = localization_density(&psi, alpha).unwrap();
    for (k, x) in g.points().iter().enumerate() {
        let out = hit(&psi, *x, alpha).unwrap();
        let v = ComplexVector::new(out.collapsed.values().to_vec());
        brute = brute.add(&v.outer(&v).scale(C64::new(dens.density[k] * g.dx(), 0.0)));
    }
    assert!(avg.max_abs_diff(&brute) < 1e-10);
    let pts = g.points();
    for i in 60..140 {
        for j in 60..140 {
            let expected = rho.matrix()[(i, j)] * hit_average_factor(alpha, pts[i] - pts[j]);
            assert!((avg[(i, j)] - expected).norm() < 1e-6);
        }
    }
}

#[test]
fn decay_linkage_ratio_is_root_e_squared_minus_one() {
    for tau in [0.3, 1.0, 7.0] {
        let l = decay_linkage(tau).unwrap();
        let e = 1f64.exp();
        assert!((l.ratio() - (e * e - 1.0).sqrt()).abs() < 1e-9);
    }
}

#[test]
#[ignore = "thermal envelope reaches 1/e at 2.53τ, QMSL far coherence at τ; the 25% match does not hold"]
fn decay_linkage_within_a_quarter() {
    let l = decay_linkage(1.0).unwrap();
    assert!((l.ratio() - 1.0).abs() <= 0.25, "ratio {}", l.ratio());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn collapsed_states_are_normalized(seed in any::<u64>(), alpha in 0.1f64..50.0) {
        let g = Grid::new(-5.0, 5.0, 61).unwrap();
        let mut rng = seeded_rng(seed);
        let c1: f64 = rng.random_range(-3.0..3.0);
        let c2: f64 = rng.random_range(-3.0..3.0);
        let psi = GridWavefunction::cat(g, &[c1, c2], rng.random_range(0.3..1.5)).unwrap();
        let (_, out) = random_hit(&psi, alpha, &mut rng).unwrap();
        prop_assert!((out.collapsed.norm_sqr() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn qmsl_rhs_is_traceless_and_hermitian(seed in any::<u64>()) {
        let g = Grid::new(-2.0, 2.0, 15).unwrap();
        let mut rng = seeded_rng(seed);
        let psi = GridWavefunction::gaussian(g, rng.random_range(-1.0..1.0), 0.5, rng.random_range(-2.0..2.0)).unwrap();
        let rho = PositionDensityMatrix::from_wavefunction(&psi);
        let r = qmsl_rhs(&rho, Some(&g.free_hamiltonian()), HittingParams::new(1.0, 3.0).unwrap());
        prop_assert!(r.trace().norm() <= 1e-10 * r.max_abs().max(1.0));
        prop_assert!(r.hermitian_deviation() <= 1e-12 * r.max_abs().max(1.0));
    }
}
