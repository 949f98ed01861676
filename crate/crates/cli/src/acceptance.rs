//! The fifteen acceptance criteria, each with its tolerance and runtime budget.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use entropic_time::chain::{
    born_joint_distribution, entropy_chain, information_chain, poset_check, run_epochs_with, CollapseMode,
    EpochProtocol, FactSet, MultipartiteState,
};
use entropic_time::dem::{discrete_envelope, discretization_error, DemSystem, SpectralProfile};
use entropic_time::energetics::{clausius_identity, conservation_audit};
use entropic_time::grw::{ensemble_vs_master, localization_density, Grid, GridWavefunction, HittingParams};
use entropic_time::linalg::{matrix_exponential_skew, ComplexMatrix, C64};
use entropic_time::random::{
    random_hermitian, random_probabilities, random_unit_vector, seeded_rng, stream_rng,
};
use entropic_time::relstate::{decompose, drho_dt_richardson, gram, BipartiteHamiltonian, DiagonalInteraction};
use entropic_time::state::{
    density_from_ensemble, density_from_pure, entanglement_entropy_pair, partial_trace, von_neumann_entropy,
    Bipartition, MixedEnsemble, PureState,
};
use entropic_time::thermo::{clausius_convergence, default_volume_step, BoxSpectrum};
use rand::Rng;

use crate::config::parse_config;

type Check = Result<(bool, String), String>;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub budget: Duration,
    check: fn() -> Check,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Verdict {
    pub fn over_budget(&self) -> bool {
        self.elapsed > self.budget
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {}: {} ({:.3} s, budget {} s{})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            if self.over_budget() { ", over budget" } else { "" }
        )
    }
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "pure-state zero entropy", budget: secs(1), check: pure_state_entropy },
        Criterion { id: 2, name: "positive semi-definiteness", budget: secs(1), check: positive_semidefinite },
        Criterion { id: 3, name: "bipartite entropy theorem", budget: secs(5), check: bipartite_theorem },
        Criterion { id: 4, name: "DEM closed form vs brute force", budget: secs(10), check: dem_brute_force },
        Criterion { id: 5, name: "sinc envelope", budget: secs(5), check: sinc_envelope },
        Criterion { id: 6, name: "thermal envelope", budget: secs(5), check: thermal_envelope },
        Criterion { id: 7, name: "drho/dt law second order", budget: secs(5), check: drho_law },
        Criterion { id: 8, name: "GRW Born-rule limit", budget: secs(1), check: born_limit },
        Criterion { id: 9, name: "GRW ensemble vs master equation", budget: secs(60), check: ensemble_vs_master_check },
        Criterion { id: 10, name: "energy conservation", budget: secs(5), check: energy_conservation },
        Criterion { id: 11, name: "Clausius identity", budget: secs(1), check: clausius_branches },
        Criterion { id: 12, name: "Gibbs to Clausius on a box spectrum", budget: secs(1), check: box_clausius },
        Criterion { id: 13, name: "multipartite chain monotonicity", budget: secs(5), check: chain_monotonicity },
        Criterion { id: 14, name: "subjective/objective indistinguishability", budget: secs(30), check: indistinguishability },
        Criterion { id: 15, name: "CLI determinism", budget: secs(5), check: cli_determinism },
    ]
}

pub fn run_criterion(c: &Criterion) -> Verdict {
    let start = Instant::now();
    let (passed, detail) = match (c.check)() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Verdict {
        id: c.id,
        name: c.name,
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: c.budget,
    }
}

pub fn run_all() -> Vec<Verdict> {
    criteria().iter().map(run_criterion).collect()
}

fn e<T>(r: entropic_time::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn pure_state_entropy() -> Check {
    let mut rng = seeded_rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(2..=16);
        let s = e(PureState::single(random_unit_vector(d, &mut rng)))?;
        worst = worst.max(e(von_neumann_entropy(&density_from_pure(&s)))?);
    }
    Ok((worst <= 1e-9, format!("max S = {worst:.3e} over 200 states")))
}

fn positive_semidefinite() -> Check {
    let mut rng = seeded_rng(2);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let d = rng.random_range(2..=8);
        let k = rng.random_range(1..=4);
        let states: Vec<PureState> = (0..k)
            .map(|_| e(PureState::single(random_unit_vector(d, &mut rng))))
            .collect::<Result<_, _>>()?;
        let mixed = e(density_from_ensemble(&e(MixedEnsemble::new(
            random_probabilities(k, &mut rng),
            states.clone(),
        ))?))?;
        let r = rng.random_range(2..=6);
        let bip = e(PureState::bipartite(random_unit_vector(d * r, &mut rng), d, r))?;
        let reduced = e(partial_trace(&density_from_pure(&bip), &[0]))?;
        for rho in [mixed, density_from_pure(&states[0]), reduced] {
            worst = worst.min(e(rho.min_eigenvalue())?);
        }
    }
    Ok((worst >= -1e-9, format!("min eigenvalue = {worst:.3e}")))
}

fn bipartite_theorem() -> Check {
    let mut rng = seeded_rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let l = rng.random_range(2..=8);
        let r = rng.random_range(2..=16);
        let s = e(PureState::bipartite(random_unit_vector(l * r, &mut rng), l, r))?;
        let (a, b) = e(entanglement_entropy_pair(&s, Bipartition::FIRST))?;
        worst = worst.max((a - b).abs());
    }
    Ok((worst <= 1e-8, format!("max |S_S - S_E| = {worst:.3e}")))
}

fn dem_brute_force() -> Check {
    let (ns, ne) = (2, 64);
    let mut rng = seeded_rng(4);
    let a = random_unit_vector(ns, &mut rng).into_inner();
    let b = random_unit_vector(ne, &mut rng).into_inner();
    let omega: Vec<f64> = (0..ns * ne).map(|_| rng.random_range(-3.0..3.0)).collect();
    let sys = e(DemSystem::new(a.clone(), b.clone(), e(DiagonalInteraction::new(ns, ne, omega))?))?;
    let h = sys.interaction().to_matrix();
    let psi0: Vec<C64> = a.iter().flat_map(|ai| b.iter().map(move |bj| ai * bj)).collect();
    let (mut state_err, mut gram_err): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let t = 0.37 * k as f64;
        let brute = e(matrix_exponential_skew(&h, t))?.matvec(&psi0.clone().into());
        let closed = sys.evolve_closed_form(t);
        state_err = state_err.max(closed.vector().max_abs_diff(&brute));
        let bs = e(PureState::bipartite(brute, ns, ne))?;
        let d = e(decompose(&bs, Bipartition::FIRST))?;
        let g = e(gram(&d).get(1, 0))?;
        let gc = e(sys.gram_closed_form(1, 0, t))?;
        // The relative states carry a free phase; a_0 a_1* g is invariant under it.
        let lhs = d.amplitudes()[0] * d.amplitudes()[1].conj() * g;
        let rhs = a[0] * a[1].conj() * gc;
        gram_err = gram_err.max((lhs - rhs).norm()).max((g.norm() - gc.norm()).abs());
    }
    Ok((
        state_err <= 1e-9 && gram_err <= 1e-10,
        format!("state {state_err:.3e}, Gram {gram_err:.3e}"),
    ))
}

fn sinc_envelope() -> Check {
    let (omega, omega0) = (4.0, 0.0);
    let profile = e(SpectralProfile::step(omega0, omega))?;
    let tau = 2.0 * PI / omega;
    let (f, w) = e(profile.discretize(4096))?;
    let n = 4000;
    let step = 4.0 * tau / n as f64;
    let mut worst: f64 = 0.0;
    let mut crossing = None;
    let mut prev = 1.0;
    for k in 0..=n {
        let t = step * k as f64;
        worst = worst.max(e(discretization_error(&profile, 4096, t))?);
        let g = discrete_envelope(&f, &w, t).re;
        if crossing.is_none() && prev > 0.0 && g <= 0.0 {
            crossing = Some(t - step * g / (g - prev));
        }
        prev = g;
    }
    let crossing = crossing.ok_or("no zero crossing found")?;
    let offset = (crossing - tau).abs();
    Ok((
        worst <= 1e-3 && offset <= step,
        format!("max error {worst:.3e}, first zero at {crossing:.6} vs tau {tau:.6}"),
    ))
}

fn thermal_envelope() -> Check {
    let tau = 1.0;
    let profile = e(SpectralProfile::thermal(tau))?;
    let (f, w) = e(profile.discretize(4096))?;
    let (mut modulus, mut phase): (f64, f64) = (0.0, 0.0);
    for k in 0..=1000 {
        let t = 5.0 * tau * k as f64 / 1000.0;
        let g = discrete_envelope(&f, &w, t);
        let x = t / tau;
        modulus = modulus.max((g.norm() - (1.0 + x * x).powf(-0.5)).abs());
        phase = phase.max((g.arg() - x.atan()).abs());
    }
    Ok((
        modulus <= 2e-3 && phase <= 2e-3,
        format!("modulus {modulus:.3e}, phase {phase:.3e} rad"),
    ))
}

fn drho_law() -> Check {
    let (ns, ne) = (3, 6);
    let mut rng = seeded_rng(44);
    let hs = random_hermitian(ns, &mut rng);
    let he = random_hermitian(ne, &mut rng);
    let omega: Vec<f64> = (0..ns * ne).map(|_| rng.random_range(-2.0..2.0)).collect();
    let h = e(BipartiteHamiltonian::new(hs, he, e(DiagonalInteraction::new(ns, ne, omega))?))?;
    let s = e(PureState::bipartite(random_unit_vector(ns * ne, &mut rng), ns, ne))?;
    let r = e(drho_dt_richardson(&h, &s, 0.7, 2e-3))?;
    Ok((
        (3.5..=4.5).contains(&r.ratio),
        format!(
            "Richardson ratio {:.3} (residuals {:.3e}, {:.3e})",
            r.ratio, r.coarse.residual, r.fine.residual
        ),
    ))
}

fn born_limit() -> Check {
    let g = e(Grid::new(-6.0, 6.0, 241))?;
    let psi = e(GridWavefunction::cat(g, &[-1.5, 2.0], 0.6))?;
    let alpha = 100.0 / (g.dx() * g.dx());
    let p = e(localization_density(&psi, alpha))?.weights(g.dx());
    let born = psi.probabilities();
    let tv = 0.5 * p.iter().zip(&born).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok((tv <= 1e-3, format!("total variation {tv:.3e}")))
}

fn ensemble_vs_master_check() -> Check {
    let g = e(Grid::new(-10.0, 10.0, 81))?;
    let psi = e(GridWavefunction::cat(g, &[-5.0, 5.0], 0.5))?;
    let params = e(HittingParams::new(1.0, 4.0))?;
    let times: Vec<f64> = (0..=15).map(|k| 0.2 * k as f64).collect();
    let n = 2000;
    let report = e(ensemble_vs_master(&psi, params, None, &times, n, 9, None))?;
    let (i, j) = (e(g.nearest(5.0))?, e(g.nearest(-5.0))?);
    let worst = report
        .normalized_coherence(i, j)
        .iter()
        .map(|(_, mc, me)| (mc - me).abs())
        .fold(0.0, f64::max);
    let tol = 4.0 / (n as f64).sqrt();
    Ok((worst <= tol, format!("max coherence gap {worst:.4} vs {tol:.4}")))
}

fn audit_system(center: f64, weights: [f64; 2], bare: [f64; 2]) -> Result<DemSystem, String> {
    let a = weights.iter().map(|w| C64::new(w.sqrt(), 0.0)).collect();
    let j = 256;
    let mut rng = seeded_rng(10);
    let bare_env = (0..j).map(|_| rng.random_range(0.0..1.0)).collect();
    e(e(DemSystem::from_profile(a, &e(SpectralProfile::step(center, 1.0))?, j))?
        .with_bare_frequencies(bare.to_vec(), bare_env))
}

fn energy_conservation() -> Check {
    let sys = audit_system(2.0, [0.3, 0.7], [0.4, 1.3])?;
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1 * 2.0 * PI).collect();
    let collapse = 4.0 * PI;
    let subjective = e(conservation_audit(&sys, &times, collapse, CollapseMode::Subjective, 10))?;
    let drift = subjective.max_drift();
    let objective = e(conservation_audit(&sys, &times, collapse, CollapseMode::Objective, 10))?;
    let largest = objective
        .collapse
        .decomposition
        .jumps()
        .iter()
        .map(|(_, j)| j.abs())
        .fold(0.0, f64::max);
    let mean = objective.collapse.mean_jump().abs();
    Ok((
        drift <= 1e-9 && largest > 1e-6 && mean <= 1e-10,
        format!("subjective drift {drift:.3e}, largest |dE_k| {largest:.3e}, |mean jump| {mean:.3e}"),
    ))
}

fn clausius_branches() -> Check {
    let mut rng = seeded_rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let w: Vec<f64> = random_probabilities(n, &mut rng);
        let t = rng.random_range(0.1..10.0);
        for p in e(clausius_identity(&w, t))? {
            worst = worst.max(p.residual());
        }
    }
    Ok((worst <= 1e-12, format!("max |dS_k - dE_k/T| = {worst:.3e}")))
}

fn box_clausius() -> Check {
    let spec = e(BoxSpectrum::standard(50, 1.0))?;
    let c = e(clausius_convergence(&spec, 1.0, default_volume_step(&spec)))?;
    Ok((
        (3.5..=4.5).contains(&c.ratio),
        format!("halving ratio {:.3} (residual {:.3e})", c.ratio, c.coarse.residual),
    ))
}

fn chain_monotonicity() -> Check {
    let mut rng = seeded_rng(13);
    let dims = [2, 3, 2];
    let mut violations = 0;
    let mut poset_ok = true;
    for _ in 0..100 {
        let m = e(MultipartiteState::new(
            dims.to_vec(),
            8,
            random_unit_vector(12 * 8, &mut rng).into_inner(),
        ))?;
        let s = entropy_chain(&m);
        let outcomes: Vec<usize> = dims.iter().map(|&d| rng.random_range(0..d)).collect();
        let i = e(information_chain(&m, &outcomes))?;
        violations += s.windows(2).filter(|w| w[1] < w[0] - 1e-12).count();
        violations += i.windows(2).filter(|w| w[1] < w[0] - 1e-12).count();
        let sets: Vec<FactSet> = (0..6)
            .map(|_| {
                let mut f = FactSet::new();
                for (sub, &d) in dims.iter().enumerate() {
                    if rng.random_bool(0.5) {
                        f.insert(sub, rng.random_range(0..d)).expect("fresh subsystem");
                    }
                }
                f
            })
            .collect();
        poset_ok &= e(poset_check(&sets, &m))?.monotone;
    }
    Ok((
        violations == 0 && poset_ok,
        format!("{violations} chain violations, poset order {}", if poset_ok { "respected" } else { "violated" }),
    ))
}

fn indistinguishability() -> Check {
    let sys = e(DemSystem::from_profile(
        vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
        &e(SpectralProfile::step(0.0, 2.0 * PI))?,
        64,
    ))?;
    let s = 3f64.sqrt() / 2.0;
    let kick = ComplexMatrix::from_real_rows(&[&[0.5, s], &[s, -0.5]]);
    let protocol = e(EpochProtocol::new(sys).with_kick(kick))?;
    let times = [1.0, 3.0, 7.0];
    let born = e(born_joint_distribution(&protocol, &times))?;
    let n = 10_000;
    let mut worst_sigma: f64 = 0.0;
    for mode in [CollapseMode::Subjective, CollapseMode::Objective] {
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for k in 0..n {
            let run = e(run_epochs_with(&protocol, &times, mode, &mut stream_rng(14, k as u64)))?;
            *counts.entry(run.outcomes()).or_default() += 1;
        }
        for (history, p) in &born {
            let observed = *counts.get(history).unwrap_or(&0) as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            worst_sigma = worst_sigma.max((observed - p).abs() / sigma);
        }
    }
    Ok((
        worst_sigma <= 3.0,
        format!("largest deviation {worst_sigma:.2} sigma over {} histories", born.len()),
    ))
}

fn cli_determinism() -> Check {
    let text = "scenario = grw-ensemble\nseed = 15\npoints = 41\nsamples = 6\nt_max = 1\nn_traj = 200\n";
    let cfg = parse_config(text).map_err(|errs| format!("{errs:?}"))?;
    let first = crate::render(&cfg, false).map_err(|e| e.to_string())?;
    let second = crate::render(&cfg, false).map_err(|e| e.to_string())?;
    let a: Vec<String> = first.iter().map(|f| f.sha256()).collect();
    let b: Vec<String> = second.iter().map(|f| f.sha256()).collect();
    Ok((a == b, format!("sha256 {}", &a[0][..16])))
}
