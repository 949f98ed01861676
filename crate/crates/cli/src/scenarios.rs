//! One function per scenario, each producing a single CSV table.

use std::f64::consts::PI;

use entropic_time::chain::{
    entropy_chain, information_chain, run_epochs, CollapseMode, EpochProtocol, MultipartiteState,
};
use entropic_time::dem::{DemSystem, SpectralProfile, ThermalBinning};
use entropic_time::energetics::conservation_audit_with;
use entropic_time::grw::{
    ensemble_vs_master, run_trajectory, Grid, GridEvolution, GridWavefunction, HittingParams, MasterEquation,
    PositionDensityMatrix,
};
use entropic_time::linalg::{ComplexMatrix, C64};
use entropic_time::random::{random_unit_vector, sample_index, seeded_rng, stream_rng};
use entropic_time::state::{entanglement_entropy_pair, Bipartition, PureState};
use entropic_time::thermo::{clausius_check, gas_mixing_entropy, BoxSpectrum};
use entropic_time::{Error, Result};
use rand::Rng;

use crate::config::{Scenario, ScenarioConfig};
use crate::output::{Cell, Table};

pub const DEM_HEADER: [&str; 6] = ["t", "re_g", "im_g", "abs_g", "S_sys", "S_env"];
pub const EPOCH_HEADER: [&str; 5] = ["n", "t_n", "outcome", "p_cond", "I_nats"];
pub const MULTIPARTITE_HEADER: [&str; 5] = ["k", "dim_k", "outcome", "S_prefix", "I_prefix"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "mean_x", "var_x", "hits"];
pub const ENSEMBLE_HEADER: [&str; 5] = ["t", "x", "xprime", "abs_rho_mc", "abs_rho_master"];
pub const MASTER_HEADER: [&str; 5] = ["t", "x", "xprime", "abs_rho", "trace"];
pub const AUDIT_HEADER: [&str; 5] = ["t", "E_total", "branch", "E_branch", "dE"];
pub const BIPARTITE_HEADER: [&str; 6] = ["index", "dim_s", "dim_e", "S_sys", "S_env", "abs_diff"];
pub const CLAUSIUS_HEADER: [&str; 4] = ["dV", "dS", "dQ_over_T", "residual"];
pub const MIXING_HEADER: [&str; 2] = ["dT", "dS"];

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Table> {
    match cfg.scenario {
        Scenario::DemStep => dem_step(cfg),
        Scenario::DemThermal => dem_thermal(cfg),
        Scenario::DemDiscrete => dem_discrete(cfg),
        Scenario::EpochChain => epoch_chain(cfg),
        Scenario::MultipartiteChain => multipartite_chain(cfg),
        Scenario::GrwTrajectory => grw_trajectory(cfg),
        Scenario::GrwEnsemble => grw_ensemble(cfg),
        Scenario::MasterEq => master_eq(cfg),
        Scenario::EnergyAudit => energy_audit(cfg),
        Scenario::BipartiteRandom => bipartite_random(cfg),
        Scenario::ThermoClausius => thermo_clausius(cfg),
        Scenario::GasMixing => gas_mixing(cfg),
    }
}

fn linspace(end: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("samples must be at least 2 (got {samples})")));
    }
    if !(end > 0.0) {
        return Err(Error::InvalidParameter(format!("time span must be positive (got {end})")));
    }
    Ok((0..samples).map(|k| end * k as f64 / (samples - 1) as f64).collect())
}

fn two_level(p0: f64) -> Result<Vec<C64>> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::OutOfRange(format!("p0 = {p0} must lie in (0, 1)")));
    }
    Ok(vec![C64::new(p0.sqrt(), 0.0), C64::new((1.0 - p0).sqrt(), 0.0)])
}

fn dem_table(sys: &DemSystem, times: &[f64]) -> Result<Table> {
    let mut t = Table::new(&DEM_HEADER);
    for &time in times {
        let g = sys.gram_closed_form(1, 0, time)?;
        t.push(vec![
            time.into(),
            g.re.into(),
            g.im.into(),
            g.norm().into(),
            sys.system_entropy(time)?.into(),
            sys.environment_entropy(time)?.into(),
        ]);
    }
    Ok(t)
}

fn dem_step(cfg: &ScenarioConfig) -> Result<Table> {
    let profile = SpectralProfile::step(cfg.float("Omega0"), cfg.float("Omega"))?;
    let sys = DemSystem::from_profile(two_level(cfg.float("p0"))?, &profile, cfg.usize("J"))?;
    let tau = 2.0 * PI / cfg.float("Omega");
    dem_table(&sys, &linspace(cfg.float("periods") * tau, cfg.usize("samples"))?)
}

fn dem_thermal(cfg: &ScenarioConfig) -> Result<Table> {
    let binning = match cfg.text("binning") {
        "equal-mass" => ThermalBinning::EqualMass,
        _ => ThermalBinning::UniformGrid,
    };
    let tau = cfg.float("tau");
    let profile = SpectralProfile::thermal_with(tau, cfg.float("scale"), cfg.float("cutoff"), binning)?;
    let sys = DemSystem::from_profile(two_level(cfg.float("p0"))?, &profile, cfg.usize("J"))?;
    let span = cfg.float("periods") * profile.timescale().unwrap_or(tau);
    dem_table(&sys, &linspace(span, cfg.usize("samples"))?)
}

fn dem_discrete(cfg: &ScenarioConfig) -> Result<Table> {
    let f = cfg.floats("frequencies").to_vec();
    let w = cfg.floats("weights").to_vec();
    if f.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frequencies but {} weights",
            f.len(),
            w.len()
        )));
    }
    let j = f.len();
    let profile = SpectralProfile::explicit(f, w)?;
    let sys = DemSystem::from_profile(two_level(cfg.float("p0"))?, &profile, j)?;
    dem_table(&sys, &linspace(cfg.float("t_max"), cfg.usize("samples"))?)
}

fn mode(cfg: &ScenarioConfig) -> CollapseMode {
    match cfg.text("mode") {
        "objective" => CollapseMode::Objective,
        _ => CollapseMode::Subjective,
    }
}

fn epoch_chain(cfg: &ScenarioConfig) -> Result<Table> {
    let tau = cfg.float("tau");
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive (got {tau})")));
    }
    let profile = SpectralProfile::step(0.0, 2.0 * PI / tau)?;
    let sys = DemSystem::from_profile(two_level(cfg.float("p0"))?, &profile, cfg.usize("J"))?;
    let th = cfg.float("kick_theta");
    let kick = ComplexMatrix::from_real_rows(&[&[th.cos(), th.sin()], &[th.sin(), -th.cos()]]);
    let protocol = EpochProtocol::new(sys).with_kick(kick)?.with_timescale(tau);
    let spacing = cfg.float("spacing") * tau;
    let times: Vec<f64> = (1..=cfg.usize("epochs")).map(|n| n as f64 * spacing).collect();
    let run = run_epochs(&protocol, &times, mode(cfg), cfg.seed_or_zero())?;
    let mut t = Table::new(&EPOCH_HEADER);
    for e in &run.epochs {
        t.push(vec![
            (e.index + 1).into(),
            e.time.into(),
            e.outcome.into(),
            e.probability.into(),
            e.information.into(),
        ]);
    }
    Ok(t)
}

fn multipartite_chain(cfg: &ScenarioConfig) -> Result<Table> {
    let dims: Vec<usize> = cfg.counts("dims").iter().map(|&d| d as usize).collect();
    let env = cfg.usize("env");
    if dims.is_empty() || dims.iter().chain([&env]).any(|&d| d == 0) {
        return Err(Error::InvalidParameter("dimensions must be positive".into()));
    }
    let total: usize = dims.iter().product::<usize>() * env;
    let mut rng = seeded_rng(cfg.seed_or_zero());
    let m = MultipartiteState::new(dims.clone(), env, random_unit_vector(total, &mut rng).into_inner())?;
    let joint = m.prefix_distribution(dims.len())?;
    let mut flat = sample_index(&joint, &mut rng);
    let mut outcomes = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        outcomes[k] = flat % dims[k];
        flat /= dims[k];
    }
    let s = entropy_chain(&m);
    let info = information_chain(&m, &outcomes)?;
    let mut t = Table::new(&MULTIPARTITE_HEADER);
    for k in 0..dims.len() {
        t.push(vec![(k + 1).into(), dims[k].into(), outcomes[k].into(), s[k].into(), info[k].into()]);
    }
    Ok(t)
}

struct GrwSetup {
    grid: Grid,
    psi: GridWavefunction,
    params: HittingParams,
    hamiltonian: Option<ComplexMatrix>,
    times: Vec<f64>,
}

fn grw_setup(cfg: &ScenarioConfig) -> Result<GrwSetup> {
    let grid = Grid::new(cfg.float("x_min"), cfg.float("x_max"), cfg.usize("points"))?;
    let psi = GridWavefunction::cat(grid, cfg.floats("centers"), cfg.float("sigma"))?;
    let params = HittingParams::new(cfg.float("lambda"), cfg.float("alpha"))?;
    let hamiltonian = cfg.flag("free").then(|| grid.free_hamiltonian());
    let times = linspace(cfg.float("t_max"), cfg.usize("samples"))?;
    Ok(GrwSetup {
        grid,
        psi,
        params,
        hamiltonian,
        times,
    })
}

/// Grid indices of the outermost packet pair followed by their diagonals.
fn coherence_pairs(cfg: &ScenarioConfig, grid: &Grid) -> Result<Vec<(usize, usize)>> {
    let centers = cfg.floats("centers");
    let first = grid.nearest(centers[0])?;
    let last = grid.nearest(centers[centers.len() - 1])?;
    if first == last {
        return Ok(vec![(first, first)]);
    }
    Ok(vec![(last, first), (first, first), (last, last)])
}

fn grw_trajectory(cfg: &ScenarioConfig) -> Result<Table> {
    let s = grw_setup(cfg)?;
    let evolution = GridEvolution::new(s.hamiltonian.as_ref())?;
    let traj = run_trajectory(&s.psi, s.params, &evolution, &s.times, &mut seeded_rng(cfg.seed_or_zero()))?;
    let mut t = Table::new(&TRAJECTORY_HEADER);
    for (time, psi) in &traj.samples {
        let hits = traj.hits.iter().filter(|h| h.time <= *time).count();
        t.push(vec![
            (*time).into(),
            psi.mean_position().into(),
            psi.position_variance().into(),
            hits.into(),
        ]);
    }
    Ok(t)
}

fn grw_ensemble(cfg: &ScenarioConfig) -> Result<Table> {
    let s = grw_setup(cfg)?;
    let report = ensemble_vs_master(
        &s.psi,
        s.params,
        s.hamiltonian.as_ref(),
        &s.times,
        cfg.usize("n_traj"),
        cfg.seed_or_zero(),
        None,
    )?;
    let pairs = coherence_pairs(cfg, &s.grid)?;
    let mut t = Table::new(&ENSEMBLE_HEADER);
    for (k, &time) in report.times.iter().enumerate() {
        for &(i, j) in &pairs {
            t.push(vec![
                time.into(),
                s.grid.x(i).into(),
                s.grid.x(j).into(),
                report.monte_carlo[k][(i, j)].norm().into(),
                report.master[k][(i, j)].norm().into(),
            ]);
        }
    }
    Ok(t)
}

fn master_eq(cfg: &ScenarioConfig) -> Result<Table> {
    let s = grw_setup(cfg)?;
    let h = s.hamiltonian.as_ref();
    let eq = match cfg.text("kernel") {
        "quadratic" => {
            let c = cfg.float("kernel_c");
            MasterEquation::gallis_fleming(&s.grid, h, |d| c * d * d)?
        }
        _ => MasterEquation::qmsl(&s.grid, h, s.params),
    };
    let rho0 = PositionDensityMatrix::from_wavefunction(&s.psi);
    let out = eq.integrate(rho0.matrix(), &s.times, None)?;
    let pairs = coherence_pairs(cfg, &s.grid)?;
    let dx = s.grid.dx();
    let mut t = Table::new(&MASTER_HEADER);
    for (&time, rho) in s.times.iter().zip(&out) {
        let trace = rho.trace().re * dx;
        for &(i, j) in &pairs {
            t.push(vec![
                time.into(),
                s.grid.x(i).into(),
                s.grid.x(j).into(),
                rho[(i, j)].norm().into(),
                trace.into(),
            ]);
        }
    }
    Ok(t)
}

fn energy_audit(cfg: &ScenarioConfig) -> Result<Table> {
    let omega = cfg.float("Omega");
    let profile = SpectralProfile::step(cfg.float("Omega0"), omega)?;
    let j = cfg.usize("J");
    let max = cfg.float("bare_env_max");
    if !(max >= 0.0) {
        return Err(Error::InvalidParameter(format!("bare_env_max must be non-negative (got {max})")));
    }
    let mut env_rng = stream_rng(cfg.seed_or_zero(), 1);
    let bare_env: Vec<f64> = (0..j).map(|_| max * env_rng.random::<f64>()).collect();
    let sys = DemSystem::from_profile(two_level(cfg.float("p0"))?, &profile, j)?
        .with_bare_frequencies(cfg.floats("bare_system").to_vec(), bare_env)?;
    let tau = 2.0 * PI / omega;
    let times = linspace(cfg.float("periods") * tau, cfg.usize("samples"))?;
    let audit = conservation_audit_with(
        &sys,
        &times,
        cfg.float("collapse_at") * tau,
        mode(cfg),
        entropic_time::chain::ORTHO_TOL,
        &mut stream_rng(cfg.seed_or_zero(), 0),
    )?;
    let mut t = Table::new(&AUDIT_HEADER);
    for r in &audit.rows {
        t.push(vec![
            r.time.into(),
            r.total.into(),
            r.branch.into(),
            r.branch_energy.into(),
            r.jump.into(),
        ]);
    }
    Ok(t)
}

fn bipartite_random(cfg: &ScenarioConfig) -> Result<Table> {
    let (max_s, max_e) = (cfg.usize("max_s"), cfg.usize("max_e"));
    if max_s < 2 || max_e < 2 {
        return Err(Error::InvalidParameter("max_s and max_e must be at least 2".into()));
    }
    let mut rng = seeded_rng(cfg.seed_or_zero());
    let mut t = Table::new(&BIPARTITE_HEADER);
    for index in 0..cfg.usize("states") {
        let l = rng.random_range(2..=max_s);
        let r = rng.random_range(2..=max_e);
        let s = PureState::bipartite(random_unit_vector(l * r, &mut rng), l, r)?;
        let (a, b) = entanglement_entropy_pair(&s, Bipartition::FIRST)?;
        t.push(vec![index.into(), l.into(), r.into(), a.into(), b.into(), (a - b).abs().into()]);
    }
    Ok(t)
}

fn thermo_clausius(cfg: &ScenarioConfig) -> Result<Table> {
    let spec = BoxSpectrum::new(cfg.usize("levels"), cfg.float("V"), cfg.float("c"))?;
    let mut t = Table::new(&CLAUSIUS_HEADER);
    for h in 0..=cfg.count("halvings") {
        let dv = cfg.float("dV") / 2f64.powi(h as i32);
        let c = clausius_check(&spec, cfg.float("T"), dv)?;
        t.push(vec![dv.into(), c.ds.into(), c.dq_over_t.into(), c.residual.into()]);
    }
    Ok(t)
}

fn gas_mixing(cfg: &ScenarioConfig) -> Result<Table> {
    let (n, temp, dt) = (cfg.count("N"), cfg.float("T"), cfg.float("dT"));
    let steps = cfg.usize("steps").max(1);
    gas_mixing_entropy(n, temp, dt)?;
    let mut t = Table::new(&MIXING_HEADER);
    for k in 0..=steps {
        let d = dt * k as f64 / steps as f64;
        t.push(vec![d.into(), Cell::Float(gas_mixing_entropy(n, temp, d)?)]);
    }
    Ok(t)
}
