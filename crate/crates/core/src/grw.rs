//! Spontaneous localization on a one-dimensional grid.
//!
//! A hit centred at `x'` multiplies the wavefunction by
//! `G(x, x') = K exp(−α(x − x')²/4)`. `K` is fixed globally so that the
//! discrete hit density `P(x'_k) = Σ_i |ψ_i G(x_i, x'_k)|² dx` sums to one
//! over the grid centres. Between hits the state evolves unitarily.
//!
//! The grid has hard walls: the wavefunction vanishes one spacing beyond
//! either end, and the free Hamiltonian is `−½ d²/dx²` by central differences.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, UnitaryPropagator, C64};
use crate::random::{sample_index, stream_rng};

const ZERO_OVERLAP: f64 = 1e-300;
const NORM_TOL: f64 = 1e-9;
/// Trajectories per reduction chunk in ensemble averages.
pub const ENSEMBLE_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid needs x_max > x_min and at least 2 points (got [{x_min}, {x_max}], {n})"
            )));
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    /// Index of the grid point nearest to `x`.
    pub fn nearest(&self, x: f64) -> Result<usize> {
        self.check_inside(x)?;
        Ok((((x - self.x_min) / self.dx()).round() as usize).min(self.n - 1))
    }

    fn check_inside(&self, x: f64) -> Result<()> {
        if !(x >= self.x_min && x <= self.x_max) {
            return Err(Error::OutOfGrid {
                x,
                x_min: self.x_min,
                x_max: self.x_max,
            });
        }
        Ok(())
    }

    /// `−½ d²/dx²` with Dirichlet walls.
    pub fn free_hamiltonian(&self) -> ComplexMatrix {
        let c = 1.0 / (self.dx() * self.dx());
        ComplexMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                C64::new(c, 0.0)
            } else if i.abs_diff(j) == 1 {
                C64::new(-0.5 * c, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

/// Wavefunction sampled on a grid, normalized so that `Σ|ψ_k|² dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    grid: Grid,
    values: Vec<C64>,
}

impl GridWavefunction {
    /// Normalizes `values` on `grid`.
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        let norm = (values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        if !(norm >= 1e-150) || !norm.is_finite() {
            return Err(Error::ZeroNorm { norm });
        }
        Ok(Self {
            grid,
            values: values.into_iter().map(|z| z / norm).collect(),
        })
    }

    /// `exp(−(x − c)²/(4σ²) + i k x)`, so `|ψ|²` has standard deviation `σ`.
    pub fn gaussian(grid: Grid, center: f64, sigma: f64, momentum: f64) -> Result<Self> {
        let values = grid
            .points()
            .iter()
            .map(|&x| C64::from_polar((-(x - center).powi(2) / (4.0 * sigma * sigma)).exp(), momentum * x))
            .collect();
        Self::new(grid, values)
    }

    /// Equal-weight superposition of Gaussian packets at `centers`.
    pub fn cat(grid: Grid, centers: &[f64], sigma: f64) -> Result<Self> {
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        for &c in centers {
            let g = Self::gaussian(grid, c, sigma, 0.0)?;
            for (v, z) in values.iter_mut().zip(&g.values) {
                *v += z;
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// `Σ|ψ_k|² dx`
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `|ψ_k|² dx` for each grid point.
    pub fn probabilities(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.values.iter().map(|z| z.norm_sqr() * dx).collect()
    }

    pub fn mean_position(&self) -> f64 {
        self.probabilities()
            .iter()
            .zip(self.grid.points())
            .map(|(p, x)| p * x)
            .sum()
    }

    pub fn position_variance(&self) -> f64 {
        let m = self.mean_position();
        self.probabilities()
            .iter()
            .zip(self.grid.points())
            .map(|(p, x)| p * (x - m).powi(2))
            .sum()
    }

    /// `⟨ψ|H|ψ⟩` with the grid measure.
    pub fn expectation(&self, h: &ComplexMatrix) -> f64 {
        let v = ComplexVector::new(self.values.clone());
        h.expectation(&v, &v).re * self.grid.dx()
    }

    fn from_normalized(grid: Grid, values: Vec<C64>) -> Self {
        Self { grid, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingParams {
    /// Mean hit rate `λ`.
    pub rate: f64,
    /// Localization strength `α`; the width is `1/√α`.
    pub alpha: f64,
}

impl Default for HittingParams {
    /// `λ = α = 1` in internal units; not physical values.
    fn default() -> Self {
        Self { rate: 1.0, alpha: 1.0 }
    }
}

impl HittingParams {
    pub fn new(rate: f64, alpha: f64) -> Result<Self> {
        if !(rate > 0.0) || !(alpha > 0.0) || !rate.is_finite() || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hit rate and alpha must be positive (got {rate}, {alpha})"
            )));
        }
        Ok(Self { rate, alpha })
    }
}

fn hit_gaussian(alpha: f64, d: f64) -> f64 {
    (-alpha * d * d / 4.0).exp()
}

/// Hit density over the grid centres and the global constant `K`.
#[derive(Debug, Clone)]
pub struct LocalizationDensity {
    /// `P(x'_k)`, a density: `Σ_k P(x'_k) dx = 1`.
    pub density: Vec<f64>,
    pub k: f64,
}

impl LocalizationDensity {
    /// `P(x'_k) dx`, the discrete distribution of hit centres.
    pub fn weights(&self, dx: f64) -> Vec<f64> {
        self.density.iter().map(|p| p * dx).collect()
    }
}

pub fn localization_density(psi: &GridWavefunction, alpha: f64) -> Result<LocalizationDensity> {
    let grid = psi.grid;
    let dx = grid.dx();
    let pts = grid.points();
    let mod2: Vec<f64> = psi.values.iter().map(|z| z.norm_sqr()).collect();
    let unscaled: Vec<f64> = pts
        .iter()
        .map(|&c| {
            pts.iter()
                .zip(&mod2)
                .map(|(&x, m)| m * hit_gaussian(alpha, x - c).powi(2))
                .sum::<f64>()
                * dx
        })
        .collect();
    let total: f64 = unscaled.iter().sum::<f64>() * dx;
    if !(total > ZERO_OVERLAP) {
        return Err(Error::ZeroOverlap(total));
    }
    Ok(LocalizationDensity {
        density: unscaled.iter().map(|u| u / total).collect(),
        k: total.sqrt().recip(),
    })
}

#[derive(Debug, Clone)]
pub struct HitOutcome {
    /// `L(x) = ψ(x) G(x, x')`, unnormalized.
    pub localized: Vec<C64>,
    /// `P(x') = Σ|L|² dx`.
    pub probability: f64,
    /// `L / √P`
    pub collapsed: GridWavefunction,
}

pub fn hit(psi: &GridWavefunction, x_center: f64, alpha: f64) -> Result<HitOutcome> {
    psi.grid.check_inside(x_center)?;
    let k = localization_density(psi, alpha)?.k;
    hit_with_constant(psi, x_center, alpha, k)
}

fn hit_with_constant(psi: &GridWavefunction, x_center: f64, alpha: f64, k: f64) -> Result<HitOutcome> {
    let grid = psi.grid;
    let localized: Vec<C64> = psi
        .values
        .iter()
        .enumerate()
        .map(|(i, z)| z * (k * hit_gaussian(alpha, grid.x(i) - x_center)))
        .collect();
    let probability = localized.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
    if !(probability > ZERO_OVERLAP) {
        return Err(Error::ZeroOverlap(probability));
    }
    let s = probability.sqrt();
    let collapsed = GridWavefunction::from_normalized(grid, localized.iter().map(|z| z / s).collect());
    Ok(HitOutcome {
        localized,
        probability,
        collapsed,
    })
}

/// Draws a hit centre by inverse CDF over the grid and applies the hit.
pub fn random_hit<R: Rng + ?Sized>(psi: &GridWavefunction, alpha: f64, rng: &mut R) -> Result<(f64, HitOutcome)> {
    let dens = localization_density(psi, alpha)?;
    let idx = sample_index(&dens.weights(psi.grid.dx()), rng);
    let x = psi.grid.x(idx);
    Ok((x, hit_with_constant(psi, x, alpha, dens.k)?))
}

/// Unitary evolution on the grid, with the eigendecomposition cached.
/// `None` stands for `H = 0`.
#[derive(Debug, Clone)]
pub struct GridEvolution {
    propagator: Option<UnitaryPropagator>,
}

impl GridEvolution {
    pub fn new(h: Option<&ComplexMatrix>) -> Result<Self> {
        Ok(Self {
            propagator: h.map(UnitaryPropagator::new).transpose()?,
        })
    }

    pub fn free(grid: &Grid) -> Result<Self> {
        Self::new(Some(&grid.free_hamiltonian()))
    }

    pub fn is_trivial(&self) -> bool {
        self.propagator.is_none()
    }

    pub fn evolve(&self, psi: &GridWavefunction, dt: f64) -> GridWavefunction {
        match &self.propagator {
            None => psi.clone(),
            Some(p) if dt != 0.0 => {
                let v = p.apply(&ComplexVector::new(psi.values.clone()), dt);
                GridWavefunction::from_normalized(psi.grid, v.into_inner())
            }
            Some(_) => psi.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRecord {
    pub time: f64,
    pub center: f64,
    /// `P(x')` at the chosen centre.
    pub density: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub hits: Vec<HitRecord>,
    /// State at each requested sample time.
    pub samples: Vec<(f64, GridWavefunction)>,
}

/// Evolves `psi0` to each time in `sample_times` (sorted, non-negative),
/// interleaving Poisson hits at rate `λ`.
pub fn run_trajectory<R: Rng + ?Sized>(
    psi0: &GridWavefunction,
    params: HittingParams,
    evolution: &GridEvolution,
    sample_times: &[f64],
    rng: &mut R,
) -> Result<Trajectory> {
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameter("sample times must be sorted and non-negative".into()));
    }
    let clock = Exp::new(params.rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut psi = psi0.clone();
    let mut now = 0.0;
    let mut next_hit: f64 = clock.sample(rng);
    let mut hits = Vec::new();
    let mut samples = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        while next_hit <= ts {
            psi = evolution.evolve(&psi, next_hit - now);
            now = next_hit;
            let (center, outcome) = random_hit(&psi, params.alpha, rng)?;
            hits.push(HitRecord {
                time: now,
                center,
                density: outcome.probability,
            });
            psi = outcome.collapsed;
            next_hit = now + clock.sample(rng);
        }
        psi = evolution.evolve(&psi, ts - now);
        now = ts;
        debug_assert!((psi.norm_sqr() - 1.0).abs() < NORM_TOL);
        samples.push((ts, psi.clone()));
    }
    Ok(Trajectory { hits, samples })
}

/// `ρ(x_k, x_l)` on a grid, with `Σ_k ρ_kk dx = 1`.
#[derive(Debug, Clone)]
pub struct PositionDensityMatrix {
    grid: Grid,
    matrix: ComplexMatrix,
}

impl PositionDensityMatrix {
    pub fn new(grid: Grid, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != grid.len() || matrix.cols() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a {}-point grid",
                matrix.rows(),
                matrix.cols(),
                grid.len()
            )));
        }
        let dev = matrix.hermitian_deviation();
        let tol = 1e-9 * matrix.max_abs().max(1.0);
        if dev > tol {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: tol,
            });
        }
        let trace = matrix.trace().re * grid.dx();
        if (trace - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidDensityMatrix(format!("trace·dx = {trace}")));
        }
        Ok(Self { grid, matrix })
    }

    pub fn from_wavefunction(psi: &GridWavefunction) -> Self {
        let v = ComplexVector::new(psi.values.clone());
        Self {
            grid: psi.grid,
            matrix: v.outer(&v),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re * self.grid.dx()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = crate::linalg::hermitian_eig(&self.matrix.scale(C64::new(self.grid.dx(), 0.0)))?;
        Ok(eig.values[0])
    }
}

/// `∂ρ/∂t = −i[H, ρ] − D(x − x')ρ` with a fixed decay table `D`.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    hamiltonian: Option<ComplexMatrix>,
    decay: Vec<f64>,
    n: usize,
}

impl MasterEquation {
    /// QMSL form, `D(s) = λ(1 − exp(−α s²/4))`.
    pub fn qmsl(grid: &Grid, h: Option<&ComplexMatrix>, params: HittingParams) -> Self {
        let (l, a) = (params.rate, params.alpha);
        Self::with_kernel(grid, h, |s| l * (1.0 - (-a * s * s / 4.0).exp()))
    }

    /// Gallis–Fleming form with scattering kernel `F`; requires `F(0) = 0` and
    /// `F ≥ 0` on every grid separation.
    pub fn gallis_fleming(grid: &Grid, h: Option<&ComplexMatrix>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let f0 = f(0.0);
        if f0 != 0.0 {
            return Err(Error::BadScatteringKernel(format!("F(0) = {f0}")));
        }
        let eq = Self::with_kernel(grid, h, f);
        if let Some(v) = eq.decay.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::BadScatteringKernel(format!("F takes the value {v}")));
        }
        Ok(eq)
    }

    fn with_kernel(grid: &Grid, h: Option<&ComplexMatrix>, f: impl Fn(f64) -> f64) -> Self {
        let n = grid.len();
        let pts = grid.points();
        let mut decay = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                decay[i * n + j] = if i == j { f(0.0) } else { f(pts[i] - pts[j]) };
            }
        }
        Self {
            hamiltonian: h.cloned(),
            decay,
            n,
        }
    }

    pub fn decay(&self, i: usize, j: usize) -> f64 {
        self.decay[i * self.n + j]
    }

    pub fn rhs(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = match &self.hamiltonian {
            Some(h) => h.commutator(rho).scale(C64::new(0.0, -1.0)),
            None => ComplexMatrix::zeros(self.n, self.n),
        };
        for (k, (o, r)) in out.as_mut_slice().iter_mut().zip(rho.as_slice()).enumerate() {
            *o -= r * self.decay[k];
        }
        out
    }

    /// Largest step with `dt · ‖rhs(ρ)‖ ≤ 1e-3 ‖ρ‖` (Frobenius norms).
    pub fn stable_step(&self, rho: &ComplexMatrix) -> f64 {
        let r = self.rhs(rho).frobenius_norm();
        if r == 0.0 {
            f64::INFINITY
        } else {
            1e-3 * rho.frobenius_norm() / r
        }
    }

    fn rk4_step(&self, rho: &ComplexMatrix, dt: f64) -> ComplexMatrix {
        let half = C64::new(dt / 2.0, 0.0);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&rho.add(&k1.scale(half)));
        let k3 = self.rhs(&rho.add(&k2.scale(half)));
        let k4 = self.rhs(&rho.add(&k3.scale(C64::new(dt, 0.0))));
        let sum = k1.add(&k2.scale(C64::new(2.0, 0.0))).add(&k3.scale(C64::new(2.0, 0.0))).add(&k4);
        rho.add(&sum.scale(C64::new(dt / 6.0, 0.0)))
    }

    /// Classical RK4 from `rho0` at `t = 0` to each of the sorted `sample_times`.
    /// The step is at most `max_dt` (default [`Self::stable_step`] at `rho0`)
    /// and is shortened to land on every sample time.
    pub fn integrate(&self, rho0: &ComplexMatrix, sample_times: &[f64], max_dt: Option<f64>) -> Result<Vec<ComplexMatrix>> {
        if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParameter("sample times must be sorted and non-negative".into()));
        }
        let dt_max = max_dt.unwrap_or_else(|| self.stable_step(rho0));
        let mut rho = rho0.clone();
        let mut now = 0.0;
        let mut out = Vec::with_capacity(sample_times.len());
        for &ts in sample_times {
            let span = ts - now;
            if span > 0.0 {
                let steps = if dt_max.is_finite() { (span / dt_max).ceil().max(1.0) as usize } else { 1 };
                let h = span / steps as f64;
                for _ in 0..steps {
                    rho = self.rk4_step(&rho, h);
                    let dev = rho.hermitian_deviation();
                    assert!(dev <= 1e-9 * rho.max_abs().max(1.0), "Hermiticity lost: {dev:e}");
                }
            }
            now = ts;
            out.push(rho.clone());
        }
        Ok(out)
    }
}

pub fn qmsl_rhs(rho: &PositionDensityMatrix, h: Option<&ComplexMatrix>, params: HittingParams) -> ComplexMatrix {
    MasterEquation::qmsl(&rho.grid, h, params).rhs(&rho.matrix)
}

pub fn gallis_fleming_rhs(
    rho: &PositionDensityMatrix,
    h: Option<&ComplexMatrix>,
    f: impl Fn(f64) -> f64,
) -> Result<ComplexMatrix> {
    Ok(MasterEquation::gallis_fleming(&rho.grid, h, f)?.rhs(&rho.matrix))
}

/// One-hit average of `ρ` on the grid: `Σ_k' P(x'_k') dx · Ψ₁Ψ₁†`, which is
/// `ρ(x, y) · K² dx Σ_k' G(x, x'_k') G(y, x'_k')`. Away from the walls the
/// factor tends to `exp(−α(x − y)²/8)`.
pub fn hit_averaged(rho: &PositionDensityMatrix, psi: &GridWavefunction, alpha: f64) -> Result<ComplexMatrix> {
    let grid = rho.grid;
    let k = localization_density(psi, alpha)?.k;
    let pts = grid.points();
    let dx = grid.dx();
    let n = grid.len();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let s: f64 = pts
            .iter()
            .map(|&c| hit_gaussian(alpha, pts[i] - c) * hit_gaussian(alpha, pts[j] - c))
            .sum();
        rho.matrix[(i, j)] * (k * k * dx * s)
    }))
}

/// Continuum decoherence factor of one hit, `exp(−α s²/8)`.
pub fn hit_average_factor(alpha: f64, separation: f64) -> f64 {
    (-alpha * separation * separation / 8.0).exp()
}

#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub times: Vec<f64>,
    /// Mean of `ψψ†` over trajectories at each time.
    pub monte_carlo: Vec<ComplexMatrix>,
    /// RK4 solution of the QMSL equation at each time.
    pub master: Vec<ComplexMatrix>,
    pub n_traj: usize,
}

impl EnsembleReport {
    pub fn max_deviation(&self) -> f64 {
        self.monte_carlo
            .iter()
            .zip(&self.master)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// `1/√n_traj`
    pub fn statistical_scale(&self) -> f64 {
        (self.n_traj as f64).sqrt().recip()
    }

    /// `|ρ(x_i, x_j, t)| / |ρ(x_i, x_j, 0)|` for both methods.
    pub fn normalized_coherence(&self, i: usize, j: usize) -> Vec<(f64, f64, f64)> {
        let mc0 = self.monte_carlo[0][(i, j)].norm();
        let me0 = self.master[0][(i, j)].norm();
        self.times
            .iter()
            .zip(self.monte_carlo.iter().zip(&self.master))
            .map(|(&t, (a, b))| (t, a[(i, j)].norm() / mc0, b[(i, j)].norm() / me0))
            .collect()
    }
}

/// Averages `n_traj` hitting trajectories (trajectory `k` uses stream `k` of
/// `master_seed`) and integrates the QMSL equation from the same start.
/// Trajectories are summed in fixed chunks of [`ENSEMBLE_CHUNK`] and the
/// chunk sums added in order, so the result does not depend on thread count.
pub fn ensemble_vs_master(
    psi0: &GridWavefunction,
    params: HittingParams,
    h: Option<&ComplexMatrix>,
    sample_times: &[f64],
    n_traj: usize,
    master_seed: u64,
    rk4_dt: Option<f64>,
) -> Result<EnsembleReport> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be positive".into()));
    }
    let n = psi0.grid.len();
    let evolution = GridEvolution::new(h)?;
    let chunks: Vec<(usize, usize)> = (0..n_traj)
        .step_by(ENSEMBLE_CHUNK)
        .map(|s| (s, (s + ENSEMBLE_CHUNK).min(n_traj)))
        .collect();
    let partials: Vec<Vec<ComplexMatrix>> = chunks
        .par_iter()
        .map(|&(a, b)| -> Result<Vec<ComplexMatrix>> {
            let mut acc = vec![ComplexMatrix::zeros(n, n); sample_times.len()];
            for k in a..b {
                let mut rng = stream_rng(master_seed, k as u64);
                let traj = run_trajectory(psi0, params, &evolution, sample_times, &mut rng)?;
                for (m, (_, psi)) in acc.iter_mut().zip(&traj.samples) {
                    accumulate_outer(m, &psi.values);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut monte_carlo = vec![ComplexMatrix::zeros(n, n); sample_times.len()];
    for part in &partials {
        for (m, p) in monte_carlo.iter_mut().zip(part) {
            for (x, y) in m.as_mut_slice().iter_mut().zip(p.as_slice()) {
                *x += y;
            }
        }
    }
    let inv = C64::new(1.0 / n_traj as f64, 0.0);
    let monte_carlo = monte_carlo.into_iter().map(|m| m.scale(inv)).collect();
    let rho0 = PositionDensityMatrix::from_wavefunction(psi0);
    let master = MasterEquation::qmsl(&psi0.grid, h, params).integrate(rho0.matrix(), sample_times, rk4_dt)?;
    Ok(EnsembleReport {
        times: sample_times.to_vec(),
        monte_carlo,
        master,
        n_traj,
    })
}

fn accumulate_outer(m: &mut ComplexMatrix, v: &[C64]) {
    let n = v.len();
    let data = m.as_mut_slice();
    for i in 0..n {
        let vi = v[i];
        if vi == C64::new(0.0, 0.0) {
            continue;
        }
        for j in 0..n {
            data[i * n + j] += vi * v[j].conj();
        }
    }
}

/// Time at which a decreasing `f` first drops to `1/e`, by bisection on
/// `[0, t_max]`.
fn one_over_e_crossing(f: impl Fn(f64) -> f64, t_max: f64) -> Option<f64> {
    let target = (-1.0f64).exp();
    if f(t_max) > target {
        return None;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// 1/e crossings of the thermal Gram envelope with timescale `τ` and of the
/// far-separated QMSL coherence with `λ = 1/τ`.
#[derive(Debug, Clone, Copy)]
pub struct DecayLinkage {
    pub thermal_crossing: f64,
    pub qmsl_crossing: f64,
}

impl DecayLinkage {
    pub fn ratio(&self) -> f64 {
        self.thermal_crossing / self.qmsl_crossing
    }
}

pub fn decay_linkage(tau: f64) -> Result<DecayLinkage> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("τ must be positive (got {tau})")));
    }
    let t_max = 100.0 * tau;
    let thermal = one_over_e_crossing(|t| crate::dem::envelope_thermal(tau, t).norm(), t_max)
        .expect("thermal envelope decays below 1/e");
    let qmsl = one_over_e_crossing(|t| (-t / tau).exp(), t_max).expect("exponential decays below 1/e");
    Ok(DecayLinkage {
        thermal_crossing: thermal,
        qmsl_crossing: qmsl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded_rng;

    fn grid() -> Grid {
        Grid::new(-5.0, 5.0, 101).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = grid();
        assert!((g.dx() - 0.1).abs() < 1e-15);
        assert_eq!(g.nearest(0.04).unwrap(), 50);
        assert!(matches!(g.nearest(5.5), Err(Error::OutOfGrid { .. })));
        assert!(Grid::new(1.0, 0.0, 10).is_err());
        assert!(g.free_hamiltonian().is_hermitian(0.0));
    }

    #[test]
    fn wavefunctions_are_normalized() {
        let psi = GridWavefunction::gaussian(grid(), 0.5, 0.7, 1.3).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((psi.mean_position() - 0.5).abs() < 1e-9);
        assert!(GridWavefunction::new(grid(), vec![C64::new(0.0, 0.0); 101]).is_err());
    }

    #[test]
    fn uniform_state_gives_symmetric_density() {
        let g = grid();
        let psi = GridWavefunction::new(g, vec![C64::new(1.0, 0.0); g.len()]).unwrap();
        let d = localization_density(&psi, 2.0).unwrap();
        for k in 0..g.len() {
            assert!((d.density[k] - d.density[g.len() - 1 - k]).abs() < 1e-12);
        }
        let total: f64 = d.weights(g.dx()).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hit_collapses_to_a_normalized_state() {
        let psi = GridWavefunction::cat(grid(), &[-2.0, 2.0], 0.5).unwrap();
        let out = hit(&psi, 2.0, 4.0).unwrap();
        assert!((out.collapsed.norm_sqr() - 1.0).abs() < 1e-9);
        assert!(out.collapsed.mean_position() > 1.9);
        assert!(matches!(hit(&psi, 7.0, 4.0), Err(Error::OutOfGrid { .. })));
    }

    #[test]
    fn hit_far_from_support_has_zero_overlap() {
        let psi = GridWavefunction::gaussian(grid(), -4.0, 0.1, 0.0).unwrap();
        assert!(matches!(hit(&psi, 5.0, 1e4), Err(Error::ZeroOverlap(_))));
    }

    #[test]
    fn no_hits_means_pure_unitary_evolution() {
        let g = Grid::new(-4.0, 4.0, 33).unwrap();
        let psi = GridWavefunction::gaussian(g, 0.0, 0.8, 0.5).unwrap();
        let evo = GridEvolution::free(&g).unwrap();
        let params = HittingParams::new(1e-12, 1.0).unwrap();
        let traj = run_trajectory(&psi, params, &evo, &[0.7], &mut seeded_rng(1)).unwrap();
        assert!(traj.hits.is_empty());
        let u = crate::linalg::matrix_exponential_skew(&g.free_hamiltonian(), 0.7).unwrap();
        let direct = u.matvec(&ComplexVector::new(psi.values().to_vec()));
        let diff = direct.max_abs_diff(&ComplexVector::new(traj.samples[0].1.values().to_vec()));
        assert!(diff < 1e-9);
    }

    #[test]
    fn qmsl_leaves_populations_alone() {
        let psi = GridWavefunction::cat(grid(), &[-2.0, 2.0], 0.5).unwrap();
        let rho = PositionDensityMatrix::from_wavefunction(&psi);
        let r = qmsl_rhs(&rho, None, HittingParams::new(1.0, 4.0).unwrap());
        for k in 0..grid().len() {
            assert_eq!(r[(k, k)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn gallis_fleming_rejects_bad_kernels() {
        let psi = GridWavefunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        let rho = PositionDensityMatrix::from_wavefunction(&psi);
        assert!(matches!(
            gallis_fleming_rhs(&rho, None, |s| 1.0 + s * s),
            Err(Error::BadScatteringKernel(_))
        ));
        assert!(matches!(
            gallis_fleming_rhs(&rho, None, |s| -s * s),
            Err(Error::BadScatteringKernel(_))
        ));
    }

    #[test]
    fn linkage_crossings() {
        let l = decay_linkage(2.0).unwrap();
        assert!((l.qmsl_crossing - 2.0).abs() < 1e-9);
        let e = 1f64.exp();
        assert!((l.thermal_crossing - 2.0 * (e * e - 1.0).sqrt()).abs() < 1e-9);
    }
}
