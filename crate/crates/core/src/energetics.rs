//! Energy bookkeeping over relative-state branches.

use rand::Rng;

use crate::chain::{CollapseMode, ORTHO_TOL};
use crate::dem::DemSystem;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, C64};
use crate::random::{sample_index, seeded_rng};
use crate::relstate::{decompose, gram, BipartiteHamiltonian, RelativeStateDecomposition};
use crate::state::{Bipartition, PureState};

/// Default tolerance on `|⟨E⟩ − Σ|a_i|²⟨E_i⟩|` once decohered.
pub const ENERGY_TOL: f64 = 1e-9;
const CLAUSIUS_TOL: f64 = 1e-12;

/// `⟨φ_i' R_i'| H |φ_i R_i⟩` split by Hamiltonian component, indexed over the
/// supported branches.
#[derive(Debug, Clone)]
pub struct CouplingElements {
    pub support: Vec<usize>,
    pub system: ComplexMatrix,
    pub environment: ComplexMatrix,
    pub interaction: ComplexMatrix,
}

impl CouplingElements {
    pub fn total(&self) -> ComplexMatrix {
        self.system.add(&self.environment).add(&self.interaction)
    }
}

fn check_dims(h: &BipartiteHamiltonian, d: &RelativeStateDecomposition) -> Result<()> {
    if h.system_dim() != d.system_dim() || h.env_dim() != d.env_dim() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian is {}x{}, state is {}x{}",
            h.system_dim(),
            h.env_dim(),
            d.system_dim(),
            d.env_dim()
        )));
    }
    Ok(())
}

pub fn coupling_elements(h: &BipartiteHamiltonian, d: &RelativeStateDecomposition) -> Result<CouplingElements> {
    check_dims(h, d)?;
    let support = d.support();
    let g = gram(d);
    let relative: Vec<&ComplexVector> = support
        .iter()
        .map(|&i| d.relative_state(i))
        .collect::<Result<_>>()?;
    let n = support.len();
    let zero = C64::new(0.0, 0.0);
    let system = ComplexMatrix::from_fn(n, n, |p, q| h.system[(support[p], support[q])] * g.entries()[(p, q)]);
    let environment = ComplexMatrix::from_fn(n, n, |p, q| {
        if p == q {
            C64::new(h.environment.expectation(relative[p], relative[p]).re, 0.0)
        } else {
            zero
        }
    });
    let interaction = ComplexMatrix::from_fn(n, n, |p, q| {
        if p != q {
            return zero;
        }
        let i = support[p];
        let e: f64 = relative[p]
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, r)| r.norm_sqr() * h.interaction.frequency(i, j))
            .sum();
        C64::new(e, 0.0)
    });
    Ok(CouplingElements {
        support,
        system,
        environment,
        interaction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEnergy {
    pub index: usize,
    /// `|a_i|²`
    pub weight: f64,
    /// `⟨E_i⟩` of the normalized product `|φ_i R_i⟩`.
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyDecomposition {
    /// `⟨Ψ|H|Ψ⟩`
    pub total: f64,
    pub branches: Vec<BranchEnergy>,
    pub gram_offdiag_max: f64,
}

impl EnergyDecomposition {
    pub fn weighted_branch_sum(&self) -> f64 {
        self.branches.iter().map(|b| b.weight * b.energy).sum()
    }

    pub fn identity_residual(&self) -> f64 {
        (self.total - self.weighted_branch_sum()).abs()
    }

    /// `None` while the branches are not yet orthogonal.
    pub fn identity_holds(&self, ortho_tol: f64, energy_tol: f64) -> Option<bool> {
        (self.gram_offdiag_max <= ortho_tol).then(|| self.identity_residual() <= energy_tol)
    }

    pub fn branch(&self, index: usize) -> Option<&BranchEnergy> {
        self.branches.iter().find(|b| b.index == index)
    }

    /// `ΔE_k = ⟨E⟩ − ⟨E_k⟩` for each supported branch.
    pub fn jumps(&self) -> Vec<(usize, f64)> {
        self.branches.iter().map(|b| (b.index, self.total - b.energy)).collect()
    }
}

/// `H|ψ⟩` without forming the full matrix.
pub fn apply_hamiltonian(h: &BipartiteHamiltonian, psi: &[C64]) -> Result<Vec<C64>> {
    let (ns, ne) = (h.system_dim(), h.env_dim());
    if psi.len() != ns * ne {
        return Err(Error::DimensionMismatch(format!("vector length {} vs {ns}x{ne}", psi.len())));
    }
    let mut out = vec![C64::new(0.0, 0.0); ns * ne];
    for i in 0..ns {
        for j in 0..ne {
            let mut acc = psi[i * ne + j] * h.interaction.frequency(i, j);
            for k in 0..ns {
                acc += h.system[(i, k)] * psi[k * ne + j];
            }
            for l in 0..ne {
                acc += h.environment[(j, l)] * psi[i * ne + l];
            }
            out[i * ne + j] = acc;
        }
    }
    Ok(out)
}

fn expectation(h: &BipartiteHamiltonian, psi: &[C64]) -> Result<f64> {
    let hpsi = apply_hamiltonian(h, psi)?;
    Ok(psi.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum::<C64>().re)
}

pub fn energy_decomposition(s: &PureState, h: &BipartiteHamiltonian) -> Result<EnergyDecomposition> {
    let d = decompose(s, Bipartition::FIRST)?;
    check_dims(h, &d)?;
    let total = expectation(h, s.vector().as_slice())?;
    let ne = d.env_dim();
    let mut branches = Vec::new();
    for i in d.support() {
        let r = d.relative_state(i)?;
        let mut v = vec![C64::new(0.0, 0.0); d.system_dim() * ne];
        v[i * ne..(i + 1) * ne].copy_from_slice(r.as_slice());
        branches.push(BranchEnergy {
            index: i,
            weight: d.amplitudes()[i].norm_sqr(),
            energy: expectation(h, &v)?,
        });
    }
    Ok(EnergyDecomposition {
        total,
        branches,
        gram_offdiag_max: gram(&d).max_offdiag_abs(),
    })
}

/// `H_S`, `H_E` diagonal from the bare frequencies (zero when unset) plus the
/// DEM interaction.
pub fn dem_hamiltonian(sys: &DemSystem) -> BipartiteHamiltonian {
    let diag = |w: Option<&[f64]>, n: usize| match w {
        Some(w) => ComplexMatrix::real_diagonal(w),
        None => ComplexMatrix::zeros(n, n),
    };
    BipartiteHamiltonian {
        system: diag(sys.bare_system(), sys.system_dim()),
        environment: diag(sys.bare_environment(), sys.env_dim()),
        interaction: sys.interaction().clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub time: f64,
    /// `⟨E⟩` of the state retained in this mode.
    pub total: f64,
    /// Observer's branch, once a collapse has happened.
    pub branch: Option<usize>,
    pub branch_energy: Option<f64>,
    /// `⟨E⟩ − ⟨E_k⟩` of the uncollapsed state.
    pub jump: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CollapseEnergy {
    pub time: f64,
    pub outcome: usize,
    pub decomposition: EnergyDecomposition,
}

impl CollapseEnergy {
    /// `Σ_k |a_k|² ΔE_k`, zero when the branch identity holds.
    pub fn mean_jump(&self) -> f64 {
        let d = &self.decomposition;
        d.branches.iter().map(|b| b.weight * (d.total - b.energy)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct EnergyAudit {
    pub mode: CollapseMode,
    pub rows: Vec<AuditRow>,
    pub collapse: CollapseEnergy,
}

impl EnergyAudit {
    /// `max_t |⟨E⟩(t) − ⟨E⟩(0)|`
    pub fn max_drift(&self) -> f64 {
        let e0 = self.rows.first().map_or(0.0, |r| r.total);
        self.rows.iter().map(|r| (r.total - e0).abs()).fold(0.0, f64::max)
    }
}

pub fn conservation_audit(
    sys: &DemSystem,
    times: &[f64],
    collapse_time: f64,
    mode: CollapseMode,
    seed: u64,
) -> Result<EnergyAudit> {
    conservation_audit_with(sys, times, collapse_time, mode, ORTHO_TOL, &mut seeded_rng(seed))
}

/// Evolves the DEM state in the Schrödinger picture, collapsing once at
/// `collapse_time` onto a Born-sampled branch. Subjective mode keeps the full
/// vector; objective mode replaces it by the normalized branch.
pub fn conservation_audit_with<R: Rng + ?Sized>(
    sys: &DemSystem,
    times: &[f64],
    collapse_time: f64,
    mode: CollapseMode,
    ortho_tol: f64,
    rng: &mut R,
) -> Result<EnergyAudit> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("audit times must be sorted".into()));
    }
    let h = dem_hamiltonian(sys);
    let at_collapse = energy_decomposition(&sys.evolve_schrodinger(collapse_time), &h)?;
    if at_collapse.gram_offdiag_max > ortho_tol {
        return Err(Error::NotDecohered {
            time: collapse_time,
            max_offdiag: at_collapse.gram_offdiag_max,
            tolerance: ortho_tol,
        });
    }
    let weights: Vec<f64> = at_collapse.branches.iter().map(|b| b.weight).collect();
    let outcome = at_collapse.branches[sample_index(&weights, rng)].index;
    let collapse = CollapseEnergy {
        time: collapse_time,
        outcome,
        decomposition: at_collapse,
    };
    let ne = sys.env_dim();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let s = sys.evolve_schrodinger(t);
        let d = energy_decomposition(&s, &h)?;
        if t < collapse_time {
            rows.push(AuditRow {
                time: t,
                total: d.total,
                branch: None,
                branch_energy: None,
                jump: None,
            });
            continue;
        }
        let ek = d.branch(outcome).ok_or(Error::UnsupportedIndex(outcome))?.energy;
        let total = match mode {
            CollapseMode::Subjective => d.total,
            // Under the diagonal DEM dynamics the collapsed branch evolves as the
            // projection of the uncollapsed state.
            CollapseMode::Objective => {
                let mut v = vec![C64::new(0.0, 0.0); s.dim()];
                v[outcome * ne..(outcome + 1) * ne].copy_from_slice(&s.vector().as_slice()[outcome * ne..(outcome + 1) * ne]);
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.iter_mut().for_each(|z| *z /= norm);
                expectation(&h, &v)?
            }
        };
        rows.push(AuditRow {
            time: t,
            total,
            branch: Some(outcome),
            branch_energy: Some(ek),
            jump: Some(d.total - ek),
        });
    }
    Ok(EnergyAudit { mode, rows, collapse })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClausiusPair {
    /// `⟨E_k⟩ = −T ln|a_k|²`
    pub energy: f64,
    pub delta_s: f64,
    pub delta_e_over_t: f64,
}

impl ClausiusPair {
    pub fn residual(&self) -> f64 {
        (self.delta_s - self.delta_e_over_t).abs()
    }
}

/// Assigns `⟨E_i⟩ = −T ln|a_i|²` and returns `(ΔS_k, ΔE_k/T)` for each branch.
pub fn clausius_identity(weights: &[f64], temperature: f64) -> Result<Vec<ClausiusPair>> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be positive (got {temperature})")));
    }
    if let Some(k) = weights.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::ZeroWeight(k));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum });
    }
    let energies: Vec<f64> = weights.iter().map(|w| -temperature * w.ln()).collect();
    let mean_energy: f64 = weights.iter().zip(&energies).map(|(w, e)| w * e).sum();
    let mixing: f64 = weights.iter().map(|w| w * w.ln()).sum();
    let pairs: Vec<ClausiusPair> = weights
        .iter()
        .zip(&energies)
        .map(|(w, &e)| ClausiusPair {
            energy: e,
            delta_s: -(mixing - w.ln()),
            delta_e_over_t: (mean_energy - e) / temperature,
        })
        .collect();
    debug_assert!(pairs
        .iter()
        .all(|p| p.residual() <= CLAUSIUS_TOL * p.delta_s.abs().max(1.0)));
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::SpectralProfile;
    use crate::relstate::DiagonalInteraction;

    fn half() -> Vec<C64> {
        vec![C64::new(0.5f64.sqrt(), 0.0); 2]
    }

    #[test]
    fn zero_system_hamiltonian_gives_zero_block() {
        let sys = DemSystem::from_profile(half(), &SpectralProfile::step(0.0, 1.0).unwrap(), 8).unwrap();
        let h = dem_hamiltonian(&sys);
        let d = decompose(&sys.evolve_closed_form(0.3), Bipartition::FIRST).unwrap();
        let c = coupling_elements(&h, &d).unwrap();
        assert_eq!(c.system.max_abs(), 0.0);
        assert!(c.environment.max_abs() == 0.0);
    }

    #[test]
    fn single_branch_has_no_jump() {
        let omega = DiagonalInteraction::new(2, 2, vec![0.3, 0.7, 1.1, 2.0]).unwrap();
        let h = BipartiteHamiltonian::interaction_only(omega);
        let v = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let s = PureState::bipartite(v.into(), 2, 2).unwrap();
        let e = energy_decomposition(&s, &h).unwrap();
        assert_eq!(e.branches.len(), 1);
        assert!((e.total - e.branches[0].energy).abs() < 1e-15);
        assert!(e.jumps()[0].1.abs() < 1e-15);
    }

    #[test]
    fn uniform_weights_give_zero_entropy_change() {
        for pair in clausius_identity(&[0.25; 4], 1.7).unwrap() {
            assert!(pair.delta_s.abs() < 1e-15);
            assert!(pair.delta_e_over_t.abs() < 1e-15);
        }
    }

    #[test]
    fn clausius_quarter_three_quarters() {
        let w = [0.25f64, 0.75];
        let mixing = w[0] * w[0].ln() + w[1] * w[1].ln();
        let pairs = clausius_identity(&w, 1.0).unwrap();
        for (p, wk) in pairs.iter().zip(w) {
            let expected = -(mixing - wk.ln());
            assert!((p.delta_s - expected).abs() < 1e-15);
            assert!(p.residual() < 1e-15);
        }
    }

    #[test]
    fn clausius_rejects_bad_input() {
        assert_eq!(clausius_identity(&[1.0, 0.0], 1.0).unwrap_err(), Error::ZeroWeight(1));
        assert!(matches!(clausius_identity(&[0.5, 0.6], 1.0), Err(Error::NotNormalized { .. })));
        assert!(clausius_identity(&[0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn audit_requires_decoherence_at_collapse() {
        let sys = DemSystem::from_profile(half(), &SpectralProfile::step(0.0, 1.0).unwrap(), 64).unwrap();
        let err = conservation_audit(&sys, &[0.0, 1.0], 0.5, CollapseMode::Objective, 1).unwrap_err();
        assert!(matches!(err, Error::NotDecohered { .. }));
    }
}
