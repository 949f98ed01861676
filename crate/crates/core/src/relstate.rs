//! Everett relative-state decomposition of a bipartite pure state.
//!
//! For `|Ψ⟩ = Σ_ij a_ij |φ_i⟩⊗|E_j⟩` the marginal amplitude is
//! `a_i = |a_i|·exp(i·arg a_ij*)`, where `j*` is the first environment index
//! with `|a_ij| > AMPLITUDE_FLOOR`, and the relative state is
//! `|R_i⟩ = Σ_j (a_ij / a_i) |E_j⟩`. Indices whose marginal falls below the
//! floor are outside the support and have no relative state.

use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, ComplexVector, CompositeIndex, UnitaryPropagator, C64};
use crate::state::{density_from_pure, partial_trace, Bipartition, DensityMatrix, PureState};

pub const AMPLITUDE_FLOOR: f64 = 1e-12;
/// Gram entries smaller than this are skipped by the log-derivative check.
pub const LOG_DERIVATIVE_FLOOR: f64 = 1e-6;
const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RelativeStateDecomposition {
    amplitudes: Vec<C64>,
    relative: Vec<Option<ComplexVector>>,
    env_dim: usize,
}

impl RelativeStateDecomposition {
    pub fn system_dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    /// Marginal amplitudes `a_i`; zero outside the support.
    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn is_supported(&self, i: usize) -> bool {
        self.relative.get(i).is_some_and(|r| r.is_some())
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.system_dim()).filter(|&i| self.is_supported(i)).collect()
    }

    pub fn relative_state(&self, i: usize) -> Result<&ComplexVector> {
        self.relative
            .get(i)
            .and_then(|r| r.as_ref())
            .ok_or(Error::UnsupportedIndex(i))
    }

    /// `Σ_i a_i |φ_i⟩⊗|R_i⟩`
    pub fn reconstruct(&self) -> ComplexVector {
        let mut out = ComplexVector::zeros(self.system_dim() * self.env_dim);
        for (i, (a, r)) in self.amplitudes.iter().zip(&self.relative).enumerate() {
            if let Some(r) = r {
                for j in 0..self.env_dim {
                    out[i * self.env_dim + j] = a * r[j];
                }
            }
        }
        out
    }
}

/// Relative-state decomposition of `s` with the system on the left of `split`.
pub fn decompose(s: &PureState, split: Bipartition) -> Result<RelativeStateDecomposition> {
    let m = s.amplitude_matrix(split)?;
    let (ns, ne) = (m.rows(), m.cols());
    let mut amplitudes = Vec::with_capacity(ns);
    let mut relative = Vec::with_capacity(ns);
    for i in 0..ns {
        let row: Vec<C64> = (0..ne).map(|j| m[(i, j)]).collect();
        let modulus = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if modulus < AMPLITUDE_FLOOR {
            amplitudes.push(C64::new(0.0, 0.0));
            relative.push(None);
            continue;
        }
        let lead = row
            .iter()
            .find(|z| z.norm() > AMPLITUDE_FLOOR)
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let a = C64::from_polar(modulus, lead.arg());
        amplitudes.push(a);
        relative.push(Some(ComplexVector::new(row.iter().map(|z| z / a).collect())));
    }
    Ok(RelativeStateDecomposition {
        amplitudes,
        relative,
        env_dim: ne,
    })
}

/// Inner products `g[i'][i] = ⟨R_i'|R_i⟩` over the supported indices.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    system_dim: usize,
    support: Vec<usize>,
    entries: ComplexMatrix,
}

impl GramMatrix {
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Entries indexed by position in [`Self::support`].
    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }

    fn position(&self, i: usize) -> Result<usize> {
        self.support
            .iter()
            .position(|&k| k == i)
            .ok_or(Error::UnsupportedIndex(i))
    }

    /// `⟨R_i'|R_i⟩` for system indices `i'`, `i`.
    pub fn get(&self, i_prime: usize, i: usize) -> Result<C64> {
        if i_prime >= self.system_dim || i >= self.system_dim {
            return Err(Error::UnsupportedIndex(i_prime.max(i)));
        }
        Ok(self.entries[(self.position(i_prime)?, self.position(i)?)])
    }

    pub fn max_offdiag_abs(&self) -> f64 {
        self.entries.max_offdiag_abs()
    }
}

pub fn gram(d: &RelativeStateDecomposition) -> GramMatrix {
    let support = d.support();
    let vecs: Vec<&ComplexVector> = support
        .iter()
        .map(|&i| d.relative_state(i).expect("supported index"))
        .collect();
    let n = support.len();
    let mut entries = ComplexMatrix::zeros(n, n);
    for a in 0..n {
        entries[(a, a)] = C64::new(vecs[a].norm_sqr(), 0.0);
        for b in (a + 1)..n {
            let z = vecs[a].inner(vecs[b]);
            entries[(a, b)] = z;
            entries[(b, a)] = z.conj();
        }
    }
    for a in 0..n {
        assert!(
            (entries[(a, a)].re - 1.0).abs() <= 1e-10,
            "relative state {} has norm² {}",
            support[a],
            entries[(a, a)].re
        );
    }
    assert!(
        entries.as_slice().iter().all(|z| z.norm() <= 1.0 + 1e-10),
        "Gram entry exceeds the Cauchy-Schwarz bound"
    );
    GramMatrix {
        system_dim: d.system_dim(),
        support,
        entries,
    }
}

/// `ρ_S[i][i'] = a_i a*_i' ⟨R_i'|R_i⟩`
pub fn reduced_rho_via_gram(d: &RelativeStateDecomposition, g: &GramMatrix) -> Result<DensityMatrix> {
    let ns = d.system_dim();
    let mut m = ComplexMatrix::zeros(ns, ns);
    for (p, &i) in g.support().iter().enumerate() {
        for (q, &ip) in g.support().iter().enumerate() {
            m[(i, ip)] = d.amplitudes[i] * d.amplitudes[ip].conj() * g.entries[(q, p)];
        }
    }
    DensityMatrix::checked_structure(m, CompositeIndex::new(vec![ns])?)
}

/// Interaction diagonal in the product basis: `H_SE = Σ_ij ω_ij |φ_i E_j⟩⟨φ_i E_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalInteraction {
    system_dim: usize,
    env_dim: usize,
    frequencies: Vec<f64>,
}

impl DiagonalInteraction {
    /// `frequencies` is the row-major `system_dim × env_dim` table of `ω_ij`.
    pub fn new(system_dim: usize, env_dim: usize, frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.len() != system_dim * env_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} interaction frequencies for a {system_dim}x{env_dim} system",
                frequencies.len()
            )));
        }
        if frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "interaction frequencies must be finite".into(),
            ));
        }
        Ok(Self {
            system_dim,
            env_dim,
            frequencies,
        })
    }

    pub fn zero(system_dim: usize, env_dim: usize) -> Self {
        Self {
            system_dim,
            env_dim,
            frequencies: vec![0.0; system_dim * env_dim],
        }
    }

    /// Extracts `ω_ij` from a full `(N_S·N_E)`-square operator, rejecting any
    /// off-diagonal coupling.
    pub fn from_full_matrix(h: &ComplexMatrix, system_dim: usize, env_dim: usize) -> Result<Self> {
        let n = system_dim * env_dim;
        if h.rows() != n || h.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator for a {system_dim}x{env_dim} system",
                h.rows(),
                h.cols()
            )));
        }
        let max_offdiag = h.max_offdiag_abs();
        let max_imag = (0..n).map(|k| h[(k, k)].im.abs()).fold(0.0, f64::max);
        let tol = DIAGONAL_TOL * h.max_abs().max(1.0);
        if max_offdiag > tol || max_imag > tol {
            return Err(Error::NotDiagonalInteraction {
                max_offdiag: max_offdiag.max(max_imag),
            });
        }
        Self::new(system_dim, env_dim, (0..n).map(|k| h[(k, k)].re).collect())
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn frequency(&self, i: usize, j: usize) -> f64 {
        self.frequencies[i * self.env_dim + j]
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::real_diagonal(&self.frequencies)
    }
}

/// `H = H_S⊗I + I⊗H_E + H_SE` with a diagonal interaction.
#[derive(Debug, Clone)]
pub struct BipartiteHamiltonian {
    pub system: ComplexMatrix,
    pub environment: ComplexMatrix,
    pub interaction: DiagonalInteraction,
}

impl BipartiteHamiltonian {
    pub fn new(
        system: ComplexMatrix,
        environment: ComplexMatrix,
        interaction: DiagonalInteraction,
    ) -> Result<Self> {
        for (name, m, dim) in [
            ("system", &system, interaction.system_dim),
            ("environment", &environment, interaction.env_dim),
        ] {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{name} Hamiltonian is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
            let dev = m.hermitian_deviation();
            let tol = crate::linalg::HERMITICITY_TOLERANCE * m.max_abs();
            if dev > tol {
                return Err(Error::NotHermitian {
                    deviation: dev,
                    tolerance: tol,
                });
            }
        }
        Ok(Self {
            system,
            environment,
            interaction,
        })
    }

    /// Pure interaction, no bare dynamics.
    pub fn interaction_only(interaction: DiagonalInteraction) -> Self {
        let (ns, ne) = (interaction.system_dim, interaction.env_dim);
        Self {
            system: ComplexMatrix::zeros(ns, ns),
            environment: ComplexMatrix::zeros(ne, ne),
            interaction,
        }
    }

    pub fn system_dim(&self) -> usize {
        self.interaction.system_dim
    }

    pub fn env_dim(&self) -> usize {
        self.interaction.env_dim
    }

    pub fn system_part(&self) -> Result<ComplexMatrix> {
        kron(&self.system, &ComplexMatrix::identity(self.env_dim()))
    }

    pub fn environment_part(&self) -> Result<ComplexMatrix> {
        kron(&ComplexMatrix::identity(self.system_dim()), &self.environment)
    }

    pub fn full(&self) -> Result<ComplexMatrix> {
        Ok(self
            .system_part()?
            .add(&self.environment_part()?)
            .add(&self.interaction.to_matrix()))
    }
}

/// Outcome of a single finite-difference check of the reduced-density-matrix
/// evolution law.
#[derive(Debug, Clone)]
pub struct DrhoCheck {
    /// `max_ij |Δρ_ij/Δt − rhs_ij|` over the included entries.
    pub residual: f64,
    /// Entries skipped because `|⟨R_j|R_i⟩| < LOG_DERIVATIVE_FLOOR`.
    pub excluded: usize,
    /// `max |ρ_ij · d/dt ln⟨R_j|R_i⟩|`, the size of the non-unitary term.
    pub non_unitary_max: f64,
    pub commutator_max: f64,
}

/// A tenth-of-a-thousandth of the shortest period of the full Hamiltonian.
pub fn default_dt(h: &BipartiteHamiltonian) -> Result<f64> {
    let prop = UnitaryPropagator::new(&h.full()?)?;
    let v = &prop.eigen().values;
    let spread = v.last().copied().unwrap_or(0.0) - v.first().copied().unwrap_or(0.0);
    Ok(if spread > 0.0 {
        1e-4 * 2.0 * std::f64::consts::PI / spread
    } else {
        1e-4
    })
}

/// Compares the central difference `(ρ_S(t+dt) − ρ_S(t−dt)) / 2dt` of the
/// exactly evolved reduced density matrix against
/// `−i[H_S, ρ_S]_ij + ρ_ij · d/dt ln⟨R_j|R_i⟩`.
///
/// The log-derivative uses the relative-state flow
/// `d|R_i⟩/dt = −i(H_E + H_SE^i)|R_i⟩`, so
/// `d/dt⟨R_j|R_i⟩ = i Σ_k R*_jk R_ik (ω_jk − ω_ik)`.
pub fn drho_dt_residual(h: &BipartiteHamiltonian, s0: &PureState, t: f64, dt: f64) -> Result<DrhoCheck> {
    let prop = UnitaryPropagator::new(&h.full()?)?;
    drho_dt_residual_with(&prop, h, s0, t, dt)
}

fn drho_dt_residual_with(
    prop: &UnitaryPropagator,
    h: &BipartiteHamiltonian,
    s0: &PureState,
    t: f64,
    dt: f64,
) -> Result<DrhoCheck> {
    let (ns, ne) = Bipartition::FIRST.dims(s0.space())?;
    if ns != h.system_dim() || ne != h.env_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state is {ns}x{ne}, Hamiltonian is {}x{}",
            h.system_dim(),
            h.env_dim()
        )));
    }
    let evolve = |time: f64| -> Result<PureState> {
        PureState::new(prop.apply(s0.vector(), time), s0.space().clone())
    };
    let reduced = |s: &PureState| partial_trace(&density_from_pure(s), &[0]);
    let plus = reduced(&evolve(t + dt)?)?;
    let minus = reduced(&evolve(t - dt)?)?;
    let fd = plus
        .matrix()
        .sub(minus.matrix())
        .scale(C64::new(0.5 / dt, 0.0));

    let now = evolve(t)?;
    let d = decompose(&now, Bipartition::FIRST)?;
    if let Some(index) = (0..ns).find(|&i| !d.is_supported(i)) {
        return Err(Error::VanishingAmplitude { index, time: t });
    }
    let g = gram(&d);
    let rho = reduced_rho_via_gram(&d, &g)?;
    let comm = h
        .system
        .commutator(rho.matrix())
        .scale(C64::new(0.0, -1.0));

    let omega = &h.interaction;
    let mut residual: f64 = 0.0;
    let mut excluded = 0;
    let mut non_unitary_max: f64 = 0.0;
    for i in 0..ns {
        let ri = d.relative_state(i)?;
        for j in 0..ns {
            let rj = d.relative_state(j)?;
            let g_ji = g.get(j, i)?;
            if g_ji.norm() < LOG_DERIVATIVE_FLOOR {
                excluded += 1;
                continue;
            }
            let mut dg = C64::new(0.0, 0.0);
            for k in 0..ne {
                dg += rj[k].conj() * ri[k] * (omega.frequency(j, k) - omega.frequency(i, k));
            }
            dg *= C64::new(0.0, 1.0);
            let non_unitary = rho.matrix()[(i, j)] * (dg / g_ji);
            non_unitary_max = non_unitary_max.max(non_unitary.norm());
            let rhs = comm[(i, j)] + non_unitary;
            residual = residual.max((fd[(i, j)] - rhs).norm());
        }
    }
    Ok(DrhoCheck {
        residual,
        excluded,
        non_unitary_max,
        commutator_max: comm.max_abs(),
    })
}

/// Residuals at `dt` and `dt/2` and their ratio; a second-order law gives ≈ 4.
#[derive(Debug, Clone)]
pub struct RichardsonCheck {
    pub coarse: DrhoCheck,
    pub fine: DrhoCheck,
    pub ratio: f64,
}

pub fn drho_dt_richardson(h: &BipartiteHamiltonian, s0: &PureState, t: f64, dt: f64) -> Result<RichardsonCheck> {
    let prop = UnitaryPropagator::new(&h.full()?)?;
    let coarse = drho_dt_residual_with(&prop, h, s0, t, dt)?;
    let fine = drho_dt_residual_with(&prop, h, s0, t, dt / 2.0)?;
    let ratio = coarse.residual / fine.residual;
    Ok(RichardsonCheck { coarse, fine, ratio })
}
