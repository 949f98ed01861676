//! Information gain across collapse epochs, multipartite entropy chains and
//! the partial order of fact sets.

use std::collections::BTreeMap;

use rand::Rng;

use crate::dem::DemSystem;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, CompositeIndex, C64};
use crate::random::{sample_index, seeded_rng};
use crate::relstate::{decompose, gram};
use crate::state::{Bipartition, PureState};

/// Largest off-diagonal `|⟨R_i'|R_i⟩|` accepted at an epoch.
pub const ORTHO_TOL: f64 = 1e-3;
const PROBABILITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseMode {
    /// Keep the full vector; the observer follows one branch.
    Subjective,
    /// Replace the state by the normalized sampled branch.
    Objective,
}

/// A DEM system read out at a sequence of epochs. After each readout the
/// optional `kick` (an `N_S × N_S` unitary on the subsystem) re-prepares a
/// superposition so that later epochs carry fresh information.
#[derive(Debug, Clone)]
pub struct EpochProtocol {
    pub system: DemSystem,
    pub kick: Option<ComplexMatrix>,
    pub ortho_tol: f64,
    /// Decoherence timescale carried into the run as a label.
    pub timescale: Option<f64>,
}

impl EpochProtocol {
    pub fn new(system: DemSystem) -> Self {
        Self {
            system,
            kick: None,
            ortho_tol: ORTHO_TOL,
            timescale: None,
        }
    }

    pub fn with_kick(mut self, kick: ComplexMatrix) -> Result<Self> {
        let n = self.system.system_dim();
        if kick.rows() != n || kick.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "kick is {}x{}, subsystem has {n} levels",
                kick.rows(),
                kick.cols()
            )));
        }
        let dev = kick.unitarity_deviation();
        if dev > 1e-9 {
            return Err(Error::InvalidParameter(format!("kick is not unitary (deviation {dev:e})")));
        }
        self.kick = Some(kick);
        Ok(self)
    }

    pub fn with_timescale(mut self, tau: f64) -> Self {
        self.timescale = Some(tau);
        self
    }

    pub fn with_ortho_tol(mut self, tol: f64) -> Self {
        self.ortho_tol = tol;
        self
    }

    fn evolve(&self, c: &mut [C64], dt: f64) {
        let ne = self.system.env_dim();
        let omega = self.system.interaction();
        for (k, z) in c.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, -omega.frequency(k / ne, k % ne) * dt);
        }
    }

    fn apply_kick(&self, c: &mut Vec<C64>) {
        let Some(u) = &self.kick else { return };
        let (ns, ne) = (self.system.system_dim(), self.system.env_dim());
        let mut out = vec![C64::new(0.0, 0.0); c.len()];
        for k in 0..ns {
            for i in 0..ns {
                let uki = u[(k, i)];
                if uki == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..ne {
                    out[k * ne + j] += uki * c[i * ne + j];
                }
            }
        }
        *c = out;
    }

    fn branch_weights(&self, c: &[C64]) -> Vec<f64> {
        let ne = self.system.env_dim();
        c.chunks(ne)
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    fn project(&self, c: &mut [C64], outcome: usize) {
        let ne = self.system.env_dim();
        for (k, z) in c.iter_mut().enumerate() {
            if k / ne != outcome {
                *z = C64::new(0.0, 0.0);
            }
        }
    }

    fn check_decohered(&self, c: &[C64], time: f64) -> Result<()> {
        let space = CompositeIndex::bipartite(self.system.system_dim(), self.system.env_dim())?;
        let s = PureState::new(ComplexVector::new(c.to_vec()), space)?;
        let max_offdiag = gram(&decompose(&s, Bipartition::FIRST)?).max_offdiag_abs();
        if max_offdiag > self.ortho_tol {
            return Err(Error::NotDecohered {
                time,
                max_offdiag,
                tolerance: self.ortho_tol,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub index: usize,
    pub time: f64,
    pub outcome: usize,
    /// Conditional probability of `outcome` given the earlier outcomes.
    pub probability: f64,
    /// `I(t_n)` in nats.
    pub information: f64,
}

#[derive(Debug, Clone)]
pub struct EpochRun {
    pub mode: CollapseMode,
    pub epochs: Vec<Epoch>,
    /// Decoherence timescale of the profile, when known; metadata only.
    pub timescale: Option<f64>,
    /// Objective mode: the normalized branch. Subjective mode: the full vector.
    pub final_state: Vec<C64>,
    /// The observer's normalized branch at the last epoch.
    pub observer_branch: Vec<C64>,
}

impl EpochRun {
    pub fn outcomes(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.outcome).collect()
    }

    pub fn total_information(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.information)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("no epoch times given".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter("epoch times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("epoch times must be strictly increasing".into()));
    }
    Ok(())
}

fn normalized(c: &[C64]) -> Vec<C64> {
    let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter().map(|z| z / n).collect()
}

pub fn run_epochs(protocol: &EpochProtocol, times: &[f64], mode: CollapseMode, seed: u64) -> Result<EpochRun> {
    run_epochs_with(protocol, times, mode, &mut seeded_rng(seed))
}

/// Runs the protocol drawing outcomes from `rng`.
pub fn run_epochs_with<R: Rng + ?Sized>(
    protocol: &EpochProtocol,
    times: &[f64],
    mode: CollapseMode,
    rng: &mut R,
) -> Result<EpochRun> {
    check_times(times)?;
    let mut full = protocol.system.evolve_closed_form(0.0).vector().clone().into_inner();
    let mut branch = full.clone();
    let mut epochs = Vec::with_capacity(times.len());
    let mut information = 0.0;
    let mut now = 0.0;
    for (index, &time) in times.iter().enumerate() {
        protocol.evolve(&mut branch, time - now);
        if mode == CollapseMode::Subjective {
            protocol.evolve(&mut full, time - now);
        }
        now = time;
        protocol.check_decohered(&branch, time)?;
        let weights = protocol.branch_weights(&branch);
        let total: f64 = weights.iter().sum();
        let outcome = sample_index(&weights, rng);
        let probability = weights[outcome] / total;
        information -= probability.ln();
        epochs.push(Epoch {
            index,
            time,
            outcome,
            probability,
            information,
        });
        protocol.project(&mut branch, outcome);
        branch = normalized(&branch);
        protocol.apply_kick(&mut branch);
        if mode == CollapseMode::Subjective {
            protocol.apply_kick(&mut full);
        }
    }
    let final_state = match mode {
        CollapseMode::Objective => branch.clone(),
        CollapseMode::Subjective => full,
    };
    Ok(EpochRun {
        mode,
        epochs,
        timescale: protocol.timescale,
        final_state,
        observer_branch: branch,
    })
}

/// Born probabilities of every outcome history, from projecting the retained
/// full vector along each branch of the history tree. Histories with zero
/// weight are omitted; the rest are listed in lexicographic order.
pub fn born_joint_distribution(protocol: &EpochProtocol, times: &[f64]) -> Result<Vec<(Vec<usize>, f64)>> {
    check_times(times)?;
    let ns = protocol.system.system_dim();
    let start = protocol.system.evolve_closed_form(0.0).vector().clone().into_inner();
    let mut frontier = vec![(Vec::new(), start, 0.0)];
    for &time in times {
        let mut next = Vec::new();
        for (history, mut c, then) in frontier {
            protocol.evolve(&mut c, time - then);
            for outcome in 0..ns {
                let mut b = c.clone();
                protocol.project(&mut b, outcome);
                if b.iter().map(|z| z.norm_sqr()).sum::<f64>() <= PROBABILITY_FLOOR {
                    continue;
                }
                protocol.apply_kick(&mut b);
                let mut h: Vec<usize> = history.clone();
                h.push(outcome);
                next.push((h, b, time));
            }
        }
        frontier = next;
    }
    Ok(frontier
        .into_iter()
        .map(|(h, c, _)| (h, c.iter().map(|z| z.norm_sqr()).sum()))
        .collect())
}

/// `Ψ = Σ a_{i_1…i_M j} |φ_{i_1}…φ_{i_M} E_j⟩` with the environment last.
#[derive(Debug, Clone)]
pub struct MultipartiteState {
    dims: Vec<usize>,
    env_dim: usize,
    amplitudes: Vec<C64>,
}

impl MultipartiteState {
    pub fn new(dims: Vec<usize>, env_dim: usize, amplitudes: Vec<C64>) -> Result<Self> {
        let mut all = dims.clone();
        all.push(env_dim);
        let space = CompositeIndex::new(all)?;
        if amplitudes.len() != space.total() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for total dimension {}",
                amplitudes.len(),
                space.total()
            )));
        }
        let sum: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self {
            dims,
            env_dim,
            amplitudes,
        })
    }

    /// Treats the last factor of `s` as the environment.
    pub fn from_pure_state(s: &PureState) -> Result<Self> {
        let f = s.space().dims();
        if f.len() < 2 {
            return Err(Error::NotBipartite("need at least one subsystem and an environment".into()));
        }
        Self::new(f[..f.len() - 1].to_vec(), f[f.len() - 1], s.vector().as_slice().to_vec())
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn subsystem_count(&self) -> usize {
        self.dims.len()
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// Joint distribution over the first `k` subsystems, row-major.
    pub fn prefix_distribution(&self, k: usize) -> Result<Vec<f64>> {
        if k > self.dims.len() {
            return Err(Error::BadAssignment(format!(
                "prefix of {k} subsystems out of {}",
                self.dims.len()
            )));
        }
        let outer: usize = self.dims[..k].iter().product();
        let inner = self.amplitudes.len() / outer;
        Ok(self
            .amplitudes
            .chunks(inner)
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect())
    }

    fn digits(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for m in (0..self.dims.len()).rev() {
            out[m] = flat % self.dims[m];
            flat /= self.dims[m];
        }
        out
    }
}

/// `Σ |a|²` over every index not fixed by `fixed` (pairs of subsystem, outcome).
pub fn marginal_probability(m: &MultipartiteState, fixed: &[(usize, usize)]) -> Result<f64> {
    let facts = FactSet::from_pairs(fixed)?;
    facts.validate(m)?;
    let ne = m.env_dim;
    let mut total = 0.0;
    for (flat, block) in m.amplitudes.chunks(ne).enumerate() {
        let d = m.digits(flat);
        if facts.facts.iter().all(|(&s, &o)| d[s] == o) {
            total += block.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    Ok(total)
}

fn shannon_nats(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum()
}

/// `S_{1..k}` for `k = 1..M`, the Shannon entropy of the prefix marginals.
pub fn entropy_chain(m: &MultipartiteState) -> Vec<f64> {
    (1..=m.subsystem_count())
        .map(|k| shannon_nats(&m.prefix_distribution(k).expect("k within range")))
        .collect()
}

/// `I_{1..k} = −ln p(i_1…i_k)` for `k = 1..M` along one outcome string.
pub fn information_chain(m: &MultipartiteState, outcomes: &[usize]) -> Result<Vec<f64>> {
    if outcomes.len() != m.subsystem_count() {
        return Err(Error::BadAssignment(format!(
            "{} outcomes for {} subsystems",
            outcomes.len(),
            m.subsystem_count()
        )));
    }
    let mut pairs = Vec::new();
    let mut out = Vec::with_capacity(outcomes.len());
    for (s, &o) in outcomes.iter().enumerate() {
        pairs.push((s, o));
        out.push(information_of(&FactSet::from_pairs(&pairs)?, m)?);
    }
    Ok(out)
}

/// A set of `(subsystem, outcome)` facts with at most one outcome per subsystem.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactSet {
    facts: BTreeMap<usize, usize>,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        let mut f = Self::new();
        for &(s, o) in pairs {
            f.insert(s, o)?;
        }
        Ok(f)
    }

    pub fn insert(&mut self, subsystem: usize, outcome: usize) -> Result<()> {
        if let Some(prev) = self.facts.insert(subsystem, outcome) {
            self.facts.insert(subsystem, prev);
            return Err(Error::BadAssignment(format!(
                "subsystem {subsystem} already fixed to {prev}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.facts.iter().map(|(&s, &o)| (s, o)).collect()
    }

    pub fn is_subset_of(&self, other: &FactSet) -> bool {
        self.facts.iter().all(|(s, o)| other.facts.get(s) == Some(o))
    }

    /// True when both sets fix some subsystem to different outcomes.
    pub fn conflicts_with(&self, other: &FactSet) -> bool {
        self.facts
            .iter()
            .any(|(s, o)| other.facts.get(s).is_some_and(|p| p != o))
    }

    fn validate(&self, m: &MultipartiteState) -> Result<()> {
        for (&s, &o) in &self.facts {
            let dim = *m.dims.get(s).ok_or_else(|| {
                Error::BadAssignment(format!("subsystem {s} out of {}", m.dims.len()))
            })?;
            if o >= dim {
                return Err(Error::BadAssignment(format!(
                    "outcome {o} out of range for subsystem {s} of dimension {dim}"
                )));
            }
        }
        Ok(())
    }
}

/// `−ln` of the joint probability of the facts.
pub fn information_of(f: &FactSet, m: &MultipartiteState) -> Result<f64> {
    let p = marginal_probability(m, &f.pairs())?;
    if p <= PROBABILITY_FLOOR {
        return Err(Error::ZeroProbabilityFact);
    }
    Ok((-p.ln()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Equal,
    Subset,
    Superset,
    Incomparable,
}

#[derive(Debug, Clone)]
pub struct PairRelation {
    pub left: usize,
    pub right: usize,
    pub relation: Relation,
    pub conflicting: bool,
}

#[derive(Debug, Clone)]
pub struct PosetReport {
    pub information: Vec<f64>,
    pub pairs: Vec<PairRelation>,
    /// `I` is non-decreasing along every inclusion.
    pub monotone: bool,
    /// Every pair fixing one subsystem to different outcomes is incomparable.
    pub conflicts_incomparable: bool,
}

pub fn poset_check(sets: &[FactSet], m: &MultipartiteState) -> Result<PosetReport> {
    let information = sets
        .iter()
        .map(|f| information_of(f, m))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    let mut monotone = true;
    let mut conflicts_incomparable = true;
    for a in 0..sets.len() {
        for b in (a + 1)..sets.len() {
            let sub = sets[a].is_subset_of(&sets[b]);
            let sup = sets[b].is_subset_of(&sets[a]);
            let relation = match (sub, sup) {
                (true, true) => Relation::Equal,
                (true, false) => Relation::Subset,
                (false, true) => Relation::Superset,
                (false, false) => Relation::Incomparable,
            };
            let tol = 1e-12 * information[a].abs().max(information[b].abs()).max(1.0);
            if sub && information[a] > information[b] + tol {
                monotone = false;
            }
            if sup && information[b] > information[a] + tol {
                monotone = false;
            }
            let conflicting = sets[a].conflicts_with(&sets[b]);
            if conflicting && relation != Relation::Incomparable {
                conflicts_incomparable = false;
            }
            pairs.push(PairRelation {
                left: a,
                right: b,
                relation,
                conflicting,
            });
        }
    }
    Ok(PosetReport {
        information,
        pairs,
        monotone,
        conflicts_incomparable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::SpectralProfile;
    use crate::linalg::c64;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn half_half() -> EpochProtocol {
        let p = SpectralProfile::step(0.0, 2.0 * std::f64::consts::PI).unwrap();
        let sys = DemSystem::from_profile(vec![c64(FRAC_1_SQRT_2, 0.0), c64(0.0, FRAC_1_SQRT_2)], &p, 64).unwrap();
        EpochProtocol::new(sys)
    }

    #[test]
    fn single_fair_epoch_gains_ln2() {
        let run = run_epochs(&half_half(), &[1.0], CollapseMode::Objective, 5).unwrap();
        assert!((run.epochs[0].information - LN_2).abs() < 1e-12);
    }

    #[test]
    fn certain_outcome_gains_nothing() {
        let run = run_epochs(&half_half(), &[1.0, 2.0], CollapseMode::Objective, 5).unwrap();
        assert_eq!(run.epochs[1].outcome, run.epochs[0].outcome);
        assert!((run.epochs[1].probability - 1.0).abs() < 1e-12);
        assert!((run.epochs[1].information - run.epochs[0].information).abs() < 1e-12);
    }

    #[test]
    fn early_epoch_is_rejected() {
        let err = run_epochs(&half_half(), &[0.5], CollapseMode::Subjective, 1).unwrap_err();
        match err {
            Error::NotDecohered { max_offdiag, tolerance, .. } => {
                assert!(max_offdiag > tolerance);
                assert!((max_offdiag - 2.0 / std::f64::consts::PI).abs() < 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn epoch_times_must_increase() {
        for times in [vec![2.0, 1.0], vec![1.0, 1.0], vec![]] {
            assert!(matches!(
                run_epochs(&half_half(), &times, CollapseMode::Objective, 0),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn kick_must_be_unitary() {
        let bad = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(half_half().with_kick(bad).is_err());
    }

    fn ghz() -> MultipartiteState {
        let mut a = vec![c64(0.0, 0.0); 16];
        a[0] = c64(FRAC_1_SQRT_2, 0.0);
        a[15] = c64(FRAC_1_SQRT_2, 0.0);
        MultipartiteState::new(vec![2, 2, 2], 2, a).unwrap()
    }

    #[test]
    fn correlated_chain_is_flat() {
        for s in entropy_chain(&ghz()) {
            assert!((s - LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_product_chain_grows_by_ln2() {
        let m = MultipartiteState::new(vec![2, 2, 2], 1, vec![c64(8f64.sqrt().recip(), 0.0); 8]).unwrap();
        let chain = entropy_chain(&m);
        for (k, s) in chain.iter().enumerate() {
            assert!((s - (k + 1) as f64 * LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_and_information() {
        let m = ghz();
        assert!((marginal_probability(&m, &[]).unwrap() - 1.0).abs() < 1e-15);
        assert!((marginal_probability(&m, &[(0, 1)]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(information_of(&FactSet::new(), &m).unwrap(), 0.0);
        let f = FactSet::from_pairs(&[(1, 0)]).unwrap();
        assert!((information_of(&f, &m).unwrap() - LN_2).abs() < 1e-12);
        let impossible = FactSet::from_pairs(&[(0, 0), (1, 1)]).unwrap();
        assert_eq!(information_of(&impossible, &m), Err(Error::ZeroProbabilityFact));
        assert!(matches!(marginal_probability(&m, &[(3, 0)]), Err(Error::BadAssignment(_))));
        assert!(matches!(marginal_probability(&m, &[(0, 2)]), Err(Error::BadAssignment(_))));
        assert!(matches!(FactSet::from_pairs(&[(0, 0), (0, 1)]), Err(Error::BadAssignment(_))));
    }

    #[test]
    fn poset_relations() {
        let m = MultipartiteState::new(vec![2, 2], 1, vec![c64(0.5, 0.0); 4]).unwrap();
        let sets = vec![
            FactSet::from_pairs(&[(0, 0)]).unwrap(),
            FactSet::from_pairs(&[(0, 0), (1, 1)]).unwrap(),
            FactSet::from_pairs(&[(0, 1)]).unwrap(),
        ];
        let r = poset_check(&sets, &m).unwrap();
        assert_eq!(r.pairs[0].relation, Relation::Subset);
        assert_eq!(r.pairs[1].relation, Relation::Incomparable);
        assert!(r.pairs[1].conflicting);
        assert!(r.monotone && r.conflicts_incomparable);
    }
}
