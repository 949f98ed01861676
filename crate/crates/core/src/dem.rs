//! Diagonal energy model.
//!
//! The interaction `H_SE = Σ_ij ω_ij |φ_i E_j⟩⟨φ_i E_j|` only imprints phases,
//! so from a product start `Σ_i a_i|φ_i⟩ ⊗ Σ_j b_j|E_j⟩` the interaction-picture
//! amplitudes are `a_ij(t) = a_i b_j exp(−i ω_ij t)` and the relative states
//! overlap as `⟨R_i'|R_i⟩ = Σ_j |b_j|² exp(i(ω_i'j − ω_ij)t)`.
//!
//! Profiles generate `ω_ij = i · f_j` from a frequency table `f_j` with weights
//! `|b_j|²`, so pairwise differences are `(i' − i)` times a profile draw.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, CompositeIndex, C64};
use crate::relstate::{DiagonalInteraction, AMPLITUDE_FLOOR};
use crate::state::{entropy_from_eigenvalues, DensityMatrix, PureState};

const NORM_TOL: f64 = 1e-12;
const SINC_SERIES_CUTOFF: f64 = 1e-4;
/// Default thermal truncation in units of `1/τ`.
pub const THERMAL_CUTOFF: f64 = 20.0;

/// `sin(x)/x`, with the Taylor series near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `exp(iΩ₀t) · sinc(Ωt/2)`
pub fn envelope_step(bandwidth: f64, center: f64, t: f64) -> C64 {
    C64::from_polar(sinc(bandwidth * t / 2.0), center * t)
}

/// `exp(i·atan(t/τ)) / sqrt(1 + t²/τ²)`, which equals `1/(1 − it/τ)`.
pub fn envelope_thermal(tau: f64, t: f64) -> C64 {
    let x = t / tau;
    C64::from_polar(1.0 / (1.0 + x * x).sqrt(), x.atan())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThermalBinning {
    /// Midpoints of a uniform frequency grid on `[0, cutoff]`, weighted by the
    /// normalized Boltzmann factor.
    #[default]
    UniformGrid,
    /// Equal-probability-mass bins, each represented by its median frequency.
    EqualMass,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralProfile {
    /// Flat band of width `bandwidth` centred on `center`.
    Step { center: f64, bandwidth: f64 },
    /// Weight `∝ exp(−ωτ)`; frequencies are multiplied by `scale` and
    /// truncated at `cutoff / τ`.
    Thermal {
        tau: f64,
        scale: f64,
        cutoff: f64,
        binning: ThermalBinning,
    },
    /// Discrete `(frequency, weight)` table.
    Explicit { frequencies: Vec<f64>, weights: Vec<f64> },
}

impl SpectralProfile {
    pub fn step(center: f64, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() || !center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step profile needs a finite bandwidth > 0 (got {bandwidth})"
            )));
        }
        Ok(Self::Step { center, bandwidth })
    }

    pub fn thermal(tau: f64) -> Result<Self> {
        Self::thermal_with(tau, 1.0, THERMAL_CUTOFF, ThermalBinning::default())
    }

    pub fn thermal_with(tau: f64, scale: f64, cutoff: f64, binning: ThermalBinning) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("thermal profile needs τ > 0 (got {tau})")));
        }
        if !(scale > 0.0) || !(cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "thermal scale and cutoff must be positive (got {scale}, {cutoff})"
            )));
        }
        Ok(Self::Thermal {
            tau,
            scale,
            cutoff,
            binning,
        })
    }

    pub fn explicit(frequencies: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if frequencies.len() != weights.len() || frequencies.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies and {} weights",
                frequencies.len(),
                weights.len()
            )));
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
            return Err(Error::NegativeProbability { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        if frequencies.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("frequencies must be finite".into()));
        }
        Ok(Self::Explicit { frequencies, weights })
    }

    /// Decoherence time: `2π/Ω` for the step, `τ/scale` for the thermal profile.
    pub fn timescale(&self) -> Option<f64> {
        match self {
            Self::Step { bandwidth, .. } => Some(2.0 * PI / bandwidth),
            Self::Thermal { tau, scale, .. } => Some(tau / scale),
            Self::Explicit { .. } => None,
        }
    }

    /// Frequencies `f_j` and weights `|b_j|²` of a `j_count`-term discretization.
    /// Explicit profiles ignore `j_count`.
    pub fn discretize(&self, j_count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if j_count < 2 && !matches!(self, Self::Explicit { .. }) {
            return Err(Error::InvalidParameter(format!(
                "need at least two environment levels (got {j_count})"
            )));
        }
        let jf = j_count as f64;
        Ok(match self {
            Self::Step { center, bandwidth } => (
                (0..j_count)
                    .map(|j| center + bandwidth * ((j as f64 + 0.5) / jf - 0.5))
                    .collect(),
                vec![1.0 / jf; j_count],
            ),
            Self::Thermal {
                tau,
                scale,
                cutoff,
                binning,
            } => {
                let w_max = cutoff / tau;
                match binning {
                    ThermalBinning::UniformGrid => {
                        let dw = w_max / jf;
                        let omegas: Vec<f64> = (0..j_count).map(|j| (j as f64 + 0.5) * dw).collect();
                        let raw: Vec<f64> = omegas.iter().map(|w| (-w * tau).exp()).collect();
                        let total: f64 = raw.iter().sum();
                        (
                            omegas.iter().map(|w| w * scale).collect(),
                            raw.iter().map(|r| r / total).collect(),
                        )
                    }
                    ThermalBinning::EqualMass => {
                        let mass = -(-cutoff).exp_m1();
                        let omegas = (0..j_count).map(|j| {
                            let u = (j as f64 + 0.5) / jf * mass;
                            -(-u).ln_1p() / tau
                        });
                        (omegas.map(|w| w * scale).collect(), vec![1.0 / jf; j_count])
                    }
                }
            }
            Self::Explicit { frequencies, weights } => (frequencies.clone(), weights.clone()),
        })
    }

    /// Continuum limit of `Σ_j |b_j|² exp(i f_j t)`.
    pub fn continuum_envelope(&self, t: f64) -> Option<C64> {
        match self {
            Self::Step { center, bandwidth } => Some(envelope_step(*bandwidth, *center, t)),
            Self::Thermal { tau, scale, .. } => Some(envelope_thermal(tau / scale, t)),
            Self::Explicit { .. } => None,
        }
    }
}

/// `Σ_j w_j exp(i f_j t)`
pub fn discrete_envelope(frequencies: &[f64], weights: &[f64], t: f64) -> C64 {
    frequencies
        .iter()
        .zip(weights)
        .map(|(f, w)| C64::from_polar(*w, f * t))
        .sum()
}

/// `|discrete J-term sum − continuum envelope|` at time `t`.
pub fn discretization_error(profile: &SpectralProfile, j_count: usize, t: f64) -> Result<f64> {
    let continuum = profile.continuum_envelope(t).ok_or_else(|| {
        Error::InvalidParameter("discretization error needs a step or thermal profile".into())
    })?;
    let (f, w) = profile.discretize(j_count)?;
    Ok((discrete_envelope(&f, &w, t) - continuum).norm())
}

#[derive(Debug, Clone)]
pub struct DemSystem {
    subsystem: Vec<C64>,
    environment: Vec<C64>,
    interaction: DiagonalInteraction,
    bare_system: Option<Vec<f64>>,
    bare_environment: Option<Vec<f64>>,
}

fn check_normalized(v: &[C64]) -> Result<()> {
    let sum: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { sum });
    }
    Ok(())
}

impl DemSystem {
    pub fn new(subsystem: Vec<C64>, environment: Vec<C64>, interaction: DiagonalInteraction) -> Result<Self> {
        check_normalized(&subsystem)?;
        check_normalized(&environment)?;
        if interaction.system_dim() != subsystem.len() || interaction.env_dim() != environment.len() {
            return Err(Error::DimensionMismatch(format!(
                "amplitudes {}x{} vs interaction {}x{}",
                subsystem.len(),
                environment.len(),
                interaction.system_dim(),
                interaction.env_dim()
            )));
        }
        Ok(Self {
            subsystem,
            environment,
            interaction,
            bare_system: None,
            bare_environment: None,
        })
    }

    /// Builds `ω_ij = i · f_j` and `b_j = sqrt(w_j)` from a profile discretized
    /// into `j_count` levels.
    pub fn from_profile(subsystem: Vec<C64>, profile: &SpectralProfile, j_count: usize) -> Result<Self> {
        let (f, w) = profile.discretize(j_count)?;
        let ns = subsystem.len();
        let ne = f.len();
        let omega = (0..ns)
            .flat_map(|i| f.iter().map(move |fj| i as f64 * fj))
            .collect();
        let env = w.iter().map(|w| C64::new(w.sqrt(), 0.0)).collect();
        Self::new(subsystem, env, DiagonalInteraction::new(ns, ne, omega)?)
    }

    /// Adds bare level frequencies `ω_i^S`, `ω_j^E` for Schrödinger-picture output.
    pub fn with_bare_frequencies(mut self, system: Vec<f64>, environment: Vec<f64>) -> Result<Self> {
        if system.len() != self.system_dim() || environment.len() != self.env_dim() {
            return Err(Error::DimensionMismatch("bare frequency list lengths".into()));
        }
        self.bare_system = Some(system);
        self.bare_environment = Some(environment);
        Ok(self)
    }

    pub fn system_dim(&self) -> usize {
        self.subsystem.len()
    }

    pub fn env_dim(&self) -> usize {
        self.environment.len()
    }

    pub fn subsystem_amplitudes(&self) -> &[C64] {
        &self.subsystem
    }

    pub fn environment_amplitudes(&self) -> &[C64] {
        &self.environment
    }

    pub fn interaction(&self) -> &DiagonalInteraction {
        &self.interaction
    }

    pub fn bare_system(&self) -> Option<&[f64]> {
        self.bare_system.as_deref()
    }

    pub fn bare_environment(&self) -> Option<&[f64]> {
        self.bare_environment.as_deref()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.subsystem.iter().map(|a| a.norm_sqr()).collect()
    }

    fn space(&self) -> CompositeIndex {
        CompositeIndex::bipartite(self.system_dim(), self.env_dim()).expect("validated dimensions")
    }

    fn amplitudes_with(&self, t: f64, bare: bool) -> Vec<C64> {
        let ne = self.env_dim();
        let mut out = Vec::with_capacity(self.system_dim() * ne);
        for (i, a) in self.subsystem.iter().enumerate() {
            let wi = if bare {
                self.bare_system.as_ref().map_or(0.0, |w| w[i])
            } else {
                0.0
            };
            for (j, b) in self.environment.iter().enumerate() {
                let wj = if bare {
                    self.bare_environment.as_ref().map_or(0.0, |w| w[j])
                } else {
                    0.0
                };
                let phase = -(wi + wj + self.interaction.frequency(i, j)) * t;
                out.push(a * b * C64::from_polar(1.0, phase));
            }
        }
        out
    }

    /// Interaction-picture state `a_i b_j exp(−i ω_ij t)`.
    pub fn evolve_closed_form(&self, t: f64) -> PureState {
        PureState::new(self.amplitudes_with(t, false).into(), self.space())
            .expect("phase evolution preserves the norm")
    }

    /// Schrödinger-picture state including bare frequencies, when set.
    pub fn evolve_schrodinger(&self, t: f64) -> PureState {
        PureState::new(self.amplitudes_with(t, true).into(), self.space())
            .expect("phase evolution preserves the norm")
    }

    fn check_supported(&self, i: usize) -> Result<()> {
        match self.subsystem.get(i) {
            Some(a) if a.norm() >= AMPLITUDE_FLOOR => Ok(()),
            _ => Err(Error::UnsupportedIndex(i)),
        }
    }

    /// `⟨R_i'|R_i⟩(t) = Σ_j |b_j|² exp(i(ω_i'j − ω_ij)t)`
    pub fn gram_closed_form(&self, i_prime: usize, i: usize, t: f64) -> Result<C64> {
        self.check_supported(i_prime)?;
        self.check_supported(i)?;
        if i_prime == i {
            return Ok(C64::new(1.0, 0.0));
        }
        Ok(self
            .environment
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let dw = self.interaction.frequency(i_prime, j) - self.interaction.frequency(i, j);
                C64::from_polar(b.norm_sqr(), dw * t)
            })
            .sum())
    }

    /// `ρ_S[i][i'] = a_i a*_i' ⟨R_i'|R_i⟩`; unsupported rows and columns are zero.
    pub fn reduced_rho(&self, t: f64) -> Result<DensityMatrix> {
        let ns = self.system_dim();
        let mut m = ComplexMatrix::zeros(ns, ns);
        let support: Vec<usize> = (0..ns).filter(|&i| self.check_supported(i).is_ok()).collect();
        for &i in &support {
            for &ip in &support {
                m[(i, ip)] = self.subsystem[i] * self.subsystem[ip].conj() * self.gram_closed_form(ip, i, t)?;
            }
        }
        DensityMatrix::checked_structure(m, CompositeIndex::simple(ns))
    }

    /// `S(ρ_S(t))` in nats.
    pub fn system_entropy(&self, t: f64) -> Result<f64> {
        entropy_from_eigenvalues(&self.reduced_rho(t)?.eigenvalues()?)
    }

    /// `S(ρ_E(t))` from the Gram matrix of the unnormalized branches
    /// `a_i|R_i⟩`, which shares the nonzero spectrum of `ρ_E`.
    pub fn environment_entropy(&self, t: f64) -> Result<f64> {
        let ns = self.system_dim();
        let mut k = ComplexMatrix::zeros(ns, ns);
        for i in 0..ns {
            for ip in 0..ns {
                if self.check_supported(i).is_ok() && self.check_supported(ip).is_ok() {
                    k[(ip, i)] = self.subsystem[ip].conj() * self.subsystem[i] * self.gram_closed_form(ip, i, t)?;
                }
            }
        }
        let eig = crate::linalg::hermitian_eig(&k)?;
        entropy_from_eigenvalues(&eig.values)
    }

    /// `−Σ|a_i|² ln|a_i|²`, the fully decohered limit.
    pub fn classical_entropy(&self) -> f64 {
        self.weights()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }
}

/// A local maximum of `|⟨R_i'|R_i⟩|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Revival {
    pub time: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct RecurrenceReport {
    /// First sampled time with `|g| < 0.5`, if any.
    pub first_decay: Option<f64>,
    /// Local maxima after `first_decay`, in time order.
    pub maxima: Vec<Revival>,
}

impl RecurrenceReport {
    pub fn first_revival_above(&self, threshold: f64) -> Option<Revival> {
        self.maxima.iter().copied().find(|r| r.magnitude > threshold)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.maxima.iter().map(|r| r.magnitude).fold(0.0, f64::max)
    }
}

/// Scans `|⟨R_i'|R_i⟩(t)|` on `samples` points of `[0, t_max]` and refines each
/// local maximum after the first decay by golden-section search.
pub fn recurrence_scan(
    sys: &DemSystem,
    i_prime: usize,
    i: usize,
    t_max: f64,
    samples: usize,
) -> Result<RecurrenceReport> {
    if samples < 3 || !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "recurrence scan needs t_max > 0 and at least 3 samples (got {t_max}, {samples})"
        )));
    }
    let mag = |t: f64| sys.gram_closed_form(i_prime, i, t).map(|z| z.norm());
    let dt = t_max / (samples - 1) as f64;
    let values: Vec<f64> = (0..samples).map(|k| mag(k as f64 * dt)).collect::<Result<_>>()?;
    let start = values.iter().position(|&v| v < 0.5);
    let mut maxima = Vec::new();
    if let Some(s) = start {
        for k in (s + 1)..(samples - 1) {
            if values[k] >= values[k - 1] && values[k] > values[k + 1] {
                let (time, magnitude) = golden_max(&mag, (k - 1) as f64 * dt, (k + 1) as f64 * dt)?;
                maxima.push(Revival { time, magnitude });
            }
        }
    }
    Ok(RecurrenceReport {
        first_decay: start.map(|s| s as f64 * dt),
        maxima,
    })
}

fn golden_max(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if (b - a).abs() < 1e-12 * b.abs().max(1.0) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let t = 0.5 * (a + b);
    Ok((t, f(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn qubit() -> Vec<C64> {
        vec![c64(0.6, 0.0), c64(0.0, 0.8)]
    }

    #[test]
    fn sinc_series_matches_direct_form() {
        assert_eq!(sinc(0.0), 1.0);
        let x = 2e-4;
        assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
        assert!((sinc(9e-5) - 9e-5f64.sin() / 9e-5).abs() < 1e-15);
    }

    #[test]
    fn step_envelope_values() {
        assert_eq!(envelope_step(4.0, 0.0, 0.0), c64(1.0, 0.0));
        assert!(envelope_step(4.0, 0.7, 2.0 * PI / 4.0).norm() < 1e-12);
        assert!((envelope_step(4.0, 0.0, 1.0) - c64(2f64.sin() / 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn thermal_envelope_values() {
        assert_eq!(envelope_thermal(2.0, 0.0), c64(1.0, 0.0));
        let z = envelope_thermal(2.0, 2.0);
        assert!((z.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((z.arg() - PI / 4.0).abs() < 1e-15);
        assert!(envelope_thermal(2.0, 2e6).norm() < 1e-5);
        assert!(envelope_thermal(2.0, -2e6).norm() < 1e-5);
        assert!((envelope_thermal(1.5, 0.9) - 1.0 / c64(1.0, -0.6)).norm() < 1e-15);
    }

    #[test]
    fn ready_state_has_unit_gram() {
        let sys = DemSystem::from_profile(qubit(), &SpectralProfile::step(0.3, 4.0).unwrap(), 16).unwrap();
        assert_eq!(sys.gram_closed_form(1, 0, 0.0).unwrap(), c64(1.0, 0.0));
        assert_eq!(sys.gram_closed_form(0, 0, 5.0).unwrap(), c64(1.0, 0.0));
        let s = sys.evolve_closed_form(0.0);
        let expected: Vec<C64> = qubit()
            .iter()
            .flat_map(|a| sys.environment_amplitudes().iter().map(move |b| a * b))
            .collect();
        assert!(s.vector().max_abs_diff(&expected.into()) < 1e-15);
    }

    #[test]
    fn uniform_interaction_never_decoheres() {
        let omega = DiagonalInteraction::new(2, 3, vec![1.7; 6]).unwrap();
        let env = vec![c64(0.6, 0.0), c64(0.0, 0.64), c64(0.48, 0.0)];
        let sys = DemSystem::new(qubit(), env, omega).unwrap();
        for k in 0..50 {
            let g = sys.gram_closed_form(1, 0, k as f64 * 0.37).unwrap();
            assert!((g - c64(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn step_profile_has_exact_zeros_at_tau() {
        let p = SpectralProfile::step(1.1, 4.0).unwrap();
        let sys = DemSystem::from_profile(qubit(), &p, 64).unwrap();
        let tau = p.timescale().unwrap();
        for k in 1..4 {
            assert!(sys.gram_closed_form(1, 0, k as f64 * tau).unwrap().norm() < 1e-13);
        }
    }

    #[test]
    fn unsupported_index_rejected() {
        let sys = DemSystem::from_profile(
            vec![c64(1.0, 0.0), c64(0.0, 0.0)],
            &SpectralProfile::step(0.0, 1.0).unwrap(),
            4,
        )
        .unwrap();
        assert!(matches!(sys.gram_closed_form(1, 0, 1.0), Err(Error::UnsupportedIndex(1))));
        assert!(sys.system_entropy(3.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn invalid_profiles() {
        assert!(SpectralProfile::step(0.0, 0.0).is_err());
        assert!(SpectralProfile::thermal(-1.0).is_err());
        assert!(matches!(
            SpectralProfile::explicit(vec![0.0, 1.0], vec![0.5, 0.4]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            SpectralProfile::explicit(vec![0.0, 1.0], vec![1.5, -0.5]),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        let err = DemSystem::new(vec![c64(1.0, 0.0)], vec![c64(0.9, 0.0)], DiagonalInteraction::zero(1, 1));
        assert!(matches!(err, Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn discretization_error_vanishes_at_origin() {
        for p in [SpectralProfile::step(0.5, 3.0).unwrap(), SpectralProfile::thermal(0.8).unwrap()] {
            assert!(discretization_error(&p, 128, 0.0).unwrap() < 1e-14);
        }
        let e = SpectralProfile::explicit(vec![1.0], vec![1.0]).unwrap();
        assert!(discretization_error(&e, 4, 1.0).is_err());
    }

    #[test]
    fn two_level_environment_revives_at_gap_period() {
        let p = SpectralProfile::explicit(vec![0.0, 1.5], vec![0.5, 0.5]).unwrap();
        let sys = DemSystem::from_profile(qubit(), &p, 2).unwrap();
        let period = 2.0 * PI / 1.5;
        let report = recurrence_scan(&sys, 1, 0, 2.5 * period, 2001).unwrap();
        let r = report.first_revival_above(0.99).unwrap();
        assert!((r.time - period).abs() < 1e-6, "{}", r.time);
        assert!((r.magnitude - 1.0).abs() < 1e-12);
    }
}
