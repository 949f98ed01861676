//! Classical entropy formulas and Boltzmann ensembles (k_B = 1).

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Level constant of [`BoxSpectrum::standard`].
pub const BOX_LEVEL_CONSTANT: f64 = 0.05;

fn check_distribution(p: &[f64]) -> Result<()> {
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeProbability { index, value });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    Ok(())
}

/// `−Σ p_i ln p_i` in nats.
pub fn gibbs_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>())
}

/// `ln Ω` for `Ω` equally likely micro-states.
pub fn boltzmann_entropy(omega: usize) -> Result<f64> {
    if omega == 0 {
        return Err(Error::OutOfRange("Ω must be at least 1".into()));
    }
    Ok((omega as f64).ln())
}

/// `−log₂ p` in bits.
pub fn shannon_information(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::OutOfRange(format!("probability {p} not in (0, 1]")));
    }
    Ok(-p.log2())
}

/// Boltzmann weights `p_i = e^{−E_i/T}/Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnsemble {
    energies: Vec<f64>,
    temperature: f64,
    probabilities: Vec<f64>,
    log_partition: f64,
}

impl DiscreteEnsemble {
    pub fn new(energies: Vec<f64>, temperature: f64) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidParameter("no energy levels".into()));
        }
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::InvalidParameter(format!("temperature must be positive (got {temperature})")));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("energies must be finite".into()));
        }
        let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = energies.iter().map(|e| (-(e - e_min) / temperature).exp()).collect();
        let sum: f64 = shifted.iter().sum();
        let probabilities = shifted.iter().map(|w| w / sum).collect();
        Ok(Self {
            log_partition: sum.ln() - e_min / temperature,
            energies,
            temperature,
            probabilities,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `Z = Σ e^{−E_i/T}`; may overflow where [`Self::log_partition`] does not.
    pub fn partition_function(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn mean_energy(&self) -> f64 {
        self.probabilities.iter().zip(&self.energies).map(|(p, e)| p * e).sum()
    }

    pub fn entropy(&self) -> f64 {
        gibbs_entropy(&self.probabilities).expect("Boltzmann weights are normalized")
    }
}

/// Particle-in-a-box levels `E_i = c i² V^{−2/3}`, `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpectrum {
    pub levels: usize,
    pub volume: f64,
    pub constant: f64,
}

impl BoxSpectrum {
    pub fn new(levels: usize, volume: f64, constant: f64) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidParameter("need at least one level".into()));
        }
        if !(volume > 0.0) || !(constant > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "volume and level constant must be positive (got {volume}, {constant})"
            )));
        }
        Ok(Self {
            levels,
            volume,
            constant,
        })
    }

    pub fn standard(levels: usize, volume: f64) -> Result<Self> {
        Self::new(levels, volume, BOX_LEVEL_CONSTANT)
    }

    pub fn energies_at(&self, volume: f64) -> Vec<f64> {
        let scale = self.constant * volume.powf(-2.0 / 3.0);
        (1..=self.levels).map(|i| scale * (i * i) as f64).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.energies_at(self.volume)
    }

    /// `dE_i/dV = −(2/3) E_i / V`
    pub fn energy_derivatives(&self) -> Vec<f64> {
        self.energies().iter().map(|e| -2.0 * e / (3.0 * self.volume)).collect()
    }

    pub fn ensemble(&self, temperature: f64) -> Result<DiscreteEnsemble> {
        DiscreteEnsemble::new(self.energies(), temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClausiusCheck {
    pub ds: f64,
    pub dq_over_t: f64,
    pub residual: f64,
}

/// Isothermal volume step: `dS` from Gibbs entropies against
/// `⟨dQ⟩/T = (d⟨E⟩ − Σ p_i (dE_i/dV) dV)/T`.
pub fn clausius_check(spectrum: &BoxSpectrum, temperature: f64, dv: f64) -> Result<ClausiusCheck> {
    if !(spectrum.volume + dv > 0.0) {
        return Err(Error::InvalidParameter(format!("volume step {dv} empties the box")));
    }
    let before = spectrum.ensemble(temperature)?;
    let after = DiscreteEnsemble::new(spectrum.energies_at(spectrum.volume + dv), temperature)?;
    let ds = after.entropy() - before.entropy();
    let de = after.mean_energy() - before.mean_energy();
    let dw: f64 = before
        .probabilities()
        .iter()
        .zip(spectrum.energy_derivatives())
        .map(|(p, d)| p * d * dv)
        .sum();
    let dq_over_t = (de - dw) / temperature;
    Ok(ClausiusCheck {
        ds,
        dq_over_t,
        residual: (ds - dq_over_t).abs(),
    })
}

/// `dV = 1e-4 V`
pub fn default_volume_step(spectrum: &BoxSpectrum) -> f64 {
    1e-4 * spectrum.volume
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClausiusConvergence {
    pub coarse: ClausiusCheck,
    pub fine: ClausiusCheck,
    /// `residual(dV) / residual(dV/2)`, near 4 for a second-order residual.
    pub ratio: f64,
}

pub fn clausius_convergence(spectrum: &BoxSpectrum, temperature: f64, dv: f64) -> Result<ClausiusConvergence> {
    let coarse = clausius_check(spectrum, temperature, dv)?;
    let fine = clausius_check(spectrum, temperature, dv / 2.0)?;
    Ok(ClausiusConvergence {
        coarse,
        fine,
        ratio: coarse.residual / fine.residual,
    })
}

/// Entropy gained when two gases of `N` particles at `T ± ΔT` mix to `T`:
/// `(3/2) N ln(T²/(T² − ΔT²))`.
pub fn gas_mixing_entropy(particles: u64, temperature: f64, delta_t: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::OutOfRange(format!("temperature {temperature} must be positive")));
    }
    if !(delta_t >= 0.0 && delta_t < temperature) {
        return Err(Error::OutOfRange(format!("ΔT = {delta_t} must lie in [0, {temperature})")));
    }
    let x = delta_t / temperature;
    Ok(-1.5 * particles as f64 * (-x * x).ln_1p())
}
