//! `key = value` scenario files.
//!
//! One pair per line, `#` starts a comment. Every scenario has a fixed key
//! table; unknown keys, missing required keys and malformed values are all
//! collected before reporting.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    DemStep,
    DemThermal,
    DemDiscrete,
    EpochChain,
    MultipartiteChain,
    GrwTrajectory,
    GrwEnsemble,
    MasterEq,
    EnergyAudit,
    BipartiteRandom,
    ThermoClausius,
    GasMixing,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::DemStep,
        Scenario::DemThermal,
        Scenario::DemDiscrete,
        Scenario::EpochChain,
        Scenario::MultipartiteChain,
        Scenario::GrwTrajectory,
        Scenario::GrwEnsemble,
        Scenario::MasterEq,
        Scenario::EnergyAudit,
        Scenario::BipartiteRandom,
        Scenario::ThermoClausius,
        Scenario::GasMixing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::DemStep => "dem-step",
            Scenario::DemThermal => "dem-thermal",
            Scenario::DemDiscrete => "dem-discrete",
            Scenario::EpochChain => "epoch-chain",
            Scenario::MultipartiteChain => "multipartite-chain",
            Scenario::GrwTrajectory => "grw-trajectory",
            Scenario::GrwEnsemble => "grw-ensemble",
            Scenario::MasterEq => "master-eq",
            Scenario::EnergyAudit => "energy-audit",
            Scenario::BipartiteRandom => "bipartite-random",
            Scenario::ThermoClausius => "thermo-clausius",
            Scenario::GasMixing => "gas-mixing",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Scenario::EpochChain
                | Scenario::MultipartiteChain
                | Scenario::GrwTrajectory
                | Scenario::GrwEnsemble
                | Scenario::EnergyAudit
                | Scenario::BipartiteRandom
        )
    }

    pub fn params(self) -> &'static [Param] {
        match self {
            Scenario::DemStep => DEM_STEP,
            Scenario::DemThermal => DEM_THERMAL,
            Scenario::DemDiscrete => DEM_DISCRETE,
            Scenario::EpochChain => EPOCH_CHAIN,
            Scenario::MultipartiteChain => MULTIPARTITE,
            Scenario::GrwTrajectory => GRW_TRAJECTORY,
            Scenario::GrwEnsemble => GRW_ENSEMBLE,
            Scenario::MasterEq => MASTER_EQ,
            Scenario::EnergyAudit => ENERGY_AUDIT,
            Scenario::BipartiteRandom => BIPARTITE_RANDOM,
            Scenario::ThermoClausius => THERMO_CLAUSIUS,
            Scenario::GasMixing => GAS_MIXING,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Count,
    Choice(&'static [&'static str]),
    FloatList,
    CountList,
    Flag,
}

impl Kind {
    fn describe(self) -> String {
        match self {
            Kind::Float => "a real number".into(),
            Kind::Count => "a non-negative integer".into(),
            Kind::Choice(opts) => format!("one of {}", opts.join(", ")),
            Kind::FloatList => "a comma-separated list of real numbers".into(),
            Kind::CountList => "a comma-separated list of non-negative integers".into(),
            Kind::Flag => "true or false".into(),
        }
    }
}

/// One scenario key. `default: None` means the key is required.
#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

const fn p(key: &'static str, kind: Kind, default: &'static str, doc: &'static str) -> Param {
    Param {
        key,
        kind,
        default: Some(default),
        doc,
    }
}

const fn req(key: &'static str, kind: Kind, doc: &'static str) -> Param {
    Param {
        key,
        kind,
        default: None,
        doc,
    }
}

const MODES: &[&str] = &["subjective", "objective"];
const BINNINGS: &[&str] = &["uniform", "equal-mass"];
const KERNELS: &[&str] = &["qmsl", "quadratic"];

const DEM_STEP: &[Param] = &[
    p("Omega", Kind::Float, "4", "bandwidth Ω of the step profile"),
    p("Omega0", Kind::Float, "0", "centre Ω₀ of the step profile"),
    p("J", Kind::Count, "4096", "environment levels"),
    p("p0", Kind::Float, "0.5", "weight |a_0|² of the first subsystem level"),
    p("periods", Kind::Float, "4", "time span in units of τ = 2π/Ω"),
    p("samples", Kind::Count, "401", "sample times"),
];

const DEM_THERMAL: &[Param] = &[
    p("tau", Kind::Float, "1", "thermal timescale τ"),
    p("scale", Kind::Float, "1", "frequency scale factor"),
    p("cutoff", Kind::Float, "20", "grid cutoff in units of 1/τ"),
    p("binning", Kind::Choice(BINNINGS), "uniform", "discretization of the profile"),
    p("J", Kind::Count, "4096", "environment levels"),
    p("p0", Kind::Float, "0.5", "weight |a_0|²"),
    p("periods", Kind::Float, "5", "time span in units of τ"),
    p("samples", Kind::Count, "501", "sample times"),
];

const DEM_DISCRETE: &[Param] = &[
    req("frequencies", Kind::FloatList, "environment frequencies f_j"),
    req("weights", Kind::FloatList, "environment weights |b_j|², summing to 1"),
    p("p0", Kind::Float, "0.5", "weight |a_0|²"),
    req("t_max", Kind::Float, "end of the time grid"),
    p("samples", Kind::Count, "401", "sample times"),
];

const EPOCH_CHAIN: &[Param] = &[
    p("tau", Kind::Float, "1", "decoherence timescale of the step profile"),
    p("J", Kind::Count, "64", "environment levels"),
    p("p0", Kind::Float, "0.5", "initial weight |a_0|²"),
    p("epochs", Kind::Count, "3", "number of readouts"),
    p("spacing", Kind::Float, "1", "time between readouts in units of τ"),
    p("kick_theta", Kind::Float, "1.0471975511965976", "angle of the real kick unitary after each readout"),
    p("mode", Kind::Choice(MODES), "subjective", "collapse mode"),
];

const MULTIPARTITE: &[Param] = &[
    p("dims", Kind::CountList, "2,3,2", "subsystem dimensions"),
    p("env", Kind::Count, "8", "environment dimension"),
];

const GRW_TRAJECTORY: &[Param] = &[
    p("x_min", Kind::Float, "-10", "left wall"),
    p("x_max", Kind::Float, "10", "right wall"),
    p("points", Kind::Count, "81", "grid points"),
    p("centers", Kind::FloatList, "-5,5", "packet centres of the initial cat state"),
    p("sigma", Kind::Float, "0.5", "packet width"),
    p("lambda", Kind::Float, "1", "hit rate λ"),
    p("alpha", Kind::Float, "4", "localization strength α"),
    p("t_max", Kind::Float, "3", "end time"),
    p("samples", Kind::Count, "31", "sample times"),
    p("free", Kind::Flag, "false", "include the free-particle Hamiltonian"),
];

const GRW_ENSEMBLE: &[Param] = &[
    p("x_min", Kind::Float, "-10", "left wall"),
    p("x_max", Kind::Float, "10", "right wall"),
    p("points", Kind::Count, "81", "grid points"),
    p("centers", Kind::FloatList, "-5,5", "packet centres of the initial cat state"),
    p("sigma", Kind::Float, "0.5", "packet width"),
    p("lambda", Kind::Float, "1", "hit rate λ"),
    p("alpha", Kind::Float, "4", "localization strength α"),
    p("t_max", Kind::Float, "3", "end time"),
    p("samples", Kind::Count, "16", "sample times"),
    p("n_traj", Kind::Count, "2000", "trajectories"),
    p("free", Kind::Flag, "false", "include the free-particle Hamiltonian"),
];

const MASTER_EQ: &[Param] = &[
    p("x_min", Kind::Float, "-10", "left wall"),
    p("x_max", Kind::Float, "10", "right wall"),
    p("points", Kind::Count, "81", "grid points"),
    p("centers", Kind::FloatList, "-5,5", "packet centres of the initial cat state"),
    p("sigma", Kind::Float, "0.5", "packet width"),
    p("lambda", Kind::Float, "1", "hit rate λ"),
    p("alpha", Kind::Float, "4", "localization strength α"),
    p("kernel", Kind::Choice(KERNELS), "qmsl", "decay kernel F(x − y)"),
    p("kernel_c", Kind::Float, "1", "coefficient c of the quadratic kernel c·s²"),
    p("t_max", Kind::Float, "3", "end time"),
    p("samples", Kind::Count, "31", "sample times"),
    p("free", Kind::Flag, "false", "include the free-particle Hamiltonian"),
];

const ENERGY_AUDIT: &[Param] = &[
    p("Omega", Kind::Float, "1", "step bandwidth Ω"),
    p("Omega0", Kind::Float, "2", "step centre Ω₀"),
    p("J", Kind::Count, "256", "environment levels"),
    p("p0", Kind::Float, "0.3", "weight |a_0|²"),
    p("bare_system", Kind::FloatList, "0.4,1.3", "bare subsystem frequencies ω_i^S"),
    p("bare_env_max", Kind::Float, "1", "bare environment frequencies drawn from [0, max)"),
    p("collapse_at", Kind::Float, "2", "collapse time in units of τ = 2π/Ω"),
    p("periods", Kind::Float, "4", "time span in units of τ"),
    p("samples", Kind::Count, "41", "sample times"),
    p("mode", Kind::Choice(MODES), "subjective", "collapse mode"),
];

const BIPARTITE_RANDOM: &[Param] = &[
    p("states", Kind::Count, "200", "number of random states"),
    p("max_s", Kind::Count, "8", "largest subsystem dimension"),
    p("max_e", Kind::Count, "16", "largest environment dimension"),
];

const THERMO_CLAUSIUS: &[Param] = &[
    p("levels", Kind::Count, "50", "box levels"),
    p("V", Kind::Float, "1", "volume"),
    p("T", Kind::Float, "1", "temperature"),
    p("dV", Kind::Float, "1e-4", "largest volume step"),
    p("halvings", Kind::Count, "5", "number of step halvings"),
    p("c", Kind::Float, "0.05", "level constant"),
];

const GAS_MIXING: &[Param] = &[
    req("N", Kind::Count, "particles per compartment"),
    req("T", Kind::Float, "final temperature"),
    req("dT", Kind::Float, "initial temperature offset ±ΔT"),
    p("steps", Kind::Count, "10", "ΔT sweep steps from 0"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Count(u64),
    Text(String),
    FloatList(Vec<f64>),
    CountList(Vec<u64>),
    Flag(bool),
}

impl Value {
    fn parse(kind: Kind, raw: &str) -> Option<Value> {
        let list = |raw: &str| -> Vec<String> { raw.split(',').map(|s| s.trim().to_string()).collect() };
        match kind {
            Kind::Float => raw.parse::<f64>().ok().filter(|x| x.is_finite()).map(Value::Float),
            Kind::Count => raw.parse::<u64>().ok().map(Value::Count),
            Kind::Choice(opts) => opts.contains(&raw).then(|| Value::Text(raw.to_string())),
            Kind::FloatList => list(raw)
                .iter()
                .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .map(Value::FloatList),
            Kind::CountList => list(raw)
                .iter()
                .map(|s| s.parse::<u64>().ok())
                .collect::<Option<Vec<_>>>()
                .map(Value::CountList),
            Kind::Flag => match raw {
                "true" => Some(Value::Flag(true)),
                "false" => Some(Value::Flag(false)),
                _ => None,
            },
        }
    }

    /// Canonical text, round-tripping through [`Value::parse`].
    pub fn canonical(&self) -> String {
        let float = |x: &f64| format!("{x:?}");
        match self {
            Value::Float(x) => float(x),
            Value::Count(n) => n.to_string(),
            Value::Text(s) => s.clone(),
            Value::FloatList(v) => v.iter().map(float).collect::<Vec<_>>().join(","),
            Value::CountList(v) => v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            Value::Flag(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing key `{key}`")]
    MissingKey { key: String },
    #[error("line {line}: `{key}` must be {expected} (got `{value}`)")]
    TypeError {
        line: usize,
        key: String,
        expected: String,
        value: String,
    },
    #[error("line {line}: `{key}` already set on line {first}")]
    DuplicateKey { line: usize, key: String, first: usize },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "Syntax",
            ConfigError::UnknownKey { .. } => "UnknownKey",
            ConfigError::MissingKey { .. } => "MissingKey",
            ConfigError::TypeError { .. } => "TypeError",
            ConfigError::DuplicateKey { .. } => "DuplicateKey",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::MissingKey { .. } => None,
            ConfigError::Syntax { line }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::TypeError { line, .. }
            | ConfigError::DuplicateKey { line, .. } => Some(*line),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: Option<u64>,
    /// Output file name; defaults to `<scenario>.csv`.
    pub output: Option<String>,
    params: BTreeMap<&'static str, Value>,
}

const COMMON_KEYS: [&str; 3] = ["scenario", "seed", "output"];

pub fn parse_config(text: &str) -> Result<ScenarioConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError::Syntax { line });
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() {
            errors.push(ConfigError::Syntax { line });
            continue;
        }
        if let Some(&first) = seen.get(&key) {
            errors.push(ConfigError::DuplicateKey { line, key, first });
            continue;
        }
        seen.insert(key.clone(), line);
        entries.push((line, key, value));
    }

    let scenario = match entries.iter().find(|(_, k, _)| k == "scenario") {
        None => {
            errors.push(ConfigError::MissingKey { key: "scenario".into() });
            None
        }
        Some((line, key, value)) => {
            let s = Scenario::from_name(value);
            if s.is_none() {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                errors.push(ConfigError::TypeError {
                    line: *line,
                    key: key.clone(),
                    expected: format!("one of {}", names.join(", ")),
                    value: value.clone(),
                });
            }
            s
        }
    };

    let mut seed = None;
    let mut output = None;
    for (line, key, value) in &entries {
        match key.as_str() {
            "seed" => match value.parse::<u64>() {
                Ok(s) => seed = Some(s),
                Err(_) => errors.push(ConfigError::TypeError {
                    line: *line,
                    key: key.clone(),
                    expected: Kind::Count.describe(),
                    value: value.clone(),
                }),
            },
            "output" => {
                if value.is_empty() || value.contains(['/', '\\']) {
                    errors.push(ConfigError::TypeError {
                        line: *line,
                        key: key.clone(),
                        expected: "a plain file name".into(),
                        value: value.clone(),
                    });
                } else {
                    output = Some(value.clone());
                }
            }
            _ => {}
        }
    }

    let Some(scenario) = scenario else {
        return Err(errors);
    };

    let table = scenario.params();
    let mut params = BTreeMap::new();
    for (line, key, value) in &entries {
        if COMMON_KEYS.contains(&key.as_str()) {
            continue;
        }
        let Some(param) = table.iter().find(|p| p.key == key) else {
            errors.push(ConfigError::UnknownKey {
                line: *line,
                key: key.clone(),
            });
            continue;
        };
        match Value::parse(param.kind, value) {
            Some(v) => {
                params.insert(param.key, v);
            }
            None => errors.push(ConfigError::TypeError {
                line: *line,
                key: key.clone(),
                expected: param.kind.describe(),
                value: value.clone(),
            }),
        }
    }
    for param in table {
        if params.contains_key(param.key) || errors.iter().any(|e| matches!(e, ConfigError::TypeError { key, .. } if key == param.key)) {
            continue;
        }
        match param.default {
            Some(d) => {
                params.insert(param.key, Value::parse(param.kind, d).expect("defaults parse"));
            }
            None => errors.push(ConfigError::MissingKey { key: param.key.into() }),
        }
    }
    if scenario.is_stochastic() && seed.is_none() && !seen.contains_key("seed") {
        errors.push(ConfigError::MissingKey { key: "seed".into() });
    }

    if errors.is_empty() {
        Ok(ScenarioConfig {
            scenario,
            seed,
            output,
            params,
        })
    } else {
        errors.sort_by_key(|e| e.line().unwrap_or(usize::MAX));
        Err(errors)
    }
}

impl ScenarioConfig {
    fn get(&self, key: &str) -> &Value {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a parameter of {}", self.scenario))
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(x) => *x,
            v => panic!("`{key}` is {v:?}, not a float"),
        }
    }

    pub fn count(&self, key: &str) -> u64 {
        match self.get(key) {
            Value::Count(n) => *n,
            v => panic!("`{key}` is {v:?}, not a count"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.count(key) as usize
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(s) => s,
            v => panic!("`{key}` is {v:?}, not a choice"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::FloatList(v) => v,
            v => panic!("`{key}` is {v:?}, not a float list"),
        }
    }

    pub fn counts(&self, key: &str) -> &[u64] {
        match self.get(key) {
            Value::CountList(v) => v,
            v => panic!("`{key}` is {v:?}, not a count list"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Flag(b) => *b,
            v => panic!("`{key}` is {v:?}, not a flag"),
        }
    }

    /// Seed, or 0 for deterministic scenarios that did not set one.
    pub fn seed_or_zero(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("{}.csv", self.scenario))
    }

    /// Resolved configuration as sorted `key = value` lines, defaults included.
    pub fn canonical(&self) -> String {
        let mut out = format!("scenario = {}\n", self.scenario);
        if let Some(s) = self.seed {
            out += &format!("seed = {s}\n");
        }
        out += &format!("output = {}\n", self.output_name());
        for (k, v) in &self.params {
            out += &format!("{k} = {}\n", v.canonical());
        }
        out
    }

    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> =
            self.params.iter().map(|(k, v)| (k.to_string(), v.canonical())).collect();
        m.insert("scenario".into(), self.scenario.to_string());
        m.insert("output".into(), self.output_name());
        if let Some(s) = self.seed {
            m.insert("seed".into(), s.to_string());
        }
        m
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gas_mixing_minimal() {
        let c = parse_config("scenario = gas-mixing\nN = 1\nT = 2\ndT = 1").unwrap();
        assert_eq!(c.scenario, Scenario::GasMixing);
        assert_eq!(c.count("N"), 1);
        assert_eq!(c.float("T"), 2.0);
        assert_eq!(c.count("steps"), 10);
    }

    #[test]
    fn missing_seed_on_stochastic_scenario() {
        let errs = parse_config("scenario = grw-ensemble\n").unwrap_err();
        assert_eq!(errs, vec![ConfigError::MissingKey { key: "seed".into() }]);
    }

    #[test]
    fn all_errors_are_collected_with_lines() {
        let text = "# header\nscenario = dem-step\nOmega = fast\nbogus = 1\nJ = -3\nnot a pair\n";
        let errs = parse_config(text).unwrap_err();
        let kinds: Vec<(&str, Option<usize>)> = errs.iter().map(|e| (e.kind(), e.line())).collect();
        assert_eq!(
            kinds,
            vec![
                ("TypeError", Some(3)),
                ("UnknownKey", Some(4)),
                ("TypeError", Some(5)),
                ("Syntax", Some(6)),
            ]
        );
    }

    #[test]
    fn canonical_form_ignores_comments_and_order() {
        let a = parse_config("scenario = dem-step\nOmega = 4 # bandwidth\nseed = 3\n").unwrap();
        let b = parse_config("seed=3\n\n# c\nOmega=4.0\nscenario=dem-step").unwrap();
        assert_eq!(a.sha256(), b.sha256());
        let c = parse_config("scenario = dem-step\nOmega = 5\nseed = 3\n").unwrap();
        assert_ne!(a.sha256(), c.sha256());
    }

    #[test]
    fn defaults_parse_for_every_scenario() {
        for s in Scenario::ALL {
            for p in s.params() {
                if let Some(d) = p.default {
                    assert!(Value::parse(p.kind, d).is_some(), "{s}: {}", p.key);
                }
            }
        }
    }

    #[test]
    fn lists_and_flags() {
        let c = parse_config("scenario = grw-trajectory\nseed = 1\ncenters = -1, 2.5\nfree = true\n").unwrap();
        assert_eq!(c.floats("centers"), &[-1.0, 2.5]);
        assert!(c.flag("free"));
        let e = parse_config("scenario = grw-trajectory\nseed = 1\nfree = yes\n").unwrap_err();
        assert_eq!(e[0].kind(), "TypeError");
    }

    #[test]
    fn unknown_scenario_and_duplicates() {
        let e = parse_config("scenario = nope\n").unwrap_err();
        assert_eq!(e[0].kind(), "TypeError");
        let e = parse_config("scenario = gas-mixing\nN = 1\nN = 2\nT = 2\ndT = 1\n").unwrap_err();
        assert_eq!(e[0], ConfigError::DuplicateKey { line: 3, key: "N".into(), first: 2 });
    }
}
