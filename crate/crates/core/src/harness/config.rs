//! TOML experiment configuration. Every field has a default, so an empty
//! file describes the standard protocol.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::profiles::{TemperatureProfile, TensionSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub gibbs_table: GibbsTableConfig,
    pub simulate: SimulateConfig,
    pub pde: PdeConfig,
    pub hydro: HydroConfig,
    pub local_eq: LocalEqConfig,
    pub ness: NessConfig,
    pub quasistatic: QuasistaticConfig,
    pub contraction: ContractionConfig,
    pub hypoco: HypocoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20240601,
            output_dir: PathBuf::from("out"),
            model: ModelConfig::default(),
            gibbs_table: GibbsTableConfig::default(),
            simulate: SimulateConfig::default(),
            pde: PdeConfig::default(),
            hydro: HydroConfig::default(),
            local_eq: LocalEqConfig::default(),
            ness: NessConfig::default(),
            quasistatic: QuasistaticConfig::default(),
            contraction: ContractionConfig::default(),
            hypoco: HypocoConfig::default(),
        }
    }
}

/// Potential, friction, temperature profile and boundary tension shared by
/// every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub potential: String,
    pub params: BTreeMap<String, f64>,
    pub gamma: f64,
    pub profile: TemperatureProfile,
    pub schedule: TensionSchedule,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            potential: "harmonic".into(),
            params: BTreeMap::new(),
            gamma: 1.0,
            profile: TemperatureProfile::default(),
            schedule: TensionSchedule::default(),
        }
    }
}

impl ModelConfig {
    pub fn potential(&self) -> Result<Potential<f64>> {
        Potential::from_name(&self.potential, &self.params)
    }

    pub fn with_potential(mut self, pot: &Potential<f64>) -> Self {
        self.potential = pot.name().into();
        self.params = match pot {
            Potential::PowerAlpha { alpha } => BTreeMap::from([("alpha".to_string(), *alpha)]),
            _ => BTreeMap::new(),
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.potential()?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.profile.validate()?;
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsTableConfig {
    /// Empty: five temperatures spanning the profile.
    pub betas: Vec<f64>,
    pub tau_min: f64,
    pub tau_max: f64,
    pub knots: usize,
}

impl Default for GibbsTableConfig {
    fn default() -> Self {
        Self {
            betas: Vec::new(),
            tau_min: -1.0,
            tau_max: 1.0,
            knots: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub c_delta: f64,
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    pub replicas: usize,
    pub test_functions: usize,
    pub block_points: Vec<f64>,
    pub block_eps: f64,
    pub local_points: Vec<f64>,
    /// Time-averaging windows `[start, end]`.
    pub windows: Vec<[f64; 2]>,
    pub noise: bool,
    /// Uniform tension of the initial local Gibbs law; defaults to `τ̄(0)`.
    pub initial_tension: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: 64,
            c_delta: 0.1,
            horizon: 0.25,
            snapshot_times: vec![0.05, 0.1, 0.25],
            replicas: 32,
            test_functions: 4,
            block_points: vec![0.25, 0.5, 0.75],
            block_eps: 0.05,
            local_points: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            windows: vec![[0.15, 0.25]],
            noise: true,
            initial_tension: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    pub cells: usize,
    pub cfl: f64,
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    pub weak_tests: usize,
    pub epsilon: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            cells: 200,
            cfl: 0.4,
            horizon: 0.25,
            snapshot_times: vec![0.05, 0.1, 0.25],
            weak_tests: 4,
            epsilon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroConfig {
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub time: f64,
    pub test_functions: usize,
    pub c_delta: f64,
    /// Cells of the reference PDE solve.
    pub cells: usize,
    /// Required `err(n_max)` upper bound.
    pub abs_cap: f64,
    /// Required `err(n_min)/err(n_max)`.
    pub ratio: f64,
    pub max_blown_fraction: f64,
}

impl Default for HydroConfig {
    fn default() -> Self {
        Self {
            n_list: vec![32, 64, 128],
            replicas: 200,
            time: 0.25,
            test_functions: 4,
            c_delta: 0.1,
            cells: 400,
            abs_cap: 0.05,
            ratio: 1.5,
            max_blown_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalEqConfig {
    pub n: usize,
    pub c_delta: f64,
    pub points: Vec<f64>,
    /// Stationary run: constant boundary tension, warm-up, averaging end.
    pub stationary_tension: f64,
    pub stationary_replicas: usize,
    pub warm_up: f64,
    pub horizon: f64,
    /// Transition run: averaging window `mid_time ± half_width` under the
    /// model schedule.
    pub mid_time: f64,
    pub half_width: f64,
    pub mid_replicas: usize,
    pub cells: usize,
    pub sigmas: f64,
}

impl Default for LocalEqConfig {
    fn default() -> Self {
        Self {
            n: 64,
            c_delta: 0.1,
            points: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            stationary_tension: 0.5,
            stationary_replicas: 40,
            warm_up: 0.1,
            horizon: 0.5,
            mid_time: 0.05,
            half_width: 0.005,
            mid_replicas: 200,
            cells: 200,
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NessConfig {
    pub n: usize,
    pub c_delta: f64,
    pub replicas: usize,
    /// Macroscopic time spent at `τ̄(0)` before the ramp starts.
    pub warm_up: f64,
    /// Duration after the warm-up.
    pub horizon: f64,
    pub cells: usize,
    pub sigmas: f64,
    pub points: Vec<f64>,
}

impl Default for NessConfig {
    fn default() -> Self {
        Self {
            n: 64,
            c_delta: 0.1,
            replicas: 100,
            warm_up: 0.5,
            horizon: 0.25,
            cells: 200,
            sigmas: 3.0,
            points: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasistaticConfig {
    pub epsilons: Vec<f64>,
    /// Ramp duration of the quasi-static protocol, in rescaled time.
    pub ramp: f64,
    pub horizon: f64,
    pub cells: usize,
    pub cfl: f64,
    /// Relative tolerance of the Clausius-equality and heat-formula checks.
    pub tolerance: f64,
    /// Required `D^{ε/4} / D^ε`.
    pub decay: f64,
}

impl Default for QuasistaticConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1.0, 0.25, 0.0625],
            ramp: 4.0,
            horizon: 8.0,
            cells: 50,
            cfl: 0.4,
            tolerance: 0.05,
            decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionConfig {
    pub potentials: Vec<String>,
    pub pairs: usize,
    pub cells: usize,
    pub horizon: f64,
    pub cfl: f64,
    /// Amplitude of the random tension perturbations.
    pub amplitude: f64,
    /// Allowed step-to-step increase relative to the initial distance.
    pub slack: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            potentials: vec!["harmonic".into(), "harmonic-cosine".into()],
            pairs: 20,
            cells: 100,
            horizon: 0.25,
            cfl: 0.4,
            amplitude: 0.5,
            slack: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypocoConfig {
    pub n_list: Vec<usize>,
    pub horizon: f64,
    pub burn_in: f64,
    pub samples: usize,
    pub slack: f64,
    /// Site count of the tilted-Gibbs check.
    pub tilt_n: usize,
}

impl Default for HypocoConfig {
    fn default() -> Self {
        Self {
            n_list: vec![8, 16, 32, 64],
            horizon: 0.25,
            burn_in: 0.01,
            samples: 250,
            slack: 4.0,
            tilt_n: 16,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("simulate.horizon", self.simulate.horizon)?;
        positive("pde.horizon", self.pde.horizon)?;
        positive("hydro.time", self.hydro.time)?;
        positive("quasistatic.ramp", self.quasistatic.ramp)?;
        positive("quasistatic.horizon", self.quasistatic.horizon)?;
        if self.hydro.n_list.len() < 2 {
            return Err(Error::Config("hydro.n_list needs at least two sizes".into()));
        }
        if self.quasistatic.epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::Config("quasistatic.epsilons must lie in (0, 1]".into()));
        }
        if self.hypoco.n_list.is_empty() {
            return Err(Error::Config("hypoco.n_list is empty".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_standard_protocol() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.model.gamma, 1.0);
        assert_eq!(cfg.model.schedule, TensionSchedule::default());
    }

    #[test]
    fn round_trip_and_overrides() {
        let text = r#"
            seed = 7
            [model]
            potential = "power-alpha"
            params = { alpha = 1.5 }
            profile = { kind = "constant", temperature = 2.0 }
            schedule = { kind = "smoothstep", tau0 = 0.0, tau1 = 1.0, t1 = 0.2 }
            [hydro]
            n_list = [16, 32]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model.potential().unwrap(), Potential::power_alpha(1.5).unwrap());
        assert_eq!(cfg.hydro.n_list, vec![16, 32]);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn hash_tracks_every_parameter() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.contraction.pairs += 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed += 1;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[model]\npotential = \"quartic\"").is_err());
        assert!(ExperimentConfig::from_toml("[model]\ngamma = -1.0").is_err());
        assert!(ExperimentConfig::from_toml("[quasistatic]\nepsilons = [2.0]").is_err());
    }
}
