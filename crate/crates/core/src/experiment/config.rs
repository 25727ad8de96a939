//! Experiment configuration, read from TOML.
//!
//! Neutrinos and orderings are 1-based in the file and 0-based in code.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mitigation::Extrapolation;
use crate::model::{build_model, NeutrinoModel};
use crate::noise::{NoiseLevel, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagator {
    /// `e^{−iHt}` applied directly; no gates, so no gate noise.
    Exact,
    /// One first-order step of one- and two-body factors.
    U1,
    /// One swap-network step of exact pair propagators.
    U2,
}

impl Propagator {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "exact" => Ok(Propagator::Exact),
            "u1" => Ok(Propagator::U1),
            "u2" => Ok(Propagator::U2),
            other => Err(Error::Config(format!("unknown propagator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub theta_v: f64,
    pub max_cos: f64,
    pub matter_a: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: 4,
            theta_v: 0.195,
            max_cos: 0.9,
            matter_a: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub depol_2q: f64,
    /// Same flip probability on every qubit.
    pub readout_e0: f64,
    pub readout_e1: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            depol_2q: 0.01,
            readout_e0: 0.02,
            readout_e1: 0.02,
        }
    }
}

/// Extrapolations reported for each observable family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    pub inversion: Vec<Extrapolation>,
    pub single_spin_entropy: Vec<Extrapolation>,
    pub pair_entropy: Vec<Extrapolation>,
    /// Applied to the extended concurrence; the concurrence is its
    /// truncation at zero afterwards.
    pub concurrence: Vec<Extrapolation>,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig {
            inversion: vec![Extrapolation::Richardson, Extrapolation::Exp],
            single_spin_entropy: vec![
                Extrapolation::Richardson,
                Extrapolation::ShiftedExp { asymptote: 1.0 },
            ],
            pair_entropy: vec![
                Extrapolation::Richardson,
                Extrapolation::ShiftedExp { asymptote: 2.0 },
            ],
            concurrence: vec![
                Extrapolation::Richardson,
                Extrapolation::ShiftedExp { asymptote: -0.5 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelConfig,
    /// Initial flavor per neutrino, `0` for electron and `1` for heavy.
    pub initial_flavors: String,
    /// 1-based neutrino order on the line for the swap network.
    pub ordering: Vec<usize>,
    /// Times in units of 1/η.
    pub times: Vec<f64>,
    pub propagator: Propagator,
    pub noise: NoiseConfig,
    pub noise_levels: Vec<u32>,
    pub shots: u64,
    pub calibration_shots: u64,
    pub replicas: usize,
    pub readout_mitigation: bool,
    /// Feed exact outcome probabilities instead of sampled shots; every
    /// replica then equals the point estimate.
    pub exact_statistics: bool,
    pub mitigation: MitigationConfig,
    pub output: PathBuf,
}

/// `points` evenly spaced times from `start` to `stop` inclusive.
pub fn time_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2021,
            model: ModelConfig::default(),
            initial_flavors: "0011".into(),
            ordering: vec![1, 3, 2, 4],
            times: time_grid(0.0, 8.0, 17),
            propagator: Propagator::U2,
            noise: NoiseConfig::default(),
            noise_levels: vec![1, 3],
            shots: 8192,
            calibration_shots: 8192,
            replicas: 1000,
            readout_mitigation: true,
            exact_statistics: false,
            mitigation: MitigationConfig::default(),
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.n;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.initial_flavors.len() != n
            || !self.initial_flavors.bytes().all(|b| b == b'0' || b == b'1')
        {
            return bad(format!(
                "initial_flavors {:?} must be {n} characters of 0 and 1",
                self.initial_flavors
            ));
        }
        let mut sorted = self.ordering.clone();
        sorted.sort_unstable();
        if sorted != (1..=n).collect::<Vec<_>>() {
            return bad(format!(
                "ordering {:?} is not a permutation of 1..={n}",
                self.ordering
            ));
        }
        if self.times.is_empty() {
            return bad("time grid is empty".into());
        }
        if self.times.iter().any(|t| !t.is_finite()) || self.times.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("time grid must be finite and strictly increasing".into());
        }
        if self.noise_levels.is_empty() {
            return bad("no noise levels".into());
        }
        for &r in &self.noise_levels {
            NoiseLevel::new(r).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.noise_levels.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("noise levels must be strictly increasing".into());
        }
        if self.shots == 0 || self.calibration_shots == 0 {
            return bad("shot counts must be at least 1".into());
        }
        if self.replicas < 2 {
            return bad(format!(
                "{} replicas give no confidence interval",
                self.replicas
            ));
        }
        self.noise_model()?;
        self.model()?;
        Ok(())
    }

    pub fn model(&self) -> Result<NeutrinoModel> {
        let m = &self.model;
        build_model(m.n, m.theta_v, m.max_cos, m.matter_a)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let c = &self.noise;
        NoiseModel::uniform(self.model.n, c.depol_2q, c.readout_e0, c.readout_e1)
    }

    /// 0-based ordering.
    pub fn ordering_zero_based(&self) -> Vec<usize> {
        self.ordering.iter().map(|&k| k - 1).collect()
    }

    /// Initial flavor bit of 0-based neutrino `k`.
    pub fn flavor(&self, k: usize) -> u8 {
        self.initial_flavors.as_bytes()[k] - b'0'
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.times.len(), 17);
        assert_eq!(c.times[16], 8.0);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        let partial = ExperimentConfig::from_toml(
            "seed = 7\npropagator = \"u1\"\n[noise]\ndepol_2q = 0.0\n[[mitigation.inversion]]\nkind = \"bare\"\n",
        )
        .unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.propagator, Propagator::U1);
        assert_eq!(partial.noise.readout_e0, 0.02);
        assert_eq!(partial.mitigation.inversion, vec![Extrapolation::Bare]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "noise_levels = [1, 2]",
            "times = []",
            "times = [1.0, 0.5]",
            "ordering = [1, 1, 2, 3]",
            "initial_flavors = \"01\"",
            "shots = 0",
            "replicas = 1",
            "unknown = 3",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed += 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }
}
