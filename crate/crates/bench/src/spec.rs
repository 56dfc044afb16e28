//! Declarative experiment description, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jtsched_core::exhaustive::DEFAULT_ENUMERATION_CAP;
use jtsched_core::zfbf::DEFAULT_SUS_THRESHOLD;
use jtsched_core::NetworkConfig;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const DEFAULT_TRIALS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Penalized successive convex approximation.
    Alg1,
    /// Exhaustive search over scheduled sets.
    Alg2,
    /// Zero-forcing with semiorthogonal user selection.
    Alg3,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Alg1, Algorithm::Alg2, Algorithm::Alg3];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 => "alg3",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| BenchError::Malformed(format!("unknown algorithm `{s}`")))
    }
}

/// Network parameter varied by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Users,
    Snr,
    Antennas,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Users => "users",
            Axis::Snr => "snr",
            Axis::Antennas => "antennas",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Axis::Users => 1,
            Axis::Snr => 2,
            Axis::Antennas => 3,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        [Axis::Users, Axis::Snr, Axis::Antennas]
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| BenchError::Malformed(format!("unknown sweep axis `{s}`")))
    }
}

/// Network template. The swept parameter overrides its field per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTemplate {
    pub num_bs: usize,
    pub antennas_per_bs: usize,
    pub num_users: usize,
    #[serde(default)]
    pub snr_db: f64,
    pub cell_radius: Option<f64>,
    pub coop_radius: Option<f64>,
    pub rate_fraction: Option<f64>,
    pub noise_variance: Option<f64>,
    pub reference_gain: Option<f64>,
}

impl NetworkTemplate {
    pub fn build(&self) -> Result<NetworkConfig> {
        let mut cfg = NetworkConfig::new(self.num_bs, self.antennas_per_bs, self.num_users, self.snr_db)?;
        if let Some(v) = self.cell_radius {
            cfg.cell_radius = v;
        }
        if let Some(v) = self.coop_radius {
            cfg.coop_radius = v;
        }
        if let Some(v) = self.rate_fraction {
            cfg.rate_fraction = v;
        }
        if let Some(v) = self.noise_variance {
            cfg.noise_variance = v;
        }
        if let Some(v) = self.reference_gain {
            cfg.reference_gain = v;
        }
        cfg.derive_budgets();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub network: NetworkTemplate,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Path prefix; `<output>.csv` and `<output>.summary.json` are written.
    pub output: Option<PathBuf>,
    /// Off by default so that reruns reproduce every byte.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_sus_threshold")]
    pub sus_threshold: f64,
    /// Worker threads; the rayon default when absent.
    pub threads: Option<usize>,
    /// Directory for per-run iteration traces of alg1.
    pub trace_dir: Option<PathBuf>,
    /// Directory for per-run subset tables of alg2.
    pub subset_dir: Option<PathBuf>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_sus_threshold() -> f64 {
    DEFAULT_SUS_THRESHOLD
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| BenchError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ExperimentSpec = toml::from_str(&text).map_err(|source| BenchError::Parse { path: path.to_path_buf(), source })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Spec(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.values.is_empty() {
            return bad("values must not be empty".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty".into());
        }
        let mut algs = self.algorithms.clone();
        algs.sort();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return bad("algorithms must not repeat".into());
        }
        if !(self.sus_threshold > 0.0 && self.sus_threshold <= 1.0) {
            return bad(format!("sus_threshold {} outside (0, 1]", self.sus_threshold));
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        for &v in &self.values {
            if !v.is_finite() {
                return bad(format!("sweep value {v} is not finite"));
            }
            if self.axis != Axis::Snr && (v < 1.0 || v.fract() != 0.0) {
                return bad(format!("{} value {v} must be a positive integer", self.axis));
            }
        }
        let mut seen = self.values.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("sweep values must not repeat".into());
        }
        for &v in &self.values {
            let cfg = self.config_for(v)?;
            if self.algorithms.contains(&Algorithm::Alg2) && cfg.num_users > DEFAULT_ENUMERATION_CAP {
                return bad(format!(
                    "alg2 needs at most {DEFAULT_ENUMERATION_CAP} users, the point {v} has {}",
                    cfg.num_users
                ));
            }
        }
        Ok(())
    }

    /// Network for one sweep point, with the seed left at zero.
    pub fn config_for(&self, value: f64) -> Result<NetworkConfig> {
        let mut t = self.network.clone();
        match self.axis {
            Axis::Users => t.num_users = value as usize,
            Axis::Antennas => t.antennas_per_bs = value as usize,
            Axis::Snr => t.snr_db = value,
        }
        t.build()
    }

    /// SNR at which rate targets are computed. For an SNR sweep this is the
    /// worst point, so the same users and targets apply at every SNR.
    pub fn target_snr(&self, value: f64) -> f64 {
        match self.axis {
            Axis::Snr => self.values.iter().cloned().fold(f64::INFINITY, f64::min),
            _ => value,
        }
    }

    pub fn trial_seed(&self, value: f64, trial: usize) -> u64 {
        trial_seed(self.base_seed, self.axis, value, trial)
    }

    pub fn output_prefix(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(&self.name))
    }
}

/// `base ⊕ H(axis, value, trial)` with `H` the first output word of a ChaCha8
/// stream keyed by the inputs. The SNR axis leaves the value out so that every
/// SNR point of a trial sees the same channel.
pub fn trial_seed(base: u64, axis: Axis, value: f64, trial: usize) -> u64 {
    let bits = if axis == Axis::Snr { 0 } else { value.to_bits() };
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&axis.tag().to_le_bytes());
    key[8..16].copy_from_slice(&bits.to_le_bytes());
    key[16..24].copy_from_slice(&(trial as u64).to_le_bytes());
    base ^ ChaCha8Rng::from_seed(key).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        name = "basic"
        axis = "users"
        values = [2, 3]
        algorithms = ["alg3"]

        [network]
        num_bs = 2
        antennas_per_bs = 2
        num_users = 4
    "#;

    #[test]
    fn defaults_are_filled_in() {
        let s = ExperimentSpec::from_toml(BASIC).unwrap();
        assert_eq!(s.trials, DEFAULT_TRIALS);
        assert_eq!(s.base_seed, 0);
        assert!(!s.record_timing);
        assert_eq!(s.sus_threshold, DEFAULT_SUS_THRESHOLD);
        assert_eq!(s.output_prefix(), PathBuf::from("basic"));
        assert_eq!(s.config_for(3.0).unwrap().num_users, 3);
    }

    #[test]
    fn rejects_bad_specs() {
        let cases = [
            BASIC.replace("values = [2, 3]", "values = []"),
            BASIC.replace("values = [2, 3]", "values = [2, 2]"),
            BASIC.replace("values = [2, 3]", "values = [2.5]"),
            BASIC.replace("algorithms = [\"alg3\"]", "algorithms = []"),
            BASIC.replace("algorithms = [\"alg3\"]", "algorithms = [\"alg3\", \"alg3\"]"),
            BASIC.replace("algorithms = [\"alg3\"]", "algorithms = [\"alg4\"]"),
            BASIC.replace("values = [2, 3]", "values = [2, 11]\nalgorithms = [\"alg2\"]").replace("algorithms = [\"alg3\"]", ""),
            format!("trials = 0\n{BASIC}"),
            format!("colour = \"red\"\n{BASIC}"),
        ];
        for text in cases {
            assert!(ExperimentSpec::from_toml(&text).is_err(), "accepted:\n{text}");
        }
    }

    #[test]
    fn seeds_are_stable_and_snr_ignores_the_value() {
        let a = trial_seed(7, Axis::Users, 4.0, 0);
        assert_eq!(a, trial_seed(7, Axis::Users, 4.0, 0));
        assert_ne!(a, trial_seed(7, Axis::Users, 4.0, 1));
        assert_ne!(a, trial_seed(7, Axis::Users, 5.0, 0));
        assert_ne!(a, trial_seed(7, Axis::Antennas, 4.0, 0));
        assert_eq!(trial_seed(7, Axis::Snr, 0.0, 3), trial_seed(7, Axis::Snr, 20.0, 3));
        assert_eq!(trial_seed(7, Axis::Users, 4.0, 0) ^ 7, trial_seed(0, Axis::Users, 4.0, 0));
    }

    #[test]
    fn snr_sweep_targets_use_the_worst_point() {
        let text = BASIC.replace("axis = \"users\"", "axis = \"snr\"").replace("values = [2, 3]", "values = [10, -5, 20]");
        let s = ExperimentSpec::from_toml(&text).unwrap();
        assert_eq!(s.target_snr(20.0), -5.0);
        assert_eq!(s.config_for(20.0).unwrap().snr_db, 20.0);
    }
}
