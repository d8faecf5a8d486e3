//! Experiment configuration: JSON file plus CLI overrides.

use std::path::{Path, PathBuf};

use crate::environment::ParamDist;
use crate::error::{Error, Result};
use crate::policies::{PolicyId, PolicyParams};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dist: ParamDist,
    pub d: usize,
    pub k: usize,
    /// Target spectral radius for generated dynamics.
    pub rho: f64,
    /// Number of generated environments.
    pub envs: usize,
    /// Episodes per environment.
    pub runs: usize,
    /// Rounds per episode.
    pub horizon: u64,
    /// Environment warm-up steps before round 0.
    pub warmup: usize,
    pub policies: Vec<PolicyId>,
    pub params: PolicyParams,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores, 1 runs sequentially.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dist: ParamDist::Gaussian,
            d: 10,
            k: 10,
            rho: 0.9,
            envs: 100,
            runs: 3,
            horizon: 1000,
            warmup: 10_000,
            policies: PolicyId::ALL.to_vec(),
            params: PolicyParams::default(),
            seed: 0,
            out: None,
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::Config("d and k must be at least 1".into()));
        }
        if self.envs == 0 || self.runs == 0 || self.horizon == 0 {
            return Err(Error::Config("envs, runs, and horizon must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policy list must be nonempty".into()));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::Config(format!("rho must be finite and >= 0, got {}", self.rho)));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = ExperimentConfig {
            envs: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            policies: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            rho: f64::NAN,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn roundtrips_through_json() {
        let config = ExperimentConfig {
            dist: ParamDist::Cauchy,
            policies: vec![PolicyId::Idea, PolicyId::Oful],
            seed: 99,
            ..Default::default()
        };
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.policies, config.policies);
        assert_eq!(back.seed, 99);
        assert_eq!(back.dist, ParamDist::Cauchy);
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let r: std::result::Result<ExperimentConfig, _> =
            serde_json::from_str(r#"{"horizonn": 10}"#);
        assert!(r.is_err());
    }
}
