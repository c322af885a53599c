//! Experiment configuration: a TOML file with decimal strings for all real
//! parameters, so configs stay exact at any working precision.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use padelab::bigseries::BigComplex;
use padelab::testfn::{TestFnError, TestFunctionSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid spec: {0}")]
    Spec(#[from] TestFnError),
}

fn default_step() -> usize {
    1
}
fn default_nodes() -> usize {
    64
}
fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: TestFunctionSpec,
    pub precision_bits: u32,
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default = "default_step")]
    pub n_step: usize,
    /// Level-curve parameters, decimal strings, each > 1.
    pub rhos: Vec<String>,
    /// Optional probe list as [re, im] decimal-string pairs; the default
    /// probe set scaled to the geometry is used when absent.
    #[serde(default)]
    pub probes: Option<Vec<[String; 2]>>,
    /// Equilibrium quadrature nodes per interval.
    #[serde(default = "default_nodes")]
    pub k_nodes: usize,
    /// Energy-oracle grid size; 0 skips the oracle cross-check.
    #[serde(default)]
    pub oracle_grid: usize,
    /// Seed for randomized negative-control points.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        // serde bypasses the spec constructor; re-run its validation
        TestFunctionSpec::new(self.spec.factors().to_vec(), self.spec.rational().cloned())?;
        if self.precision_bits < 64 {
            return Err(ConfigError::Invalid("precision_bits must be >= 64".into()));
        }
        if self.n_min < 1 || self.n_min > self.n_max || self.n_step == 0 {
            return Err(ConfigError::Invalid(
                "need 1 <= n_min <= n_max and n_step >= 1".into(),
            ));
        }
        if self.n_max > 512 {
            return Err(ConfigError::Invalid(
                "n_max above the desk-scale ceiling of 512".into(),
            ));
        }
        if self.rhos.is_empty() {
            return Err(ConfigError::Invalid("need at least one rho".into()));
        }
        for r in self.rho_values()? {
            if !(r > 1.0) || !r.is_finite() {
                return Err(ConfigError::Invalid(format!("rho {r} must exceed 1")));
            }
        }
        if self.k_nodes < 32 {
            return Err(ConfigError::Invalid("k_nodes must be >= 32".into()));
        }
        Ok(())
    }

    pub fn rho_values(&self) -> Result<Vec<f64>, ConfigError> {
        self.rhos
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| ConfigError::Invalid(format!("bad rho {s:?}: {e}")))
            })
            .collect()
    }

    pub fn n_values(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.n_step).collect()
    }

    /// Probe points lifted to the working precision (None: use defaults).
    pub fn probe_points(
        &self,
        prec: u32,
    ) -> Result<Option<Vec<(String, BigComplex)>>, ConfigError> {
        let Some(list) = &self.probes else {
            return Ok(None);
        };
        let mut out = Vec::with_capacity(list.len());
        for (i, [re, im]) in list.iter().enumerate() {
            let z = BigComplex::from_decimal_parts(prec, re, im)
                .map_err(ConfigError::Invalid)?;
            out.push((format!("p{i}_{re}_{im}", re = re.trim(), im = im.trim()), z));
        }
        Ok(Some(out))
    }

    /// Canonical serialization covering every semantically relevant field.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_toml().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
precision_bits = 256
n_min = 2
n_max = 8
rhos = ["1.5"]

[[spec.factors]]
segment = { alpha = -1.0, beta = 1.0 }

[[spec.factors.constants]]
c = { re = "2", im = "0" }
exponent = { re = "1/2", im = "0" }

[[spec.factors.constants]]
c = { re = "3", im = "0" }
exponent = { re = "1/2", im = "0" }
"#;

    #[test]
    fn parses_and_hashes() {
        let cfg = ExperimentConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(cfg.n_values(), vec![2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(cfg.rho_values().unwrap(), vec![1.5]);
        assert_eq!(cfg.k_nodes, 64);
        let h1 = cfg.hash();
        // any semantic change must move the hash
        let mut other = cfg.clone();
        other.precision_bits = 512;
        assert_ne!(h1, other.hash());
        let mut other = cfg.clone();
        other.rhos = vec!["1.2".into()];
        assert_ne!(h1, other.hash());
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(ExperimentConfig::from_toml_str("precision_bits = 1").is_err());
        let bad = BASIC.replace("rhos = [\"1.5\"]", "rhos = [\"0.9\"]");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&bad),
            Err(ConfigError::Invalid(_))
        ));
        let bad = BASIC.replace("n_min = 2", "n_min = 0");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }
}
