//! Experiment configuration, loaded from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::tol::Tolerances;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// One experiment: a model, a seed, the checks to run and where to write.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub suite: Vec<String>,
    /// Builder parameters for `convergence`.
    #[serde(default)]
    pub mesh_sequence: Option<Vec<usize>>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Sample count for the cheap sampled checks.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Convergence study name.
    #[serde(default)]
    pub study: Option<String>,
}

fn default_output() -> PathBuf {
    PathBuf::from("reports")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json]
}

fn default_samples() -> usize {
    100
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSpec::new("maxwell", "interval", 8),
            seed: 0,
            suite: vec![],
            mesh_sequence: None,
            output: default_output(),
            formats: default_formats(),
            samples: default_samples(),
            tolerances: Tolerances::default(),
            study: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when `json` is set.
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let cfg: ExperimentConfig = if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        Ok(cfg)
    }

    /// Reads a file; `.json` selects JSON, anything else TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.tolerances.version != 1 {
            return Err(Error::Config(format!(
                "tolerance table version {} is not supported (expected 1)",
                self.tolerances.version
            )));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("at least one output format is required".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let t = r#"
            seed = 7
            suite = ["flow_residual"]
            formats = ["json", "csv"]
            [model]
            name = "maxwell"
            mesh = "interval"
            n = 8
            [tolerances]
            flow = 1e-11
        "#;
        let j = r#"{"seed": 7, "suite": ["flow_residual"], "formats": ["json", "csv"],
            "model": {"name": "maxwell", "mesh": "interval", "n": 8},
            "tolerances": {"flow": 1e-11}}"#;
        let a = ExperimentConfig::parse(t, false).unwrap();
        let b = ExperimentConfig::parse(j, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tolerances.flow, 1e-11);
        assert_eq!(a.tolerances.exact, Tolerances::default().exact);
        assert_eq!(a.samples, 100);
        a.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_fields_and_versions() {
        let bad = "[model]\nname = \"maxwell\"\nmesh = \"interval\"\nn = 4\ncolour = 1\n";
        assert!(matches!(ExperimentConfig::parse(bad, false), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.tolerances.version = 2;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.tolerances.version = 1;
        cfg.model.name = "nope".into();
        assert!(matches!(cfg.validate(), Err(Error::UnknownModel(_))));
    }
}
