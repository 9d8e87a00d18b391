//! Experiment configuration files.

use std::fmt;
use std::path::Path;

use gasket_core::GasketSpec;
use serde::{Deserialize, Serialize};

/// Tolerance overrides; unset fields use the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed distance of the exit-time slope from `[beta_min, beta_max]`.
    pub slope: Option<f64>,
    /// Allowed relative energy drift along harmonic extension.
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dimension: usize,
    pub levels: Vec<u32>,
    pub depth: Option<usize>,
    pub seed: Option<u64>,
    pub laziness: Option<f64>,
    pub tail: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
    pub location: Option<(usize, usize)>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some((line, column)) => write!(f, "config error at line {line}, column {column}: {}", self.message),
            None => write!(f, "config error in field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn field_error(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
        location: None,
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: GasketSpec,
    pub depth: usize,
    pub seed: u64,
    pub laziness: f64,
    pub tail: f64,
    pub tolerances: Tolerances,
}

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_DEPTH: usize = 5;

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            field: String::new(),
            message: e.to_string(),
            location: Some((e.line(), e.column())),
        })
    }

    pub fn load(path: &Path) -> Result<ConfigFile, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| field_error("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies command-line overrides and validates.
    pub fn resolve(file: ConfigFile, depth: Option<usize>, seed: Option<u64>) -> Result<Self, ConfigError> {
        if file.levels.is_empty() {
            return Err(field_error("levels", "must list at least one level"));
        }
        if let Some(l) = file.levels.iter().find(|&&l| l < 2) {
            return Err(field_error("levels", format!("every level must be at least 2, got {l}")));
        }
        if file.dimension < 2 {
            return Err(field_error("dimension", format!("must be at least 2, got {}", file.dimension)));
        }
        let spec = GasketSpec::new(file.dimension, file.levels).map_err(|e| field_error("levels", e.to_string()))?;
        let depth = depth.or(file.depth).unwrap_or(spec.max_depth());
        if depth > spec.max_depth() {
            return Err(field_error(
                "depth",
                format!("{depth} exceeds the {} listed levels", spec.max_depth()),
            ));
        }
        let laziness = file.laziness.unwrap_or(0.5);
        if !(0.0..1.0).contains(&laziness) {
            return Err(field_error("laziness", format!("must lie in [0, 1), got {laziness}")));
        }
        let tail = file.tail.unwrap_or(gasket_core::diagnostics::DEFAULT_TAIL);
        if !(tail > 0.0 && tail < 1.0) {
            return Err(field_error("tail", format!("must lie in (0, 1), got {tail}")));
        }
        Ok(Self {
            spec,
            depth,
            seed: seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            laziness,
            tail,
            tolerances: file.tolerances,
        })
    }

    /// SG2 with `depth` levels equal to 2.
    pub fn default_for(depth: Option<usize>, seed: Option<u64>) -> Result<Self, ConfigError> {
        let depth = depth.unwrap_or(DEFAULT_DEPTH);
        Self::resolve(
            ConfigFile {
                dimension: 2,
                levels: vec![2; depth.max(1)],
                depth: Some(depth),
                seed,
                laziness: None,
                tail: None,
                tolerances: Tolerances::default(),
            },
            None,
            seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_levels_rejected() {
        let file = ExperimentConfig::parse(r#"{"dimension": 2, "levels": []}"#).unwrap();
        let e = ExperimentConfig::resolve(file, None, None).unwrap_err();
        assert_eq!(e.field, "levels");
    }

    #[test]
    fn malformed_json_has_location() {
        let e = ExperimentConfig::parse("{\n  \"dimension\": 2,\n  \"levels\": [2,\n}").unwrap_err();
        assert!(e.location.is_some());
        let e = ExperimentConfig::parse(r#"{"dimension": 2, "levels": [2], "colour": 1}"#).unwrap_err();
        assert!(e.message.contains("colour"));
    }

    #[test]
    fn overrides_and_defaults() {
        let file = ExperimentConfig::parse(r#"{"dimension": 2, "levels": [2, 3, 2], "seed": 4}"#).unwrap();
        let c = ExperimentConfig::resolve(file.clone(), Some(2), None).unwrap();
        assert_eq!((c.depth, c.seed), (2, 4));
        assert!(ExperimentConfig::resolve(file, Some(4), None).is_err());
        let d = ExperimentConfig::default_for(None, None).unwrap();
        assert_eq!(d.depth, DEFAULT_DEPTH);
        assert_eq!(d.seed, DEFAULT_SEED);
    }
}
