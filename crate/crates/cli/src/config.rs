//! Run configuration.
//!
//! Values come from built-in defaults, then an optional `key = value` file,
//! then command-line flags. Blank lines and lines starting with `#` are
//! ignored in the file.

use std::path::Path;

use multical::{BoundConstants, DimensionLimits};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PredictionMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),

    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub psi: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub mode: PredictionMode,
    pub trials: usize,
    pub master_seed: u64,
    pub constants: BoundConstants,
    pub limits: DimensionLimits,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.05,
            gamma: 0.1,
            psi: 0.1,
            epsilon: 0.05,
            delta: 0.05,
            lambda: 0.1,
            mode: PredictionMode::ContinuousY,
            trials: 200,
            master_seed: 0,
            constants: BoundConstants::default(),
            limits: DimensionLimits::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "alpha",
    "gamma",
    "psi",
    "epsilon",
    "delta",
    "lambda",
    "mode",
    "trials",
    "seed",
    "c_graph",
    "c_fund",
    "c_lower",
    "max_vc_domain",
    "max_graph_domain",
    "max_values",
];

impl RunConfig {
    pub fn load_file(&mut self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::Invalid { key, message } if !KEYS.contains(&key.as_str()) => {
                    ConfigError::Syntax {
                        line: i + 1,
                        message: format!("unknown key `{key}`: {message}"),
                    }
                }
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::Invalid {
                key: key.to_string(),
                message: format!("`{value}` is not a valid number"),
            })
        }
        match key {
            "alpha" => self.alpha = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "psi" => self.psi = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.master_seed = num(key, value)?,
            "c_graph" => self.constants.c_graph = num(key, value)?,
            "c_fund" => self.constants.c_fund = num(key, value)?,
            "c_lower" => self.constants.c_lower = num(key, value)?,
            "max_vc_domain" => self.limits.max_vc_domain = num(key, value)?,
            "max_graph_domain" => self.limits.max_graph_domain = num(key, value)?,
            "max_values" => self.limits.max_values = num(key, value)?,
            "mode" => {
                self.mode = match value {
                    "finite-y" => PredictionMode::FiniteY,
                    "continuous-y" => PredictionMode::ContinuousY,
                    _ => {
                        return Err(ConfigError::Invalid {
                            key: key.to_string(),
                            message: format!("`{value}` is not `finite-y` or `continuous-y`"),
                        })
                    }
                }
            }
            _ => {
                return Err(ConfigError::Invalid {
                    key: key.to_string(),
                    message: "not a recognized setting".into(),
                })
            }
        }
        Ok(())
    }

    /// Range checks: α ∈ [0, 1]; γ, ψ, ε, δ, λ ∈ (0, 1]; at least one trial;
    /// positive constants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: &str| ConfigError::Invalid {
            key: key.into(),
            message: message.into(),
        };
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(bad("alpha", "must lie in [0, 1]"));
        }
        for (key, v) in [
            ("gamma", self.gamma),
            ("psi", self.psi),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("lambda", self.lambda),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(bad(key, "must lie in (0, 1]"));
            }
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be at least 1"));
        }
        for (key, c) in [
            ("c_graph", self.constants.c_graph),
            ("c_fund", self.constants.c_fund),
            ("c_lower", self.constants.c_lower),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(bad(key, "must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_defaults() {
        let c = RunConfig::default();
        assert_eq!(
            (c.alpha, c.gamma, c.psi, c.epsilon, c.delta, c.lambda),
            (0.05, 0.1, 0.1, 0.05, 0.05, 0.1)
        );
        assert_eq!(c.trials, 200);
        c.validate().unwrap();
    }

    #[test]
    fn file_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\n\nalpha = 0.2\nmode=finite-y\nseed = 42\nc_graph = 16\n")
            .unwrap();
        assert_eq!(c.alpha, 0.2);
        assert_eq!(c.mode, PredictionMode::FiniteY);
        assert_eq!(c.master_seed, 42);
        assert_eq!(c.constants.c_graph, 16.0);
        assert_eq!(c.gamma, 0.1);
    }

    #[test]
    fn file_errors_carry_line() {
        let mut c = RunConfig::default();
        assert!(matches!(
            c.apply_text("alpha 0.2"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            c.apply_text("\nbogus = 1"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            c.apply_text("alpha = x"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            c.apply_text("mode = both"),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig {
            gamma: 0.0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        c.gamma = 1.0;
        c.alpha = 0.0;
        c.validate().unwrap();
        c.trials = 0;
        assert!(c.validate().is_err());
    }
}
