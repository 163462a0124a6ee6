//! Run configuration: a flat TOML key-value file, overridable from the
//! command line.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::BoundsConfig;
use crate::harness::DEFAULT_SLACK;
use crate::model::{DegreeSet, Mode, ModelParams, Side};
use crate::theory::radius_for_mu;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Binomial,
    Poisson,
    Both,
}

impl ModeChoice {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeChoice::Binomial => vec![Mode::Binomial],
            ModeChoice::Poisson => vec![Mode::Poisson],
            ModeChoice::Both => vec![Mode::Binomial, Mode::Poisson],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideChoice {
    Out,
    In,
    Both,
}

impl SideChoice {
    pub fn sides(self) -> Vec<Side> {
        match self {
            SideChoice::Out => vec![Side::Out],
            SideChoice::In => vec![Side::In],
            SideChoice::Both => vec![Side::Out, Side::In],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: u64,
    pub alpha: f64,
    pub r: Option<f64>,
    pub mu_target: Option<f64>,
    pub v: f64,
    pub q: f64,
    pub mode: ModeChoice,
    pub seed: u64,
    pub trials: u64,
    pub parallelism: usize,
    pub epsilon: f64,
    pub slack: f64,
    /// Degree sets as `tail:t` or `set:a,b,...`.
    pub sets: Vec<String>,
    pub side: SideChoice,
    pub outer_samples: usize,
    pub area_samples: usize,
    pub truncation_cap: f64,
    pub max_terms: usize,
    pub out_dir: PathBuf,
    /// Vertex counts for `sweep`.
    pub n_grid: Vec<u64>,
    /// Radii for `sweep` when no `mu_target` is set.
    pub r_list: Vec<f64>,
    /// Force `k_n` in `verify` instead of computing it.
    pub k_override: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BoundsConfig::default();
        Self {
            n: 10_000,
            alpha: PI,
            r: None,
            mu_target: None,
            v: 0.0,
            q: 0.0,
            mode: ModeChoice::Poisson,
            seed: 0,
            trials: 1000,
            parallelism: 4,
            epsilon: 1.0,
            slack: DEFAULT_SLACK,
            sets: Vec::new(),
            side: SideChoice::Both,
            outer_samples: b.outer_samples,
            area_samples: b.area_samples,
            truncation_cap: b.truncation_cap,
            max_terms: b.max_terms,
            out_dir: PathBuf::from("out"),
            n_grid: Vec::new(),
            r_list: Vec::new(),
            k_override: None,
        }
    }
}

/// A rejected configuration field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }

    /// Check every field. Radius-dependent checks are skipped for sweeps,
    /// where the radius is resolved per grid point.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::new("n", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0 * PI) {
            return Err(ConfigError::new(
                "alpha",
                format!("must lie in (0, 2π], got {}", self.alpha),
            ));
        }
        if !(0.0..1.0).contains(&self.v) {
            return Err(ConfigError::new(
                "v",
                format!("must lie in [0, 1), got {}", self.v),
            ));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(ConfigError::new(
                "q",
                format!("must lie in [0, 1), got {}", self.q),
            ));
        }
        match (self.r, self.mu_target) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "r",
                    "give exactly one of `r` and `mu_target`, not both",
                ))
            }
            (None, None) if self.r_list.is_empty() => {
                return Err(ConfigError::new(
                    "r",
                    "give exactly one of `r` and `mu_target`",
                ))
            }
            _ => {}
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r < 0.5) {
                return Err(ConfigError::new(
                    "r",
                    format!("must lie in (0, 0.5), got {r}"),
                ));
            }
        }
        if let Some(m) = self.mu_target {
            if !(m > 0.0 && m.is_finite()) {
                return Err(ConfigError::new(
                    "mu_target",
                    format!("must be positive, got {m}"),
                ));
            }
        }
        if let Some(r) = self.r_list.iter().find(|r| !(**r > 0.0 && **r < 0.5)) {
            return Err(ConfigError::new(
                "r_list",
                format!("radius {r} not in (0, 0.5)"),
            ));
        }
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "must be at least 1"));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::new("parallelism", "must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(ConfigError::new("epsilon", "must be positive"));
        }
        if !(self.slack >= 0.0) {
            return Err(ConfigError::new("slack", "must be nonnegative"));
        }
        self.degree_sets()?;
        if self.outer_samples == 0 {
            return Err(ConfigError::new("outer_samples", "must be at least 1"));
        }
        if self.area_samples == 0 {
            return Err(ConfigError::new("area_samples", "must be at least 1"));
        }
        if !(self.truncation_cap > 0.0 && self.truncation_cap < 1.0) {
            return Err(ConfigError::new("truncation_cap", "must lie in (0, 1)"));
        }
        if self.max_terms == 0 {
            return Err(ConfigError::new("max_terms", "must be at least 1"));
        }
        Ok(())
    }

    pub fn degree_sets(&self) -> Result<Vec<DegreeSet>, ConfigError> {
        self.sets
            .iter()
            .map(|s| s.parse().map_err(|e: String| ConfigError::new("sets", e)))
            .collect()
    }

    /// Model parameters for a mode, resolving `mu_target` into a radius.
    pub fn params(&self, mode: Mode) -> Result<ModelParams, ConfigError> {
        self.params_for(self.n, mode)
    }

    pub fn params_for(&self, n: u64, mode: Mode) -> Result<ModelParams, ConfigError> {
        let r = match (self.r, self.mu_target) {
            (Some(r), None) => r,
            (None, Some(m)) => radius_for_mu(n, self.alpha, self.v, self.q, m)
                .map_err(|e| ConfigError::new("mu_target", e.to_string()))?,
            _ => {
                return Err(ConfigError::new(
                    "r",
                    "give exactly one of `r` and `mu_target`",
                ))
            }
        };
        ModelParams::new(n, self.alpha, r, self.v, self.q, mode, self.seed)
            .map_err(|e| ConfigError::new("r", e.to_string()))
    }

    pub fn bounds_config(&self) -> BoundsConfig {
        BoundsConfig {
            outer_samples: self.outer_samples,
            area_samples: self.area_samples,
            truncation_cap: self.truncation_cap,
            max_terms: self.max_terms,
            seed: self.seed,
        }
    }
}
