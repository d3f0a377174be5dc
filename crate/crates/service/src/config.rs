//! Service configuration: a TOML file plus environment overrides.
//!
//! Environment variables `EMFV_ADDR`, `EMFV_SNAPSHOT`, and `EMFV_TOKEN`
//! override the corresponding file settings, so a deployment can share one
//! config file across instances and vary only the mutable parts.

use std::path::{Path, PathBuf};

use emfv_core::{Error, MeanPolicy, Result, DEFAULT_MARGIN};
use serde::Deserialize;

/// Enrollment mean handling, as spelled in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanPolicySetting {
    Frozen,
    Recompute,
}

impl MeanPolicySetting {
    pub fn policy(self) -> MeanPolicy {
        match self {
            MeanPolicySetting::Frozen => MeanPolicy::Frozen,
            MeanPolicySetting::Recompute => MeanPolicy::Recompute,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    /// Listen address, `host:port`.
    pub addr: String,
    /// Snapshot file; loaded at startup when present, rewritten on every
    /// successful enrollment.
    pub snapshot: PathBuf,
    pub mean_policy: MeanPolicySetting,
    /// Relative band margin applied when this instance builds a fresh index.
    /// A restored snapshot keeps the margin it was built with.
    pub margin: f64,
    /// Tie tolerance for a fresh index; same restore caveat as `margin`.
    pub tie_tolerance: f64,
    /// Static bearer token for enrollment. With no token configured the
    /// enrollment endpoint refuses all requests.
    pub token: Option<String>,
    /// Trained network weights; image payloads need these.
    pub weights: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:4151".into(),
            snapshot: PathBuf::from("emfv-snapshot.json"),
            mean_policy: MeanPolicySetting::Frozen,
            margin: DEFAULT_MARGIN,
            tie_tolerance: 0.0,
            token: None,
            weights: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ServiceConfig = toml::from_str(&text)
            .map_err(|e| Error::Format(format!("config file {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// File config (or defaults when `path` is `None`) with environment
    /// overrides applied on top.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env();
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self) {
        if let Ok(addr) = std::env::var("EMFV_ADDR") {
            self.addr = addr;
        }
        if let Ok(snapshot) = std::env::var("EMFV_SNAPSHOT") {
            self.snapshot = PathBuf::from(snapshot);
        }
        if let Ok(token) = std::env::var("EMFV_TOKEN") {
            self.token = Some(token);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.margin.is_finite() || self.margin < 0.0 {
            return Err(Error::Format(format!(
                "margin must be finite and nonnegative, got {}",
                self.margin
            )));
        }
        if !self.tie_tolerance.is_finite() || self.tie_tolerance < 0.0 {
            return Err(Error::Format(format!(
                "tie_tolerance must be finite and nonnegative, got {}",
                self.tie_tolerance
            )));
        }
        if self.addr.is_empty() {
            return Err(Error::Format("addr must be non-empty".into()));
        }
        Ok(())
    }
}
