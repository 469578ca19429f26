//! Blow-up detection policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::Diagnostics;

/// The `[detector]` section. A missing `theta_grad` is resolved against the
/// initial gradient norm of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default)]
    pub theta_grad: Option<f64>,
    #[serde(default = "default_tail")]
    pub theta_tail: f64,
}

fn default_tail() -> f64 {
    0.1
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            theta_grad: None,
            theta_tail: default_tail(),
        }
    }
}

impl DetectorConfig {
    /// A detector that never fires.
    pub fn disabled() -> Self {
        DetectorConfig {
            theta_grad: Some(f64::INFINITY),
            theta_tail: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.theta_grad {
            if !(g > 0.0) {
                return Err(Error::Config(format!(
                    "theta_grad must be positive, got {g}"
                )));
            }
        }
        if !(self.theta_tail > 0.0) {
            return Err(Error::Config(format!(
                "theta_tail must be positive, got {}",
                self.theta_tail
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, initial_grad_norm_sq: f64) -> Thresholds {
        Thresholds {
            theta_grad: self
                .theta_grad
                .unwrap_or(1e6 * (initial_grad_norm_sq + 1.0)),
            theta_tail: self.theta_tail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta_grad: f64,
    pub theta_tail: f64,
}

/// Fires when the gradient norm or the spectral tail crosses its threshold.
pub fn detect_blowup(d: &Diagnostics, th: &Thresholds) -> bool {
    d.grad_norm_sq > th.theta_grad || d.spectral_tail_fraction > th.theta_tail
}
