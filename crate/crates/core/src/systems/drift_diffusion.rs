//! One-dimensional drift-diffusion decision model `dx = v dt + σ dW`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{Matrix, SdeSystem, Vector};
use crate::symmetry::SymmetrySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftDiffusionParams {
    /// Drift rate.
    pub v: f64,
    pub sigma: f64,
    /// Absorbing decision bounds, applied only when simulating.
    pub bounds: Option<(f64, f64)>,
}

impl Default for DriftDiffusionParams {
    fn default() -> Self {
        Self {
            v: 0.5,
            sigma: 1.0,
            bounds: None,
        }
    }
}

impl DriftDiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.v.is_finite() {
            return Err(Error::Configuration(format!(
                "drift_diffusion: need finite v and sigma > 0, got v = {}, sigma = {}",
                self.v, self.sigma
            )));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi) {
                return Err(Error::Configuration(format!(
                    "drift_diffusion: bounds ({lo}, {hi}) are empty"
                )));
            }
        }
        Ok(())
    }
}

/// `f = v`, `D = σ²/2`. The Lagrangian does not depend on `x` or `t`, so both
/// momentum and energy are conserved.
pub fn constant_drift_1d(params: &DriftDiffusionParams) -> Result<SdeSystem> {
    params.validate()?;
    let v = params.v;
    SdeSystem::builder("drift_diffusion", 1, 1)
        .drift(move |_, _| Vector::from_element(1, v))
        .constant_noise(Matrix::from_element(1, 1, params.sigma))
        .drift_jacobian(|_, _| Matrix::zeros(1, 1))
        .autonomous(true)
        .symmetry(SymmetrySpec::TimeTranslation)
        .symmetry(SymmetrySpec::axis_translation(1, 0))
        .build()
}
