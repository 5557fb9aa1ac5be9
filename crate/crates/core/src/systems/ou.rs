//! Isotropic Ornstein–Uhlenbeck process `dx = −k x dt + √2 σ dW`, a model of
//! motion inside one attractor basin.

use serde::{Deserialize, Serialize};

use crate::charges::rotation_planes;
use crate::error::{Error, Result};
use crate::sde::{Matrix, SdeSystem};
use crate::symmetry::SymmetrySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuParams {
    /// Relaxation rate.
    pub k: f64,
    pub sigma: f64,
    pub dim: usize,
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            k: 1.0,
            sigma: std::f64::consts::FRAC_1_SQRT_2,
            dim: 2,
        }
    }
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.sigma > 0.0) || self.dim == 0 {
            return Err(Error::Configuration(format!(
                "ou: need k > 0, sigma > 0, dim >= 1, got k = {}, sigma = {}, dim = {}",
                self.k, self.sigma, self.dim
            )));
        }
        Ok(())
    }
}

/// `f = −k x`, `D = σ² I`. Declares time translation and every rotation plane.
pub fn isotropic_ou(params: &OuParams) -> Result<SdeSystem> {
    params.validate()?;
    let (k, n) = (params.k, params.dim);
    let mut b = SdeSystem::builder("ou", n, n)
        .drift(move |x, _| -x * k)
        .constant_noise(Matrix::identity(n, n) * (std::f64::consts::SQRT_2 * params.sigma))
        .drift_jacobian(move |_, _| Matrix::identity(n, n) * -k)
        .autonomous(true)
        .symmetry(SymmetrySpec::TimeTranslation);
    for (i, j) in rotation_planes(n) {
        b = b.symmetry(SymmetrySpec::rotation(i, j));
    }
    b.build()
}
