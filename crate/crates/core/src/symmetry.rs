//! Continuous symmetries of the path Lagrangian and a numerical invariance check.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::lagrangian;
use crate::sde::{SdeSystem, Vector};

/// Threshold below which a symmetry counts as exact.
pub const EXACT_SYMMETRY_TOL: f64 = 1e-10;

/// Default finite transformation size for [`check_symmetry`].
pub const DEFAULT_SYMMETRY_EPS: f64 = 1e-3;

/// One continuous symmetry candidate.
///
/// Each kind carries a generator `(δt, δx)` and a surface term `K`; the
/// associated conserved charge is `J = p·δx − K` with `p = ∂L/∂ẋ`. Time
/// translation uses `δx = ẋ` and `K = L`, which yields the energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymmetrySpec {
    TimeTranslation,
    /// Shift along a unit direction.
    Translation {
        direction: Vec<f64>,
    },
    /// Rotation in the `(i, j)` coordinate plane, `i < j`.
    Rotation {
        i: usize,
        j: usize,
    },
}

impl SymmetrySpec {
    /// Translation along `u`, normalised to unit length.
    pub fn translation_along(u: &[f64]) -> Result<Self> {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Argument("translation direction must be nonzero".into()));
        }
        Ok(Self::Translation {
            direction: u.iter().map(|v| v / norm).collect(),
        })
    }

    /// Translation along coordinate axis `axis` of an `n`-dimensional state.
    pub fn axis_translation(n: usize, axis: usize) -> Self {
        let mut direction = vec![0.0; n];
        direction[axis] = 1.0;
        Self::Translation { direction }
    }

    pub fn rotation(i: usize, j: usize) -> Self {
        Self::Rotation {
            i: i.min(j),
            j: i.max(j),
        }
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        match self {
            Self::TimeTranslation => Ok(()),
            Self::Translation { direction } => {
                if direction.len() != state_dim {
                    return Err(Error::Dimension {
                        what: "translation direction",
                        expected: state_dim,
                        found: direction.len(),
                    });
                }
                let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::Argument(format!(
                        "translation direction must have unit norm, got {norm}"
                    )));
                }
                Ok(())
            }
            Self::Rotation { i, j } => {
                if i >= j || *j >= state_dim {
                    return Err(Error::Argument(format!(
                        "rotation plane ({i}, {j}) invalid for dimension {state_dim}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Infinitesimal generator `(δt, δx)` at the point `(x, ẋ)`.
    pub fn generator(&self, x: &Vector, xdot: &Vector) -> (f64, Vector) {
        match self {
            Self::TimeTranslation => (1.0, xdot.clone()),
            Self::Translation { direction } => (0.0, Vector::from_column_slice(direction)),
            Self::Rotation { i, j } => {
                let mut dx = Vector::zeros(x.len());
                dx[*i] = -x[*j];
                dx[*j] = x[*i];
                (0.0, dx)
            }
        }
    }

    /// Surface term `K` of the quasi-symmetry.
    pub fn surface_term(&self, lagrangian_value: f64) -> f64 {
        match self {
            Self::TimeTranslation => lagrangian_value,
            _ => 0.0,
        }
    }

    /// Noether charge `J = p·δx − K` given momentum `p` and `L(x, ẋ, t)`.
    pub fn charge(&self, x: &Vector, xdot: &Vector, momentum: &Vector, lagrangian_value: f64) -> f64 {
        let (_, dx) = self.generator(x, xdot);
        momentum.dot(&dx) - self.surface_term(lagrangian_value)
    }

    /// Apply the finite transformation of size `eps` to a sample `(x, ẋ, t)`.
    pub fn transform(&self, x: &Vector, xdot: &Vector, t: f64, eps: f64) -> (Vector, Vector, f64) {
        match self {
            Self::TimeTranslation => (x.clone(), xdot.clone(), t + eps),
            Self::Translation { direction } => {
                let u = Vector::from_column_slice(direction);
                (x + eps * u, xdot.clone(), t)
            }
            Self::Rotation { i, j } => {
                let (s, c) = eps.sin_cos();
                let rotate = |v: &Vector| {
                    let mut out = v.clone();
                    out[*i] = c * v[*i] - s * v[*j];
                    out[*j] = s * v[*i] + c * v[*j];
                    out
                };
                (rotate(x), rotate(xdot), t)
            }
        }
    }
}

impl fmt::Display for SymmetrySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TimeTranslation => write!(f, "TimeTranslation"),
            Self::Translation { direction } => write!(f, "Translation({direction:?})"),
            Self::Rotation { i, j } => write!(f, "Rotation({i},{j})"),
        }
    }
}

/// A point in the Lagrangian's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    pub x: Vector,
    pub xdot: Vector,
    pub t: f64,
}

impl PhaseSample {
    pub fn new(x: &[f64], xdot: &[f64], t: f64) -> Self {
        Self {
            x: Vector::from_column_slice(x),
            xdot: Vector::from_column_slice(xdot),
            t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub spec: SymmetrySpec,
    /// `max |L(g·s) − L(s)| / max(1, |L(s)|)` over the samples.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Test whether `spec` leaves the Lagrangian invariant on `samples` under a
/// finite transformation of size `eps`.
///
/// Evaluation failures (for instance leaving the system's time range) count as
/// an infinite deviation.
pub fn check_symmetry(system: &SdeSystem, spec: &SymmetrySpec, samples: &[PhaseSample], eps: f64) -> SymmetryReport {
    let mut max_deviation: f64 = 0.0;
    if spec.validate(system.state_dim()).is_err() {
        max_deviation = f64::INFINITY;
    } else {
        for s in samples {
            let (x2, v2, t2) = spec.transform(&s.x, &s.xdot, s.t, eps);
            let dev = match (lagrangian(system, &s.x, &s.xdot, s.t), lagrangian(system, &x2, &v2, t2)) {
                (Ok(a), Ok(b)) => (b - a).abs() / a.abs().max(1.0),
                _ => f64::INFINITY,
            };
            // NaN must fail the check as well
            if !(dev <= max_deviation) {
                max_deviation = if dev.is_nan() { f64::INFINITY } else { dev };
            }
        }
    }
    SymmetryReport {
        spec: spec.clone(),
        max_deviation,
        tolerance: EXACT_SYMMETRY_TOL,
        passed: max_deviation < EXACT_SYMMETRY_TOL,
    }
}
