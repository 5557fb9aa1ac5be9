//! Grid-seeded Newton search for zeros of an autonomous drift.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{SdeSystem, Vector};

const MAX_NEWTON_STEPS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;
/// Eigenvalue real parts closer to zero than this count as marginal.
const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub point: Vec<f64>,
    /// All Jacobian eigenvalues have negative real part.
    pub stable: bool,
    /// Singular Jacobian or an eigenvalue on the imaginary axis.
    pub degenerate: bool,
    /// Largest eigenvalue real part.
    pub max_real_eigenvalue: f64,
    pub residual: f64,
}

fn newton(system: &SdeSystem, seed: Vector, lower: &[f64], upper: &[f64]) -> Option<Vector> {
    let mut x = seed;
    for _ in 0..MAX_NEWTON_STEPS {
        let f = system.drift_eval(&x, 0.0).ok()?;
        if f.amax() < RESIDUAL_TOL {
            return Some(x);
        }
        let j = system.jacobian_or_fd(&x, 0.0, true).ok()?;
        let step = j.lu().solve(&f)?;
        x -= step;
        // leave generously outside the box before giving up
        let escaped = x.iter().zip(lower.iter().zip(upper)).any(|(v, (lo, hi))| {
            let w = hi - lo;
            *v < lo - w || *v > hi + w || !v.is_finite()
        });
        if escaped {
            return None;
        }
    }
    let f = system.drift_eval(&x, 0.0).ok()?;
    (f.amax() < 1e3 * RESIDUAL_TOL).then_some(x)
}

/// Zeros of the drift found by Newton's method from a `grid`-per-axis lattice
/// of seeds in the box `[lower, upper]`.
///
/// Seeds that do not converge are dropped. Roots closer than `tol` (max norm)
/// are merged, keeping the first in seed order; the result is sorted
/// lexicographically.
pub fn find_fixed_points(
    system: &SdeSystem,
    lower: &[f64],
    upper: &[f64],
    grid: usize,
    tol: f64,
) -> Result<Vec<FixedPoint>> {
    let n = system.state_dim();
    if lower.len() != n || upper.len() != n {
        return Err(Error::Dimension {
            what: "search box",
            expected: n,
            found: lower.len().min(upper.len()),
        });
    }
    if !system.is_autonomous() {
        return Err(Error::SymmetryNotApplicable {
            spec: "TimeTranslation".into(),
            reason: format!("fixed points of {} are time dependent", system.name()),
        });
    }
    if grid < 1 || lower.iter().zip(upper).any(|(a, b)| !(a <= b)) {
        return Err(Error::Argument("empty search box or grid".into()));
    }
    let total = grid
        .checked_pow(n as u32)
        .ok_or_else(|| Error::Argument("seed grid too large".into()))?;
    let seed_at = |mut idx: usize| {
        Vector::from_iterator(
            n,
            (0..n).map(|d| {
                let i = idx % grid;
                idx /= grid;
                if grid == 1 {
                    0.5 * (lower[d] + upper[d])
                } else {
                    lower[d] + (upper[d] - lower[d]) * i as f64 / (grid - 1) as f64
                }
            }),
        )
    };
    let roots: Vec<Option<Vector>> = (0..total)
        .into_par_iter()
        .map(|i| newton(system, seed_at(i), lower, upper))
        .collect();

    let mut unique: Vec<Vector> = Vec::new();
    for r in roots.into_iter().flatten() {
        if !unique.iter().any(|u| (u - &r).amax() < tol) {
            unique.push(r);
        }
    }
    unique.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    unique
        .into_iter()
        .map(|x| {
            let j = system.jacobian_or_fd(&x, 0.0, true)?;
            let residual = system.drift_eval(&x, 0.0)?.amax();
            let eig = j.complex_eigenvalues();
            let max_re = eig.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
            let min_abs_re = eig.iter().map(|c| c.re.abs()).fold(f64::INFINITY, f64::min);
            let degenerate = j.clone().lu().determinant().abs() < 1e-12 || min_abs_re < MARGINAL_TOL;
            Ok(FixedPoint {
                point: x.as_slice().to_vec(),
                stable: max_re < 0.0 && !degenerate,
                degenerate,
                max_real_eigenvalue: max_re,
                residual,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Matrix;
    use crate::systems::{constant_drift_1d, isotropic_ou, DriftDiffusionParams, OuParams};

    #[test]
    fn ou_origin() {
        let sys = isotropic_ou(&OuParams::default()).unwrap();
        let fps = find_fixed_points(&sys, &[-2.0, -2.0], &[2.0, 2.0], 5, 1e-6).unwrap();
        assert_eq!(fps.len(), 1);
        assert!(fps[0].stable);
        assert!(fps[0].point.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_drift_has_none() {
        let sys = constant_drift_1d(&DriftDiffusionParams::default()).unwrap();
        assert!(find_fixed_points(&sys, &[-5.0], &[5.0], 11, 1e-6).unwrap().is_empty());
    }

    #[test]
    fn saddle_and_degenerate() {
        let saddle = SdeSystem::builder("saddle", 2, 2)
            .drift(|x, _| Vector::from_vec(vec![x[0], -x[1]]))
            .constant_noise(Matrix::identity(2, 2))
            .autonomous(true)
            .build()
            .unwrap();
        let fps = find_fixed_points(&saddle, &[-1.0, -1.0], &[1.0, 1.0], 3, 1e-6).unwrap();
        assert_eq!(fps.len(), 1);
        assert!(!fps[0].stable && !fps[0].degenerate);

        let cubic = SdeSystem::builder("cubic", 1, 1)
            .drift(|x, _| Vector::from_element(1, -x[0].powi(3)))
            .constant_noise(Matrix::identity(1, 1))
            .autonomous(true)
            .build()
            .unwrap();
        let fps = find_fixed_points(&cubic, &[-1.0], &[1.0], 1, 1e-3).unwrap();
        assert_eq!(fps.len(), 1);
        assert!(fps[0].degenerate);
    }
}
