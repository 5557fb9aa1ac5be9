//! Two mutually inhibiting self-exciting populations with tanh activation:
//!
//! `τẋ = μ₀ + (A/2)[tanh((x−c)/n) + 1] − (I/2)[tanh((y−c)/n) + 1] − x + √(2τ) σ η_x`
//!
//! and the same with `x` and `y` exchanged. With suitable parameters the
//! deterministic flow has three stable states: one for each decision and an
//! undecided state between them.

use serde::{Deserialize, Serialize};

use super::fixed_points::{find_fixed_points, FixedPoint};
use crate::error::{Error, Result};
use crate::sde::{Matrix, SdeSystem, Vector};
use crate::symmetry::SymmetrySpec;

/// Seeds per axis used by the construction-time stability check.
pub const SEARCH_GRID: usize = 21;
const DEDUP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PietParams {
    /// Baseline input `μ₀`.
    pub mu0: f64,
    /// Self-excitation strength `A`.
    #[serde(alias = "A")]
    pub a: f64,
    /// Cross-inhibition strength `I`.
    #[serde(alias = "I")]
    pub i: f64,
    /// Activation threshold.
    pub c: f64,
    /// Activation width.
    pub n: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl Default for PietParams {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            a: 1.0,
            i: 0.7,
            c: 0.5,
            n: 0.1,
            tau: 1.0,
            sigma: 0.1,
        }
    }
}

impl PietParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu0, self.a, self.i, self.c].iter().all(|v| v.is_finite());
        if !finite || !(self.tau > 0.0 && self.n > 0.0 && self.sigma > 0.0) {
            return Err(Error::Configuration(format!(
                "piet: need finite parameters and tau, n, sigma > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Box containing every fixed point: each coordinate of a zero of the drift
    /// lies between `μ₀ − max(I, 0) + min(A, 0)` and `μ₀ + max(A, 0) − min(I, 0)`.
    pub fn search_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.mu0 + self.a.min(0.0) - self.i.max(0.0) - 0.25;
        let hi = self.mu0 + self.a.max(0.0) - self.i.min(0.0) + 0.25;
        (vec![lo, lo], vec![hi, hi])
    }
}

/// Build the network without checking how many attractors it has.
pub fn piet_network_unverified(params: &PietParams) -> Result<SdeSystem> {
    params.validate()?;
    let p = *params;
    let act = move |u: f64| 0.5 * (((u - p.c) / p.n).tanh() + 1.0);
    let dact = move |u: f64| {
        let th = ((u - p.c) / p.n).tanh();
        0.5 * (1.0 - th * th) / p.n
    };
    SdeSystem::builder("piet", 2, 2)
        .drift(move |x, _| {
            let (a, b) = (x[0], x[1]);
            Vector::from_vec(vec![
                (p.mu0 + p.a * act(a) - p.i * act(b) - a) / p.tau,
                (p.mu0 + p.a * act(b) - p.i * act(a) - b) / p.tau,
            ])
        })
        .constant_noise(Matrix::identity(2, 2) * ((2.0 / p.tau).sqrt() * p.sigma))
        .drift_jacobian(move |x, _| {
            let (da, db) = (dact(x[0]), dact(x[1]));
            Matrix::from_row_slice(
                2,
                2,
                &[
                    (p.a * da - 1.0) / p.tau,
                    -p.i * db / p.tau,
                    -p.i * da / p.tau,
                    (p.a * db - 1.0) / p.tau,
                ],
            )
        })
        .autonomous(true)
        .symmetry(SymmetrySpec::TimeTranslation)
        .build()
}

/// All fixed points of the deterministic network inside [`PietParams::search_box`].
pub fn piet_fixed_points(system: &SdeSystem, params: &PietParams) -> Result<Vec<FixedPoint>> {
    let (lo, hi) = params.search_box();
    find_fixed_points(system, &lo, &hi, SEARCH_GRID, DEDUP_TOL)
}

/// Build the network and check that it has exactly three stable fixed points.
pub fn piet_network(params: &PietParams) -> Result<SdeSystem> {
    let sys = piet_network_unverified(params)?;
    let fps = piet_fixed_points(&sys, params)?;
    let stable: Vec<&FixedPoint> = fps.iter().filter(|f| f.stable).collect();
    if stable.len() != 3 {
        let list: Vec<String> = fps
            .iter()
            .map(|f| {
                format!(
                    "({:.6}, {:.6}) {}",
                    f.point[0],
                    f.point[1],
                    if f.stable { "stable" } else { "unstable" }
                )
            })
            .collect();
        return Err(Error::Configuration(format!(
            "piet: expected 3 stable fixed points, found {}: [{}]",
            stable.len(),
            list.join(", ")
        )));
    }
    Ok(sys)
}

/// The stable fixed points ordered as (x-decision, undecided, y-decision): the
/// undecided point is the one nearest the diagonal.
pub fn piet_attractors(system: &SdeSystem, params: &PietParams) -> Result<[Vector; 3]> {
    let mut stable: Vec<Vector> = piet_fixed_points(system, params)?
        .into_iter()
        .filter(|f| f.stable)
        .map(|f| Vector::from_vec(f.point))
        .collect();
    if stable.len() != 3 {
        return Err(Error::Configuration(format!(
            "piet: {} stable fixed points",
            stable.len()
        )));
    }
    stable.sort_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])));
    Ok([stable[0].clone(), stable[1].clone(), stable[2].clone()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_tristable() {
        let p = PietParams::default();
        let sys = piet_network(&p).unwrap();
        let fps = piet_fixed_points(&sys, &p).unwrap();
        assert_eq!(fps.iter().filter(|f| f.stable).count(), 3);
        for f in &fps {
            let r = sys.drift_eval(&Vector::from_column_slice(&f.point), 0.0).unwrap();
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn exchange_symmetry() {
        let p = PietParams::default();
        let sys = piet_network(&p).unwrap();
        let [xd, mid, yd] = piet_attractors(&sys, &p).unwrap();
        assert!((xd[0] - yd[1]).abs() < 1e-9 && (xd[1] - yd[0]).abs() < 1e-9);
        assert!((mid[0] - mid[1]).abs() < 1e-9);
        let x = Vector::from_vec(vec![0.3, -0.4]);
        let swapped = Vector::from_vec(vec![-0.4, 0.3]);
        let f = sys.drift_eval(&x, 0.0).unwrap();
        let g = sys.drift_eval(&swapped, 0.0).unwrap();
        assert_eq!(f[0], g[1]);
        assert_eq!(f[1], g[0]);
    }

    #[test]
    fn jacobian_matches_differences() {
        let sys = piet_network_unverified(&PietParams::default()).unwrap();
        for x in [[0.45, 0.52], [1.0, -0.7], [0.1, 0.6]] {
            let x = Vector::from_column_slice(&x);
            assert!(sys.jacobian_mismatch(&x, 0.0).unwrap() < 1e-5);
        }
    }

    #[test]
    fn no_inhibition_decouples() {
        let p = PietParams {
            i: 0.0,
            ..Default::default()
        };
        let sys = piet_network_unverified(&p).unwrap();
        let a = sys.drift_eval(&Vector::from_vec(vec![0.4, -3.0]), 0.0).unwrap();
        let b = sys.drift_eval(&Vector::from_vec(vec![0.4, 2.0]), 0.0).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn monostable_params_rejected() {
        let p = PietParams {
            a: 0.0,
            i: 0.0,
            ..Default::default()
        };
        match piet_network(&p) {
            Err(Error::Configuration(msg)) => assert!(msg.contains("found 1")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
