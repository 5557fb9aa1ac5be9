//! The path Lagrangian `L = ¼ (ẋ − f)ᵀ D⁻¹ (ẋ − f)`, its midpoint-rule action
//! and the exact gradient of that discrete action.
//!
//! Segment `k` contributes `Δt · L(x̄_k, (x_{k+1} − x_k)/Δt, t̄_k)` where `x̄_k`
//! and `t̄_k` are segment midpoints. Charges in [`crate::charges`] are evaluated
//! at the same points.

use crate::error::Result;
use crate::path::DiscretizedPath;
use crate::sde::{SdeSystem, Vector};

/// Lagrangian value at a single phase-space point.
pub fn lagrangian(system: &SdeSystem, x: &Vector, xdot: &Vector, t: f64) -> Result<f64> {
    let f = system.drift_eval(x, t)?;
    let r = xdot - f;
    let q = system.diffusion_solve(x, t, &r)?;
    Ok(0.25 * r.dot(&q).max(0.0))
}

/// Everything the gradient and charge code needs from one segment.
#[derive(Debug, Clone)]
pub(crate) struct SegmentTerms {
    pub mid: Vector,
    pub velocity: Vector,
    pub time: f64,
    pub lagrangian: f64,
    /// `p = ∂L/∂ẋ = ½ D⁻¹ (ẋ − f)`.
    pub momentum: Vector,
}

pub(crate) fn segment_terms(system: &SdeSystem, path: &DiscretizedPath, k: usize) -> Result<SegmentTerms> {
    let (mid, velocity, time) = path.segment(k);
    let drift = system.drift_eval(&mid, time)?;
    let r = &velocity - &drift;
    let q = system.diffusion_solve(&mid, time, &r)?;
    Ok(SegmentTerms {
        lagrangian: 0.25 * r.dot(&q).max(0.0),
        momentum: 0.5 * q,
        mid,
        velocity,
        time,
    })
}

/// `∂L/∂x` at the segment midpoint, holding `ẋ` fixed.
fn segment_state_gradient(system: &SdeSystem, seg: &SegmentTerms, allow_fd: bool) -> Result<Vector> {
    let jac = system.jacobian_or_fd(&seg.mid, seg.time, allow_fd)?;
    let mut g = -(jac.transpose() * &seg.momentum);
    if system.has_state_dependent_noise() {
        let dd = system.diffusion_gradient_fd(&seg.mid, seg.time)?;
        for (i, ddi) in dd.iter().enumerate() {
            g[i] -= seg.momentum.dot(&(ddi * &seg.momentum));
        }
    }
    Ok(g)
}

/// Discrete action `S = Σ_k Δt · L(x̄_k, Δx_k/Δt, t̄_k)`.
pub fn action(system: &SdeSystem, path: &DiscretizedPath) -> Result<f64> {
    let dt = path.dt();
    (0..path.segments()).try_fold(0.0, |acc, k| {
        let (mid, vel, t) = path.segment(k);
        Ok(acc + dt * lagrangian(system, &mid, &vel, t)?)
    })
}

/// Action and its gradient with respect to the interior nodes, flattened
/// node-major (`(K − 1) · N` values).
///
/// Needs the system's analytic drift Jacobian unless `allow_fd` permits a
/// central-difference Jacobian instead.
pub fn action_and_gradient(system: &SdeSystem, path: &DiscretizedPath, allow_fd: bool) -> Result<(f64, Vec<f64>)> {
    let n = path.dim();
    let k_max = path.segments();
    let dt = path.dt();
    let mut grad = vec![0.0; path.interior_len()];
    let mut total = 0.0;
    for k in 0..k_max {
        let seg = segment_terms(system, path, k)?;
        total += dt * seg.lagrangian;
        let gx = segment_state_gradient(system, &seg, allow_fd)?;
        // segment k touches node k (as left end) and node k+1 (as right end)
        if k >= 1 {
            let off = (k - 1) * n;
            for i in 0..n {
                grad[off + i] += 0.5 * dt * gx[i] - seg.momentum[i];
            }
        }
        if k + 1 < k_max {
            let off = k * n;
            for i in 0..n {
                grad[off + i] += 0.5 * dt * gx[i] + seg.momentum[i];
            }
        }
    }
    Ok((total, grad))
}

pub fn action_gradient(system: &SdeSystem, path: &DiscretizedPath, allow_fd: bool) -> Result<Vec<f64>> {
    action_and_gradient(system, path, allow_fd).map(|(_, g)| g)
}

/// Discrete Euler–Lagrange residual `∂L/∂x − d/dt ∂L/∂ẋ` at each interior node.
///
/// Equals the action gradient divided by `Δt`.
pub fn euler_lagrange_residual(system: &SdeSystem, path: &DiscretizedPath, allow_fd: bool) -> Result<Vec<Vector>> {
    let dt = path.dt();
    let grad = action_gradient(system, path, allow_fd)?;
    Ok(grad
        .chunks(path.dim())
        .map(|c| Vector::from_iterator(c.len(), c.iter().map(|g| g / dt)))
        .collect())
}

/// Largest Euclidean norm of the Euler–Lagrange residual over interior nodes.
pub fn max_residual_norm(residual: &[Vector]) -> f64 {
    residual.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::path::{init_path, InitStrategy};
    use crate::sde::Matrix;

    fn constant_drift(v: f64, sigma: f64) -> SdeSystem {
        SdeSystem::builder("ddm", 1, 1)
            .drift(move |_, _| Vector::from_element(1, v))
            .constant_noise(Matrix::from_element(1, 1, sigma))
            .drift_jacobian(|_, _| Matrix::zeros(1, 1))
            .autonomous(true)
            .build()
            .unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn lagrangian_vanishes_on_drift() {
        let sys = constant_drift(1.0, 1.0);
        assert_eq!(lagrangian(&sys, &v(&[0.3]), &v(&[1.0]), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn lagrangian_scalar_value() {
        let sys = constant_drift(1.0, 1.0);
        assert_eq!(lagrangian(&sys, &v(&[0.0]), &v(&[2.0]), 0.0).unwrap(), 0.5);
    }

    #[test]
    fn lagrangian_with_correlated_noise() {
        let sys = SdeSystem::builder("shear", 2, 2)
            .drift(|_, _| Vector::zeros(2))
            .constant_noise(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]))
            .build()
            .unwrap();
        // D⁻¹ (1,0) = (4,-2), so ¼ · 4 = 1
        let l = lagrangian(&sys, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), 0.0).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_path_against_drift() {
        let sys = constant_drift(1.0, 1.0);
        let p = init_path(&v(&[0.0]), &v(&[-1.0]), 1.0, 10, InitStrategy::Linear).unwrap();
        assert!((action(&sys, &p).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn linear_path_is_stationary_for_constant_drift() {
        let sys = constant_drift(0.5, 1.0);
        let p = init_path(&v(&[0.0]), &v(&[-1.0]), 1.0, 50, InitStrategy::Linear).unwrap();
        let g = action_gradient(&sys, &p, false).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-10));
        let r = euler_lagrange_residual(&sys, &p, false).unwrap();
        assert!(max_residual_norm(&r) < 1e-8);
    }

    #[test]
    fn missing_jacobian_needs_fallback() {
        let sys = constant_drift(0.5, 1.0).without_drift_jacobian();
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 5, InitStrategy::Linear).unwrap();
        assert!(matches!(action_gradient(&sys, &p, false), Err(Error::Configuration(_))));
        assert!(action_gradient(&sys, &p, true).is_ok());
    }

    #[test]
    fn state_dependent_noise_gradient_matches_differences() {
        let sys = SdeSystem::builder("multiplicative", 1, 1)
            .drift(|x, _| Vector::from_element(1, -x[0]))
            .noise_map(|x, _| Matrix::from_element(1, 1, (1.0 + x[0] * x[0]).sqrt()))
            .drift_jacobian(|_, _| Matrix::from_element(1, 1, -1.0))
            .state_dependent_noise(true)
            .autonomous(true)
            .build()
            .unwrap();
        let p = init_path(&v(&[0.0]), &v(&[1.5]), 1.0, 8, InitStrategy::Linear)
            .unwrap()
            .with_interior(&[0.4, -0.2, 0.9, 1.1, 0.3, 1.8, 1.2]);
        let g = action_gradient(&sys, &p, false).unwrap();
        for i in 0..g.len() {
            let h = 1e-6;
            let mut a = p.interior().to_vec();
            a[i] += h;
            let sp = action(&sys, &p.with_interior(&a)).unwrap();
            a[i] -= 2.0 * h;
            let sm = action(&sys, &p.with_interior(&a)).unwrap();
            let fd = (sp - sm) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * g[i].abs().max(1.0), "{i}: {fd} vs {}", g[i]);
        }
    }
}
