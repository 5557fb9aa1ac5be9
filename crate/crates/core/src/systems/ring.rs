//! Diffusion of a ring-shaped data distribution.
//!
//! Data are spread uniformly on a circle of radius `R`, blurred by a Gaussian of
//! width `σ₀`, and the forward process `ẋ = √(2t) η` adds variance `t²`. At time
//! `t` the density is radially symmetric with variance `v = σ₀² + t²`:
//!
//! `p(x|t) = exp(−(‖x‖² + R²) / 2v) · I₀(R‖x‖ / v) / (2πv)`.

use serde::{Deserialize, Serialize};

use super::bessel::{bessel_ratio, log_i0};
use crate::error::{Error, Result};
use crate::sde::{Matrix, SdeSystem, Vector};
use crate::symmetry::SymmetrySpec;
use crate::trajectory::Trajectory;

/// Fraction of the horizon used as the default time clamp.
pub const DEFAULT_T_MIN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingParams {
    /// Ring radius `R`.
    #[serde(alias = "R")]
    pub radius: f64,
    /// Width `σ₀` of the data distribution around the ring.
    pub sigma0: f64,
    /// Diffusion horizon `T`.
    #[serde(alias = "T")]
    pub horizon: f64,
    /// Reverse-time computations stop at `t_min`; defaults to `0.01 T`.
    pub t_min: Option<f64>,
}

impl Default for RingParams {
    fn default() -> Self {
        Self {
            radius: 1.0,
            sigma0: 0.1,
            horizon: 2.0,
            t_min: None,
        }
    }
}

impl RingParams {
    pub fn t_min(&self) -> f64 {
        self.t_min.unwrap_or(DEFAULT_T_MIN_FRACTION * self.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let t_min = self.t_min();
        if !(self.radius > 0.0 && self.sigma0 > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Configuration(format!(
                "ring: R and sigma0 must be positive, got R = {}, sigma0 = {}",
                self.radius, self.sigma0
            )));
        }
        if !(t_min > 0.0 && t_min < self.horizon) {
            return Err(Error::Configuration(format!(
                "ring: need 0 < t_min < T, got t_min = {t_min}, T = {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Variance `σ₀² + t²` of the blurred density.
    pub fn variance(&self, t: f64) -> f64 {
        self.sigma0 * self.sigma0 + t * t
    }
}

pub fn ring_log_density(x: &Vector, t: f64, params: &RingParams) -> f64 {
    let v = params.variance(t);
    let r = x.norm();
    let z = params.radius * r / v;
    -(r * r + params.radius * params.radius) / (2.0 * v) + log_i0(z) - (2.0 * std::f64::consts::PI * v).ln()
}

/// `g(r)` in `s(x) = g(‖x‖) x`.
fn radial_factor(r: f64, v: f64, radius: f64) -> f64 {
    let z = radius * r / v;
    // R ρ(z) / r = (R² / v) · ρ(z)/z, with ρ(z)/z → 1/2 at the origin
    let h = if z < 1e-8 {
        0.5 - z * z / 16.0
    } else {
        bessel_ratio(z) / z
    };
    (radius * radius / v * h - 1.0) / v
}

/// Score `∇ₓ log p(x|t) = [R ρ(z)/‖x‖ − 1] x / v` with `ρ = I₁/I₀` and `z = R‖x‖/v`.
pub fn ring_score(x: &Vector, t: f64, params: &RingParams) -> Vector {
    let v = params.variance(t);
    x * radial_factor(x.norm(), v, params.radius)
}

/// `∂s/∂x = g I + (g'(r)/r) x xᵀ`.
pub fn ring_score_jacobian(x: &Vector, t: f64, params: &RingParams) -> Matrix {
    let v = params.variance(t);
    let big_r = params.radius;
    let r = x.norm();
    let z = big_r * r / v;
    let g = radial_factor(r, v, big_r);
    // (d/dz (ρ/z)) / z, which tends to −1/8 at the origin
    let dh_over_z = if z < 1e-3 {
        -0.125 + z * z / 24.0
    } else {
        let rho = bessel_ratio(z);
        let drho = 1.0 - rho / z - rho * rho;
        (drho * z - rho) / (z * z * z)
    };
    let scale = big_r.powi(4) / v.powi(4) * dh_over_z;
    let n = x.len();
    Matrix::identity(n, n) * g + (x * x.transpose()) * scale
}

/// Reverse-time SDE in internal time `u ∈ [0, T − t_min]`, `t(u) = T − u`:
/// `dx = 2t s(x, t) du + √(2t) dW`, so `D = t I`.
pub fn ring_reverse_sde(params: &RingParams) -> Result<SdeSystem> {
    params.validate()?;
    let p = *params;
    let horizon = p.horizon;
    let (pd, pj) = (p, p);
    SdeSystem::builder("ring_reverse", 2, 2)
        .drift(move |x, u| {
            let t = horizon - u;
            ring_score(x, t, &pd) * (2.0 * t)
        })
        .noise_map(move |_, u| Matrix::identity(2, 2) * (2.0 * (horizon - u)).sqrt())
        .drift_jacobian(move |x, u| {
            let t = horizon - u;
            ring_score_jacobian(x, t, &pj) * (2.0 * t)
        })
        .autonomous(false)
        .symmetry(SymmetrySpec::rotation(0, 1))
        .time_range(0.0, horizon - p.t_min())
        .build()
}

/// Forward noising process `ẋ = √(2t) η` as an SDE on `[0, T]`.
pub fn forward_diffusion(dim: usize, horizon: f64) -> Result<SdeSystem> {
    SdeSystem::builder("forward_diffusion", dim, dim)
        .drift(move |x, _| Vector::zeros(x.len()))
        .noise_map(move |_, t| Matrix::identity(dim, dim) * (2.0 * t.max(0.0)).sqrt())
        .drift_jacobian(move |_, _| Matrix::zeros(dim, dim))
        .autonomous(false)
        .time_range(0.0, horizon)
        .build()
}

/// Probability-flow ODE `ẋ = −t s(x, t)` integrated with classical RK4 from
/// `t = T` down to `t_min`. Times in the result decrease.
pub fn pf_ode_trajectory(x_t: &Vector, params: &RingParams, dt: f64) -> Result<Trajectory> {
    params.validate()?;
    if x_t.len() != 2 {
        return Err(Error::Dimension {
            what: "ring state",
            expected: 2,
            found: x_t.len(),
        });
    }
    let span = params.horizon - params.t_min();
    let (n, h) = crate::simulate::step_grid(span, dt)?;
    let rhs = |x: &Vector, t: f64| ring_score(x, t, params) * (-t);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x_t.clone();
    times.push(params.horizon);
    states.push(x.clone());
    for k in 0..n {
        let t = params.horizon - k as f64 * h;
        let s = -h;
        let k1 = rhs(&x, t);
        let k2 = rhs(&(&x + &k1 * (0.5 * s)), t + 0.5 * s);
        let k3 = rhs(&(&x + &k2 * (0.5 * s)), t + 0.5 * s);
        let k4 = rhs(&(&x + &k3 * s), t + s);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (s / 6.0);
        if let Some(c) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::EvaluationDomain {
                quantity: "PF-ODE state",
                component: c,
                x: x.as_slice().to_vec(),
                t: t + s,
            });
        }
        times.push(params.horizon - (k + 1) as f64 * h);
        states.push(x.clone());
    }
    Trajectory::new(times, states)
}
