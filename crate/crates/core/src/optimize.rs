//! Direct minimization of the discrete action over the interior path nodes.
//!
//! The search is limited-memory BFGS with Armijo backtracking. Its initial
//! inverse Hessian is the inverse of the kinetic part of the action, a
//! block-tridiagonal second-difference operator weighted by `D⁻¹`, which
//! removes the `K²` growth of the condition number on fine grids. Steps that
//! meet non-positive curvature drop the memory and take a preconditioned
//! Barzilai–Borwein steepest-descent step instead.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{action, action_and_gradient};
use crate::path::{init_path, DiscretizedPath, InitStrategy};
use crate::sde::{SdeSystem, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop when `‖∇S‖∞` falls below this.
    pub grad_tol: f64,
    /// Stop when the action decreased by less than `action_rel_tol · |S|` over
    /// the last `plateau_window` iterations.
    pub action_rel_tol: f64,
    pub plateau_window: usize,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub precondition: bool,
    /// Use a finite-difference drift Jacobian when the system has none.
    pub fd_fallback: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            grad_tol: 1e-8,
            action_rel_tol: 1e-15,
            plateau_window: 50,
            memory: 12,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            precondition: true,
            fd_fallback: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Configuration(format!("{name} must be positive, got {v}")))
            }
        };
        positive("grad_tol", self.grad_tol)?;
        positive("action_rel_tol", self.action_rel_tol)?;
        positive("armijo", self.armijo)?;
        if self.max_iters < 1 {
            return Err(Error::Configuration("max_iters must be >= 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Configuration(format!(
                "backtrack must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if self.plateau_window < 1 || self.memory < 1 {
            return Err(Error::Configuration("plateau_window and memory must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    ActionPlateau,
    MaxIterations,
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub action: f64,
    /// `‖∇S‖∞` at the returned path.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Action after each accepted iteration, starting with the initial path.
    #[serde(skip)]
    pub action_history: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse of the kinetic Hessian, applied per state component with the
/// Thomas algorithm.
struct KineticPreconditioner {
    dim: usize,
    /// Modified super-diagonal and reciprocal pivots of the LU sweep.
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
    lower: Vec<f64>,
}

impl KineticPreconditioner {
    fn new(system: &SdeSystem, path: &DiscretizedPath) -> Result<Self> {
        let k_max = path.segments();
        let dt = path.dt();
        let weights: Vec<f64> = (0..k_max)
            .map(|k| {
                let (mid, _, t) = path.segment(k);
                Ok(system.diffusion_factor(&mid, t)?.mean_inverse_diagonal() / (2.0 * dt))
            })
            .collect::<Result<_>>()?;
        let m = k_max - 1;
        let mut upper = vec![0.0; m];
        let mut inv_pivot = vec![0.0; m];
        let mut lower = vec![0.0; m];
        for i in 0..m {
            // interior node i+1 couples segments i and i+1
            let diag = weights[i] + weights[i + 1];
            let off = -weights[i + 1];
            lower[i] = if i > 0 { -weights[i] } else { 0.0 };
            let pivot = if i > 0 { diag - lower[i] * upper[i - 1] } else { diag };
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = off * inv_pivot[i];
        }
        Ok(Self {
            dim: path.dim(),
            upper,
            inv_pivot,
            lower,
        })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let m = self.inv_pivot.len();
        let mut z = vec![0.0; r.len()];
        for c in 0..n {
            for i in 0..m {
                let prev = if i > 0 { z[(i - 1) * n + c] } else { 0.0 };
                z[i * n + c] = (r[i * n + c] - self.lower[i] * prev) * self.inv_pivot[i];
            }
            for i in (0..m.saturating_sub(1)).rev() {
                z[i * n + c] -= self.upper[i] * z[(i + 1) * n + c];
            }
        }
        z
    }
}

enum Preconditioner {
    Identity,
    Kinetic(KineticPreconditioner),
}

impl Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity => r.to_vec(),
            Self::Kinetic(k) => k.apply(r),
        }
    }
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(grad: &[f64], memory: &VecDeque<CurvaturePair>, precond: &Preconditioner) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for pair in memory.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let mut r = precond.apply(&q);
    if let Some(last) = memory.back() {
        let hy = precond.apply(&last.y);
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &hy);
        if gamma.is_finite() && gamma > 0.0 {
            r.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for (pair, a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = pair.rho * dot(&pair.y, &r);
        for (ri, si) in r.iter_mut().zip(&pair.s) {
            *ri += si * (a - b);
        }
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Minimize the action starting from `init`. Endpoints, horizon and grid are
/// taken from `init` and never change.
pub fn minimize_from(
    system: &SdeSystem,
    init: &DiscretizedPath,
    config: &OptimizerConfig,
) -> Result<(DiscretizedPath, OptimizationReport)> {
    config.validate()?;
    if init.dim() != system.state_dim() {
        return Err(Error::Dimension {
            what: "path state",
            expected: system.state_dim(),
            found: init.dim(),
        });
    }
    let allow_fd = config.fd_fallback;
    let eval = |x: &[f64]| action_and_gradient(system, &init.with_interior(x), allow_fd);

    let precond = if config.precondition {
        Preconditioner::Kinetic(KineticPreconditioner::new(system, init)?)
    } else {
        Preconditioner::Identity
    };

    let mut x = init.interior().to_vec();
    let (mut s_val, mut grad) = eval(&x)?;
    let mut history = vec![s_val];
    let mut memory: VecDeque<CurvaturePair> = VecDeque::with_capacity(config.memory);
    // Preconditioned Barzilai–Borwein scale for steepest-descent fallbacks.
    let mut bb_scale = 1.0;
    let mut iterations = 0;

    let finish = |x: &[f64], s_val: f64, grad: &[f64], iterations, termination, history: Vec<f64>| {
        let converged = matches!(termination, Termination::GradientTolerance | Termination::ActionPlateau);
        (
            init.with_interior(x),
            OptimizationReport {
                action: s_val,
                grad_norm: inf_norm(grad),
                iterations,
                converged,
                termination,
                action_history: history,
            },
        )
    };

    if inf_norm(&grad) <= config.grad_tol || x.is_empty() {
        return Ok(finish(&x, s_val, &grad, 0, Termination::GradientTolerance, history));
    }

    while iterations < config.max_iters {
        iterations += 1;
        let mut direction = two_loop(&grad, &memory, &precond);
        let mut slope = dot(&grad, &direction);
        if !(slope < 0.0) {
            memory.clear();
            direction = precond.apply(&grad).iter().map(|v| -bb_scale * v).collect();
            slope = dot(&grad, &direction);
        }

        let mut accepted = None;
        let mut any_finite = false;
        for attempt in 0..2 {
            let mut step = 1.0;
            for _ in 0..config.max_backtracks {
                let trial: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + step * d).collect();
                match eval(&trial) {
                    Ok((s_new, g_new)) if s_new.is_finite() => {
                        any_finite = true;
                        if s_new <= s_val + config.armijo * step * slope {
                            accepted = Some((trial, s_new, g_new));
                            break;
                        }
                    }
                    // evaluation failures (e.g. D not positive definite) shrink the step
                    _ => {}
                }
                step *= config.backtrack;
            }
            if accepted.is_some() || attempt == 1 || memory.is_empty() {
                break;
            }
            memory.clear();
            direction = precond.apply(&grad).iter().map(|v| -bb_scale * v).collect();
            slope = dot(&grad, &direction);
        }

        let Some((x_new, s_new, g_new)) = accepted else {
            if !any_finite {
                return Err(Error::Optimization(format!(
                    "no admissible step from action {s_val} after {} backtracks",
                    config.max_backtracks
                )));
            }
            return Ok(finish(
                &x,
                s_val,
                &grad,
                iterations,
                Termination::LineSearchStalled,
                history,
            ));
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let curvature_ok = sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if curvature_ok {
            if memory.len() == config.memory {
                memory.pop_front();
            }
            let hy = precond.apply(&y);
            bb_scale = (sy / dot(&y, &hy)).clamp(1e-4, 1e4);
            memory.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
        } else {
            memory.clear();
        }

        x = x_new;
        s_val = s_new;
        grad = g_new;
        history.push(s_val);

        if inf_norm(&grad) <= config.grad_tol {
            return Ok(finish(
                &x,
                s_val,
                &grad,
                iterations,
                Termination::GradientTolerance,
                history,
            ));
        }
        if history.len() > config.plateau_window {
            let old = history[history.len() - 1 - config.plateau_window];
            if old - s_val <= config.action_rel_tol * s_val.abs().max(f64::MIN_POSITIVE) {
                return Ok(finish(
                    &x,
                    s_val,
                    &grad,
                    iterations,
                    Termination::ActionPlateau,
                    history,
                ));
            }
        }
    }
    Ok(finish(
        &x,
        s_val,
        &grad,
        iterations,
        Termination::MaxIterations,
        history,
    ))
}

/// Most likely path from `x0` to `xf` over `duration` on `segments` steps.
/// Starts from the straight line unless `init` is given.
pub fn minimize_action(
    system: &SdeSystem,
    x0: &Vector,
    xf: &Vector,
    duration: f64,
    segments: usize,
    config: &OptimizerConfig,
    init: Option<&DiscretizedPath>,
) -> Result<(DiscretizedPath, OptimizationReport)> {
    match init {
        Some(p) => {
            if p.start() != *x0 || p.end() != *xf || p.segments() != segments || p.duration() != duration {
                return Err(Error::Argument(
                    "initial path does not match endpoints, horizon or grid".into(),
                ));
            }
            minimize_from(system, p, config)
        }
        None => {
            let p = init_path(x0, xf, duration, segments, InitStrategy::Linear)?;
            minimize_from(system, &p, config)
        }
    }
}

/// Upsample by `factor` and re-optimize.
pub fn refine_path(
    system: &SdeSystem,
    path: &DiscretizedPath,
    factor: usize,
    config: &OptimizerConfig,
) -> Result<(DiscretizedPath, OptimizationReport)> {
    let fine = path.upsample(factor)?;
    minimize_from(system, &fine, config)
}

/// One local minimum found by [`minimize_multistart`].
#[derive(Debug, Clone)]
pub struct LocalMinimum {
    pub path: DiscretizedPath,
    pub report: OptimizationReport,
    /// Indices of the initial paths that led here.
    pub starts: Vec<usize>,
}

/// Optimize from several initial paths in parallel and return the distinct
/// minima sorted by action. Runs that fail are skipped unless all of them do.
/// Two results closer than `dedup_tol` (max node distance) are merged.
pub fn minimize_multistart(
    system: &SdeSystem,
    inits: &[DiscretizedPath],
    config: &OptimizerConfig,
    dedup_tol: f64,
) -> Result<Vec<LocalMinimum>> {
    let runs: Vec<Result<(DiscretizedPath, OptimizationReport)>> =
        inits.par_iter().map(|p| minimize_from(system, p, config)).collect();
    let mut found: Vec<LocalMinimum> = Vec::new();
    let mut first_err = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok((path, report)) => {
                if let Some(m) = found.iter_mut().find(|m| m.path.max_distance(&path) < dedup_tol) {
                    m.starts.push(i);
                    if report.action < m.report.action {
                        m.path = path;
                        m.report = report;
                    }
                } else {
                    found.push(LocalMinimum {
                        path,
                        report,
                        starts: vec![i],
                    });
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if found.is_empty() {
        return Err(first_err.unwrap_or_else(|| Error::Argument("no initial paths".into())));
    }
    found.sort_by(|a, b| a.report.action.total_cmp(&b.report.action));
    Ok(found)
}

/// Absolute floor in the relative-error denominator of [`grad_check`].
pub const GRAD_CHECK_FLOOR: f64 = 1e-12;

/// Largest componentwise relative error between the analytic action gradient
/// and central differences of the action (step `1e-6 · max(1, |x_i|)`, rounded
/// to a power of two).
///
/// Only the two segments adjacent to a node depend on it, so the difference
/// quotient is formed from those segments alone to keep round-off small.
pub fn grad_check(system: &SdeSystem, path: &DiscretizedPath, allow_fd: bool) -> Result<f64> {
    let analytic = crate::lagrangian::action_gradient(system, path, allow_fd)?;
    let n = path.dim();
    let dt = path.dt();
    let local = |p: &DiscretizedPath, node: usize| -> Result<f64> {
        let mut s = 0.0;
        for k in [node - 1, node] {
            let (mid, vel, t) = p.segment(k);
            s += dt * crate::lagrangian::lagrangian(system, &mid, &vel, t)?;
        }
        Ok(s)
    };
    let mut worst: f64 = 0.0;
    let mut x = path.interior().to_vec();
    for (idx, a) in analytic.iter().enumerate() {
        let node = idx / n + 1;
        let orig = x[idx];
        // power-of-two step so that x ± h are exact and the stencil is symmetric
        let h = (1e-6 * orig.abs().max(1.0)).log2().round().exp2();
        x[idx] = orig + h;
        let sp = local(&path.with_interior(&x), node)?;
        x[idx] = orig - h;
        let sm = local(&path.with_interior(&x), node)?;
        x[idx] = orig;
        let fd = (sp - sm) / (2.0 * h);
        let err = (a - fd).abs() / a.abs().max(fd.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Action of `path`, re-exported here for callers that only use this module.
pub fn path_action(system: &SdeSystem, path: &DiscretizedPath) -> Result<f64> {
    action(system, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Matrix;

    fn ddm(v: f64, sigma: f64) -> SdeSystem {
        SdeSystem::builder("ddm", 1, 1)
            .drift(move |_, _| Vector::from_element(1, v))
            .constant_noise(Matrix::from_element(1, 1, sigma))
            .drift_jacobian(|_, _| Matrix::zeros(1, 1))
            .autonomous(true)
            .build()
            .unwrap()
    }

    fn ou_1d(d: f64) -> SdeSystem {
        SdeSystem::builder("ou", 1, 1)
            .drift(|x, _| -x)
            .constant_noise(Matrix::from_element(1, 1, (2.0 * d).sqrt()))
            .drift_jacobian(|_, _| Matrix::from_element(1, 1, -1.0))
            .autonomous(true)
            .build()
            .unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            grad_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn preconditioner_inverts_second_difference() {
        let sys = ddm(0.0, 1.0);
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 6, InitStrategy::Linear).unwrap();
        let pc = KineticPreconditioner::new(&sys, &p).unwrap();
        let r = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let z = pc.apply(&r);
        // D = 1/2, so weights are (1/D)/(2Δt) = 6
        let w = 6.0;
        for i in 0..5 {
            let left = if i > 0 { z[i - 1] } else { 0.0 };
            let right = if i < 4 { z[i + 1] } else { 0.0 };
            let mz = w * (2.0 * z[i] - left - right);
            assert!((mz - r[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn curved_init_relaxes_to_line() {
        let sys = ddm(0.5, 1.0);
        let lin = init_path(&v(&[0.0]), &v(&[-1.0]), 1.0, 40, InitStrategy::Linear).unwrap();
        let bumped: Vec<f64> = lin
            .interior()
            .iter()
            .enumerate()
            .map(|(i, x)| x + 0.3 * (std::f64::consts::PI * (i + 1) as f64 / 40.0).sin())
            .collect();
        let init = lin.with_interior(&bumped);
        let (path, rep) = minimize_from(&sys, &init, &OptimizerConfig::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(path.max_distance(&lin) < 1e-6);
        assert!(rep.action_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(path.start(), init.start());
        assert_eq!(path.end(), init.end());
    }

    #[test]
    fn fixed_point_bridge_is_constant() {
        let sys = ou_1d(0.5);
        let x = v(&[0.0]);
        let (path, rep) = minimize_action(&sys, &x, &x, 3.0, 50, &OptimizerConfig::default(), None).unwrap();
        assert!(rep.action < 1e-10);
        assert!(path.nodes().iter().all(|n| n[0] == 0.0));
    }

    #[test]
    fn without_preconditioning_still_converges() {
        let sys = ou_1d(0.5);
        let cfg = OptimizerConfig {
            precondition: false,
            grad_tol: 1e-7,
            ..Default::default()
        };
        let (_, rep) = minimize_action(&sys, &v(&[1.0]), &v(&[1.0]), 2.0, 20, &cfg, None).unwrap();
        assert!(rep.converged, "{rep:?}");
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let sys = ou_1d(0.5);
        let cfg = OptimizerConfig {
            max_iters: 1,
            ..Default::default()
        };
        let (_, rep) = minimize_action(&sys, &v(&[1.0]), &v(&[1.0]), 2.0, 100, &cfg, None).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.termination, Termination::MaxIterations);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn mismatched_init_is_rejected() {
        let sys = ou_1d(0.5);
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 10, InitStrategy::Linear).unwrap();
        let err = minimize_action(
            &sys,
            &v(&[0.0]),
            &v(&[2.0]),
            1.0,
            10,
            &OptimizerConfig::default(),
            Some(&p),
        );
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn refine_linear_map_stays_linear() {
        let sys = ddm(0.5, 1.0);
        let (p, _) = minimize_action(&sys, &v(&[0.0]), &v(&[1.0]), 1.0, 10, &OptimizerConfig::default(), None).unwrap();
        let (q, rep) = refine_path(&sys, &p, 3, &OptimizerConfig::default()).unwrap();
        assert_eq!(q.segments(), 30);
        assert!(rep.converged);
        let lin = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 30, InitStrategy::Linear).unwrap();
        assert!(q.max_distance(&lin) < 1e-9);
        assert!(matches!(
            refine_path(&sys, &p, 1, &OptimizerConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn grad_check_degenerate_path() {
        let sys = ddm(0.5, 1.0);
        // dyadic nodes keep the velocity, and hence both gradients, exactly zero
        let p = init_path(&v(&[0.0]), &v(&[0.5]), 1.0, 8, InitStrategy::Linear).unwrap();
        let err = grad_check(&sys, &p, false).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn multistart_merges_duplicates() {
        let sys = ou_1d(0.5);
        let a = init_path(&v(&[1.0]), &v(&[1.0]), 2.0, 30, InitStrategy::Linear).unwrap();
        let b = a.with_interior(&a.interior().iter().map(|x| x + 0.2).collect::<Vec<_>>());
        let minima = minimize_multistart(&sys, &[a, b], &OptimizerConfig::default(), 1e-6).unwrap();
        assert_eq!(minima.len(), 1);
        assert_eq!(minima[0].starts, vec![0, 1]);
    }
}
