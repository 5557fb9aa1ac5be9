//! Stochastic differential equations `dx = f(x,t) dt + G(x,t) dW` and the
//! diffusion tensor `D = ½ G Gᵀ` that weights fluctuations in the path action.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symmetry::SymmetrySpec;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

type VectorField = Arc<dyn Fn(&Vector, f64) -> Vector + Send + Sync>;
type MatrixField = Arc<dyn Fn(&Vector, f64) -> Matrix + Send + Sync>;

/// Relative step used for central finite differences of the drift.
const FD_REL_STEP: f64 = 1e-6;

/// A drift, a noise map and the metadata the path machinery needs about them.
///
/// Cloning is cheap: the fields are reference counted.
#[derive(Clone)]
pub struct SdeSystem {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    drift: VectorField,
    noise_map: MatrixField,
    drift_jacobian: Option<MatrixField>,
    autonomous: bool,
    state_dependent_noise: bool,
    symmetries: Vec<SymmetrySpec>,
    time_range: (f64, f64),
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("has_jacobian", &self.drift_jacobian.is_some())
            .field("autonomous", &self.autonomous)
            .field("state_dependent_noise", &self.state_dependent_noise)
            .field("symmetries", &self.symmetries)
            .field("time_range", &self.time_range)
            .finish()
    }
}

/// Builder for [`SdeSystem`].
pub struct SdeSystemBuilder {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    drift: Option<VectorField>,
    noise_map: Option<MatrixField>,
    drift_jacobian: Option<MatrixField>,
    autonomous: bool,
    state_dependent_noise: bool,
    symmetries: Vec<SymmetrySpec>,
    time_range: (f64, f64),
}

impl SdeSystemBuilder {
    pub fn drift<F>(mut self, f: F) -> Self
    where
        F: Fn(&Vector, f64) -> Vector + Send + Sync + 'static,
    {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn noise_map<F>(mut self, g: F) -> Self
    where
        F: Fn(&Vector, f64) -> Matrix + Send + Sync + 'static,
    {
        self.noise_map = Some(Arc::new(g));
        self
    }

    /// Constant noise map `G`, independent of state and time.
    pub fn constant_noise(mut self, g: Matrix) -> Self {
        self.noise_map = Some(Arc::new(move |_: &Vector, _| g.clone()));
        self
    }

    pub fn drift_jacobian<F>(mut self, j: F) -> Self
    where
        F: Fn(&Vector, f64) -> Matrix + Send + Sync + 'static,
    {
        self.drift_jacobian = Some(Arc::new(j));
        self
    }

    /// Neither the drift nor the noise map depends explicitly on time.
    pub fn autonomous(mut self, yes: bool) -> Self {
        self.autonomous = yes;
        self
    }

    /// The noise map depends on the state. The action gradient then picks up a
    /// term from `∂D/∂x`, which is estimated by central differences.
    pub fn state_dependent_noise(mut self, yes: bool) -> Self {
        self.state_dependent_noise = yes;
        self
    }

    pub fn symmetry(mut self, spec: SymmetrySpec) -> Self {
        self.symmetries.push(spec);
        self
    }

    pub fn time_range(mut self, start: f64, end: f64) -> Self {
        self.time_range = (start, end);
        self
    }

    pub fn build(self) -> Result<SdeSystem> {
        if self.state_dim == 0 || self.noise_dim == 0 {
            return Err(Error::Configuration(format!(
                "{}: state and noise dimensions must be positive",
                self.name
            )));
        }
        if !(self.time_range.0 < self.time_range.1) {
            return Err(Error::Configuration(format!(
                "{}: empty time range {:?}",
                self.name, self.time_range
            )));
        }
        for spec in &self.symmetries {
            spec.validate(self.state_dim)?;
        }
        let drift = self
            .drift
            .ok_or_else(|| Error::Configuration(format!("{}: drift not set", self.name)))?;
        let noise_map = self
            .noise_map
            .ok_or_else(|| Error::Configuration(format!("{}: noise map not set", self.name)))?;
        Ok(SdeSystem {
            name: self.name,
            state_dim: self.state_dim,
            noise_dim: self.noise_dim,
            drift,
            noise_map,
            drift_jacobian: self.drift_jacobian,
            autonomous: self.autonomous,
            state_dependent_noise: self.state_dependent_noise,
            symmetries: self.symmetries,
            time_range: self.time_range,
        })
    }
}

impl SdeSystem {
    pub fn builder(name: impl Into<String>, state_dim: usize, noise_dim: usize) -> SdeSystemBuilder {
        SdeSystemBuilder {
            name: name.into(),
            state_dim,
            noise_dim,
            drift: None,
            noise_map: None,
            drift_jacobian: None,
            autonomous: false,
            state_dependent_noise: false,
            symmetries: Vec::new(),
            time_range: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn has_state_dependent_noise(&self) -> bool {
        self.state_dependent_noise
    }

    pub fn has_jacobian(&self) -> bool {
        self.drift_jacobian.is_some()
    }

    pub fn declared_symmetries(&self) -> &[SymmetrySpec] {
        &self.symmetries
    }

    pub fn time_range(&self) -> (f64, f64) {
        self.time_range
    }

    /// Replace the analytic Jacobian. Mostly useful for test fixtures.
    pub fn with_drift_jacobian<F>(mut self, j: F) -> Self
    where
        F: Fn(&Vector, f64) -> Matrix + Send + Sync + 'static,
    {
        self.drift_jacobian = Some(Arc::new(j));
        self
    }

    /// Drop the analytic Jacobian so that callers must opt into finite differences.
    pub fn without_drift_jacobian(mut self) -> Self {
        self.drift_jacobian = None;
        self
    }

    fn check_input(&self, x: &Vector, t: f64) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim,
                found: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::EvaluationDomain {
                quantity: "state",
                component: i,
                x: x.as_slice().to_vec(),
                t,
            });
        }
        let (lo, hi) = self.time_range;
        let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()).min(1e300));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::Argument(format!(
                "{}: time {t} outside valid range [{lo}, {hi}]",
                self.name
            )));
        }
        Ok(())
    }

    /// Drift `f(x, t)`.
    pub fn drift_eval(&self, x: &Vector, t: f64) -> Result<Vector> {
        self.check_input(x, t)?;
        let f = (self.drift)(x, t);
        if f.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "drift output",
                expected: self.state_dim,
                found: f.len(),
            });
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::EvaluationDomain {
                quantity: "drift",
                component: i,
                x: x.as_slice().to_vec(),
                t,
            });
        }
        Ok(f)
    }

    /// Noise map `G(x, t)`, an `N × M` matrix.
    pub fn noise_eval(&self, x: &Vector, t: f64) -> Result<Matrix> {
        self.check_input(x, t)?;
        let g = (self.noise_map)(x, t);
        if g.nrows() != self.state_dim || g.ncols() != self.noise_dim {
            return Err(Error::Dimension {
                what: "noise map output",
                expected: self.state_dim * self.noise_dim,
                found: g.nrows() * g.ncols(),
            });
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::EvaluationDomain {
                quantity: "noise map",
                component: i,
                x: x.as_slice().to_vec(),
                t,
            });
        }
        Ok(g)
    }

    /// Diffusion tensor `D = ½ G Gᵀ`, exactly symmetric and checked positive definite.
    pub fn diffusion_eval(&self, x: &Vector, t: f64) -> Result<Matrix> {
        let d = self.diffusion_unchecked(x, t)?;
        Cholesky::factor(&d).map_err(|pivot| Error::PdViolation {
            x: x.as_slice().to_vec(),
            t,
            pivot,
        })?;
        Ok(d)
    }

    fn diffusion_unchecked(&self, x: &Vector, t: f64) -> Result<Matrix> {
        let g = self.noise_eval(x, t)?;
        let n = self.state_dim;
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * g.row(i).dot(&g.row(j));
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        Ok(d)
    }

    /// Cholesky factor of `D(x, t)`.
    pub fn diffusion_factor(&self, x: &Vector, t: f64) -> Result<Cholesky> {
        let d = self.diffusion_unchecked(x, t)?;
        Cholesky::factor(&d).map_err(|pivot| Error::PdViolation {
            x: x.as_slice().to_vec(),
            t,
            pivot,
        })
    }

    /// `D(x, t)⁻¹ v` via a Cholesky solve.
    pub fn diffusion_solve(&self, x: &Vector, t: f64, v: &Vector) -> Result<Vector> {
        if v.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "right-hand side",
                expected: self.state_dim,
                found: v.len(),
            });
        }
        Ok(self.diffusion_factor(x, t)?.solve(v))
    }

    /// Analytic drift Jacobian `∂f/∂x`, if the system provides one.
    pub fn drift_jacobian_eval(&self, x: &Vector, t: f64) -> Option<Result<Matrix>> {
        let jac = self.drift_jacobian.as_ref()?;
        Some(self.check_input(x, t).and_then(|_| {
            let j = jac(x, t);
            if j.nrows() != self.state_dim || j.ncols() != self.state_dim {
                return Err(Error::Dimension {
                    what: "drift jacobian",
                    expected: self.state_dim * self.state_dim,
                    found: j.nrows() * j.ncols(),
                });
            }
            Ok(j)
        }))
    }

    /// Central finite-difference estimate of `∂f/∂x`.
    pub fn drift_jacobian_fd(&self, x: &Vector, t: f64) -> Result<Matrix> {
        let n = self.state_dim;
        let mut jac = Matrix::zeros(n, n);
        let mut xp = x.clone();
        for j in 0..n {
            let h = FD_REL_STEP * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let fp = self.drift_eval(&xp, t)?;
            xp[j] = x[j] - h;
            let fm = self.drift_eval(&xp, t)?;
            xp[j] = x[j];
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }

    /// Analytic Jacobian when available, otherwise finite differences if
    /// `allow_fd` is set.
    pub fn jacobian_or_fd(&self, x: &Vector, t: f64, allow_fd: bool) -> Result<Matrix> {
        match self.drift_jacobian_eval(x, t) {
            Some(j) => j,
            None if allow_fd => self.drift_jacobian_fd(x, t),
            None => Err(Error::Configuration(format!(
                "{}: no analytic drift jacobian and finite-difference fallback disabled",
                self.name
            ))),
        }
    }

    /// Largest relative mismatch between the analytic Jacobian and central
    /// differences at `(x, t)`, normalised by `max(1, |J|∞)`.
    pub fn jacobian_mismatch(&self, x: &Vector, t: f64) -> Result<f64> {
        let analytic = self
            .drift_jacobian_eval(x, t)
            .ok_or_else(|| Error::Configuration(format!("{}: no analytic jacobian", self.name)))??;
        let fd = self.drift_jacobian_fd(x, t)?;
        let scale = analytic.amax().max(1.0);
        Ok((analytic - fd).amax() / scale)
    }

    /// `∂D/∂x_i` by central differences, one matrix per state component.
    pub(crate) fn diffusion_gradient_fd(&self, x: &Vector, t: f64) -> Result<Vec<Matrix>> {
        let mut xp = x.clone();
        (0..self.state_dim)
            .map(|i| {
                let h = FD_REL_STEP * x[i].abs().max(1.0);
                xp[i] = x[i] + h;
                let dp = self.diffusion_unchecked(&xp, t)?;
                xp[i] = x[i] - h;
                let dm = self.diffusion_unchecked(&xp, t)?;
                xp[i] = x[i];
                Ok((dp - dm) / (2.0 * h))
            })
            .collect()
    }
}

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    /// Diagonal of `A` when `A` is diagonal; solves then divide exactly.
    diagonal: Option<Vec<f64>>,
}

impl Cholesky {
    /// Factor `a`. On failure returns the index of the first non-positive pivot.
    pub fn factor(a: &Matrix) -> std::result::Result<Self, usize> {
        let n = a.nrows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            // a pivot that cancels to rounding level means A is numerically singular
            if !(diag > 8.0 * f64::EPSILON * a[(j, j)].abs()) || !diag.is_finite() {
                return Err(j);
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
        let diagonal = is_diagonal.then(|| (0..n).map(|i| a[(i, i)]).collect());
        Ok(Self { l, diagonal })
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        if let Some(d) = &self.diagonal {
            return Vector::from_iterator(b.len(), b.iter().zip(d).map(|(v, a)| v / a));
        }
        let n = self.l.nrows();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Mean of the diagonal of `A⁻¹`.
    pub fn mean_inverse_diagonal(&self) -> f64 {
        let n = self.l.nrows();
        let mut total = 0.0;
        let mut e = Vector::zeros(n);
        for i in 0..n {
            e.fill(0.0);
            e[i] = 1.0;
            total += self.solve(&e)[i];
        }
        total / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn shear_noise() -> SdeSystem {
        SdeSystem::builder("shear", 2, 2)
            .drift(|_, _| Vector::zeros(2))
            .constant_noise(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]))
            .autonomous(true)
            .build()
            .unwrap()
    }

    #[test]
    fn diffusion_is_half_g_gt() {
        let sys = shear_noise();
        let d = sys.diffusion_eval(&Vector::zeros(2), 0.0).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 1.0]);
        assert_eq!(d, expected);
    }

    #[test]
    fn diffusion_solve_matches_hand_inverse() {
        let sys = shear_noise();
        let r = sys
            .diffusion_solve(&Vector::zeros(2), 0.0, &Vector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert_relative_eq!(r[0], 4.0, epsilon = 1e-14);
        assert_relative_eq!(r[1], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn scalar_diffusion() {
        let sys = SdeSystem::builder("bm", 1, 1)
            .drift(|_, _| Vector::from_element(1, 1.0))
            .constant_noise(Matrix::from_element(1, 1, 1.0))
            .build()
            .unwrap();
        let x = Vector::from_element(1, 3.0);
        assert_eq!(sys.diffusion_eval(&x, 0.0).unwrap()[(0, 0)], 0.5);
        assert_eq!(
            sys.diffusion_solve(&x, 0.0, &Vector::from_element(1, 1.0)).unwrap()[0],
            2.0
        );
    }

    #[test]
    fn rank_deficient_noise_reports_pivot() {
        let sys = SdeSystem::builder("degenerate", 2, 1)
            .drift(|_, _| Vector::zeros(2))
            .constant_noise(Matrix::from_row_slice(2, 1, &[1.0, 1.0]))
            .build()
            .unwrap();
        let err = sys.diffusion_eval(&Vector::from_vec(vec![0.3, 0.1]), 2.0).unwrap_err();
        match err {
            Error::PdViolation { x, t, pivot } => {
                assert_eq!(x, vec![0.3, 0.1]);
                assert_eq!(t, 2.0);
                assert_eq!(pivot, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_drift_names_component() {
        let sys = SdeSystem::builder("bad", 2, 2)
            .drift(|x, _| Vector::from_vec(vec![x[0], 1.0 / x[1]]))
            .constant_noise(Matrix::identity(2, 2))
            .build()
            .unwrap();
        let err = sys.drift_eval(&Vector::from_vec(vec![1.0, 0.0]), 0.0).unwrap_err();
        assert!(matches!(
            err,
            Error::EvaluationDomain {
                component: 1,
                quantity: "drift",
                ..
            }
        ));
    }

    #[test]
    fn missing_drift_is_a_configuration_error() {
        let err = SdeSystem::builder("empty", 1, 1)
            .constant_noise(Matrix::identity(1, 1))
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn time_outside_range_is_rejected() {
        let sys = SdeSystem::builder("window", 1, 1)
            .drift(|_, _| Vector::zeros(1))
            .constant_noise(Matrix::identity(1, 1))
            .time_range(0.0, 1.0)
            .build()
            .unwrap();
        assert!(sys.drift_eval(&Vector::zeros(1), 0.5).is_ok());
        assert!(matches!(
            sys.drift_eval(&Vector::zeros(1), 1.5),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn fd_jacobian_of_linear_drift() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.5, -3.0]);
        let a2 = a.clone();
        let sys = SdeSystem::builder("linear", 2, 2)
            .drift(move |x, _| &a2 * x)
            .constant_noise(Matrix::identity(2, 2))
            .build()
            .unwrap();
        let j = sys.drift_jacobian_fd(&Vector::from_vec(vec![0.7, -1.2]), 0.0).unwrap();
        assert!((j - a).amax() < 1e-8);
        assert!(matches!(
            sys.jacobian_or_fd(&Vector::zeros(2), 0.0, false),
            Err(Error::Configuration(_))
        ));
    }
}
