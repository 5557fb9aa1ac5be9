use thiserror::Error;

/// Errors raised by evaluation, simulation, optimization and quadrature routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite {quantity} component {component} at x = {x:?}, t = {t}")]
    EvaluationDomain {
        quantity: &'static str,
        component: usize,
        x: Vec<f64>,
        t: f64,
    },

    #[error("diffusion tensor is not positive definite at x = {x:?}, t = {t} (pivot {pivot})")]
    PdViolation { x: Vec<f64>, t: f64, pivot: usize },

    #[error("trajectory diverged at step {step}: |x| = {norm:e} exceeds bound {bound:e}")]
    Divergence { step: usize, norm: f64, bound: f64 },

    #[error("symmetry {spec} is not applicable: {reason}")]
    SymmetryNotApplicable { spec: String, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("energy {energy} is inadmissible: f(x)^2 + 4 D(x) E = {value:e} <= 0 at x = {x}")]
    InadmissibleEnergy { energy: f64, x: f64, value: f64 },

    #[error("quadrature exceeded {evaluations} integrand evaluations")]
    QuadratureBudget { evaluations: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("resampling error: {0}")]
    Resampling(String),

    #[error("optimization error: {0}")]
    Optimization(String),

    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
