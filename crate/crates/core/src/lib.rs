//! Most-likely transition paths of stochastic differential equations and the
//! Noether charges that are conserved along them.
//!
//! A system `dx = f(x,t) dt + G(x,t) dW` with diffusion tensor `D = ½ G Gᵀ`
//! assigns to a path the Onsager–Machlup action
//!
//! ```text
//! S[x] = ∫ ¼ (ẋ − f)ᵀ D⁻¹ (ẋ − f) dt
//! ```
//!
//! whose minimizer between fixed endpoints over a fixed horizon is the most
//! likely path. Continuous symmetries of the Lagrangian give conserved charges:
//! energy for time translation, momentum for translations and angular momentum
//! for rotations.
//!
//! ```
//! use noether_paths::prelude::*;
//!
//! let sys = isotropic_ou(&OuParams { dim: 1, ..Default::default() }).unwrap();
//! let one = Vector::from_element(1, 1.0);
//! let (path, report) =
//!     minimize_action(&sys, &one, &one, 2.0, 200, &OptimizerConfig::default(), None).unwrap();
//! assert!(report.converged);
//! let charges = charge_series(&sys, &path, &[SymmetrySpec::TimeTranslation]).unwrap();
//! let energy = variation(charges.energy.as_ref().unwrap());
//! assert!(energy.relative < 1e-3);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charges;
pub mod cli;
pub mod error;
pub mod lagrangian;
pub mod optimize;
pub mod path;
pub mod quadrature;
pub mod sde;
pub mod simulate;
pub mod symmetry;
pub mod systems;
pub mod trajectory;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::charges::{angular_momentum, charge_series, energy, momentum, variation, ChargeSeries};
    pub use crate::error::{Error, Result};
    pub use crate::lagrangian::{action, action_gradient, euler_lagrange_residual, lagrangian};
    pub use crate::optimize::{
        grad_check, minimize_action, minimize_from, minimize_multistart, refine_path, OptimizationReport,
        OptimizerConfig,
    };
    pub use crate::path::{init_path, DiscretizedPath, InitStrategy};
    pub use crate::quadrature::transition_time_1d;
    pub use crate::sde::{Matrix, SdeSystem, Vector};
    pub use crate::simulate::{ensemble_bridge_filter, euler_maruyama, simulate_ensemble, EnsembleSpec};
    pub use crate::symmetry::{check_symmetry, PhaseSample, SymmetrySpec};
    pub use crate::systems::*;
    pub use crate::trajectory::Trajectory;
}
