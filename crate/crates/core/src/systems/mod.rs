//! Built-in systems: drift-diffusion, isotropic OU, the tanh attractor network
//! and reverse diffusion of a ring distribution.

pub mod bessel;
pub mod drift_diffusion;
pub mod fixed_points;
pub mod ou;
pub mod piet;
pub mod ring;

pub use drift_diffusion::{constant_drift_1d, DriftDiffusionParams};
pub use fixed_points::{find_fixed_points, FixedPoint};
pub use ou::{isotropic_ou, OuParams};
pub use piet::{piet_attractors, piet_fixed_points, piet_network, piet_network_unverified, PietParams};
pub use ring::{
    forward_diffusion, pf_ode_trajectory, ring_log_density, ring_reverse_sde, ring_score, ring_score_jacobian,
    RingParams,
};
