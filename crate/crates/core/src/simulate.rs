//! Euler–Maruyama simulation, reproducible parallel ensembles and bridge filtering.
//!
//! Trajectory `i` of an ensemble with master seed `s` draws its noise from the
//! ChaCha8 stream `(s, i)`, so results do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sde::{SdeSystem, Vector};
use crate::trajectory::{NoiseStream, Trajectory};

pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;

/// Integration grid: `n` steps of size `duration / n` with `n = ⌈duration / dt⌉`.
pub fn step_grid(duration: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!("step must be positive, got {dt}")));
    }
    if !(duration >= dt) || !duration.is_finite() {
        return Err(Error::Argument(format!(
            "duration {duration} must be at least one step {dt}"
        )));
    }
    let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((n, duration / n as f64))
}

fn rng_for(stream: NoiseStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(stream.seed);
    rng.set_stream(stream.index);
    rng
}

/// Run `n` Euler–Maruyama steps of size `h`, handing every state to `visit`.
#[allow(clippy::too_many_arguments)]
fn integrate(
    system: &SdeSystem,
    x0: &Vector,
    t0: f64,
    n: usize,
    h: f64,
    stream: NoiseStream,
    divergence_bound: f64,
    mut visit: impl FnMut(&Vector),
) -> Result<Vector> {
    let sqrt_h = h.sqrt();
    let mut rng = rng_for(stream);
    let mut x = x0.clone();
    let mut xi = Vector::zeros(system.noise_dim());
    visit(&x);
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let f = system.drift_eval(&x, t)?;
        let g = system.noise_eval(&x, t)?;
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        x += f * h + g * (&xi * sqrt_h);
        let norm = x.norm();
        if !(norm <= divergence_bound) {
            return Err(Error::Divergence {
                step: k + 1,
                norm,
                bound: divergence_bound,
            });
        }
        visit(&x);
    }
    Ok(x)
}

/// One Euler–Maruyama path `x_{k+1} = x_k + f Δt + G √Δt ξ_k`, drawn from an
/// explicit noise stream.
pub fn euler_maruyama_stream(
    system: &SdeSystem,
    x0: &Vector,
    t0: f64,
    duration: f64,
    dt: f64,
    stream: NoiseStream,
    divergence_bound: f64,
) -> Result<Trajectory> {
    let (n, h) = step_grid(duration, dt)?;
    let mut states = Vec::with_capacity(n + 1);
    integrate(system, x0, t0, n, h, stream, divergence_bound, |x| {
        states.push(x.clone())
    })?;
    let times = (0..=n).map(|k| t0 + k as f64 * h).collect();
    Ok(Trajectory::new(times, states)?.with_seed(stream))
}

/// Single path using stream 0 of `seed`.
pub fn euler_maruyama(
    system: &SdeSystem,
    x0: &Vector,
    t0: f64,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    euler_maruyama_stream(
        system,
        x0,
        t0,
        duration,
        dt,
        NoiseStream { seed, index: 0 },
        DEFAULT_DIVERGENCE_BOUND,
    )
}

/// Ensemble settings.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    pub t0: f64,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub divergence_bound: f64,
}

/// Simulate `n_paths` independent paths in parallel. Entry `i` always uses
/// noise stream `i`; failed paths are reported in place.
pub fn simulate_ensemble(system: &SdeSystem, x0: &Vector, spec: &EnsembleSpec) -> Vec<Result<Trajectory>> {
    (0..spec.n_paths as u64)
        .into_par_iter()
        .map(|index| {
            euler_maruyama_stream(
                system,
                x0,
                spec.t0,
                spec.duration,
                spec.dt,
                NoiseStream { seed: spec.seed, index },
                spec.divergence_bound,
            )
        })
        .collect()
}

/// Final states only, for ensembles too large to keep whole. Entry `i` is
/// the endpoint of the trajectory [`simulate_ensemble`] would return at `i`.
pub fn simulate_endpoints(system: &SdeSystem, x0: &Vector, spec: &EnsembleSpec) -> Result<Vec<Result<Vector>>> {
    let (n, h) = step_grid(spec.duration, spec.dt)?;
    Ok((0..spec.n_paths as u64)
        .into_par_iter()
        .map(|index| {
            let stream = NoiseStream { seed: spec.seed, index };
            integrate(system, x0, spec.t0, n, h, stream, spec.divergence_bound, |_| {})
        })
        .collect())
}

/// Whether a trajectory starts within `tol` of `x0` and is within `tol` of
/// `xf` at the node nearest `t_start + duration`.
pub fn bridge_accepts(tr: &Trajectory, x0: &Vector, xf: &Vector, duration: f64, tol: f64) -> bool {
    let Some(k) = tr.nearest_index(tr.times()[0] + duration) else {
        return false;
    };
    (tr.first() - x0).norm() <= tol && (&tr.states()[k] - xf).norm() <= tol
}

/// The trajectories accepted by [`bridge_accepts`].
pub fn ensemble_bridge_filter(
    trajectories: &[Trajectory],
    x0: &Vector,
    xf: &Vector,
    duration: f64,
    tol: f64,
) -> Vec<Trajectory> {
    trajectories
        .iter()
        .filter(|tr| bridge_accepts(tr, x0, xf, duration, tol))
        .cloned()
        .collect()
}

/// Which absorbing boundary of a bounded 1D system was hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

/// First node at or beyond either bound, for 1D trajectories.
pub fn first_passage(tr: &Trajectory, lower: f64, upper: f64) -> Option<(usize, Boundary)> {
    tr.states().iter().enumerate().find_map(|(k, x)| {
        if x[0] <= lower {
            Some((k, Boundary::Lower))
        } else if x[0] >= upper {
            Some((k, Boundary::Upper))
        } else {
            None
        }
    })
}

/// Apply absorbing boundaries after the fact: cut the trajectory at its first crossing.
pub fn truncate_at_first_passage(tr: &Trajectory, lower: f64, upper: f64) -> (Trajectory, Option<Boundary>) {
    let mut out = tr.clone();
    match first_passage(tr, lower, upper) {
        Some((k, b)) => {
            out.truncate(k);
            (out, Some(b))
        }
        None => (out, None),
    }
}

/// Index of the first boundary hit if it is at `boundary` with hitting time
/// in `[t_start + duration − time_tol, t_start + duration + time_tol]`.
pub fn first_passage_hit(
    tr: &Trajectory,
    lower: f64,
    upper: f64,
    boundary: Boundary,
    duration: f64,
    time_tol: f64,
) -> Option<usize> {
    let (k, b) = first_passage(tr, lower, upper)?;
    let hit = tr.times()[k] - tr.times()[0];
    (b == boundary && (hit - duration).abs() <= time_tol).then_some(k)
}

/// The trajectories accepted by [`first_passage_hit`], truncated at the hit.
pub fn first_passage_filter(
    trajectories: &[Trajectory],
    lower: f64,
    upper: f64,
    boundary: Boundary,
    duration: f64,
    time_tol: f64,
) -> Vec<Trajectory> {
    trajectories
        .iter()
        .filter_map(|tr| {
            let k = first_passage_hit(tr, lower, upper, boundary, duration, time_tol)?;
            let mut cut = tr.clone();
            cut.truncate(k);
            Some(cut)
        })
        .collect()
}

/// Pointwise ensemble mean at the given times (linear interpolation); trajectories
/// not covering a time are skipped for that time.
pub fn ensemble_mean(trajectories: &[Trajectory], times: &[f64]) -> Vec<Option<Vector>> {
    times
        .iter()
        .map(|&t| {
            let mut count = 0usize;
            let mut acc: Option<Vector> = None;
            for tr in trajectories {
                if let Some(x) = tr.interpolate(t) {
                    count += 1;
                    acc = Some(match acc {
                        Some(a) => a + x,
                        None => x,
                    });
                }
            }
            acc.map(|a| a / count as f64)
        })
        .collect()
}
