//! Simulate many sample paths, keep those that happen to make a given
//! transition, and compare their average with the most likely path.

use noether_paths::prelude::*;

fn main() -> Result<()> {
    let sys = constant_drift_1d(&DriftDiffusionParams {
        v: 0.5,
        sigma: 1.0,
        bounds: None,
    })?;
    let (x0, xf) = (Vector::from_element(1, 0.0), Vector::from_element(1, 1.5));
    let duration = 1.0;

    let spec = EnsembleSpec {
        n_paths: 20_000,
        t0: 0.0,
        duration,
        dt: 0.01,
        seed: 42,
        divergence_bound: 1e6,
    };
    let all: Vec<Trajectory> = simulate_ensemble(&sys, &x0, &spec).into_iter().collect::<Result<_>>()?;
    let kept = ensemble_bridge_filter(&all, &x0, &xf, duration, 0.05);
    println!("{} of {} paths end within 0.05 of {}", kept.len(), all.len(), xf[0]);

    let (map, _) = minimize_action(&sys, &x0, &xf, duration, 10, &OptimizerConfig::default(), None)?;
    let times: Vec<f64> = (0..=10).map(|k| map.time(k)).collect();
    let mean = noether_paths::simulate::ensemble_mean(&kept, &times);
    for (k, m) in mean.iter().enumerate() {
        if let Some(m) = m {
            println!(
                "t = {:.1}: ensemble mean {:+.3}, most likely path {:+.3}",
                times[k],
                m[0],
                map.node(k)[0]
            );
        }
    }
    Ok(())
}
