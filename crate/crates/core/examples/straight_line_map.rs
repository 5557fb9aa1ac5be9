//! Constant drift: the most likely path is a straight line at constant speed,
//! and both energy and momentum stay constant along it.

use noether_paths::prelude::*;

fn main() -> Result<()> {
    let sys = constant_drift_1d(&DriftDiffusionParams {
        v: 0.5,
        sigma: 1.0,
        bounds: None,
    })?;
    let (x0, xf) = (Vector::from_element(1, 0.0), Vector::from_element(1, -1.0));
    let (path, report) = minimize_action(&sys, &x0, &xf, 1.0, 100, &OptimizerConfig::default(), None)?;

    let worst = (0..=path.segments())
        .map(|k| (path.node(k)[0] + path.time(k)).abs())
        .fold(0.0, f64::max);
    println!(
        "action {:.6}, converged {}, max deviation from the line {worst:.1e}",
        report.action, report.converged
    );

    let charges = charge_series(&sys, &path, sys.declared_symmetries())?;
    let e = variation(charges.energy.as_ref().unwrap());
    let p = variation(&charges.momentum_component(0));
    println!(
        "E = {:.6} (max dev {:.1e}), p = {:.6} (max dev {:.1e})",
        e.mean, e.max_abs_deviation, p.mean, p.max_abs_deviation
    );
    // moving against the drift at speed 1: p = (ẋ − v) / 2D
    println!("expected p = {:.6}", (-1.0 - 0.5) / 1.0);
    Ok(())
}
