//! Bring your own SDE: a 1D double well `f = x − x³` with additive noise.
//! Several starting paths are optimized and the distinct minima reported.

use std::f64::consts::PI;

use noether_paths::prelude::*;

fn main() -> Result<()> {
    let sys = SdeSystem::builder("double_well", 1, 1)
        .drift(|x, _| x.map(|v| v - v * v * v))
        .drift_jacobian(|x, _| Matrix::from_element(1, 1, 1.0 - 3.0 * x[0] * x[0]))
        .constant_noise(Matrix::from_element(1, 1, 0.5))
        .autonomous(true)
        .symmetry(SymmetrySpec::TimeTranslation)
        .build()?;

    let (x0, xf) = (Vector::from_element(1, -1.0), Vector::from_element(1, 1.0));
    let (duration, k) = (10.0, 200);
    let line = init_path(&x0, &xf, duration, k, InitStrategy::Linear)?;
    // bumps that overshoot on either side of the straight line
    let inits: Vec<DiscretizedPath> = [0.0, 1.0, -1.0]
        .iter()
        .map(|&a| {
            let bump: Vec<f64> = line
                .interior()
                .iter()
                .enumerate()
                .map(|(i, x)| x + a * (PI * (i + 1) as f64 / k as f64).sin())
                .collect();
            line.with_interior(&bump)
        })
        .collect();

    for (i, p) in inits.iter().enumerate() {
        println!(
            "start {i}: action {:.4}, gradient check {:.1e}",
            action(&sys, p)?,
            grad_check(&sys, p, false)?
        );
    }

    let minima = minimize_multistart(&sys, &inits, &OptimizerConfig::default(), 1e-3)?;
    for m in &minima {
        let ch = charge_series(&sys, &m.path, &[])?;
        let e = variation(ch.energy.as_ref().unwrap());
        println!(
            "minimum: action {:.6} reached from starts {:?}, E = {:.3e} (max dev {:.1e})",
            m.report.action, m.starts, e.mean, e.max_abs_deviation
        );
    }
    Ok(())
}
