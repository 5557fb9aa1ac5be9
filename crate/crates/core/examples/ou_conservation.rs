//! Isotropic Ornstein-Uhlenbeck process. Longer time budgets let the most
//! likely path dip towards the attractor at the origin; energy and angular
//! momentum are constant along each path.

use noether_paths::prelude::*;

fn main() -> Result<()> {
    let sys = isotropic_ou(&OuParams::default())?;
    let x0 = Vector::from_column_slice(&[1.0, 0.0]);
    let xf = Vector::from_column_slice(&[0.0, 1.0]);
    let origin = Vector::zeros(2);
    let specs = [SymmetrySpec::TimeTranslation, SymmetrySpec::rotation(0, 1)];

    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "T", "action", "d_min", "E", "L01", "max rel"
    );
    for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let (path, _) = minimize_action(&sys, &x0, &xf, t, 200, &OptimizerConfig::default(), None)?;
        let ch = charge_series(&sys, &path, &specs)?;
        let e = variation(ch.energy.as_ref().unwrap());
        let l = variation(&ch.angular_component(0, 1).unwrap());
        println!(
            "{t:>5} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.1e}",
            action(&sys, &path)?,
            path.min_distance_to(&origin),
            e.mean,
            l.mean,
            e.relative.max(l.relative)
        );
    }

    // closed form for the 1D bridge x(0) = x(2) = 1: cosh(t − 1) / cosh(1)
    let sys1 = isotropic_ou(&OuParams {
        dim: 1,
        ..Default::default()
    })?;
    let one = Vector::from_element(1, 1.0);
    let (path, _) = minimize_action(&sys1, &one, &one, 2.0, 400, &OptimizerConfig::default(), None)?;
    let err = (0..=path.segments())
        .map(|k| (path.node(k)[0] - (path.time(k) - 1.0).cosh() / 1f64.cosh()).abs())
        .fold(0.0, f64::max);
    println!("1D bridge vs cosh(t - 1)/cosh(1): max error {err:.2e}");
    Ok(())
}
