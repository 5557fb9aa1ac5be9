//! Transition time as a function of energy for 1D systems: the more energy a
//! path carries, the faster it gets there.

use noether_paths::prelude::*;

fn main() -> Result<()> {
    // f = v, D = 1/2: t* = (xf − x0) / sqrt(v² + 2E)
    let ddm = constant_drift_1d(&DriftDiffusionParams {
        v: 1.0,
        sigma: 1.0,
        bounds: None,
    })?;
    println!("constant drift, 0 -> 1");
    for e in [-0.6, -0.4, 0.0, 1.5, 4.0] {
        match transition_time_1d(&ddm, 0.0, 1.0, e) {
            Ok(t) => println!(
                "  E = {e:>5}: t* = {t:.10}  (closed form {:.10})",
                1.0 / (1.0 + 2.0 * e).sqrt()
            ),
            Err(err) => println!("  E = {e:>5}: {err}"),
        }
    }

    // f = −x, D = 1/2: t* = asinh(x / sqrt(2E)) between the endpoints
    let ou = isotropic_ou(&OuParams {
        dim: 1,
        ..Default::default()
    })?;
    println!("OU, 0.5 -> 2");
    for e in [0.1, 0.5, 1.0, 2.0] {
        let t = transition_time_1d(&ou, 0.5, 2.0, e)?;
        let c = (2.0 * e).sqrt();
        let exact = (2.0 / c).asinh() - (0.5 / c).asinh();
        println!("  E = {e:>4}: t* = {t:.10}  (closed form {exact:.10})");
    }
    Ok(())
}
