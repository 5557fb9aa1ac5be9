//! Reverse diffusion towards data spread on a ring. The probability-flow ODE
//! moves straight in to the ring; stochastic paths that land elsewhere on the
//! ring must carry angular momentum, more of it the further they turn.

use std::f64::consts::PI;

use noether_paths::prelude::*;

fn main() -> Result<()> {
    let params = RingParams {
        radius: 1.0,
        sigma0: 0.1,
        horizon: 0.5,
        t_min: None,
    };
    let theta0: f64 = 0.3;
    let start = Vector::from_column_slice(&[1.2 * theta0.cos(), 1.2 * theta0.sin()]);

    let flow = pf_ode_trajectory(&start, &params, 1e-3)?;
    let end = flow.last();
    println!(
        "PF-ODE: radius {:.4} -> {:.4}, angle {:.6} -> {:.6}",
        start.norm(),
        end.norm(),
        theta0,
        end[1].atan2(end[0])
    );

    let sys = ring_reverse_sde(&params)?;
    let duration = params.horizon - params.t_min();
    for turn in [PI / 6.0, PI / 3.0, PI / 2.0] {
        let a = theta0 + turn;
        let xf = Vector::from_column_slice(&[end.norm() * a.cos(), end.norm() * a.sin()]);
        let (path, report) = minimize_action(&sys, &start, &xf, duration, 400, &OptimizerConfig::default(), None)?;
        let ch = charge_series(&sys, &path, &[SymmetrySpec::rotation(0, 1)])?;
        let l = variation(&ch.angular_component(0, 1).unwrap());
        println!(
            "turn {turn:.3} rad: action {:.4}, L01 {:+.5} (rel var {:.1e})",
            report.action, l.mean, l.relative
        );
    }

    let s = ring_score(&Vector::from_column_slice(&[0.5, 0.0]), 0.1, &params);
    println!("score inside the ring points outwards: {:.4}", s[0]);
    Ok(())
}
