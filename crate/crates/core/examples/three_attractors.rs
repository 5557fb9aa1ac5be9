//! A three-attractor decision network. Given little time, the most likely
//! switch between the two decision states goes straight across; given a lot,
//! it waits near the undecided state in between.

use noether_paths::prelude::*;

fn main() -> Result<()> {
    let params = PietParams::default();
    let sys = piet_network(&params)?;
    for fp in piet_fixed_points(&sys, &params)? {
        println!(
            "fixed point ({:>9.6}, {:>9.6})  {}  max Re(lambda) {:.4}",
            fp.point[0],
            fp.point[1],
            if fp.stable { "stable  " } else { "unstable" },
            fp.max_real_eigenvalue
        );
    }

    let [x_decision, undecided, y_decision] = piet_attractors(&sys, &params)?;
    for t in [1.0, 5.0, 20.0] {
        let (path, report) = minimize_action(
            &sys,
            &x_decision,
            &y_decision,
            t,
            400,
            &OptimizerConfig::default(),
            None,
        )?;
        println!(
            "T = {t:>4}: action {:.4}, closest approach to the undecided state {:.2e} ({:?})",
            report.action,
            path.min_distance_to(&undecided),
            report.termination
        );
    }
    Ok(())
}
