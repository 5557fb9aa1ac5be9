//! Which transformations leave each built-in Lagrangian unchanged. Declared
//! symmetries should pass; the rest are shown for contrast.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use noether_paths::prelude::*;

fn samples(dim: usize, t_hi: f64, rng: &mut ChaCha8Rng) -> Vec<PhaseSample> {
    (0..20)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            PhaseSample::new(&x, &v, rng.random_range(0.0..t_hi))
        })
        .collect()
}

fn main() -> Result<()> {
    let ring = RingParams::default();
    let systems = [
        constant_drift_1d(&DriftDiffusionParams::default())?,
        isotropic_ou(&OuParams::default())?,
        piet_network(&PietParams::default())?,
        ring_reverse_sde(&ring)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for sys in &systems {
        let n = sys.state_dim();
        let t_hi = 0.5 * (ring.horizon - ring.t_min());
        let pts = samples(n, t_hi, &mut rng);
        let mut candidates = vec![SymmetrySpec::TimeTranslation, SymmetrySpec::axis_translation(n, 0)];
        if n >= 2 {
            candidates.push(SymmetrySpec::rotation(0, 1));
        }
        for spec in candidates {
            let declared = sys.declared_symmetries().contains(&spec);
            let r = check_symmetry(sys, &spec, &pts, 0.1);
            println!(
                "{:<16} {:<22} declared {:<5} {} (max deviation {:.1e})",
                sys.name(),
                spec.to_string(),
                declared,
                if r.passed { "invariant" } else { "broken   " },
                r.max_deviation
            );
        }
    }
    Ok(())
}
