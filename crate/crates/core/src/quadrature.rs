//! Adaptive Simpson quadrature and the 1D energy / transition-time relation
//! `t* = ∫ dx / √(f(x)² + 4 D(x) E)`.

use crate::error::{Error, Result};
use crate::sde::{SdeSystem, Vector};

pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_EVALS: usize = 1_000_000;
const MAX_DEPTH: u32 = 60;
/// Points used to scan the interval for inadmissible energies before integrating.
const ADMISSIBILITY_SCAN: usize = 1001;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `f` may fail; the first error aborts the integration.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64, max_evals: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let mut evals = 0usize;
    let mut eval = |x: f64, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        if *evals > max_evals {
            return Err(Error::QuadratureBudget { evaluations: max_evals });
        }
        f(x)
    };
    let fa = eval(a, &mut evals)?;
    let fb = eval(b, &mut evals)?;
    let m = 0.5 * (a + b);
    let fm = eval(m, &mut evals)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    struct Interval {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }

    let mut stack = vec![Interval {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    while let Some(iv) = stack.pop() {
        let m = 0.5 * (iv.a + iv.b);
        let lm = 0.5 * (iv.a + m);
        let rm = 0.5 * (m + iv.b);
        let flm = eval(lm, &mut evals)?;
        let frm = eval(rm, &mut evals)?;
        let left = (m - iv.a) / 6.0 * (iv.fa + 4.0 * flm + iv.fm);
        let right = (iv.b - m) / 6.0 * (iv.fm + 4.0 * frm + iv.fb);
        let diff = left + right - iv.whole;
        if diff.abs() <= 15.0 * iv.tol || iv.depth >= MAX_DEPTH {
            total += left + right + diff / 15.0;
        } else {
            let tol = 0.5 * iv.tol;
            let depth = iv.depth + 1;
            stack.push(Interval {
                a: m,
                b: iv.b,
                fa: iv.fm,
                fm: frm,
                fb: iv.fb,
                whole: right,
                tol,
                depth,
            });
            stack.push(Interval {
                a: iv.a,
                b: m,
                fa: iv.fa,
                fm: flm,
                fb: iv.fm,
                whole: left,
                tol,
                depth,
            });
        }
    }
    Ok(total)
}

/// Transition time of a 1D autonomous system between `x0` and `xf` at energy `energy`.
///
/// The integral runs over the interval between the endpoints, so the result
/// does not depend on their order. Fails with [`Error::InadmissibleEnergy`] if
/// `f² + 4 D E` is not positive somewhere on the interval.
pub fn transition_time_1d(system: &SdeSystem, x0: f64, xf: f64, energy: f64) -> Result<f64> {
    if system.state_dim() != 1 {
        return Err(Error::Dimension {
            what: "transition time needs a 1D system",
            expected: 1,
            found: system.state_dim(),
        });
    }
    if !system.is_autonomous() {
        return Err(Error::SymmetryNotApplicable {
            spec: "TimeTranslation".into(),
            reason: format!("{} depends explicitly on time", system.name()),
        });
    }
    let (lo_t, hi_t) = system.time_range();
    let t = 0.0_f64.clamp(lo_t, hi_t);
    let speed_sq = |x: f64| -> Result<f64> {
        let xv = Vector::from_element(1, x);
        let f = system.drift_eval(&xv, t)?[0];
        let d = system.diffusion_eval(&xv, t)?[(0, 0)];
        let value = f * f + 4.0 * d * energy;
        if !(value > 0.0) {
            return Err(Error::InadmissibleEnergy { energy, x, value });
        }
        Ok(value)
    };
    let (a, b) = if x0 <= xf { (x0, xf) } else { (xf, x0) };
    for i in 0..ADMISSIBILITY_SCAN {
        let x = a + (b - a) * i as f64 / (ADMISSIBILITY_SCAN - 1) as f64;
        speed_sq(x)?;
    }
    adaptive_simpson(
        |x| speed_sq(x).map(|s| 1.0 / s.sqrt()),
        a,
        b,
        DEFAULT_ABS_TOL,
        DEFAULT_MAX_EVALS,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Matrix;

    fn sys_1d(f: fn(f64) -> f64, d: f64) -> SdeSystem {
        SdeSystem::builder("1d", 1, 1)
            .drift(move |x, _| Vector::from_element(1, f(x[0])))
            .constant_noise(Matrix::from_element(1, 1, (2.0 * d).sqrt()))
            .autonomous(true)
            .build()
            .unwrap()
    }

    #[test]
    fn simpson_polynomials_and_transcendentals() {
        let cubic = adaptive_simpson(|x| Ok(x * x * x), 0.0, 2.0, 1e-12, 1000).unwrap();
        assert!((cubic - 4.0).abs() < 1e-14);
        let s = adaptive_simpson(|x: f64| Ok(x.sin()), 0.0, std::f64::consts::PI, 1e-10, 100_000).unwrap();
        assert!((s - 2.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_budget() {
        let err = adaptive_simpson(|x: f64| Ok((50.0 * x).sin()), 0.0, 10.0, 1e-14, 50);
        assert!(matches!(err, Err(Error::QuadratureBudget { .. })));
    }

    #[test]
    fn constant_drift_closed_forms() {
        let sys = sys_1d(|_| 1.0, 0.5);
        assert!((transition_time_1d(&sys, 0.0, 1.0, 1.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((transition_time_1d(&sys, 0.0, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((transition_time_1d(&sys, 1.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_energy_reports_location() {
        let sys = sys_1d(|_| 1.0, 0.5);
        match transition_time_1d(&sys, 0.0, 1.0, -0.6) {
            Err(Error::InadmissibleEnergy { energy, .. }) => assert_eq!(energy, -0.6),
            other => panic!("unexpected {other:?}"),
        }
        // OU drift vanishes at the origin, so E = 0 is inadmissible there
        let ou = sys_1d(|x| -x, 0.5);
        match transition_time_1d(&ou, -1.0, 1.0, 0.0) {
            Err(Error::InadmissibleEnergy { x, .. }) => assert_eq!(x, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn needs_1d() {
        let sys = SdeSystem::builder("2d", 2, 2)
            .drift(|x, _| -x)
            .constant_noise(Matrix::identity(2, 2))
            .autonomous(true)
            .build()
            .unwrap();
        assert!(matches!(
            transition_time_1d(&sys, 0.0, 1.0, 1.0),
            Err(Error::Dimension { .. })
        ));
    }
}
