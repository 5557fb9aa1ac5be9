//! Noether charges of the path Lagrangian: energy, momentum and the angular
//! momentum tensor, pointwise and as series along a discretized path.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lagrangian::segment_terms;
use crate::path::DiscretizedPath;
use crate::sde::{Matrix, SdeSystem, Vector};
use crate::symmetry::SymmetrySpec;
use crate::trajectory::fmt_f64;

/// `E = ¼ ẋᵀD⁻¹ẋ − ¼ fᵀD⁻¹f`, the charge of time translation.
pub fn energy(system: &SdeSystem, x: &Vector, xdot: &Vector, t: f64) -> Result<f64> {
    if !system.is_autonomous() {
        return Err(Error::SymmetryNotApplicable {
            spec: SymmetrySpec::TimeTranslation.to_string(),
            reason: format!("{} depends explicitly on time", system.name()),
        });
    }
    let f = system.drift_eval(x, t)?;
    let chol = system.diffusion_factor(x, t)?;
    Ok(0.25 * xdot.dot(&chol.solve(xdot)) - 0.25 * f.dot(&chol.solve(&f)))
}

/// `p = ½ D⁻¹ (ẋ − f)`.
pub fn momentum(system: &SdeSystem, x: &Vector, xdot: &Vector, t: f64) -> Result<Vector> {
    let f = system.drift_eval(x, t)?;
    Ok(0.5 * system.diffusion_solve(x, t, &(xdot - f))?)
}

/// `L = x pᵀ − p xᵀ`, so `L_ij = x_i p_j − x_j p_i`.
pub fn angular_momentum(system: &SdeSystem, x: &Vector, xdot: &Vector, t: f64) -> Result<Matrix> {
    if system.state_dim() < 2 {
        return Err(Error::Dimension {
            what: "angular momentum needs state dimension >= 2",
            expected: 2,
            found: system.state_dim(),
        });
    }
    let p = momentum(system, x, xdot, t)?;
    Ok(x * p.transpose() - &p * x.transpose())
}

/// Per-segment charges along a path, evaluated at segment midpoints with
/// segment velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSeries {
    pub dim: usize,
    /// Midpoint times `t̄_k`.
    pub times: Vec<f64>,
    /// Present iff the system is autonomous.
    pub energy: Option<Vec<f64>>,
    pub momentum: Vec<Vector>,
    /// Upper-triangular entries `L_ij`, `i < j`, in row-major order. Empty when `N = 1`.
    pub angular_momentum: Vec<Vec<f64>>,
    /// The charge `J` selected by each requested symmetry.
    pub selected: Vec<(SymmetrySpec, Vec<f64>)>,
}

/// Index pairs `(i, j)`, `i < j`, in the order used by [`ChargeSeries`].
pub fn rotation_planes(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
}

pub fn charge_series(system: &SdeSystem, path: &DiscretizedPath, specs: &[SymmetrySpec]) -> Result<ChargeSeries> {
    let n = path.dim();
    if n != system.state_dim() {
        return Err(Error::Dimension {
            what: "path state",
            expected: system.state_dim(),
            found: n,
        });
    }
    for spec in specs {
        spec.validate(n).map_err(|e| Error::SymmetryNotApplicable {
            spec: spec.to_string(),
            reason: e.to_string(),
        })?;
        if *spec == SymmetrySpec::TimeTranslation && !system.is_autonomous() {
            return Err(Error::SymmetryNotApplicable {
                spec: spec.to_string(),
                reason: format!("{} depends explicitly on time", system.name()),
            });
        }
    }
    let planes = rotation_planes(n);
    let k_max = path.segments();
    let mut series = ChargeSeries {
        dim: n,
        times: Vec::with_capacity(k_max),
        energy: system.is_autonomous().then(|| Vec::with_capacity(k_max)),
        momentum: Vec::with_capacity(k_max),
        angular_momentum: Vec::with_capacity(k_max),
        selected: specs.iter().map(|s| (s.clone(), Vec::with_capacity(k_max))).collect(),
    };
    for k in 0..k_max {
        let seg = segment_terms(system, path, k)?;
        series.times.push(seg.time);
        if let Some(e) = series.energy.as_mut() {
            // Legendre form p·ẋ − L; equals ¼ẋᵀD⁻¹ẋ − ¼fᵀD⁻¹f
            e.push(seg.momentum.dot(&seg.velocity) - seg.lagrangian);
        }
        series.angular_momentum.push(
            planes
                .iter()
                .map(|&(i, j)| seg.mid[i] * seg.momentum[j] - seg.mid[j] * seg.momentum[i])
                .collect(),
        );
        for (spec, values) in series.selected.iter_mut() {
            values.push(spec.charge(&seg.mid, &seg.velocity, &seg.momentum, seg.lagrangian));
        }
        series.momentum.push(seg.momentum);
    }
    Ok(series)
}

/// Flatness measures of a scalar series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub mean: f64,
    /// `max_k |c_k − mean|`.
    pub max_abs_deviation: f64,
    /// `max_abs_deviation / |mean|` (infinite if the mean is zero and the series is not).
    pub relative: f64,
    /// Sample standard deviation over `mean |c_k|`.
    pub std_over_mean_abs: f64,
}

pub fn variation(values: &[f64]) -> Variation {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let max_abs_deviation = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let ratio = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    Variation {
        mean,
        max_abs_deviation,
        relative: ratio(max_abs_deviation, mean.abs()),
        std_over_mean_abs: ratio(var.sqrt(), mean_abs),
    }
}

impl ChargeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn momentum_component(&self, i: usize) -> Vec<f64> {
        self.momentum.iter().map(|p| p[i]).collect()
    }

    /// Series of `L_ij` for `i < j`.
    pub fn angular_component(&self, i: usize, j: usize) -> Option<Vec<f64>> {
        let idx = rotation_planes(self.dim).iter().position(|&pl| pl == (i, j))?;
        Some(self.angular_momentum.iter().map(|l| l[idx]).collect())
    }

    pub fn selected_for(&self, spec: &SymmetrySpec) -> Option<&[f64]> {
        self.selected.iter().find(|(s, _)| s == spec).map(|(_, v)| v.as_slice())
    }

    /// CSV with header `k,t,E,p0,...,p{N-1},L_0_1,...`; `E` and `L` columns are
    /// omitted when not applicable.
    pub fn to_csv_string(&self) -> String {
        let planes = rotation_planes(self.dim);
        let mut out = String::from("k,t");
        if self.energy.is_some() {
            out.push_str(",E");
        }
        for i in 0..self.dim {
            write!(out, ",p{i}").unwrap();
        }
        for (i, j) in &planes {
            write!(out, ",L_{i}_{j}").unwrap();
        }
        out.push('\n');
        for k in 0..self.len() {
            write!(out, "{k},{}", fmt_f64(self.times[k])).unwrap();
            if let Some(e) = &self.energy {
                write!(out, ",{}", fmt_f64(e[k])).unwrap();
            }
            for v in self.momentum[k].iter() {
                write!(out, ",{}", fmt_f64(*v)).unwrap();
            }
            for v in &self.angular_momentum[k] {
                write!(out, ",{}", fmt_f64(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{init_path, InitStrategy};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn ddm(drift: f64, sigma: f64) -> SdeSystem {
        SdeSystem::builder("ddm", 1, 1)
            .drift(move |_, _| Vector::from_element(1, drift))
            .constant_noise(Matrix::from_element(1, 1, sigma))
            .autonomous(true)
            .build()
            .unwrap()
    }

    fn iso_ou(d: f64) -> SdeSystem {
        let g = (2.0 * d).sqrt();
        SdeSystem::builder("ou", 2, 2)
            .drift(|x, _| -x)
            .constant_noise(Matrix::identity(2, 2) * g)
            .autonomous(true)
            .build()
            .unwrap()
    }

    #[test]
    fn charges_vanish_on_drift() {
        let sys = iso_ou(0.5);
        let x = v(&[1.0, -2.0]);
        let f = -&x;
        assert_eq!(energy(&sys, &x, &f, 0.0).unwrap(), 0.0);
        assert_eq!(momentum(&sys, &x, &f, 0.0).unwrap(), Vector::zeros(2));
        assert_eq!(angular_momentum(&sys, &x, &f, 0.0).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn scalar_energy_and_momentum() {
        let sys = ddm(1.0, 1.0);
        let x = v(&[0.0]);
        assert!((energy(&sys, &x, &v(&[2.0]), 0.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(momentum(&sys, &x, &v(&[2.0]), 0.0).unwrap()[0], 1.0);
    }

    #[test]
    fn unit_angular_momentum() {
        let d = 0.5;
        let sys = iso_ou(d);
        let x = v(&[1.0, 0.0]);
        let p = v(&[0.0, 1.0]);
        // ẋ = f + 2 D p
        let xdot = -&x + 2.0 * d * &p;
        let l = angular_momentum(&sys, &x, &xdot, 0.0).unwrap();
        assert!((l[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((l[(1, 0)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn angular_momentum_needs_two_dimensions() {
        let sys = ddm(1.0, 1.0);
        assert!(matches!(
            angular_momentum(&sys, &v(&[0.0]), &v(&[1.0]), 0.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn energy_needs_autonomy() {
        let sys = SdeSystem::builder("forced", 1, 1)
            .drift(|_, t| Vector::from_element(1, t.sin()))
            .constant_noise(Matrix::identity(1, 1))
            .build()
            .unwrap();
        assert!(matches!(
            energy(&sys, &v(&[0.0]), &v(&[1.0]), 0.0),
            Err(Error::SymmetryNotApplicable { .. })
        ));
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 4, InitStrategy::Linear).unwrap();
        let err = charge_series(&sys, &p, &[SymmetrySpec::TimeTranslation]).unwrap_err();
        assert!(err.to_string().contains("TimeTranslation"));
        let s = charge_series(&sys, &p, &[]).unwrap();
        assert!(s.energy.is_none());
        assert!(!s.to_csv_string().starts_with("k,t,E"));
    }

    #[test]
    fn straight_line_momentum_series() {
        let sys = ddm(0.5, 1.0);
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 20, InitStrategy::Linear).unwrap();
        let spec = SymmetrySpec::axis_translation(1, 0);
        let s = charge_series(&sys, &p, std::slice::from_ref(&spec)).unwrap();
        for (pk, jk) in s.momentum.iter().zip(s.selected_for(&spec).unwrap()) {
            assert!((pk[0] - 0.5).abs() < 1e-14);
            assert_eq!(pk[0], *jk);
        }
    }

    #[test]
    fn legendre_energy_matches_closed_form() {
        let sys = iso_ou(0.7);
        let p = DiscretizedPath::from_nodes(
            &[v(&[1.0, 0.0]), v(&[0.6, 0.5]), v(&[0.1, 0.4]), v(&[-0.3, 1.0])],
            0.0,
            1.2,
        )
        .unwrap();
        let s = charge_series(&sys, &p, &[SymmetrySpec::TimeTranslation]).unwrap();
        for k in 0..p.segments() {
            let (m, vel, t) = p.segment(k);
            let e = energy(&sys, &m, &vel, t).unwrap();
            assert!((s.energy.as_ref().unwrap()[k] - e).abs() < 1e-13 * e.abs().max(1.0));
            assert_eq!(s.selected[0].1[k], s.energy.as_ref().unwrap()[k]);
            let l = angular_momentum(&sys, &m, &vel, t).unwrap();
            assert!((s.angular_component(0, 1).unwrap()[k] - l[(0, 1)]).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_columns() {
        let sys = iso_ou(0.5);
        let p = init_path(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 1.0, 3, InitStrategy::Linear).unwrap();
        let s = charge_series(&sys, &p, &[]).unwrap();
        let csv = s.to_csv_string();
        assert!(csv.starts_with("k,t,E,p0,p1,L_0_1\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn variation_of_constant_series() {
        let var = variation(&[2.0, 2.0, 2.0]);
        assert_eq!(var.relative, 0.0);
        assert_eq!(var.mean, 2.0);
        assert_eq!(variation(&[0.0, 0.0]).relative, 0.0);
    }
}
