//! Fixed-endpoint paths on a uniform time grid.

use crate::error::{Error, Result};
use crate::sde::Vector;
use crate::trajectory::Trajectory;

/// Path `x_0, …, x_K` on the grid `t_k = t_start + k Δt`, `Δt = T / K`.
///
/// Optimizers only ever touch the interior nodes; the endpoints are fixed at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedPath {
    dim: usize,
    t_start: f64,
    duration: f64,
    segments: usize,
    /// Node-major storage, `(K + 1) * dim` values.
    nodes: Vec<f64>,
}

/// How to seed the interior of a new path.
#[derive(Debug, Clone, Copy)]
pub enum InitStrategy<'a> {
    Linear,
    /// Resample a simulated trajectory onto the grid, starting at its first time.
    FromTrajectory(&'a Trajectory),
}

impl DiscretizedPath {
    /// Build from explicit nodes (`K + 1` of them).
    pub fn from_nodes(nodes: &[Vector], t_start: f64, duration: f64) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Argument(format!(
                "path needs at least two segments, got {}",
                nodes.len().saturating_sub(1)
            )));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::Argument(format!(
                "path duration must be positive, got {duration}"
            )));
        }
        let dim = nodes[0].len();
        let mut flat = Vec::with_capacity(nodes.len() * dim);
        for (k, x) in nodes.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::Dimension {
                    what: "path node",
                    expected: dim,
                    found: x.len(),
                });
            }
            if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::EvaluationDomain {
                    quantity: "path node",
                    component: i,
                    x: x.as_slice().to_vec(),
                    t: t_start + duration * k as f64 / (nodes.len() - 1) as f64,
                });
            }
            flat.extend(x.iter());
        }
        Ok(Self {
            dim,
            t_start,
            duration,
            segments: nodes.len() - 1,
            nodes: flat,
        })
    }

    /// Straight line from `x0` to `xf`.
    pub fn linear(x0: &Vector, xf: &Vector, t_start: f64, duration: f64, segments: usize) -> Result<Self> {
        if x0.len() != xf.len() {
            return Err(Error::Dimension {
                what: "path endpoint",
                expected: x0.len(),
                found: xf.len(),
            });
        }
        let nodes: Vec<Vector> = (0..=segments)
            .map(|k| {
                let s = k as f64 / segments as f64;
                x0 + (xf - x0) * s
            })
            .collect();
        let mut path = Self::from_nodes(&nodes, t_start, duration)?;
        // exact endpoints regardless of rounding in the blend
        path.node_mut(0).copy_from_slice(x0.as_slice());
        path.node_mut(segments).copy_from_slice(xf.as_slice());
        Ok(path)
    }

    /// Sample a trajectory on the uniform grid of `segments` steps over
    /// `[t_start, t_start + duration]`, with `t_start` the trajectory's first time.
    pub fn resample(trajectory: &Trajectory, duration: f64, segments: usize) -> Result<Self> {
        let t0 = trajectory.times()[0];
        let nodes: Result<Vec<Vector>> = (0..=segments)
            .map(|k| {
                let t = t0 + duration * k as f64 / segments as f64;
                trajectory.interpolate(t).ok_or_else(|| {
                    Error::Resampling(format!(
                        "trajectory covers [{}, {}] but the path needs t = {t}",
                        t0,
                        trajectory.times()[trajectory.len() - 1]
                    ))
                })
            })
            .collect();
        Self::from_nodes(&nodes?, t0, duration)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.segments as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt()
    }

    pub fn node_slice(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node(&self, k: usize) -> Vector {
        Vector::from_column_slice(self.node_slice(k))
    }

    pub fn nodes(&self) -> Vec<Vector> {
        (0..=self.segments).map(|k| self.node(k)).collect()
    }

    pub fn start(&self) -> Vector {
        self.node(0)
    }

    pub fn end(&self) -> Vector {
        self.node(self.segments)
    }

    /// Midpoint state, segment velocity and midpoint time of segment `k`.
    pub fn segment(&self, k: usize) -> (Vector, Vector, f64) {
        let a = self.node_slice(k);
        let b = self.node_slice(k + 1);
        let dt = self.dt();
        let mid = Vector::from_iterator(self.dim, a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)));
        let vel = Vector::from_iterator(self.dim, a.iter().zip(b).map(|(p, q)| (q - p) / dt));
        (mid, vel, self.t_start + (k as f64 + 0.5) * dt)
    }

    /// Interior nodes `x_1 … x_{K-1}` flattened node-major.
    pub fn interior(&self) -> &[f64] {
        &self.nodes[self.dim..self.segments * self.dim]
    }

    pub fn interior_len(&self) -> usize {
        (self.segments - 1) * self.dim
    }

    /// Overwrite the interior nodes. Endpoints are untouched.
    pub fn set_interior(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.interior_len(), "interior length mismatch");
        let (d, k) = (self.dim, self.segments);
        self.nodes[d..k * d].copy_from_slice(values);
    }

    /// Copy with the interior replaced.
    pub fn with_interior(&self, values: &[f64]) -> Self {
        let mut p = self.clone();
        p.set_interior(values);
        p
    }

    /// Linear upsampling by an integer factor; the old nodes are kept.
    pub fn upsample(&self, factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(Error::Argument(format!("refinement factor must be >= 2, got {factor}")));
        }
        let mut nodes = Vec::with_capacity(self.segments * factor + 1);
        for k in 0..self.segments {
            let a = self.node(k);
            let b = self.node(k + 1);
            for s in 0..factor {
                let w = s as f64 / factor as f64;
                nodes.push(if s == 0 { a.clone() } else { &a * (1.0 - w) + &b * w });
            }
        }
        nodes.push(self.end());
        Self::from_nodes(&nodes, self.t_start, self.duration)
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let times = (0..=self.segments).map(|k| self.time(k)).collect();
        Trajectory::new(times, self.nodes()).expect("path nodes are finite and uniformly gridded")
    }

    /// Largest node-wise Euclidean distance between two paths on the same grid.
    pub fn max_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.nodes.len(), other.nodes.len());
        (0..=self.segments)
            .map(|k| (self.node(k) - other.node(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Smallest distance from any node to `point`.
    pub fn min_distance_to(&self, point: &Vector) -> f64 {
        (0..=self.segments)
            .map(|k| (self.node(k) - point).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Initial path with endpoints pinned to `x0` and `xf`.
pub fn init_path(
    x0: &Vector,
    xf: &Vector,
    duration: f64,
    segments: usize,
    strategy: InitStrategy<'_>,
) -> Result<DiscretizedPath> {
    if segments < 2 {
        return Err(Error::Argument(format!("K must be >= 2, got {segments}")));
    }
    match strategy {
        InitStrategy::Linear => DiscretizedPath::linear(x0, xf, 0.0, duration, segments),
        InitStrategy::FromTrajectory(tr) => {
            if tr.dim() != x0.len() || xf.len() != x0.len() {
                return Err(Error::Dimension {
                    what: "trajectory state",
                    expected: x0.len(),
                    found: tr.dim(),
                });
            }
            let mut path = DiscretizedPath::resample(tr, duration, segments)?;
            path.node_mut(0).copy_from_slice(x0.as_slice());
            path.node_mut(segments).copy_from_slice(xf.as_slice());
            Ok(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn linear_interpolation_nodes() {
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 4, InitStrategy::Linear).unwrap();
        let xs: Vec<f64> = p.nodes().iter().map(|n| n[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn equal_endpoints_give_constant_path() {
        let x = v(&[0.3, -1.1]);
        let p = init_path(&x, &x, 2.0, 10, InitStrategy::Linear).unwrap();
        assert!(p.nodes().iter().all(|n| *n == x));
    }

    #[test]
    fn rejects_short_grid() {
        assert!(init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 1, InitStrategy::Linear).is_err());
    }

    #[test]
    fn resampling_requires_coverage() {
        let tr = Trajectory::new(vec![0.0, 0.5, 1.0], vec![v(&[0.0]), v(&[0.2]), v(&[1.0])]).unwrap();
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 4, InitStrategy::FromTrajectory(&tr)).unwrap();
        assert_eq!(p.node(1)[0], 0.1);
        let err = init_path(&v(&[0.0]), &v(&[1.0]), 2.0, 4, InitStrategy::FromTrajectory(&tr));
        assert!(matches!(err, Err(Error::Resampling(_))));
    }

    #[test]
    fn set_interior_keeps_endpoints() {
        let mut p = init_path(&v(&[0.0, 1.0]), &v(&[2.0, 3.0]), 1.0, 3, InitStrategy::Linear).unwrap();
        p.set_interior(&[9.0, 9.0, 8.0, 8.0]);
        assert_eq!(p.start(), v(&[0.0, 1.0]));
        assert_eq!(p.end(), v(&[2.0, 3.0]));
        assert_eq!(p.node(2), v(&[8.0, 8.0]));
    }

    #[test]
    fn upsample_keeps_old_nodes() {
        let p = init_path(&v(&[0.0]), &v(&[1.0]), 1.0, 2, InitStrategy::Linear)
            .unwrap()
            .with_interior(&[0.8]);
        let q = p.upsample(2).unwrap();
        let xs: Vec<f64> = q.nodes().iter().map(|n| n[0]).collect();
        assert_eq!(xs, vec![0.0, 0.4, 0.8, 0.9, 1.0]);
        assert!(p.upsample(1).is_err());
    }
}
