//! Uniformly gridded trajectories and their CSV form.
//!
//! CSV schema: header `k,t,x0,...,x{N-1}`, one row per node, every float
//! written with 17 significant digits.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::Vector;

/// Format a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Identifies the noise stream a simulated trajectory was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream {
    pub seed: u64,
    pub index: u64,
}

/// Time series of states on a uniform, strictly monotone grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vector>,
    pub seed: Option<NoiseStream>,
}

const UNIFORM_REL_TOL: f64 = 1e-12;

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Vector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Argument(format!(
                "{} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Argument("trajectory needs at least two nodes".into()));
        }
        let dim = states[0].len();
        if let Some(s) = states.iter().find(|s| s.len() != dim) {
            return Err(Error::Dimension {
                what: "trajectory state",
                expected: dim,
                found: s.len(),
            });
        }
        for (k, s) in states.iter().enumerate() {
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(Error::EvaluationDomain {
                    quantity: "trajectory state",
                    component: i,
                    x: s.as_slice().to_vec(),
                    t: times[k],
                });
            }
        }
        let span = times[times.len() - 1] - times[0];
        let step = span / (times.len() - 1) as f64;
        if !(step != 0.0) || !step.is_finite() {
            return Err(Error::Argument("trajectory times must be strictly monotone".into()));
        }
        let scale = times[0].abs().max(times[times.len() - 1].abs()).max(span.abs());
        for (k, t) in times.iter().enumerate() {
            let expected = times[0] + k as f64 * step;
            if (t - expected).abs() > UNIFORM_REL_TOL * scale.max(1.0) * 10.0 {
                return Err(Error::Argument(format!(
                    "trajectory times not uniform at node {k}: {t} vs {expected}"
                )));
            }
        }
        Ok(Self {
            times,
            states,
            seed: None,
        })
    }

    pub fn with_seed(mut self, stream: NoiseStream) -> Self {
        self.seed = Some(stream);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn first(&self) -> &Vector {
        &self.states[0]
    }

    pub fn last(&self) -> &Vector {
        &self.states[self.states.len() - 1]
    }

    pub fn step(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// Keep nodes `0..=k`.
    pub fn truncate(&mut self, k: usize) {
        let keep = (k + 1).max(2).min(self.times.len());
        self.times.truncate(keep);
        self.states.truncate(keep);
    }

    /// Linear interpolation at time `t`. Returns `None` outside the covered span.
    pub fn interpolate(&self, t: f64) -> Option<Vector> {
        let t0 = self.times[0];
        let h = self.step();
        let s = (t - t0) / h;
        let last = (self.times.len() - 1) as f64;
        let slack = 1e-9;
        if s < -slack || s > last + slack {
            return None;
        }
        let s = s.clamp(0.0, last);
        let k = (s.floor() as usize).min(self.times.len() - 2);
        let w = s - k as f64;
        Some(&self.states[k] * (1.0 - w) + &self.states[k + 1] * w)
    }

    /// Index of the node closest to time `t`, if `t` lies within the span.
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        let s = (t - self.times[0]) / self.step();
        let last = (self.times.len() - 1) as f64;
        if s < -0.5 || s > last + 0.5 {
            return None;
        }
        Some(s.round().clamp(0.0, last) as usize)
    }

    pub fn to_csv_string(&self) -> String {
        let n = self.dim();
        let mut out = String::from("k,t");
        for i in 0..n {
            write!(out, ",x{i}").unwrap();
        }
        out.push('\n');
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            write!(out, "{k},{}", fmt_f64(*t)).unwrap();
            for v in x.iter() {
                write!(out, ",{}", fmt_f64(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv_string().as_bytes())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Argument("empty trajectory CSV".into()))?
            .map_err(|e| Error::Argument(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "k" || cols[1] != "t" {
            return Err(Error::Argument(format!("bad trajectory header: {header}")));
        }
        for (i, c) in cols[2..].iter().enumerate() {
            if *c != format!("x{i}") {
                return Err(Error::Argument(format!("bad trajectory column {c}")));
            }
        }
        let n = cols.len() - 2;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (line_no, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Argument(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != n + 2 {
                return Err(Error::Argument(format!(
                    "line {}: expected {} fields, found {}",
                    line_no + 2,
                    n + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Argument(format!("line {}: {e}", line_no + 2)))
            };
            times.push(parse(fields[1])?);
            let x: Result<Vec<f64>> = fields[2..].iter().map(|s| parse(s)).collect();
            states.push(Vector::from_vec(x?));
        }
        Self::new(times, states)
    }
}
