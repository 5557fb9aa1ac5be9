//! TOML run configuration.
//!
//! ```toml
//! out = "runs/ou"
//! seed = 7
//!
//! [system.ou]
//! k = 1.0
//! dim = 2
//!
//! [path]
//! x0 = [1.0, 0.0]
//! xf = [0.0, 1.0]
//! T = 2.0
//! K = 200
//! ```
//!
//! Exactly one `[system.<kind>]` table is required; the other tables are read
//! by the subcommands that need them. Validation errors carry the line of the
//! offending entry.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::optimize::OptimizerConfig;
use crate::sde::{SdeSystem, Vector};
use crate::systems::{
    constant_drift_1d, forward_diffusion, isotropic_ou, piet_network_unverified, ring_reverse_sde,
    DriftDiffusionParams, OuParams, PietParams, RingParams,
};

/// A configuration problem, located at a line of the config file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.file, line, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    DriftDiffusion(DriftDiffusionParams),
    Ou(OuParams),
    Piet(PietParams),
    Ring(RingParams),
    ForwardDiffusion(ForwardDiffusionParams),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardDiffusionParams {
    pub dim: usize,
    #[serde(alias = "T")]
    pub horizon: f64,
}

impl Default for ForwardDiffusionParams {
    fn default() -> Self {
        Self { dim: 2, horizon: 1.0 }
    }
}

impl SystemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemConfig::DriftDiffusion(_) => "drift_diffusion",
            SystemConfig::Ou(_) => "ou",
            SystemConfig::Piet(_) => "piet",
            SystemConfig::Ring(_) => "ring",
            SystemConfig::ForwardDiffusion(_) => "forward_diffusion",
        }
    }

    pub fn build(&self) -> crate::Result<SdeSystem> {
        match self {
            SystemConfig::DriftDiffusion(p) => constant_drift_1d(p),
            SystemConfig::Ou(p) => isotropic_ou(p),
            SystemConfig::Piet(p) => piet_network_unverified(p),
            SystemConfig::Ring(p) => ring_reverse_sde(p),
            SystemConfig::ForwardDiffusion(p) => forward_diffusion(p.dim, p.horizon),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub x0: Spanned<Vec<f64>>,
    pub xf: Spanned<Vec<f64>>,
    #[serde(alias = "T")]
    pub duration: Spanned<f64>,
    #[serde(alias = "K")]
    pub segments: Spanned<usize>,
    #[serde(default)]
    pub t_start: f64,
    /// Trajectory CSV resampled as the first initial path.
    #[serde(default)]
    pub init: Option<PathBuf>,
}

/// Optimizer settings plus multi-start controls. Unset fields keep the
/// library defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerTable {
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub action_rel_tol: Option<f64>,
    pub plateau_window: Option<usize>,
    pub memory: Option<usize>,
    pub precondition: Option<bool>,
    pub fd_fallback: Option<bool>,
    /// Number of initial paths: the straight line plus `starts − 1` random bumps.
    pub starts: usize,
    /// Bump amplitude relative to `max(1, ‖xf − x0‖)`.
    pub perturbation: f64,
    /// Minima closer than this (max node distance) are merged.
    pub dedup_tol: f64,
}

impl Default for OptimizerTable {
    fn default() -> Self {
        Self {
            max_iters: None,
            grad_tol: None,
            action_rel_tol: None,
            plateau_window: None,
            memory: None,
            precondition: None,
            fd_fallback: None,
            starts: 1,
            perturbation: 0.5,
            dedup_tol: 1e-3,
        }
    }
}

impl OptimizerTable {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        let mut c = OptimizerConfig::default();
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.grad_tol {
            c.grad_tol = v;
        }
        if let Some(v) = self.action_rel_tol {
            c.action_rel_tol = v;
        }
        if let Some(v) = self.plateau_window {
            c.plateau_window = v;
        }
        if let Some(v) = self.memory {
            c.memory = v;
        }
        if let Some(v) = self.precondition {
            c.precondition = v;
        }
        if let Some(v) = self.fd_fallback {
            c.fd_fallback = v;
        }
        c
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: Option<u64>,
    /// Defaults to `[path] T`.
    #[serde(alias = "T")]
    pub duration: Option<f64>,
    /// Defaults to `[path] x0`.
    pub x0: Option<Spanned<Vec<f64>>>,
    /// Defaults to `[path] t_start`, or 0.
    pub t0: Option<f64>,
    /// Target end state for filtering; defaults to `[path] xf`.
    pub xf: Option<Spanned<Vec<f64>>>,
    /// Enables filtering. Bridge filter: distance tolerance at both ends.
    /// Bounded 1D systems: tolerance on the first-passage time.
    pub bridge_tol: Option<f64>,
    pub divergence_bound: f64,
    /// Write one CSV per kept trajectory.
    pub write_paths: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_paths: 100,
            dt: 1e-3,
            seed: None,
            duration: None,
            x0: None,
            t0: None,
            xf: None,
            bridge_tol: None,
            divergence_bound: crate::simulate::DEFAULT_DIVERGENCE_BOUND,
            write_paths: true,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtimeConfig {
    /// Defaults to `[path] x0`.
    pub x0: Option<f64>,
    /// Defaults to `[path] xf`.
    pub xf: Option<f64>,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorefieldConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Diffusion time; defaults to the ring horizon.
    pub t: Option<f64>,
}

impl Default for ScorefieldConfig {
    fn default() -> Self {
        Self {
            x_range: [-2.0, 2.0],
            y_range: [-2.0, 2.0],
            nx: 41,
            ny: 41,
            t: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointsConfig {
    /// Search box; the network system has a built-in default.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub grid: usize,
    pub tol: f64,
}

impl Default for FixedPointsConfig {
    fn default() -> Self {
        Self {
            lower: None,
            upper: None,
            grid: 21,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Spanned<SystemConfig>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub path: Option<Spanned<PathConfig>>,
    #[serde(default)]
    pub optimizer: Option<Spanned<OptimizerTable>>,
    #[serde(default)]
    pub simulate: Option<Spanned<SimulateConfig>>,
    #[serde(default)]
    pub ttime: Option<Spanned<TtimeConfig>>,
    #[serde(default)]
    pub scorefield: Option<Spanned<ScorefieldConfig>>,
    #[serde(default)]
    pub fixedpoints: Option<Spanned<FixedPointsConfig>>,
}

/// A parsed config together with its source, for locating errors.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    file: String,
    source: String,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: file.clone(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::from_str(&file, &source)
    }

    pub fn from_str(file: &str, source: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(source).map_err(|e| ConfigError {
            file: file.to_string(),
            line: e.span().map(|s| line_of(source, s.start)),
            message: e.message().trim().to_string(),
        })?;
        Ok(Self {
            config,
            file: file.to_string(),
            source: source.to_string(),
        })
    }

    /// An error located at byte offset `at` of the source.
    pub fn error_at(&self, at: Option<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            file: self.file.clone(),
            line: at.map(|a| line_of(&self.source, a)),
            message: message.into(),
        }
    }

    pub fn error_for<T>(&self, item: &Spanned<T>, message: impl Into<String>) -> ConfigError {
        self.error_at(Some(item.span().start), message)
    }

    /// Build the configured system.
    pub fn system(&self) -> Result<SdeSystem, ConfigError> {
        let sys = &self.config.system;
        sys.get_ref()
            .build()
            .map_err(|e| self.error_for(sys, format!("[system.{}]: {e}", sys.get_ref().kind())))
    }

    /// The `[path]` table checked against the system: endpoint dimensions,
    /// positive duration, at least two segments, and the system's time range.
    pub fn path(&self, system: &SdeSystem) -> Result<&PathConfig, ConfigError> {
        let table = self
            .config
            .path
            .as_ref()
            .ok_or_else(|| self.error_at(None, "missing [path] table"))?;
        let p = table.get_ref();
        let n = system.state_dim();
        self.check_vector(&p.x0, n, "path.x0")?;
        self.check_vector(&p.xf, n, "path.xf")?;
        let duration = *p.duration.get_ref();
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(self.error_for(
                &p.duration,
                format!("path.T must be positive and finite, got {duration}"),
            ));
        }
        if *p.segments.get_ref() < 2 {
            return Err(self.error_for(&p.segments, "path.K must be at least 2"));
        }
        self.check_time_window(system, p.t_start, duration, table)?;
        Ok(p)
    }

    pub fn check_vector(&self, v: &Spanned<Vec<f64>>, dim: usize, what: &str) -> Result<Vector, ConfigError> {
        if v.get_ref().len() != dim {
            return Err(self.error_for(
                v,
                format!("{what} has dimension {}, system has dimension {dim}", v.get_ref().len()),
            ));
        }
        if v.get_ref().iter().any(|x| !x.is_finite()) {
            return Err(self.error_for(v, format!("{what} must be finite")));
        }
        Ok(Vector::from_column_slice(v.get_ref()))
    }

    pub fn check_time_window<T>(
        &self,
        system: &SdeSystem,
        t0: f64,
        duration: f64,
        at: &Spanned<T>,
    ) -> Result<(), ConfigError> {
        let (lo, hi) = system.time_range();
        // Relative slack so that `T − t_min` typed as a decimal is accepted.
        let slack = 1e-12 * hi.abs().max(1.0);
        if t0 < lo - slack || t0 + duration > hi + slack {
            return Err(self.error_for(
                at,
                format!(
                    "time window [{t0}, {}] lies outside the range [{lo}, {hi}] of system {}",
                    t0 + duration,
                    system.name()
                ),
            ));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Result<OptimizerTable, ConfigError> {
        let Some(table) = &self.config.optimizer else {
            return Ok(OptimizerTable::default());
        };
        let t = table.get_ref();
        t.optimizer_config()
            .validate()
            .map_err(|e| self.error_for(table, format!("[optimizer]: {e}")))?;
        if t.starts == 0 {
            return Err(self.error_for(table, "optimizer.starts must be at least 1"));
        }
        if !(t.perturbation >= 0.0) || !(t.dedup_tol > 0.0) {
            return Err(self.error_for(table, "optimizer.perturbation must be >= 0 and dedup_tol > 0"));
        }
        Ok(t.clone())
    }
}

fn line_of(source: &str, offset: usize) -> usize {
    let end = offset.min(source.len());
    source.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(src: &str) -> Result<LoadedConfig, ConfigError> {
        LoadedConfig::from_str("run.toml", src)
    }

    #[test]
    fn minimal_ou_config() {
        let c = load("[system.ou]\nk = 2.0\n\n[path]\nx0 = [1.0, 0.0]\nxf = [0.0, 1.0]\nT = 1.5\nK = 50\n").unwrap();
        let sys = c.system().unwrap();
        let p = c.path(&sys).unwrap();
        assert_eq!(*p.segments.get_ref(), 50);
        assert_eq!(*p.duration.get_ref(), 1.5);
        assert_eq!(c.config.system.get_ref().kind(), "ou");
    }

    #[test]
    fn dimension_mismatch_points_at_line() {
        let c = load("[system.ou]\n\n[path]\nx0 = [1.0]\nxf = [0.0, 1.0]\nT = 1.0\nK = 10\n").unwrap();
        let sys = c.system().unwrap();
        let e = c.path(&sys).unwrap_err();
        assert_eq!(e.line, Some(4), "{e}");
        assert!(e.to_string().starts_with("run.toml:4:"), "{e}");
    }

    #[test]
    fn unknown_kind_and_field_are_located() {
        let e = load("seed = 1\n[system.lorenz]\nsigma = 10\n").unwrap_err();
        assert!(e.line.is_some(), "{e}");
        let e = load("[system.ou]\nkk = 1.0\n").unwrap_err();
        assert_eq!(e.line, Some(2), "{e}");
    }

    #[test]
    fn invalid_parameters_are_located() {
        let c = load("out = \"x\"\n\n[system.ou]\nk = -1.0\n").unwrap();
        let e = c.system().unwrap_err();
        assert!(matches!(e.line, Some(3) | Some(4)), "{e}");
    }

    #[test]
    fn ring_path_must_stay_in_time_range() {
        let c = load("[system.ring]\nT = 1.0\n\n[path]\nx0 = [1.0, 0.0]\nxf = [0.0, 1.0]\nT = 1.0\nK = 10\n").unwrap();
        let sys = c.system().unwrap();
        assert!(c.path(&sys).is_err());
    }

    #[test]
    fn optimizer_overrides() {
        let c = load("[system.ou]\n[optimizer]\nmax_iters = 5\nstarts = 3\n").unwrap();
        let t = c.optimizer().unwrap();
        assert_eq!(t.optimizer_config().max_iters, 5);
        assert_eq!(t.starts, 3);
        assert_eq!(t.optimizer_config().grad_tol, OptimizerConfig::default().grad_tol);
    }
}
