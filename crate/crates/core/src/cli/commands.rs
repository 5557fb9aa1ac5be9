use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Map, Value};

use super::config::{LoadedConfig, SystemConfig};
use super::{Failure, Status};
use crate::charges::{charge_series, rotation_planes, variation, ChargeSeries, Variation};
use crate::error::Error;
use crate::lagrangian::{euler_lagrange_residual, max_residual_norm};
use crate::optimize::minimize_multistart;
use crate::path::{init_path, DiscretizedPath, InitStrategy};
use crate::quadrature::transition_time_1d;
use crate::sde::{SdeSystem, Vector};
use crate::simulate::{bridge_accepts, first_passage, first_passage_hit, simulate_ensemble, Boundary, EnsembleSpec};
use crate::systems::{find_fixed_points, ring_log_density, ring_score};
use crate::trajectory::{fmt_f64, Trajectory};

/// Everything a subcommand needs: the parsed config and the resolved globals.
pub struct Context {
    pub loaded: LoadedConfig,
    pub out: PathBuf,
    /// `--seed` if given.
    pub seed_override: Option<u64>,
}

impl Context {
    fn seed(&self, table_seed: Option<u64>) -> u64 {
        self.seed_override
            .or(table_seed)
            .or(self.loaded.config.seed)
            .unwrap_or(0)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        write_file(&self.out.join(name), contents)
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        s.push('\n');
        self.write(name, &s)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn read_trajectory(path: &Path) -> Result<Trajectory, Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::Config(format!("cannot open {}: {e}", path.display())))?;
    Trajectory::read_csv(BufReader::new(file)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn variation_json(v: &Variation) -> Value {
    json!({
        "mean": v.mean,
        "max_abs_deviation": v.max_abs_deviation,
        "relative": v.relative,
        "std_over_mean_abs": v.std_over_mean_abs,
    })
}

fn charges_summary(series: &ChargeSeries) -> Value {
    let momentum: Vec<Value> = (0..series.dim)
        .map(|i| variation_json(&variation(&series.momentum_component(i))))
        .collect();
    let mut angular = Map::new();
    for (i, j) in rotation_planes(series.dim) {
        let values = series.angular_component(i, j).expect("plane listed by rotation_planes");
        angular.insert(format!("L_{i}_{j}"), variation_json(&variation(&values)));
    }
    let mut selected = Map::new();
    for (spec, values) in &series.selected {
        selected.insert(spec.to_string(), variation_json(&variation(values)));
    }
    json!({
        "energy": series.energy.as_ref().map(|e| variation_json(&variation(e))),
        "momentum": momentum,
        "angular_momentum": angular,
        "conserved": selected,
    })
}

fn summary_line(series: &ChargeSeries) -> String {
    match &series.energy {
        Some(e) => {
            let v = variation(e);
            format!("E = {:.6e} (relative variation {:.2e})", v.mean, v.relative)
        }
        None => "E not defined (non-autonomous system)".to_string(),
    }
}

fn initial_paths(loaded: &LoadedConfig, system: &SdeSystem, seed: u64) -> Result<Vec<DiscretizedPath>, Failure> {
    let p = loaded.path(system)?;
    let opt = loaded.optimizer()?;
    let n = system.state_dim();
    let x0 = Vector::from_column_slice(p.x0.get_ref());
    let xf = Vector::from_column_slice(p.xf.get_ref());
    let duration = *p.duration.get_ref();
    let segments = *p.segments.get_ref();
    let base = match &p.init {
        Some(file) => {
            let tr = read_trajectory(file)?;
            let resampled = init_path(&x0, &xf, duration, segments, InitStrategy::FromTrajectory(&tr))?;
            DiscretizedPath::from_nodes(&resampled.nodes(), p.t_start, duration)?
        }
        None => DiscretizedPath::linear(&x0, &xf, p.t_start, duration, segments)?,
    };
    let mut inits = vec![base.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = opt.perturbation * (&xf - &x0).norm().max(1.0);
    for _ in 1..opt.starts {
        let mut dir = Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = dir.norm();
        if norm > 0.0 {
            dir /= norm;
        }
        let amp = scale * rng.random_range(0.5..1.5);
        let mut nodes = base.nodes();
        for (k, node) in nodes.iter_mut().enumerate().take(segments).skip(1) {
            *node += &dir * (amp * (PI * k as f64 / segments as f64).sin());
        }
        inits.push(DiscretizedPath::from_nodes(&nodes, p.t_start, duration)?);
    }
    Ok(inits)
}

pub fn mlp(ctx: &Context) -> Result<Status, Failure> {
    let loaded = &ctx.loaded;
    let system = loaded.system()?;
    let opt = loaded.optimizer()?;
    let config = opt.optimizer_config();
    let inits = initial_paths(loaded, &system, ctx.seed(None))?;
    let minima = minimize_multistart(&system, &inits, &config, opt.dedup_tol)?;
    let best = &minima[0];
    let series = charge_series(&system, &best.path, system.declared_symmetries())?;
    let residual = euler_lagrange_residual(&system, &best.path, config.fd_fallback)
        .map(|r| max_residual_norm(&r))
        .ok();

    ctx.write("path.csv", &best.path.to_trajectory().to_csv_string())?;
    ctx.write("charges.csv", &series.to_csv_string())?;
    let r = &best.report;
    let minima_json: Vec<Value> = minima
        .iter()
        .map(|m| {
            json!({
                "action": m.report.action,
                "grad_norm": m.report.grad_norm,
                "converged": m.report.converged,
                "starts": m.starts,
            })
        })
        .collect();
    let report = json!({
        "action": r.action,
        "grad_norm": r.grad_norm,
        "iterations": r.iterations,
        "converged": r.converged,
        "termination": r.termination,
        "system": system.name(),
        "T": best.path.duration(),
        "K": best.path.segments(),
        "t_start": best.path.t_start(),
        "el_residual_max": residual,
        "charges": charges_summary(&series),
        "minima": minima_json,
    });
    ctx.write_json("report.json", &report)?;

    println!(
        "mlp: S = {:.10e}, |grad| = {:.3e}, {} iterations ({:?}); {}",
        r.action,
        r.grad_norm,
        r.iterations,
        r.termination,
        summary_line(&series)
    );
    if r.converged {
        Ok(Status::Done)
    } else {
        Ok(Status::NotConverged(format!(
            "optimizer stopped without converging ({:?}, |grad| = {:e})",
            r.termination, r.grad_norm
        )))
    }
}

pub fn charges(ctx: &Context, path_file: Option<&Path>) -> Result<Status, Failure> {
    let system = ctx.loaded.system()?;
    let default_file = ctx.out.join("path.csv");
    let file = path_file.unwrap_or(&default_file);
    let tr = read_trajectory(file)?;
    if tr.dim() != system.state_dim() {
        return Err(Failure::Config(format!(
            "{} has dimension {}, system has dimension {}",
            file.display(),
            tr.dim(),
            system.state_dim()
        )));
    }
    let times = tr.times();
    let t0 = times[0];
    let duration = times[times.len() - 1] - t0;
    if !(duration > 0.0) {
        return Err(Failure::Config(format!("{}: times must increase", file.display())));
    }
    let path = DiscretizedPath::from_nodes(tr.states(), t0, duration)?;
    let series = charge_series(&system, &path, system.declared_symmetries())?;
    ctx.write("charges.csv", &series.to_csv_string())?;
    ctx.write_json("charges_summary.json", &charges_summary(&series))?;
    println!("charges: {} segments; {}", series.len(), summary_line(&series));
    Ok(Status::Done)
}

enum Filter {
    None,
    Bridge { xf: Vector, tol: f64 },
    FirstPassage { boundary: Boundary, time_tol: f64 },
}

pub fn simulate(ctx: &Context) -> Result<Status, Failure> {
    let loaded = &ctx.loaded;
    let system = loaded.system()?;
    let n = system.state_dim();
    let default_table = Default::default();
    let (table, table_span) = match &loaded.config.simulate {
        Some(t) => (t.get_ref(), Some(t.span().start)),
        None => (&default_table, None),
    };
    let path = match &loaded.config.path {
        Some(_) => Some(loaded.path(&system)?),
        None => None,
    };
    let err = |msg: String| Failure::from(loaded.error_at(table_span, msg));

    let x0 = match (&table.x0, path) {
        (Some(v), _) => loaded.check_vector(v, n, "simulate.x0")?,
        (None, Some(p)) => Vector::from_column_slice(p.x0.get_ref()),
        (None, None) => return Err(err("simulate needs x0 (in [simulate] or [path])".into())),
    };
    let duration = match (table.duration, path) {
        (Some(d), _) => d,
        (None, Some(p)) => *p.duration.get_ref(),
        (None, None) => return Err(err("simulate needs T (in [simulate] or [path])".into())),
    };
    let t0 = table
        .t0
        .or(path.map(|p| p.t_start))
        .unwrap_or_else(|| Some(system.time_range().0).filter(|t| t.is_finite()).unwrap_or(0.0));
    if table.n_paths == 0 || !(table.dt > 0.0) || !(duration > 0.0) || !(table.divergence_bound > 0.0) {
        return Err(err(
            "simulate needs n_paths >= 1 and positive dt, T and divergence_bound".into(),
        ));
    }
    let bounds = match loaded.config.system.get_ref() {
        SystemConfig::DriftDiffusion(p) => p.bounds,
        _ => None,
    };
    let filter = match table.bridge_tol {
        None => Filter::None,
        Some(tol) if !(tol > 0.0) => return Err(err(format!("simulate.bridge_tol must be positive, got {tol}"))),
        Some(tol) => {
            let xf = match (&table.xf, path) {
                (Some(v), _) => loaded.check_vector(v, n, "simulate.xf")?,
                (None, Some(p)) => Vector::from_column_slice(p.xf.get_ref()),
                (None, None) => return Err(err("bridge_tol needs xf (in [simulate] or [path])".into())),
            };
            match bounds {
                Some((lo, hi)) => {
                    let boundary = if xf[0] <= lo {
                        Boundary::Lower
                    } else if xf[0] >= hi {
                        Boundary::Upper
                    } else {
                        return Err(err(format!("xf = {} is not on a boundary of [{lo}, {hi}]", xf[0])));
                    };
                    Filter::FirstPassage {
                        boundary,
                        time_tol: tol,
                    }
                }
                None => Filter::Bridge { xf, tol },
            }
        }
    };
    let sim_duration = match filter {
        Filter::FirstPassage { time_tol, .. } => duration + time_tol,
        _ => duration,
    };
    match &loaded.config.simulate {
        Some(w) => loaded.check_time_window(&system, t0, sim_duration, w)?,
        None => loaded.check_time_window(&system, t0, sim_duration, &loaded.config.system)?,
    }

    let seed = ctx.seed(table.seed);
    let spec = EnsembleSpec {
        n_paths: table.n_paths,
        t0,
        duration: sim_duration,
        dt: table.dt,
        seed,
        divergence_bound: table.divergence_bound,
    };
    let runs = simulate_ensemble(&system, &x0, &spec);

    let mut failed = Vec::new();
    let mut first_error = None;
    let mut done: Vec<(usize, Trajectory)> = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(tr) => done.push((i, tr)),
            Err(e) => {
                failed.push(i);
                first_error.get_or_insert(e);
            }
        }
    }

    let mut absorbed = [0usize; 2];
    let mut kept: Vec<(usize, Trajectory)> = Vec::new();
    let mut endpoints: Vec<Vector> = Vec::new();
    for (i, tr) in &done {
        let (lo, hi) = bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let hit = bounds.and_then(|_| first_passage(tr, lo, hi));
        let mut cut = tr.clone();
        if let Some((k, b)) = hit {
            absorbed[(b == Boundary::Upper) as usize] += 1;
            cut.truncate(k);
        }
        endpoints.push(cut.last().clone());
        let accept = match &filter {
            Filter::None => true,
            Filter::Bridge { xf, tol } => bridge_accepts(tr, &x0, xf, duration, *tol),
            Filter::FirstPassage { boundary, time_tol } => {
                first_passage_hit(tr, lo, hi, *boundary, duration, *time_tol).is_some()
            }
        };
        if accept {
            kept.push((*i, cut));
        }
    }

    let dir = ctx.out.join("ensemble");
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Failure::Config(format!("cannot clear {}: {e}", dir.display())))?;
    }
    let mut written = 0usize;
    if table.write_paths {
        fs::create_dir_all(&dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
        for (i, tr) in &kept {
            write_file(&dir.join(format!("{i}.csv")), &tr.to_csv_string())?;
            written += 1;
        }
    }

    let (mean, var) = moments(&endpoints, n);
    let filter_json = match &filter {
        Filter::None => Value::Null,
        Filter::Bridge { xf, tol } => json!({
            "kind": "bridge",
            "xf": xf.as_slice(),
            "tol": tol,
            "kept": kept.len(),
            "total": done.len(),
        }),
        Filter::FirstPassage { boundary, time_tol } => json!({
            "kind": "first_passage",
            "boundary": boundary,
            "time_tol": time_tol,
            "kept": kept.len(),
            "total": done.len(),
        }),
    };
    let kept_indices: Vec<usize> = kept.iter().map(|(i, _)| *i).collect();
    let meta = json!({
        "system": system.name(),
        "seed": seed,
        "n_paths": table.n_paths,
        "dt": table.dt,
        "T": duration,
        "simulated_T": sim_duration,
        "t0": t0,
        "x0": x0.as_slice(),
        "divergence_bound": table.divergence_bound,
        "completed": done.len(),
        "diverged": failed.len(),
        "diverged_indices": failed,
        "absorbed": bounds.map(|_| json!({"lower": absorbed[0], "upper": absorbed[1]})),
        "filter": filter_json,
        "kept": kept.len(),
        "kept_indices": kept_indices,
        "written": written,
        "endpoint_mean": mean,
        "endpoint_variance": var,
    });
    ctx.write_json("ensemble_meta.json", &meta)?;

    println!(
        "simulate: {} paths, {} diverged, {} kept, {} written",
        table.n_paths,
        failed.len(),
        kept.len(),
        written
    );
    if 2 * failed.len() > table.n_paths {
        let cause = first_error.map(|e| e.to_string()).unwrap_or_default();
        return Ok(Status::NotConverged(format!(
            "{} of {} paths failed; first failure: {cause}",
            failed.len(),
            table.n_paths
        )));
    }
    Ok(Status::Done)
}

/// Componentwise sample mean and unbiased variance (`null` when undefined).
fn moments(xs: &[Vector], n: usize) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    if xs.is_empty() {
        return (None, None);
    }
    let count = xs.len() as f64;
    let mean = xs.iter().fold(Vector::zeros(n), |acc, x| acc + x) / count;
    if xs.len() < 2 {
        return (Some(mean.as_slice().to_vec()), None);
    }
    let var: Vec<f64> = (0..n)
        .map(|i| xs.iter().map(|x| (x[i] - mean[i]).powi(2)).sum::<f64>() / (count - 1.0))
        .collect();
    (Some(mean.as_slice().to_vec()), Some(var))
}

pub fn ttime(ctx: &Context, energies: Option<&[f64]>) -> Result<Status, Failure> {
    let loaded = &ctx.loaded;
    let system = loaded.system()?;
    if system.state_dim() != 1 {
        return Err(loaded
            .error_for(
                &loaded.config.system,
                format!(
                    "ttime needs a one-dimensional system, {} has dimension {}",
                    system.name(),
                    system.state_dim()
                ),
            )
            .into());
    }
    if !system.is_autonomous() {
        return Err(loaded
            .error_for(&loaded.config.system, "ttime needs an autonomous system")
            .into());
    }
    let default_table = Default::default();
    let (table, span) = match &loaded.config.ttime {
        Some(t) => (t.get_ref(), Some(t.span().start)),
        None => (&default_table, None),
    };
    let path = match &loaded.config.path {
        Some(_) => Some(loaded.path(&system)?),
        None => None,
    };
    let x0 = table.x0.or(path.map(|p| p.x0.get_ref()[0]));
    let xf = table.xf.or(path.map(|p| p.xf.get_ref()[0]));
    let (Some(x0), Some(xf)) = (x0, xf) else {
        return Err(loaded
            .error_at(span, "ttime needs x0 and xf (in [ttime] or [path])")
            .into());
    };
    let mut grid: Vec<f64> = energies.unwrap_or(&table.energies).to_vec();
    if grid.is_empty() {
        return Err(loaded.error_at(span, "ttime needs a non-empty energy grid").into());
    }
    if let Some(e) = grid.iter().find(|e| !e.is_finite()) {
        return Err(loaded.error_at(span, format!("energy {e} is not finite")).into());
    }
    grid.sort_by(f64::total_cmp);

    let mut csv = String::from("E,t_star\n");
    let mut admissible: Vec<(f64, f64)> = Vec::new();
    let mut inadmissible = 0usize;
    for &e in &grid {
        match transition_time_1d(&system, x0, xf, e) {
            Ok(t) => {
                writeln!(csv, "{},{}", fmt_f64(e), fmt_f64(t)).unwrap();
                admissible.push((e, t));
            }
            Err(Error::InadmissibleEnergy { .. }) => {
                writeln!(csv, "{},inadmissible", fmt_f64(e)).unwrap();
                inadmissible += 1;
            }
            Err(other) => return Err(other.into()),
        }
    }
    let decreasing = admissible.windows(2).all(|w| w[0].0 == w[1].0 || w[1].1 < w[0].1);
    ctx.write("ttime.csv", &csv)?;
    ctx.write_json(
        "ttime_meta.json",
        &json!({
            "system": system.name(),
            "x0": x0,
            "xf": xf,
            "admissible": admissible.len(),
            "inadmissible": inadmissible,
            "strictly_decreasing": decreasing,
        }),
    )?;
    println!(
        "ttime: {} admissible, {} inadmissible; t* strictly decreasing in E: {}",
        admissible.len(),
        inadmissible,
        if decreasing { "yes" } else { "NO" }
    );
    if decreasing {
        Ok(Status::Done)
    } else {
        Ok(Status::NotConverged("t* is not strictly decreasing in E".into()))
    }
}

const SCORE_FD_STEP: f64 = 1e-5;
const SCORE_FD_POINTS: usize = 16;

pub fn scorefield(ctx: &Context, t_override: Option<f64>) -> Result<Status, Failure> {
    let loaded = &ctx.loaded;
    let SystemConfig::Ring(params) = loaded.config.system.get_ref() else {
        return Err(loaded
            .error_for(&loaded.config.system, "scorefield needs [system.ring]")
            .into());
    };
    loaded.system()?;
    let default_table = Default::default();
    let (table, span) = match &loaded.config.scorefield {
        Some(t) => (t.get_ref(), Some(t.span().start)),
        None => (&default_table, None),
    };
    let t = t_override.or(table.t).unwrap_or(params.horizon);
    let [x_lo, x_hi] = table.x_range;
    let [y_lo, y_hi] = table.y_range;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(loaded
            .error_at(span, format!("scorefield t must be finite and >= 0, got {t}"))
            .into());
    }
    if table.nx == 0 || table.ny == 0 || !(x_lo <= x_hi) || !(y_lo <= y_hi) {
        return Err(loaded
            .error_at(span, "scorefield needs nx, ny >= 1 and ordered ranges")
            .into());
    }
    let axis = |lo: f64, hi: f64, m: usize| -> Vec<f64> {
        if m == 1 {
            return vec![lo];
        }
        (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
    };
    let xs = axis(x_lo, x_hi, table.nx);
    let ys = axis(y_lo, y_hi, table.ny);

    let total = xs.len() * ys.len();
    let stride = total.div_ceil(SCORE_FD_POINTS).max(1);
    let mut csv = String::from("x,y,sx,sy,logp\n");
    let mut max_cross = 0.0_f64;
    let mut fd_max = 0.0_f64;
    let mut fd_points = 0usize;
    let mut idx = 0usize;
    for &y in &ys {
        for &x in &xs {
            let p = Vector::from_column_slice(&[x, y]);
            let s = ring_score(&p, t, params);
            let logp = ring_log_density(&p, t, params);
            writeln!(
                csv,
                "{},{},{},{},{}",
                fmt_f64(x),
                fmt_f64(y),
                fmt_f64(s[0]),
                fmt_f64(s[1]),
                fmt_f64(logp)
            )
            .unwrap();
            max_cross = max_cross.max((x * s[1] - y * s[0]).abs());
            if idx.is_multiple_of(stride) {
                let mut err = 0.0_f64;
                for d in 0..2 {
                    let mut up = p.clone();
                    let mut dn = p.clone();
                    up[d] += SCORE_FD_STEP;
                    dn[d] -= SCORE_FD_STEP;
                    let fd =
                        (ring_log_density(&up, t, params) - ring_log_density(&dn, t, params)) / (2.0 * SCORE_FD_STEP);
                    err = err.max((fd - s[d]).abs() / s[d].abs().max(1.0));
                }
                fd_max = fd_max.max(err);
                fd_points += 1;
            }
            idx += 1;
        }
    }
    ctx.write("score.csv", &csv)?;
    ctx.write_json(
        "score_meta.json",
        &json!({
            "t": t,
            "radius": params.radius,
            "sigma0": params.sigma0,
            "variance": params.variance(t),
            "nx": table.nx,
            "ny": table.ny,
            "x_range": table.x_range,
            "y_range": table.y_range,
            "max_cross": max_cross,
            "fd_check": {
                "points": fd_points,
                "step": SCORE_FD_STEP,
                "max_error": fd_max,
            },
        }),
    )?;
    println!("scorefield: {total} points at t = {t}; max |x × s| = {max_cross:.2e}, FD check max error {fd_max:.2e}");
    Ok(Status::Done)
}

pub fn fixedpoints(ctx: &Context) -> Result<Status, Failure> {
    let loaded = &ctx.loaded;
    let system = loaded.system()?;
    let default_table = Default::default();
    let (table, span) = match &loaded.config.fixedpoints {
        Some(t) => (t.get_ref(), Some(t.span().start)),
        None => (&default_table, None),
    };
    let default_box = match loaded.config.system.get_ref() {
        SystemConfig::Piet(p) => Some(p.search_box()),
        _ => None,
    };
    let (lower, upper) = match (&table.lower, &table.upper, default_box) {
        (Some(l), Some(u), _) => (l.clone(), u.clone()),
        (None, None, Some(b)) => b,
        _ => return Err(loaded.error_at(span, "fixedpoints needs both lower and upper").into()),
    };
    if table.grid < 1 || !(table.tol > 0.0) {
        return Err(loaded.error_at(span, "fixedpoints needs grid >= 1 and tol > 0").into());
    }
    if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
        return Err(loaded.error_at(span, "fixedpoints box needs lower <= upper").into());
    }
    let points = find_fixed_points(&system, &lower, &upper, table.grid, table.tol)?;
    let stable = points.iter().filter(|p| p.stable).count();
    ctx.write_json(
        "fixedpoints.json",
        &json!({
            "system": system.name(),
            "lower": lower,
            "upper": upper,
            "grid": table.grid,
            "tol": table.tol,
            "stable": stable,
            "points": points,
        }),
    )?;
    println!("fixedpoints: {} found, {stable} stable", points.len());
    Ok(Status::Done)
}
