//! Scenario runner behind the `rsl` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::catalog::PHI_CATALOG;
use crate::config::{validate_levels, GridSpec, LaneSpec, ScenarioConfig, ALL_CHECKS, CHECK_DESCRIPTIONS};
use crate::error::{Error, Result};
use crate::flow::{evolve, FlowControls, Trajectory};
use crate::geometry::{ConformalGrid, DomainMask, Topology};
use crate::models::{branch_at, closed_form_eigenvalue, model_scalar_curvature, ModelGeometry};
use crate::monotonicity::{
    analyse_grid, check_main_theorem, check_proposition1, check_rate_general, check_rate_identity,
    closed_form_rate, model_rate_samples, GridSpectralHistory, RateSample, SpectralControls,
};
use crate::spectral::Constraint;
use crate::varcheck::{
    check_bianchi, check_bianchi_model, check_eq6_chain, check_eq6_model, check_inverse_metric_evolution,
    check_inverse_metric_model, check_laplacian_variation, check_laplacian_variation_model,
    check_volume_evolution, check_volume_evolution_model, default_test_fields, fitted_order, snapshot_spacing,
    IdentityCheck, EXACT_FLOOR, MIN_ORDER,
};
use crate::verdict::{Status, Verdict};

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "mode",
    "mu",
    "predicted_rate",
    "observed_rate",
    "R_min",
    "R_max",
    "a_required",
    "hypothesis_feasible",
];

pub const OUTPUT_DIR_ENV: &str = "RSL_OUTPUT_DIR";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Closed-form derivative step for model-lane rate checks.
const MODEL_RATE_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub exit_code: i32,
    pub csv_paths: Vec<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub verdicts: Vec<Verdict>,
    /// Error message when the run stopped before producing verdicts.
    pub error: Option<String>,
}

impl RunResult {
    fn from_verdicts(verdicts: Vec<Verdict>, csv_paths: Vec<PathBuf>, report_path: PathBuf) -> Self {
        let failed = verdicts.iter().any(|v| v.status == Status::Fail);
        Self {
            exit_code: if failed { EXIT_CHECK_FAILED } else { EXIT_PASS },
            csv_paths,
            report_path: Some(report_path),
            verdicts,
            error: None,
        }
    }

    pub fn from_error(err: &Error) -> Self {
        Self {
            exit_code: exit_code_for(err),
            csv_paths: Vec::new(),
            report_path: None,
            verdicts: Vec::new(),
            error: Some(err.to_string()),
        }
    }

    pub fn report(&self) -> String {
        report_text(&self.verdicts)
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Default tolerance per check and lane.
pub fn default_tolerance(check: &str, grid: bool) -> f64 {
    match (check, grid) {
        ("rate2d", true) => 0.02,
        ("prop1", true) | ("main_theorem", true) => 1e-6,
        ("prop1", false) => 1e-12,
        ("main_theorem", false) => 1e-10,
        ("eq5", true) | ("inverse_metric", true) | ("eq7", true) => 1e-3,
        ("eq6", true) | ("bianchi", true) => 2e-2,
        _ => 1e-8,
    }
}

fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.output_dir.clone(),
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("cannot write {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text for the given samples, header first.
pub fn samples_csv(samples: &[RateSample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for s in samples {
        w.write_record([
            float(s.t),
            s.mode.to_string(),
            float(s.mu),
            float(s.predicted_rate),
            s.observed_rate.map(float).unwrap_or_default(),
            float(s.r_min),
            float(s.r_max),
            float(s.a_required),
            s.hypothesis_feasible.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

pub fn report_text(verdicts: &[Verdict]) -> String {
    verdicts.iter().map(|v| format!("{v}\n")).collect()
}

/// Runs a scenario end to end and writes `<name>.csv` and `<name>.report.txt`.
pub fn run_scenario(cfg: &ScenarioConfig) -> RunResult {
    match execute(cfg) {
        Ok((samples, verdicts)) => finish_run(cfg, &samples, verdicts),
        Err(e) => RunResult::from_error(&e),
    }
}

fn finish_run(cfg: &ScenarioConfig, samples: &[RateSample], verdicts: Vec<Verdict>) -> RunResult {
    let dir = output_dir(cfg);
    let name = scenario_name(cfg);
    let csv_path = dir.join(format!("{name}.csv"));
    let report_path = dir.join(format!("{name}.report.txt"));
    let written = samples_csv(samples)
        .and_then(|bytes| write_atomic(&csv_path, &bytes))
        .and_then(|_| write_atomic(&report_path, report_text(&verdicts).as_bytes()));
    match written {
        Ok(()) => RunResult::from_verdicts(verdicts, vec![csv_path], report_path),
        Err(e) => RunResult::from_error(&e),
    }
}

fn scenario_name(cfg: &ScenarioConfig) -> String {
    if cfg.name.is_empty() {
        "scenario".into()
    } else {
        cfg.name.clone()
    }
}

/// Samples and verdicts, without writing anything.
pub fn execute(cfg: &ScenarioConfig) -> Result<(Vec<RateSample>, Vec<Verdict>)> {
    match &cfg.lane {
        LaneSpec::Grid(spec) => execute_grid(cfg, spec),
        LaneSpec::Model(model) => execute_model(cfg, model),
    }
}

pub fn build_grid(spec: &GridSpec) -> Result<(ConformalGrid, DomainMask)> {
    let grid = spec.phi.grid(spec.topology, spec.n, spec.extent)?;
    let mask = match spec.rect {
        Some(r) => DomainMask::rectangle(&grid, r)?,
        None => DomainMask::full(&grid),
    };
    Ok((grid, mask))
}

fn flow_controls(cfg: &ScenarioConfig, dt: f64, stride: Option<usize>) -> FlowControls {
    let mut c = FlowControls::new(dt, cfg.t_end);
    c.safety = cfg.safety;
    c.stride = stride;
    c
}

fn spectral_controls(cfg: &ScenarioConfig, topology: Topology) -> SpectralControls {
    let constraint = match topology {
        Topology::PeriodicTorus => Constraint::MeanZero,
        Topology::DirichletRectangle => Constraint::None,
    };
    let mut c = SpectralControls::new(cfg.modes, cfg.spectral_tol, constraint);
    c.extra = cfg.extra;
    c
}

/// Interior snapshot closest to the middle of the run.
pub fn middle_snapshot<S>(traj: &Trajectory<S>) -> Option<usize> {
    if traj.len() < 3 {
        return None;
    }
    let times = traj.times();
    let mid = 0.5 * (times[0] + times[times.len() - 1]);
    (1..traj.len() - 1).min_by(|&a, &b| (times[a] - mid).abs().total_cmp(&(times[b] - mid).abs()))
}

fn hypothesis_skip(name: &str, e: Error) -> Result<Verdict> {
    match e {
        Error::HypothesisNotMet(why) => Ok(Verdict::skipped(name, format!("HypothesisNotMet: {why}"))),
        other => Err(other),
    }
}

/// Combines per-item verdicts into one line: the item with the largest
/// `err / tol` represents the check; skipped items only count when nothing ran.
fn combine(name: &str, parts: Vec<Verdict>) -> Verdict {
    let ran: Vec<&Verdict> = parts.iter().filter(|v| v.status != Status::Skipped).collect();
    if ran.is_empty() {
        let reason = parts.first().map(|v| v.reason.clone()).unwrap_or_else(|| "nothing to check".into());
        return Verdict::skipped(name, reason);
    }
    let failed = ran.iter().filter(|v| v.status == Status::Fail).count();
    let ratio = |v: &Verdict| if v.tol > 0.0 { v.err / v.tol } else if v.err > 0.0 { f64::INFINITY } else { 0.0 };
    let worst = ran
        .iter()
        .copied()
        .filter(|v| failed == 0 || v.status == Status::Fail)
        .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
        .expect("nonempty");
    let skipped = parts.len() - ran.len();
    let mut reason = worst.reason.clone();
    if parts.len() > 1 {
        let _ = write!(reason, "; {} of {} passed", ran.len() - failed, ran.len());
        if skipped > 0 {
            let _ = write!(reason, ", {skipped} skipped");
        }
    }
    Verdict {
        name: name.to_string(),
        status: if failed > 0 { Status::Fail } else { Status::Pass },
        reason,
        err: worst.err,
        tol: worst.tol,
    }
}

fn identity_verdict(check: &IdentityCheck, tol: f64, absolute: bool, context: &str) -> Verdict {
    let err = if absolute { check.max_abs_err } else { check.rel_err };
    let kind = if absolute { "abs" } else { "rel" };
    Verdict::compare(check.name.clone(), format!("{context}, {kind} err"), err, tol)
}

fn execute_grid(cfg: &ScenarioConfig, spec: &GridSpec) -> Result<(Vec<RateSample>, Vec<Verdict>)> {
    let (grid, mask) = build_grid(spec)?;
    let dt = cfg.dt.ok_or_else(|| Error::InvalidArgument("flow.dt is required".into()))?;
    let traj = evolve(&grid, &flow_controls(cfg, dt, cfg.stride))?;
    let history = analyse_grid(&traj, &mask, &spectral_controls(cfg, spec.topology), None)?;
    let samples = history.samples();
    let mid = middle_snapshot(&traj);
    let (u, v) = default_test_fields(&grid, &mask);

    let mut verdicts = Vec::new();
    for name in &cfg.checks {
        let tol = cfg.tolerance(name, default_tolerance(name, true));
        let verdict = match name.as_str() {
            "rate2d" => grid_rate_verdict(&history, tol)?,
            "rate_general" => Verdict::skipped(name, "needs a closed model geometry; use the model lane"),
            "prop1" => combine(
                name,
                history
                    .branches
                    .iter()
                    .map(|b| {
                        check_proposition1(&history.mode_samples(b.mode), (cfg_t0(&traj), cfg.t_end), tol)
                            .map(|p| p.verdict())
                            .or_else(|e| hypothesis_skip(name, e))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            "main_theorem" => combine(
                name,
                history
                    .branches
                    .iter()
                    .map(|b| {
                        check_main_theorem(&history.mode_samples(b.mode), tol)
                            .map(|c| c.verdict())
                            .or_else(|e| hypothesis_skip(name, e))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            "bianchi" => {
                let i = mid.unwrap_or(0);
                let check = check_bianchi(traj.state(i), &mask)?;
                identity_verdict(&check, tol, false, &format!("t={}", traj.snapshots[i].time))
            }
            "eq5" | "inverse_metric" | "eq7" | "eq6" => match mid {
                None => Verdict::skipped(name, "needs at least three snapshots"),
                Some(i) => {
                    let check = grid_time_check(name, &traj, &mask, i, &u, &v)?;
                    identity_verdict(&check, tol, false, &format!("t={}", traj.snapshots[i].time))
                }
            },
            other => return Err(Error::InvalidArgument(format!("unknown check {other:?}"))),
        };
        verdicts.push(verdict);
    }
    Ok((samples, verdicts))
}

fn cfg_t0<S>(traj: &Trajectory<S>) -> f64 {
    traj.snapshots[0].time
}

fn grid_time_check(
    name: &str,
    traj: &Trajectory<ConformalGrid>,
    mask: &DomainMask,
    i: usize,
    u: &crate::geometry::ScalarField,
    v: &crate::geometry::ScalarField,
) -> Result<IdentityCheck> {
    match name {
        "eq5" => check_volume_evolution(traj, mask, i),
        "inverse_metric" => check_inverse_metric_evolution(traj, mask, i),
        "eq7" => check_laplacian_variation(traj, mask, i, u),
        _ => check_eq6_chain(traj, mask, i, u, v),
    }
}

fn grid_rate_verdict(history: &GridSpectralHistory, tol: f64) -> Result<Verdict> {
    if history.times.len() < 3 {
        return Ok(Verdict::skipped("rate2d", "needs at least three snapshots"));
    }
    let mut parts = Vec::new();
    for i in 1..history.times.len() - 1 {
        for check in check_rate_identity(history, i, tol)? {
            let mut v = check.verdict("rate2d");
            if v.status != Status::Skipped && check.predicted != 0.0 {
                // report relative numbers; the tolerance carries the mu floor
                let scale = check.predicted.abs();
                v.err = check.err / scale;
                v.tol = check.tol / scale;
            }
            parts.push(v);
        }
    }
    Ok(combine("rate2d", parts))
}

fn model_times(cfg: &ScenarioConfig) -> Vec<f64> {
    let n = cfg.samples;
    let span = cfg.t_end - cfg.t_start;
    (0..n)
        .map(|k| if k + 1 == n { cfg.t_end } else { cfg.t_start + span * k as f64 / (n - 1) as f64 })
        .collect()
}

fn execute_model(cfg: &ScenarioConfig, model: &ModelGeometry) -> Result<(Vec<RateSample>, Vec<Verdict>)> {
    let times = model_times(cfg);
    // every sample time must lie before the maximal time
    model_scalar_curvature(model, cfg.t_end)?;
    let mut per_mode = Vec::new();
    for mode in 1..=cfg.modes {
        per_mode.push(model_rate_samples(model, mode, &times)?);
    }
    let mut samples: Vec<RateSample> = per_mode.iter().flatten().cloned().collect();
    samples.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.mode.cmp(&b.mode)));

    let surface = model.dimension() == 2;
    let mut verdicts = Vec::new();
    for name in &cfg.checks {
        let tol = cfg.tolerance(name, default_tolerance(name, false));
        let modes = 1..=cfg.modes;
        let verdict = match name.as_str() {
            "rate_general" => combine(
                name,
                modes
                    .map(|m| check_rate_general(model, branch_at(model, m, cfg.t_start)?, &times, MODEL_RATE_STEP, tol))
                    .collect::<Result<Vec<_>>>()?,
            ),
            "rate2d" if !surface => Verdict::skipped(name, "the surface formula needs dimension 2"),
            "rate2d" => combine(
                name,
                modes
                    .map(|m| {
                        let branch = branch_at(model, m, cfg.t_start)?;
                        let mut worst = 0.0_f64;
                        for &t in &times {
                            let mu = closed_form_eigenvalue(model, branch, t)?;
                            let r = model_scalar_curvature(model, t)?;
                            let exact = closed_form_rate(model, branch, t, MODEL_RATE_STEP)?;
                            worst = worst.max((mu * r - exact).abs());
                        }
                        Ok(Verdict::compare(name.clone(), format!("{} {branch:?}", model.name()), worst, tol))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            "prop1" if !surface => Verdict::skipped(name, "the exponential bounds are stated for surfaces"),
            "prop1" => combine(
                name,
                per_mode
                    .iter()
                    .map(|s| {
                        check_proposition1(s, (cfg.t_start, cfg.t_end), tol)
                            .map(|p| p.verdict())
                            .or_else(|e| hypothesis_skip(name, e))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            "main_theorem" => combine(
                name,
                per_mode
                    .iter()
                    .map(|s| {
                        check_main_theorem(s, tol)
                            .map(|c| c.verdict())
                            .or_else(|e| hypothesis_skip(name, e))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            "eq5" | "inverse_metric" | "bianchi" => {
                let mut parts = Vec::new();
                for &t in &times {
                    let check = match name.as_str() {
                        "eq5" => check_volume_evolution_model(model, t)?,
                        "inverse_metric" => check_inverse_metric_model(model, t)?,
                        _ => check_bianchi_model(model, t)?,
                    };
                    parts.push(identity_verdict(&check, tol, true, &format!("t={t}")));
                }
                combine(name, parts)
            }
            "eq7" | "eq6" => {
                let mut parts = Vec::new();
                for m in 1..=cfg.modes {
                    let branch = branch_at(model, m, cfg.t_start)?;
                    for &t in &times {
                        let check = if name == "eq7" {
                            check_laplacian_variation_model(model, branch, t)?
                        } else {
                            check_eq6_model(model, branch, t)?
                        };
                        parts.push(identity_verdict(&check, tol, true, &format!("{branch:?} t={t}")));
                    }
                }
                combine(name, parts)
            }
            other => return Err(Error::InvalidArgument(format!("unknown check {other:?}"))),
        };
        verdicts.push(verdict);
    }
    Ok((samples, verdicts))
}

/// One row of a refinement table.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementRow {
    pub level: usize,
    pub n: (usize, usize),
    pub dt: f64,
    pub check: String,
    /// Parameter the error is fitted against.
    pub param: f64,
    pub error: f64,
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementStudy {
    pub rows: Vec<RefinementRow>,
    pub verdicts: Vec<Verdict>,
}

/// Errors of the order-verified checks at one refinement level.
fn level_errors(
    cfg: &ScenarioConfig,
    spec: &GridSpec,
    dt: f64,
) -> Result<Vec<(String, f64, f64)>> {
    let (grid, mask) = build_grid(spec)?;
    let traj = evolve(&grid, &flow_controls(cfg, dt, Some(cfg.stride.unwrap_or(1))))?;
    let i = middle_snapshot(&traj)
        .ok_or_else(|| Error::InvalidArgument("refinement needs at least three snapshots per level".into()))?;
    let spacing = snapshot_spacing(&traj, i)?;
    let h = grid.hx().max(grid.hy());
    let (u, v) = default_test_fields(&grid, &mask);
    let mut out = Vec::new();
    for name in &cfg.checks {
        let entry = match name.as_str() {
            "rate2d" => {
                let history = analyse_grid(
                    &traj,
                    &mask,
                    &spectral_controls(cfg, spec.topology),
                    Some(&[i - 1, i, i + 1]),
                )?;
                let worst = check_rate_identity(&history, 1, 0.0)?
                    .into_iter()
                    .filter(|c| c.status != Status::Skipped)
                    .map(|c| if c.predicted != 0.0 { c.err / c.predicted.abs() } else { c.err })
                    .fold(0.0_f64, f64::max);
                Some((worst, spacing))
            }
            "eq5" | "inverse_metric" | "eq7" => {
                Some((grid_time_check(name, &traj, &mask, i, &u, &v)?.rel_err, spacing))
            }
            "eq6" => Some((grid_time_check(name, &traj, &mask, i, &u, &v)?.rel_err, h)),
            "bianchi" => Some((check_bianchi(traj.state(i), &mask)?.rel_err, h)),
            _ => None,
        };
        if let Some((err, param)) = entry {
            out.push((name.clone(), err, param));
        }
    }
    Ok(out)
}

/// Reruns a grid scenario with `h` halved and `dt` quartered per level and
/// fits convergence orders.
pub fn refinement(cfg: &ScenarioConfig, levels: usize) -> Result<RefinementStudy> {
    validate_levels(levels)?;
    let LaneSpec::Grid(base) = &cfg.lane else {
        return Err(Error::InvalidArgument("refinement studies need the grid lane".into()));
    };
    let dt0 = cfg.dt.ok_or_else(|| Error::InvalidArgument("flow.dt is required".into()))?;
    let mut rows: Vec<RefinementRow> = Vec::new();
    for level in 0..levels {
        let factor = 1usize << level;
        let spec = GridSpec {
            n: (base.n.0 * factor, base.n.1 * factor),
            ..base.clone()
        };
        let dt = dt0 / (factor * factor) as f64;
        for (check, error, param) in level_errors(cfg, &spec, dt)? {
            let order = rows
                .iter()
                .rev()
                .find(|r| r.check == check)
                .and_then(|prev| fitted_order(prev.error, error, prev.param, param));
            rows.push(RefinementRow {
                level,
                n: spec.n,
                dt,
                check,
                param,
                error,
                order,
            });
        }
    }
    let verdicts = cfg
        .checks
        .iter()
        .map(|name| {
            let mine: Vec<&RefinementRow> = rows.iter().filter(|r| &r.check == name).collect();
            if mine.is_empty() {
                return Verdict::skipped(name, "not an order-verified check");
            }
            if mine.iter().all(|r| r.error <= EXACT_FLOOR) {
                return Verdict {
                    name: name.clone(),
                    status: Status::Pass,
                    reason: "degenerate (exact)".into(),
                    err: mine.iter().map(|r| r.error).fold(0.0, f64::max),
                    tol: EXACT_FLOOR,
                };
            }
            let orders: Vec<f64> = mine.iter().filter_map(|r| r.order).collect();
            if orders.len() + 1 < mine.len() {
                return Verdict::failed(
                    name,
                    "error reached the exactness floor on some levels only; no order fitted",
                    f64::NAN,
                    MIN_ORDER,
                );
            }
            let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
            let listed: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
            Verdict {
                name: name.clone(),
                status: if min >= MIN_ORDER { Status::Pass } else { Status::Fail },
                reason: format!("fitted orders [{}], minimum must reach {MIN_ORDER}", listed.join(", ")),
                err: min,
                tol: MIN_ORDER,
            }
        })
        .collect();
    Ok(RefinementStudy { rows, verdicts })
}

pub fn refinement_csv(rows: &[RefinementRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["level", "nx", "ny", "dt", "check", "param", "error", "order"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            r.n.0.to_string(),
            r.n.1.to_string(),
            float(r.dt),
            r.check.clone(),
            float(r.param),
            float(r.error),
            r.order.map(float).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

/// Runs a refinement study and writes `<name>.refine.csv` and `<name>.refine.report.txt`.
pub fn run_refinement_study(cfg: &ScenarioConfig, levels: usize) -> RunResult {
    let study = match refinement(cfg, levels) {
        Ok(s) => s,
        Err(e) => return RunResult::from_error(&e),
    };
    let dir = output_dir(cfg);
    let name = scenario_name(cfg);
    let csv_path = dir.join(format!("{name}.refine.csv"));
    let report_path = dir.join(format!("{name}.refine.report.txt"));
    let written = refinement_csv(&study.rows)
        .and_then(|bytes| write_atomic(&csv_path, &bytes))
        .and_then(|_| write_atomic(&report_path, report_text(&study.verdicts).as_bytes()));
    match written {
        Ok(()) => RunResult::from_verdicts(study.verdicts, vec![csv_path], report_path),
        Err(e) => RunResult::from_error(&e),
    }
}

pub fn list_catalog() -> String {
    let mut out = String::from("model families (lane = \"model\", geometry.*):\n");
    for (family, keys) in [
        ("RoundSphere", "dim, r0"),
        ("HyperbolicScaled", "c0, spectrum"),
        ("FlatTorus", "lx, ly"),
        ("SphereCircleProduct", "a0, b0"),
    ] {
        let _ = writeln!(out, "  {family:<20} {keys}");
    }
    out.push_str("initial phi (lane = \"grid\", grid.phi):\n");
    for (syntax, what) in PHI_CATALOG {
        let _ = writeln!(out, "  {syntax:<32} {what}");
    }
    out.push_str("checks (checks.run, checks.tol.<name>):\n");
    debug_assert_eq!(CHECK_DESCRIPTIONS.len(), ALL_CHECKS.len());
    for (name, what) in CHECK_DESCRIPTIONS {
        let _ = writeln!(out, "  {name:<16} {what}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_lists_everything_in_order() {
        let text = list_catalog();
        assert!(text.contains("RoundSphere") && text.contains("main_theorem") && text.contains("bump("));
        assert_eq!(text, list_catalog());
        let pos = |s: &str| text.find(s).unwrap();
        assert!(pos("rate2d") < pos("bianchi"));
    }

    #[test]
    fn csv_uses_round_trip_floats() {
        let s = RateSample {
            t: 0.1,
            mode: 1,
            mu: 2.0 / 0.8,
            predicted_rate: 6.25,
            observed_rate: None,
            r_min: 2.5,
            r_max: 2.5,
            a_required: 0.0,
            hypothesis_feasible: true,
        };
        let text = String::from_utf8(samples_csv(std::slice::from_ref(&s)).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0].parse::<f64>().unwrap(), 0.1);
        assert_eq!(row[2].parse::<f64>().unwrap(), s.mu);
        assert_eq!(row[4], "");
        assert_eq!(row[8], "true");
    }

    #[test]
    fn combine_reports_the_worst_item() {
        let parts = vec![
            Verdict::compare("x", "a", 1.0, 2.0),
            Verdict::compare("x", "b", 3.0, 2.0),
            Verdict::skipped("x", "c"),
        ];
        let v = combine("x", parts);
        assert_eq!(v.status, Status::Fail);
        assert_eq!(v.err, 3.0);
        assert!(v.reason.starts_with("b; 1 of 2 passed, 1 skipped"));
        assert_eq!(combine("y", vec![Verdict::skipped("y", "why")]).status, Status::Skipped);
    }
}
