//! Time integration of the Ricci flow.
//!
//! For `g = e^{2 phi} delta` the flow `d/dt g_ij = -2 R_ij` reduces to the
//! scalar equation `d/dt phi = -R/2 = e^{-2 phi} Delta_0 phi`, integrated here
//! with classical RK4. On a Dirichlet rectangle the rim values of `phi` are held
//! fixed, so the solution is a Ricci flow on the open coordinate box.

use crate::error::{Error, Result};
use crate::geometry::{flat_laplacian, ConformalGrid, ScalarField, Topology, PHI_GUARD};
use crate::models::{advance_model, ModelGeometry, ModelState};

pub const DEFAULT_SAFETY: f64 = 0.25;

/// Snapshot count the default stride aims for on long runs.
const TARGET_SNAPSHOTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowControls {
    pub dt: f64,
    pub t_end: f64,
    pub safety: f64,
    pub max_steps: usize,
    /// Record every `stride`-th step; `None` picks a default.
    pub stride: Option<usize>,
}

impl FlowControls {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            safety: DEFAULT_SAFETY,
            max_steps: 1_000_000,
            stride: None,
        }
    }

    pub fn validate(&self, t_start: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > t_start && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} must exceed the start time {t_start}",
                self.t_end
            )));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "safety factor {} outside (0, 1]",
                self.safety
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        if self.stride == Some(0) {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<S> {
    pub time: f64,
    /// Integration step at which the snapshot was taken.
    pub step: usize,
    pub state: S,
}

/// Time-ordered flow states.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub snapshots: Vec<Snapshot<S>>,
    /// Time step used by each integration step.
    pub step_dt: Vec<f64>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn state(&self, i: usize) -> &S {
        &self.snapshots[i].state
    }

    /// Checks that `i` has neighbours on both sides.
    pub fn check_interior_index(&self, i: usize) -> Result<()> {
        if i >= 1 && i + 1 < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                valid: format!("1..={}", self.len().saturating_sub(2)),
            })
        }
    }
}

/// Largest stable explicit step: `safety * min(hx, hy)^2 * min(e^{2 phi}) / 4`.
pub fn stability_bound(grid: &ConformalGrid, safety: f64) -> f64 {
    let h = grid.hx().min(grid.hy());
    let min_phi = grid.phi().iter().copied().fold(f64::INFINITY, f64::min);
    safety * h * h * (2.0 * min_phi).exp() / 4.0
}

/// `d/dt phi = e^{-2 phi} Delta_0 phi`; zero on a rectangle's rim.
pub fn flow_rate(grid: &ConformalGrid, phi: &ScalarField) -> ScalarField {
    let lap = flat_laplacian(grid, phi);
    let mut out: Vec<f64> = lap
        .iter()
        .zip(phi.iter())
        .map(|(l, p)| (-2.0 * p).exp() * l)
        .collect();
    if grid.topology() == Topology::DirichletRectangle {
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                if grid.is_rim(i, j) {
                    out[grid.idx(i, j)] = 0.0;
                }
            }
        }
    }
    out.into()
}

fn axpy(base: &ScalarField, a: f64, k: &ScalarField) -> ScalarField {
    base.iter()
        .zip(k.iter())
        .map(|(b, k)| b + a * k)
        .collect::<Vec<_>>()
        .into()
}

/// One classical RK4 step of the conformal flow.
pub fn step_conformal(grid: &ConformalGrid, dt: f64, safety: f64) -> Result<ConformalGrid> {
    let bound = stability_bound(grid, safety);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::StabilityViolation {
            dt,
            bound,
            t: grid.time(),
        });
    }
    let phi = grid.phi();
    let k1 = flow_rate(grid, phi);
    let k2 = flow_rate(grid, &axpy(phi, 0.5 * dt, &k1));
    let k3 = flow_rate(grid, &axpy(phi, 0.5 * dt, &k2));
    let k4 = flow_rate(grid, &axpy(phi, dt, &k3));
    let next: Vec<f64> = (0..phi.len())
        .map(|k| phi[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]))
        .collect();
    let t_next = grid.time() + dt;
    let max_abs = next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !max_abs.is_finite() || max_abs > PHI_GUARD {
        return Err(Error::BlowUp {
            t: t_next,
            max_abs_phi: max_abs,
        });
    }
    grid.with_phi(next.into(), t_next)
}

/// Number of uniform steps covering `[t0, t_end]` with steps no larger than `dt`.
pub fn step_count(t0: f64, controls: &FlowControls) -> usize {
    let n = ((controls.t_end - t0) / controls.dt * (1.0 - 1e-12)).ceil();
    (n as usize).max(1)
}

/// Default snapshot stride for a run of `steps` steps.
pub fn default_stride(steps: usize) -> usize {
    if steps < TARGET_SNAPSHOTS {
        1
    } else {
        steps.div_ceil(TARGET_SNAPSHOTS)
    }
}

/// Integrates from the grid's own time to `controls.t_end` with uniform steps.
pub fn evolve(initial: &ConformalGrid, controls: &FlowControls) -> Result<Trajectory<ConformalGrid>> {
    let t0 = initial.time();
    controls.validate(t0)?;
    let total = step_count(t0, controls);
    let dt = (controls.t_end - t0) / total as f64;
    let steps = total.min(controls.max_steps);
    let stride = controls.stride.unwrap_or_else(|| default_stride(steps));

    let mut snapshots = vec![Snapshot {
        time: t0,
        step: 0,
        state: initial.clone(),
    }];
    let mut step_dt = Vec::with_capacity(steps);
    let mut current = initial.clone();
    for s in 1..=steps {
        let next = step_conformal(&current, dt, controls.safety)?;
        // pin the time to t0 + s dt so snapshot times carry no round-off drift
        let t = if s == total { controls.t_end } else { t0 + s as f64 * dt };
        current = next.with_phi(next.phi().clone(), t)?;
        step_dt.push(dt);
        if s % stride == 0 || s == steps {
            snapshots.push(Snapshot {
                time: t,
                step: s,
                state: current.clone(),
            });
        }
    }
    Ok(Trajectory { snapshots, step_dt })
}

/// Closed-form model states at the given increasing times.
pub fn model_trajectory(model: &ModelGeometry, times: &[f64]) -> Result<Trajectory<ModelState>> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sample times must increase strictly".into()));
    }
    let snapshots = times
        .iter()
        .enumerate()
        .map(|(step, &t)| {
            Ok(Snapshot {
                time: t,
                step,
                state: advance_model(model, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let step_dt = times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(Trajectory { snapshots, step_dt })
}
