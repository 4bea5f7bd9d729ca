//! Eigenvalue rates along the Ricci flow: predicted versus observed.
//!
//! Differentiating `-Delta f = mu f` with `integral f^2 dv = 1` gives
//! `mu' = -integral (Delta' f) f`. With `Delta' u = 2 R^{ij} u_{ij}` this becomes
//!
//! * `mu' = mu integral R f^2 dv` on surfaces, where `R_ij = R/2 g_ij`;
//! * `mu' = mu integral R f^2 dv + 2 integral E_ij f^i f^j dv` in general, after
//!   integrating by parts with the contracted Bianchi identity.
//!
//! The second form is only exercised on closed model geometries: on a
//! Dirichlet domain the integration by parts leaves boundary terms in `df`.
//!
//! On a conformal grid the first identity holds exactly for the semi-discrete
//! flow, because the stiffness matrix is metric independent and the lumped mass
//! evolves by `M' = -R M`. The remaining discrepancy is the time-differencing
//! error of the observed rate.

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::geometry::{scalar_curvature, volume_weights, ConformalGrid, DomainMask};
use crate::models::{
    branch_at, branch_eigenvalue, branch_rate_prediction, closed_form_eigenvalue,
    einstein_term, model_einstein_bounds, model_scalar_curvature, Branch, ModelGeometry,
};
use crate::spectral::{assemble, clusters, solve, track_mode, Constraint, EigenPair, SolverOptions};
use crate::verdict::{Status, Verdict};

/// One tracked mode at one flow time.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSample {
    pub t: f64,
    pub mode: usize,
    pub mu: f64,
    pub predicted_rate: f64,
    /// Central difference of the tracked branch; absent at trajectory endpoints.
    pub observed_rate: Option<f64>,
    pub r_min: f64,
    pub r_max: f64,
    /// Smallest `a` with `E >= -a g`; zero on surfaces.
    pub a_required: f64,
    pub hypothesis_feasible: bool,
}

/// Whether some `a` satisfies both `E >= -a g` and `R >= 2a`.
pub fn hypothesis_feasible(a_required: f64, r_min: f64) -> bool {
    2.0 * a_required <= r_min
}

/// The admissible interval `[a_required, R_min / 2]`, if nonempty.
pub fn admissible_interval(a_required: f64, r_min: f64) -> Option<(f64, f64)> {
    hypothesis_feasible(a_required, r_min).then_some((a_required, 0.5 * r_min))
}

/// `mu * sum R f^2 dv` over the grid.
pub fn predicted_rate_2d(grid: &ConformalGrid, pair: &EigenPair) -> f64 {
    let r = scalar_curvature(grid);
    let w = volume_weights(grid);
    let integral: f64 = pair
        .f
        .iter()
        .zip(r.iter())
        .zip(w.iter())
        .map(|((f, r), w)| r * f * f * w)
        .sum();
    pair.mu * integral
}

/// `mu R + 2 integral E_ij f^i f^j` for spatially constant `R`.
pub fn predicted_rate_general(r_const: f64, einstein_term: f64, pair_mu: f64) -> f64 {
    pair_mu * r_const + 2.0 * einstein_term
}

/// Central difference `(mu_{i+1} - mu_{i-1}) / (t_{i+1} - t_{i-1})`.
pub fn observed_rate(times: &[f64], mus: &[f64], i: usize) -> Result<f64> {
    let n = times.len().min(mus.len());
    if i == 0 || i + 1 >= n {
        return Err(Error::IndexOutOfRange {
            index: i,
            valid: format!("1..={}", n.saturating_sub(2)),
        });
    }
    Ok((mus[i + 1] - mus[i - 1]) / (times[i + 1] - times[i - 1]))
}

/// [`observed_rate`] for a branch tracked along a trajectory.
pub fn observed_rate_along<S>(traj: &Trajectory<S>, tracked: &[EigenPair], i: usize) -> Result<f64> {
    let mus: Vec<f64> = tracked.iter().map(|p| p.mu).collect();
    observed_rate(&traj.times(), &mus, i)
}

/// Five-point derivative of a closed-form eigenbranch, `O(h^4)`.
pub fn closed_form_rate(model: &ModelGeometry, branch: Branch, t: f64, h: f64) -> Result<f64> {
    let at = |s: f64| closed_form_eigenvalue(model, branch, s);
    Ok((at(t - 2.0 * h)? - 8.0 * at(t - h)? + 8.0 * at(t + h)? - at(t + 2.0 * h)?) / (12.0 * h))
}

/// Mean over a run of near-degenerate eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterStat {
    pub size: usize,
    pub mean_mu: f64,
    pub mean_predicted: f64,
    /// The cluster touches the top of the computed set and may be incomplete.
    pub truncated: bool,
}

/// A tracked eigenbranch over the analysed snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchHistory {
    pub mode: usize,
    pub mu: Vec<f64>,
    pub predicted: Vec<f64>,
    pub overlap: Vec<f64>,
    pub ambiguous: Vec<bool>,
    pub cluster: Vec<Option<ClusterStat>>,
    /// Final tracked pair.
    pub last: EigenPair,
}

/// Spectral data along a grid trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpectralHistory {
    /// Snapshot indices analysed, increasing.
    pub snapshots: Vec<usize>,
    pub times: Vec<f64>,
    pub r_min: Vec<f64>,
    pub r_max: Vec<f64>,
    pub branches: Vec<BranchHistory>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralControls {
    /// Modes tracked.
    pub modes: usize,
    /// Extra eigenpairs solved as tracking candidates.
    pub extra: usize,
    pub solver: SolverOptions,
    pub constraint: Constraint,
}

impl SpectralControls {
    pub fn new(modes: usize, tol: f64, constraint: Constraint) -> Self {
        Self {
            modes,
            extra: 1,
            solver: SolverOptions {
                tol,
                ..SolverOptions::default()
            },
            constraint,
        }
    }
}

/// Range of `R` over the interior of the mask.
pub fn curvature_range(grid: &ConformalGrid, mask: &DomainMask) -> (f64, f64) {
    let r = scalar_curvature(grid);
    r.iter()
        .zip(mask.as_slice())
        .filter(|(_, &inside)| inside)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
}

/// Solves and tracks the lowest modes at the given snapshots (all when `None`).
pub fn analyse_grid(
    traj: &Trajectory<ConformalGrid>,
    mask: &DomainMask,
    controls: &SpectralControls,
    snapshots: Option<&[usize]>,
) -> Result<GridSpectralHistory> {
    let indices: Vec<usize> = match snapshots {
        Some(s) => s.to_vec(),
        None => (0..traj.len()).collect(),
    };
    if indices.is_empty() || indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("snapshot indices must increase".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= traj.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            valid: format!("0..{}", traj.len()),
        });
    }
    let count = controls.modes + controls.extra;
    let mut history = GridSpectralHistory {
        snapshots: indices.clone(),
        times: Vec::with_capacity(indices.len()),
        r_min: Vec::with_capacity(indices.len()),
        r_max: Vec::with_capacity(indices.len()),
        branches: Vec::new(),
    };
    for (step, &s) in indices.iter().enumerate() {
        let grid = traj.state(s);
        let ops = assemble(grid, mask)?;
        let solution = solve(&ops, count, &controls.solver, controls.constraint)?;
        let pairs = solution.pairs;
        let weights = volume_weights(grid);
        let predicted: Vec<f64> = pairs.iter().map(|p| predicted_rate_2d(grid, p)).collect();
        let groups = clusters(&pairs);
        let cluster_of = |c: usize| -> Option<ClusterStat> {
            let range = groups.iter().find(|r| r.contains(&c))?;
            (range.len() > 1).then(|| ClusterStat {
                size: range.len(),
                mean_mu: pairs[range.clone()].iter().map(|p| p.mu).sum::<f64>() / range.len() as f64,
                mean_predicted: predicted[range.clone()].iter().sum::<f64>() / range.len() as f64,
                truncated: range.end == pairs.len(),
            })
        };
        let (lo, hi) = curvature_range(grid, mask);
        history.times.push(traj.snapshots[s].time);
        history.r_min.push(lo);
        history.r_max.push(hi);

        if step == 0 {
            for (mode, pair) in pairs.iter().take(controls.modes).enumerate() {
                history.branches.push(BranchHistory {
                    mode: mode + 1,
                    mu: vec![pair.mu],
                    predicted: vec![predicted[mode]],
                    overlap: vec![1.0],
                    ambiguous: vec![false],
                    cluster: vec![cluster_of(mode)],
                    last: pair.clone(),
                });
            }
            continue;
        }
        for branch in history.branches.iter_mut() {
            let tracked = track_mode(&branch.last, &pairs, &weights)?;
            let c = tracked.candidate;
            branch.mu.push(tracked.pair.mu);
            branch.predicted.push(predicted[c]);
            branch.overlap.push(tracked.overlap);
            branch.ambiguous.push(tracked.ambiguous_with.is_some());
            branch.cluster.push(cluster_of(c));
            branch.last = tracked.pair;
        }
    }
    Ok(history)
}

impl GridSpectralHistory {
    /// CSV-ready samples, ordered by snapshot then mode.
    pub fn samples(&self) -> Vec<RateSample> {
        let mut out = Vec::new();
        for i in 0..self.times.len() {
            for b in &self.branches {
                out.push(RateSample {
                    t: self.times[i],
                    mode: b.mode,
                    mu: b.mu[i],
                    predicted_rate: b.predicted[i],
                    observed_rate: observed_rate(&self.times, &b.mu, i).ok(),
                    r_min: self.r_min[i],
                    r_max: self.r_max[i],
                    a_required: 0.0,
                    hypothesis_feasible: hypothesis_feasible(0.0, self.r_min[i]),
                });
            }
        }
        out
    }

    /// Samples of one tracked mode in time order.
    pub fn mode_samples(&self, mode: usize) -> Vec<RateSample> {
        self.samples().into_iter().filter(|s| s.mode == mode).collect()
    }
}

/// Observed-versus-predicted comparison for one mode at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct RateCheck {
    pub mode: usize,
    pub t: f64,
    pub observed: f64,
    pub predicted: f64,
    pub err: f64,
    pub tol: f64,
    pub status: Status,
    pub note: String,
}

impl RateCheck {
    pub fn verdict(&self, name: &str) -> Verdict {
        Verdict {
            name: name.to_string(),
            status: self.status,
            reason: self.note.clone(),
            err: self.err,
            tol: self.tol,
        }
    }
}

/// Absolute floor of the grid rate tolerance, relative to `mu`.
const RATE_ABS_FLOOR: f64 = 1e-8;

/// Compares `mu'` observed by central differences with `mu integral R f^2 dv`
/// at the analysed position `i`, for every tracked mode.
///
/// Modes inside a near-degenerate cluster are compared through cluster means;
/// clusters cut off by the top of the computed set are skipped.
pub fn check_rate_identity(history: &GridSpectralHistory, i: usize, rel_tol: f64) -> Result<Vec<RateCheck>> {
    if i == 0 || i + 1 >= history.times.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            valid: format!("1..={}", history.times.len().saturating_sub(2)),
        });
    }
    let t = history.times[i];
    let dt = history.times[i + 1] - history.times[i - 1];
    Ok(history
        .branches
        .iter()
        .map(|b| {
            let window = [&b.cluster[i - 1], &b.cluster[i], &b.cluster[i + 1]];
            let clustered = window.iter().any(|c| c.is_some());
            if clustered {
                let complete = window.iter().all(|c| matches!(c, Some(s) if !s.truncated))
                    && window.iter().filter_map(|c| c.as_ref()).map(|c| c.size).collect::<Vec<_>>().windows(2).all(|w| w[0] == w[1]);
                if !complete {
                    return RateCheck {
                        mode: b.mode,
                        t,
                        observed: f64::NAN,
                        predicted: f64::NAN,
                        err: f64::NAN,
                        tol: f64::NAN,
                        status: Status::Skipped,
                        note: format!("ClusterSkipped: mode {} in a degenerate cluster", b.mode),
                    };
                }
                let stats: Vec<ClusterStat> = window.iter().map(|c| c.unwrap()).collect();
                let observed = (stats[2].mean_mu - stats[0].mean_mu) / dt;
                let predicted = stats[1].mean_predicted;
                let tol = rel_tol * predicted.abs() + RATE_ABS_FLOOR * stats[1].mean_mu.abs();
                let err = (observed - predicted).abs();
                return RateCheck {
                    mode: b.mode,
                    t,
                    observed,
                    predicted,
                    err,
                    tol,
                    status: if err <= tol { Status::Pass } else { Status::Fail },
                    note: format!("mode {} cluster of {} (means), t={t}", b.mode, stats[1].size),
                };
            }
            let observed = (b.mu[i + 1] - b.mu[i - 1]) / dt;
            let predicted = b.predicted[i];
            let tol = rel_tol * predicted.abs() + RATE_ABS_FLOOR * b.mu[i].abs();
            let err = (observed - predicted).abs();
            RateCheck {
                mode: b.mode,
                t,
                observed,
                predicted,
                err,
                tol,
                status: if err <= tol { Status::Pass } else { Status::Fail },
                note: format!("mode {}, t={t}", b.mode),
            }
        })
        .collect())
}

/// Samples of closed-form eigenbranches. Each ladder index is resolved to a
/// branch at the first time and followed from there.
pub fn model_rate_samples(model: &ModelGeometry, mode: usize, times: &[f64]) -> Result<Vec<RateSample>> {
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let branch = branch_at(model, mode, t0)?;
    let mus = times
        .iter()
        .map(|&t| branch_eigenvalue(model, branch, t))
        .collect::<Result<Vec<_>>>()?;
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let r = model_scalar_curvature(model, t)?;
            let a_required = model_einstein_bounds(model, t)?.a_required();
            Ok(RateSample {
                t,
                mode,
                mu: mus[i],
                predicted_rate: branch_rate_prediction(model, branch, t)?,
                observed_rate: observed_rate(times, &mus, i).ok(),
                r_min: r,
                r_max: r,
                a_required,
                hypothesis_feasible: hypothesis_feasible(a_required, r),
            })
        })
        .collect()
}

/// Largest `|mu R + 2 integral E(df, df) - d mu/dt|` over the sample times, with
/// the derivative taken by a five-point stencil of step `h` on the closed form.
pub fn check_rate_general(
    model: &ModelGeometry,
    branch: Branch,
    times: &[f64],
    h: f64,
    tol: f64,
) -> Result<Verdict> {
    let mut worst = 0.0_f64;
    for &t in times {
        let mu = branch_eigenvalue(model, branch, t)?;
        let r = model_scalar_curvature(model, t)?;
        let e = einstein_term(model, branch, t)?;
        let predicted = predicted_rate_general(r, e, mu);
        let exact = closed_form_rate(model, branch, t, h)?;
        worst = worst.max((predicted - exact).abs());
    }
    Ok(Verdict::compare(
        "rate_general",
        format!("{} {branch:?}, {} times", model.name(), times.len()),
        worst,
        tol,
    ))
}

/// One exponential-bound comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub t: f64,
    pub mu: f64,
    pub bound: f64,
    /// Relative margin by which the inequality holds (negative when violated).
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropositionCheck {
    /// 1: `R >= C > 0`, lower bound; 2: `R <= -C < 0`, upper bound.
    pub part: u8,
    pub c: f64,
    pub checks: Vec<BoundCheck>,
    pub min_slack: f64,
    pub tol: f64,
}

impl PropositionCheck {
    pub fn passed(&self) -> bool {
        self.min_slack >= -self.tol
    }

    pub fn verdict(&self) -> Verdict {
        let status = if self.passed() { Status::Pass } else { Status::Fail };
        Verdict {
            name: "prop1".into(),
            status,
            reason: format!(
                "part {} with C={}, {} samples, min slack {:e}",
                self.part,
                self.c,
                self.checks.len(),
                self.min_slack
            ),
            err: (-self.min_slack).max(0.0),
            tol: self.tol,
        }
    }
}

/// Exponential eigenvalue bounds for surfaces of signed curvature on
/// `[t0, t1]`: `mu(t) >= mu(t0) e^{C (t - t0)}` when `R >= C > 0`, and
/// `mu(t) <= mu(t0) e^{-C (t - t0)}` when `R <= -C < 0`, with `C` the sharpest
/// constant over the samples in the interval.
pub fn check_proposition1(samples: &[RateSample], interval: (f64, f64), tol: f64) -> Result<PropositionCheck> {
    let (t0, t1) = interval;
    let span = (t1 - t0).abs().max(1.0) * 1e-12;
    let window: Vec<&RateSample> = samples
        .iter()
        .filter(|s| s.t >= t0 - span && s.t <= t1 + span)
        .collect();
    let Some(first) = window.first() else {
        return Err(Error::InvalidArgument(format!("no samples in [{t0}, {t1}]")));
    };
    let r_lo = window.iter().map(|s| s.r_min).fold(f64::INFINITY, f64::min);
    let r_hi = window.iter().map(|s| s.r_max).fold(f64::NEG_INFINITY, f64::max);
    let (part, c) = if r_lo > 0.0 {
        (1, r_lo)
    } else if r_hi < 0.0 {
        (2, -r_hi)
    } else {
        return Err(Error::HypothesisNotMet(format!(
            "curvature changes sign or vanishes on the interval (R in [{r_lo}, {r_hi}])"
        )));
    };
    let mu0 = first.mu;
    let checks: Vec<BoundCheck> = window
        .iter()
        .map(|s| {
            let dt = s.t - first.t;
            let (bound, slack) = if part == 1 {
                let b = mu0 * (c * dt).exp();
                (b, (s.mu - b) / b)
            } else {
                let b = mu0 * (-c * dt).exp();
                (b, (b - s.mu) / b)
            };
            BoundCheck {
                t: s.t,
                mu: s.mu,
                bound,
                slack,
            }
        })
        .collect();
    let min_slack = checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    Ok(PropositionCheck {
        part,
        c,
        checks,
        min_slack,
        tol,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MainTheoremCheck {
    /// `[a_required, R_min / 2]` at the first sample.
    pub a_interval: (f64, f64),
    pub mu_start: f64,
    pub mu_end: f64,
    /// Smallest `observed_rate / mu` over the interior samples.
    pub min_relative_rate: f64,
    /// `R` differs from `2 a_required` somewhere, so strict increase is expected.
    pub strict_expected: bool,
    pub tol: f64,
}

impl MainTheoremCheck {
    /// Largest violation of the non-decrease conclusions, relative to `mu`.
    pub fn err(&self) -> f64 {
        let net = (self.mu_start - self.mu_end) / self.mu_start.abs();
        net.max(-self.min_relative_rate).max(0.0)
    }

    pub fn passed(&self) -> bool {
        let strict_ok = !self.strict_expected || self.mu_end > self.mu_start;
        self.err() <= self.tol && strict_ok
    }

    pub fn verdict(&self) -> Verdict {
        let status = if self.passed() { Status::Pass } else { Status::Fail };
        let case = if self.strict_expected {
            "strict increase expected"
        } else {
            "equality case R = 2a"
        };
        Verdict {
            name: "main_theorem".into(),
            status,
            reason: format!(
                "a in [{}, {}], mu {} -> {}, {case}; mu non-decreasing",
                self.a_interval.0, self.a_interval.1, self.mu_start, self.mu_end
            ),
            err: self.err(),
            tol: self.tol,
        }
    }
}

/// Checks `mu' >= 0` under `E >= -a g`, `R >= 2a` along the samples of one mode.
pub fn check_main_theorem(samples: &[RateSample], tol: f64) -> Result<MainTheoremCheck> {
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Err(Error::InvalidArgument("no samples".into()));
    };
    if let Some(bad) = samples.iter().find(|s| !s.hypothesis_feasible) {
        return Err(Error::HypothesisNotMet(format!(
            "at t={} no a satisfies E >= -a g and R >= 2a (a_required = {}, R_min = {})",
            bad.t, bad.a_required, bad.r_min
        )));
    }
    let a_interval = admissible_interval(first.a_required, first.r_min).unwrap_or((f64::NAN, f64::NAN));
    let min_relative_rate = samples
        .iter()
        .filter_map(|s| s.observed_rate.map(|r| r / s.mu.abs()))
        .fold(f64::INFINITY, f64::min);
    let strict_expected = samples.iter().any(|s| {
        let two_a = 2.0 * s.a_required;
        let scale = s.r_max.abs().max(two_a.abs()).max(f64::MIN_POSITIVE);
        s.r_max - two_a > 1e-12 * scale
    });
    Ok(MainTheoremCheck {
        a_interval,
        mu_start: first.mu,
        mu_end: last.mu,
        min_relative_rate: if min_relative_rate.is_finite() { min_relative_rate } else { 0.0 },
        strict_expected,
        tol,
    })
}
