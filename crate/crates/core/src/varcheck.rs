//! Numerical checks of the variation identities behind the rate formulas.
//!
//! Grid checks compare a central time difference across snapshots `i - 1` and
//! `i + 1` with the claimed derivative at snapshot `i`, on the nodes of the mask.
//! For the semi-discrete conformal flow the pointwise identities hold exactly,
//! so the residuals are `O(dt^2)` in the snapshot spacing. The `eq6` chain and
//! the Bianchi check compare two spatial discretisations and are `O(h^2)`.
//!
//! Model checks evaluate both sides in closed form, with time derivatives taken
//! by a five-point stencil.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::geometry::{
    gradient, laplace_beltrami_apply, scalar_curvature, volume_weights, ConformalGrid, DomainMask,
    ScalarField, Topology,
};
use crate::models::{
    closed_form_eigenvalue, model_scalar_curvature, ricci_eigenvalues, squared_scale, Branch,
    ModelGeometry,
};
use crate::verdict::Verdict;

/// Names of the identity checks, in report order.
pub const CHECK_NAMES: [&str; 5] = ["eq5", "inverse_metric", "eq7", "eq6", "bianchi"];

/// Errors at or below this are treated as exact.
pub const EXACT_FLOOR: f64 = 1e-12;

/// Smallest acceptable fitted convergence order.
pub const MIN_ORDER: f64 = 1.7;
pub const MAX_ORDER: f64 = 4.5;

/// Step of the five-point time stencil on closed forms, shrunk near the
/// maximal time.
pub const MODEL_FD_STEP: f64 = 1e-4;

fn model_step(model: &ModelGeometry, t: f64) -> f64 {
    MODEL_FD_STEP.min(1e-3 * (crate::models::maximal_time(model) - t))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub max_abs_err: f64,
    /// `max_abs_err` over the magnitude of the terms involved.
    pub rel_err: f64,
    /// Fitted order against a coarser level, when one was run.
    pub order_estimate: Option<f64>,
}

impl IdentityCheck {
    /// Builds a check from sampled sides; `scale` normalises `rel_err`.
    pub fn new(name: &str, lhs: Vec<f64>, rhs: Vec<f64>, scale: f64) -> Self {
        let max_abs_err = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let rel_err = if scale > 0.0 { max_abs_err / scale } else { max_abs_err };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            max_abs_err,
            rel_err,
            order_estimate: None,
        }
    }

    fn from_sides(name: &str, lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let scale = rhs.iter().chain(&lhs).fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::new(name, lhs, rhs, scale)
    }

    pub fn is_exact(&self) -> bool {
        self.max_abs_err <= EXACT_FLOOR
    }

    /// Records the order fitted against `coarse`, where `p` is the parameter
    /// (snapshot spacing or mesh width) the error is expected to scale with.
    pub fn with_order(mut self, coarse: &IdentityCheck, p_coarse: f64, p_fine: f64) -> Self {
        self.order_estimate = fitted_order(coarse.rel_err, self.rel_err, p_coarse, p_fine);
        self
    }

    /// Pass iff `rel_err <= tol`.
    pub fn verdict(&self, tol: f64) -> Verdict {
        Verdict::compare(
            self.name.clone(),
            format!("{} samples, max abs err {:e}", self.lhs.len(), self.max_abs_err),
            self.rel_err,
            tol,
        )
    }
}

/// `log(e_c / e_f) / log(p_c / p_f)`; `None` when either error is at the
/// exactness floor or the parameters coincide.
pub fn fitted_order(e_coarse: f64, e_fine: f64, p_coarse: f64, p_fine: f64) -> Option<f64> {
    if e_coarse <= EXACT_FLOOR || e_fine <= EXACT_FLOOR || p_coarse <= 0.0 || p_fine <= 0.0 || p_coarse == p_fine {
        return None;
    }
    Some((e_coarse / e_fine).ln() / (p_coarse / p_fine).ln())
}

/// Half the time span between the neighbours of snapshot `i`.
pub fn snapshot_spacing<S>(traj: &Trajectory<S>, i: usize) -> Result<f64> {
    traj.check_interior_index(i)?;
    Ok(0.5 * (traj.snapshots[i + 1].time - traj.snapshots[i - 1].time))
}

fn on_mask(mask: &DomainMask, field: &[f64]) -> Vec<f64> {
    mask.interior_nodes().into_iter().map(|k| field[k]).collect()
}

fn central<F>(traj: &Trajectory<ConformalGrid>, i: usize, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&ConformalGrid) -> Vec<f64>,
{
    traj.check_interior_index(i)?;
    let (before, after) = (&traj.snapshots[i - 1], &traj.snapshots[i + 1]);
    let span = after.time - before.time;
    let (a, b) = (f(&before.state), f(&after.state));
    let diff = a.iter().zip(&b).map(|(a, b)| (b - a) / span).collect();
    Ok((diff, f(traj.state(i))))
}

fn check_grid_size(grid: &ConformalGrid, mask: &DomainMask) -> Result<()> {
    if mask.as_slice().len() != grid.node_count() {
        return Err(Error::InvalidMask(format!(
            "mask has {} nodes, grid has {}",
            mask.as_slice().len(),
            grid.node_count()
        )));
    }
    Ok(())
}

/// `d/dt dv = -R dv` on the lumped weights.
pub fn check_volume_evolution(traj: &Trajectory<ConformalGrid>, mask: &DomainMask, i: usize) -> Result<IdentityCheck> {
    let (lhs, _) = central(traj, i, |g| volume_weights(g).into_inner())?;
    let grid = traj.state(i);
    check_grid_size(grid, mask)?;
    let r = scalar_curvature(grid);
    let w = volume_weights(grid);
    let rhs: Vec<f64> = r.iter().zip(w.iter()).map(|(r, w)| -r * w).collect();
    Ok(IdentityCheck::from_sides("eq5", on_mask(mask, &lhs), on_mask(mask, &rhs)))
}

/// `d/dt g^{ij} = 2 R^{ij}`, which for `g^{ij} = e^{-2 phi} delta` reads
/// `d/dt e^{-2 phi} = R e^{-2 phi}`.
pub fn check_inverse_metric_evolution(
    traj: &Trajectory<ConformalGrid>,
    mask: &DomainMask,
    i: usize,
) -> Result<IdentityCheck> {
    let inverse = |g: &ConformalGrid| g.phi().iter().map(|p| (-2.0 * p).exp()).collect::<Vec<_>>();
    let (lhs, now) = central(traj, i, inverse)?;
    let grid = traj.state(i);
    check_grid_size(grid, mask)?;
    let r = scalar_curvature(grid);
    let rhs: Vec<f64> = r.iter().zip(&now).map(|(r, g)| r * g).collect();
    Ok(IdentityCheck::from_sides("inverse_metric", on_mask(mask, &lhs), on_mask(mask, &rhs)))
}

/// `Delta' u = R Delta u` for a fixed field `u`.
pub fn check_laplacian_variation(
    traj: &Trajectory<ConformalGrid>,
    mask: &DomainMask,
    i: usize,
    u: &ScalarField,
) -> Result<IdentityCheck> {
    let grid = traj.state(i);
    check_grid_size(grid, mask)?;
    check_field(grid, u)?;
    let (lhs, lap) = central(traj, i, |g| laplace_beltrami_apply(g, u).into_inner())?;
    let r = scalar_curvature(grid);
    let rhs: Vec<f64> = r.iter().zip(&lap).map(|(r, l)| r * l).collect();
    Ok(IdentityCheck::from_sides("eq7", on_mask(mask, &lhs), on_mask(mask, &rhs)))
}

/// Terms of the integrated variation identity
/// `2 int R^{ij} u_i v_j - int R u^i v_i = -int (Delta' u) v + int (Delta u) v R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eq6Terms {
    pub ricci_form: f64,
    pub curvature_form: f64,
    pub variation: f64,
    pub laplacian_form: f64,
}

impl Eq6Terms {
    pub fn lhs(&self) -> f64 {
        self.ricci_form - self.curvature_form
    }

    pub fn rhs(&self) -> f64 {
        -self.variation + self.laplacian_form
    }

    fn scale(&self) -> f64 {
        [self.ricci_form, self.curvature_form, self.variation, self.laplacian_form]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Evaluates the four terms at snapshot `i`.
///
/// `2 R^{ij} u_i v_j = R e^{-2 phi} grad u . grad v` is summed at nodes with
/// centred gradients; `R g^{ij} u_i v_j` is summed over grid edges with `R`
/// averaged to the edge midpoint. `Delta' u` is a central time difference.
pub fn eq6_terms(
    traj: &Trajectory<ConformalGrid>,
    mask: &DomainMask,
    i: usize,
    u: &ScalarField,
    v: &ScalarField,
) -> Result<Eq6Terms> {
    let grid = traj.state(i);
    check_grid_size(grid, mask)?;
    check_field(grid, u)?;
    check_field(grid, v)?;
    let (variation_u, lap_u) = central(traj, i, |g| laplace_beltrami_apply(g, u).into_inner())?;
    let r = scalar_curvature(grid);
    let w = volume_weights(grid);
    let cell = grid.hx() * grid.hy();
    let (ux, uy) = gradient(grid, u);
    let (vx, vy) = gradient(grid, v);

    let inside = mask.as_slice();
    let mut terms = Eq6Terms {
        ricci_form: 0.0,
        curvature_form: 0.0,
        variation: 0.0,
        laplacian_form: 0.0,
    };
    for k in mask.interior_nodes() {
        terms.ricci_form += r[k] * (ux[k] * vx[k] + uy[k] * vy[k]) * cell;
        terms.variation += variation_u[k] * v[k] * w[k];
        terms.laplacian_form += lap_u[k] * v[k] * r[k] * w[k];
    }
    let periodic = grid.topology() == Topology::PeriodicTorus;
    let (wx, wy) = (grid.hy() / grid.hx(), grid.hx() / grid.hy());
    let mut edge = |k: usize, m: usize, weight: f64| {
        if inside[k] || inside[m] {
            terms.curvature_form += 0.5 * (r[k] + r[m]) * (u[m] - u[k]) * (v[m] - v[k]) * weight;
        }
    };
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let k = grid.idx(i, j);
            if i + 1 < grid.nx() || periodic {
                edge(k, grid.idx((i + 1) % grid.nx(), j), wx);
            }
            if j + 1 < grid.ny() || periodic {
                edge(k, grid.idx(i, (j + 1) % grid.ny()), wy);
            }
        }
    }
    Ok(terms)
}

/// Imbalance of the integrated variation identity.
pub fn check_eq6_chain(
    traj: &Trajectory<ConformalGrid>,
    mask: &DomainMask,
    i: usize,
    u: &ScalarField,
    v: &ScalarField,
) -> Result<IdentityCheck> {
    let terms = eq6_terms(traj, mask, i, u, v)?;
    Ok(IdentityCheck::new("eq6", vec![terms.lhs()], vec![terms.rhs()], terms.scale()))
}

/// `2 R_{ij;}^j = R_i` with `R_ij = s delta_ij`, `s = R e^{2 phi} / 2`: the
/// divergence `2 e^{-2 phi} (grad s - 2 s grad phi)` against `grad R`, both from
/// centred differences. Components are stacked `x` then `y`.
pub fn check_bianchi(grid: &ConformalGrid, mask: &DomainMask) -> Result<IdentityCheck> {
    check_grid_size(grid, mask)?;
    let r = scalar_curvature(grid);
    let phi = grid.phi();
    let s: ScalarField = r
        .iter()
        .zip(phi.iter())
        .map(|(r, p)| 0.5 * r * (2.0 * p).exp())
        .collect::<Vec<_>>()
        .into();
    let (sx, sy) = gradient(grid, &s);
    let (px, py) = gradient(grid, phi);
    let (rx, ry) = gradient(grid, &r);
    let nodes = mask.interior_nodes();
    let div = |k: usize, ds: f64, dp: f64| 2.0 * (-2.0 * phi[k]).exp() * (ds - 2.0 * s[k] * dp);
    let lhs: Vec<f64> = nodes
        .iter()
        .map(|&k| div(k, sx[k], px[k]))
        .chain(nodes.iter().map(|&k| div(k, sy[k], py[k])))
        .collect();
    let rhs: Vec<f64> = nodes.iter().map(|&k| rx[k]).chain(nodes.iter().map(|&k| ry[k])).collect();
    Ok(IdentityCheck::from_sides("bianchi", lhs, rhs))
}

fn check_field(grid: &ConformalGrid, u: &ScalarField) -> Result<()> {
    if u.len() != grid.node_count() {
        return Err(Error::InvalidArgument(format!(
            "test field has {} values, grid has {} nodes",
            u.len(),
            grid.node_count()
        )));
    }
    if !u.is_finite() {
        return Err(Error::InvalidArgument("test field is not finite".into()));
    }
    Ok(())
}

/// Default test fields: low trigonometric modes on the torus; squared
/// polynomial bumps vanishing with their gradients outside the mask's box on
/// a rectangle.
pub fn default_test_fields(grid: &ConformalGrid, mask: &DomainMask) -> (ScalarField, ScalarField) {
    let (lx, ly) = grid.extent();
    match grid.topology() {
        Topology::PeriodicTorus => {
            let (kx, ky) = (2.0 * PI / lx, 2.0 * PI / ly);
            let u = grid.sample(|x, y| (kx * x).cos() + 0.5 * (ky * y).sin() + 0.3 * (kx * x).sin() * (ky * y).cos());
            let v = grid.sample(|x, y| (kx * x).cos() + (ky * y).cos() + 0.4 * (kx * x).sin());
            (u, v)
        }
        Topology::DirichletRectangle => {
            let nodes = mask.interior_nodes();
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for &k in &nodes {
                let (x, y) = grid.coords(k);
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
            // the box reaches the first exterior node on each side
            let (x0, x1, y0, y1) = (x0 - grid.hx(), x1 + grid.hx(), y0 - grid.hy(), y1 + grid.hy());
            let bump = move |x: f64, y: f64| {
                let (s, r) = ((x - x0) / (x1 - x0), (y - y0) / (y1 - y0));
                if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&r) {
                    let p = 16.0 * s * (1.0 - s) * r * (1.0 - r);
                    (p * p, s)
                } else {
                    (0.0, s)
                }
            };
            let u = grid.sample(|x, y| bump(x, y).0);
            let v = grid.sample(|x, y| {
                let (b, s) = bump(x, y);
                b * (0.5 + s)
            });
            (u, v)
        }
    }
}

fn five_point(f: impl Fn(f64) -> Result<f64>, t: f64, h: f64) -> Result<f64> {
    Ok((f(t - 2.0 * h)? - 8.0 * f(t - h)? + 8.0 * f(t + h)? - f(t + 2.0 * h)?) / (12.0 * h))
}

fn positive_scale(model: &ModelGeometry, t: f64) -> Result<f64> {
    let s = squared_scale(model, t);
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::TimeOutOfRange {
            t,
            t_max: crate::models::maximal_time(model),
        })
    }
}

/// Volume density relative to a reference, up to a constant factor.
fn volume_density(model: &ModelGeometry, t: f64) -> Result<f64> {
    let s = positive_scale(model, t)?;
    Ok(match model {
        ModelGeometry::RoundSphere { dim, .. } => s.powf(0.5 * *dim as f64),
        ModelGeometry::HyperbolicScaled { .. } | ModelGeometry::SphereCircleProduct { .. } => s,
        ModelGeometry::FlatTorus { .. } => 1.0,
    })
}

/// Inverse-metric factors `(sphere-block, circle-block)`.
fn inverse_metric_blocks(model: &ModelGeometry, t: f64) -> Result<(f64, f64)> {
    let s = positive_scale(model, t)?;
    Ok(match model {
        ModelGeometry::FlatTorus { .. } => (1.0, 1.0),
        ModelGeometry::SphereCircleProduct { b0, .. } => (1.0 / s, 1.0 / (b0 * b0)),
        _ => (1.0 / s, 1.0 / s),
    })
}

/// Eigenvalue of `branch` split into its `(sphere-block, circle-block)` parts.
fn eigenvalue_blocks(model: &ModelGeometry, branch: Branch, t: f64) -> Result<(f64, f64)> {
    let total = closed_form_eigenvalue(model, branch, t)?;
    Ok(match (model, branch) {
        (ModelGeometry::SphereCircleProduct { b0, .. }, Branch::Product { m, .. }) => {
            let circle = (m * m) as f64 / (b0 * b0);
            (total - circle, circle)
        }
        _ => (total, 0.0),
    })
}

/// `d/dt dv = -R dv` for a homogeneous model.
pub fn check_volume_evolution_model(model: &ModelGeometry, t: f64) -> Result<IdentityCheck> {
    let r = model_scalar_curvature(model, t)?;
    let density = volume_density(model, t)?;
    let lhs = five_point(|s| volume_density(model, s), t, model_step(model, t))?;
    Ok(IdentityCheck::from_sides("eq5", vec![lhs], vec![-r * density]))
}

/// `d/dt g^{ij} = 2 R^{ij}` blockwise for a homogeneous model.
pub fn check_inverse_metric_model(model: &ModelGeometry, t: f64) -> Result<IdentityCheck> {
    let (rho_s, rho_c) = ricci_eigenvalues(model, t)?;
    let (g_s, g_c) = inverse_metric_blocks(model, t)?;
    let lhs_s = five_point(|s| Ok(inverse_metric_blocks(model, s)?.0), t, model_step(model, t))?;
    let lhs_c = five_point(|s| Ok(inverse_metric_blocks(model, s)?.1), t, model_step(model, t))?;
    Ok(IdentityCheck::from_sides(
        "inverse_metric",
        vec![lhs_s, lhs_c],
        vec![2.0 * rho_s * g_s, 2.0 * rho_c * g_c],
    ))
}

/// `Delta' f = 2 R^{ij} f_ij` applied to a fixed eigenfunction of `branch`,
/// as multiples of `f`: `-d lambda/dt` against `-2 sum rho_b lambda_b`.
pub fn check_laplacian_variation_model(model: &ModelGeometry, branch: Branch, t: f64) -> Result<IdentityCheck> {
    let (rho_s, rho_c) = ricci_eigenvalues(model, t)?;
    let (l_s, l_c) = eigenvalue_blocks(model, branch, t)?;
    let rate = five_point(|s| closed_form_eigenvalue(model, branch, s), t, model_step(model, t))?;
    Ok(IdentityCheck::from_sides(
        "eq7",
        vec![-rate],
        vec![-2.0 * (rho_s * l_s + rho_c * l_c)],
    ))
}

/// The integrated identity with `u = v = f` a normalised eigenfunction.
pub fn check_eq6_model(model: &ModelGeometry, branch: Branch, t: f64) -> Result<IdentityCheck> {
    let (rho_s, rho_c) = ricci_eigenvalues(model, t)?;
    let (l_s, l_c) = eigenvalue_blocks(model, branch, t)?;
    let r = model_scalar_curvature(model, t)?;
    let lambda = l_s + l_c;
    let rate = five_point(|s| closed_form_eigenvalue(model, branch, s), t, model_step(model, t))?;
    let terms = Eq6Terms {
        ricci_form: 2.0 * (rho_s * l_s + rho_c * l_c),
        curvature_form: r * lambda,
        variation: -rate,
        laplacian_form: -r * lambda,
    };
    Ok(IdentityCheck::new("eq6", vec![terms.lhs()], vec![terms.rhs()], terms.scale()))
}

/// Homogeneous models have `grad R = 0`, so both sides vanish.
pub fn check_bianchi_model(model: &ModelGeometry, t: f64) -> Result<IdentityCheck> {
    model_scalar_curvature(model, t)?;
    Ok(IdentityCheck::from_sides("bianchi", vec![0.0, 0.0], vec![0.0, 0.0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::PhiExpr;
    use crate::flow::{evolve, FlowControls};

    fn static_traj(grid: &ConformalGrid) -> Trajectory<ConformalGrid> {
        let mut controls = FlowControls::new(1e-4, grid.time() + 3e-4);
        controls.stride = Some(1);
        evolve(grid, &controls).unwrap()
    }

    fn bump_torus(n: usize) -> ConformalGrid {
        PhiExpr::Bump { cx: 0.5, cy: 0.4, amplitude: 0.05, width: 0.15 }
            .torus(n, n, 1.0, 1.0)
            .unwrap()
    }

    #[test]
    fn flat_and_constant_metrics_are_exact() {
        for c in [0.0, 0.3] {
            let grids = [
                ConformalGrid::torus(16, 16, 1.0, 1.0, |_, _| c).unwrap(),
                ConformalGrid::rectangle(16, 16, 1.0, 1.0, |_, _| c).unwrap(),
            ];
            for grid in grids {
                let mask = DomainMask::full(&grid);
                let traj = static_traj(&grid);
                let (u, v) = default_test_fields(&grid, &mask);
                let checks = [
                    check_volume_evolution(&traj, &mask, 1).unwrap(),
                    check_inverse_metric_evolution(&traj, &mask, 1).unwrap(),
                    check_laplacian_variation(&traj, &mask, 1, &u).unwrap(),
                    check_eq6_chain(&traj, &mask, 1, &u, &v).unwrap(),
                    check_bianchi(&grid, &mask).unwrap(),
                ];
                for check in checks {
                    assert!(check.max_abs_err <= 1e-12, "{} {}", check.name, check.max_abs_err);
                }
            }
        }
    }

    #[test]
    fn time_identities_converge_at_second_order() {
        let grid = bump_torus(24);
        let mask = DomainMask::full(&grid);
        let (u, _) = default_test_fields(&grid, &mask);
        let errs: Vec<(f64, f64)> = [8usize, 4]
            .iter()
            .map(|&stride| {
                let mut controls = FlowControls::new(2e-5, 16.0 * 2e-5);
                controls.stride = Some(stride);
                let traj = evolve(&grid, &controls).unwrap();
                let i = traj.len() / 2;
                let p = snapshot_spacing(&traj, i).unwrap();
                (check_laplacian_variation(&traj, &mask, i, &u).unwrap().rel_err, p)
            })
            .collect();
        let order = fitted_order(errs[0].0, errs[1].0, errs[0].1, errs[1].1).unwrap();
        assert!((1.8..2.2).contains(&order), "{order} {errs:?}");
    }

    #[test]
    fn bianchi_paths_agree_to_second_order() {
        let errs: Vec<f64> = [32, 64]
            .iter()
            .map(|&n| {
                let grid = bump_torus(n);
                check_bianchi(&grid, &DomainMask::full(&grid)).unwrap().rel_err
            })
            .collect();
        let order = fitted_order(errs[0], errs[1], 1.0 / 32.0, 1.0 / 64.0).unwrap();
        assert!((1.7..2.5).contains(&order), "{order} {errs:?}");
    }

    #[test]
    fn interior_index_is_required() {
        let grid = ConformalGrid::torus(16, 16, 1.0, 1.0, |_, _| 0.0).unwrap();
        let traj = static_traj(&grid);
        let mask = DomainMask::full(&grid);
        assert!(matches!(check_volume_evolution(&traj, &mask, 0), Err(Error::IndexOutOfRange { .. })));
        let last = traj.len() - 1;
        assert!(check_inverse_metric_evolution(&traj, &mask, last).is_err());
    }

    #[test]
    fn model_identities_hold() {
        let models = [
            ModelGeometry::RoundSphere { dim: 2, r0: 1.0 },
            ModelGeometry::RoundSphere { dim: 3, r0: 1.0 },
            ModelGeometry::HyperbolicScaled { c0: 1.0, spectrum: Some(vec![2.5]) },
            ModelGeometry::FlatTorus { lx: 1.0, ly: 2.0 },
            ModelGeometry::SphereCircleProduct { a0: 1.0, b0: 1.0 },
        ];
        let branches = [
            Branch::Sphere { k: 2 },
            Branch::Sphere { k: 1 },
            Branch::Hyperbolic { index: 1 },
            Branch::Torus { p: 1, q: 1 },
            Branch::Product { l: 1, m: 2 },
        ];
        for (model, branch) in models.iter().zip(branches) {
            for t in [0.0, 0.05, 0.1] {
                let checks = [
                    check_volume_evolution_model(model, t).unwrap(),
                    check_inverse_metric_model(model, t).unwrap(),
                    check_laplacian_variation_model(model, branch, t).unwrap(),
                    check_eq6_model(model, branch, t).unwrap(),
                    check_bianchi_model(model, t).unwrap(),
                ];
                for c in checks {
                    assert!(c.max_abs_err < 1e-8, "{} {model:?} t={t}: {}", c.name, c.max_abs_err);
                }
            }
        }
        // d(r^2)/dt = -2 = -R r^2 on the unit round 2-sphere
        let c = check_volume_evolution_model(&models[0], 0.0).unwrap();
        assert!((c.lhs[0] + 2.0).abs() < 1e-9 && (c.rhs[0] + 2.0).abs() < 1e-15);
    }
}
