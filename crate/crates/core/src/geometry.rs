//! Discrete conformal metrics `g = e^{2 phi} (dx^2 + dy^2)` on uniform grids.
//!
//! Nodes are stored row-major (`k = j * nx + i`). On a [`Topology::PeriodicTorus`]
//! the node `i` sits at `x = i * hx` and index arithmetic wraps. On a
//! [`Topology::DirichletRectangle`] the outermost ring of nodes (the *rim*) is the
//! edge of the coordinate box; the domain `D` is described separately by a
//! [`DomainMask`] whose interior never touches the rim.
//!
//! In two dimensions the metric enters the Laplace-Beltrami operator only as the
//! pointwise factor `e^{-2 phi}`, so the flat 5-point stencil plus a lumped mass
//! `e^{2 phi} hx hy` reproduce the discrete Green identity exactly.

use std::collections::VecDeque;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Coarsest admissible node count per direction.
pub const MIN_NODES: usize = 8;

/// Largest admissible `|phi|`; keeps `e^{2 phi}` well inside `f64` range.
pub const PHI_GUARD: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Topology {
    PeriodicTorus,
    DirichletRectangle,
}

/// A real value per grid node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `sum_k self_k * other_k * weight_k`.
    pub fn weighted_dot(&self, other: &ScalarField, weights: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(other.iter())
            .zip(weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// Discrete 2-D conformal metric at one flow time.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalGrid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    phi: ScalarField,
    topology: Topology,
    time: f64,
}

impl ConformalGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        topology: Topology,
        phi: ScalarField,
        time: f64,
    ) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "grid {nx}x{ny} is coarser than {MIN_NODES}x{MIN_NODES}"
            )));
        }
        if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive and finite (hx = {hx}, hy = {hy})"
            )));
        }
        if phi.len() != nx * ny {
            return Err(Error::InvalidGrid(format!(
                "phi has {} values, expected {}",
                phi.len(),
                nx * ny
            )));
        }
        check_phi(&phi)?;
        if !time.is_finite() {
            return Err(Error::InvalidGrid(format!("time {time} is not finite")));
        }
        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            phi,
            topology,
            time,
        })
    }

    /// Samples `phi(x, y)` at every node.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        topology: Topology,
        phi: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(phi(i as f64 * hx, j as f64 * hy));
            }
        }
        Self::new(nx, ny, hx, hy, topology, values.into(), 0.0)
    }

    /// Periodic `lx x ly` torus with `nx x ny` nodes (spacing `lx / nx`).
    pub fn torus(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        phi: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        Self::from_fn(
            nx,
            ny,
            lx / nx as f64,
            ly / ny as f64,
            Topology::PeriodicTorus,
            phi,
        )
    }

    /// `[0, lx] x [0, ly]` box split into `cells_x x cells_y` cells; the nodes on
    /// the box edge form the rim.
    pub fn rectangle(
        cells_x: usize,
        cells_y: usize,
        lx: f64,
        ly: f64,
        phi: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        Self::from_fn(
            cells_x + 1,
            cells_y + 1,
            lx / cells_x as f64,
            ly / cells_y as f64,
            Topology::DirichletRectangle,
            phi,
        )
    }

    /// Same geometry with a new conformal factor and time.
    pub fn with_phi(&self, phi: ScalarField, time: f64) -> Result<Self> {
        Self::new(self.nx, self.ny, self.hx, self.hy, self.topology, phi, time)
    }

    /// Adds a constant to the conformal factor (metric scaled by `e^{2c}`).
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let phi: Vec<f64> = self.phi.iter().map(|p| p + c).collect();
        self.with_phi(phi.into(), self.time)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }
    pub fn topology(&self) -> Topology {
        self.topology
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Coordinate extent of the grid: the full period on a torus, the box on a rectangle.
    pub fn extent(&self) -> (f64, f64) {
        match self.topology {
            Topology::PeriodicTorus => (self.nx as f64 * self.hx, self.ny as f64 * self.hy),
            Topology::DirichletRectangle => (
                (self.nx - 1) as f64 * self.hx,
                (self.ny - 1) as f64 * self.hy,
            ),
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    pub fn is_rim(&self, i: usize, j: usize) -> bool {
        self.topology == Topology::DirichletRectangle
            && (i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1)
    }

    /// Evaluates `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        (0..self.node_count())
            .map(|k| {
                let (x, y) = self.coords(k);
                f(x, y)
            })
            .collect::<Vec<_>>()
            .into()
    }

    /// Orthogonal neighbours of node `(i, j)`; wrap-around on the torus.
    pub(crate) fn neighbours(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
        let (nx, ny) = (self.nx, self.ny);
        let periodic = self.topology == Topology::PeriodicTorus;
        let mut out = [(usize::MAX, usize::MAX); 4];
        let mut n = 0;
        let mut push = |p: Option<(usize, usize)>| {
            if let Some(p) = p {
                out[n] = p;
                n += 1;
            }
        };
        push(if i > 0 {
            Some((i - 1, j))
        } else if periodic {
            Some((nx - 1, j))
        } else {
            None
        });
        push(if i + 1 < nx {
            Some((i + 1, j))
        } else if periodic {
            Some((0, j))
        } else {
            None
        });
        push(if j > 0 {
            Some((i, j - 1))
        } else if periodic {
            Some((i, ny - 1))
        } else {
            None
        });
        push(if j + 1 < ny {
            Some((i, j + 1))
        } else if periodic {
            Some((i, 0))
        } else {
            None
        });
        out.into_iter().take(n)
    }
}

fn check_phi(phi: &ScalarField) -> Result<()> {
    for (k, p) in phi.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidGrid(format!("phi is not finite at node {k}")));
        }
        if p.abs() > PHI_GUARD {
            return Err(Error::InvalidGrid(format!(
                "|phi| = {} at node {k} exceeds the guard {PHI_GUARD}",
                p.abs()
            )));
        }
    }
    Ok(())
}

/// Interior nodes of the domain `D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainMask {
    interior: Vec<bool>,
}

impl DomainMask {
    /// Whole torus, or every non-rim node of a rectangle.
    pub fn full(grid: &ConformalGrid) -> Self {
        let interior = (0..grid.node_count())
            .map(|k| !grid.is_rim(k % grid.nx, k / grid.nx))
            .collect();
        Self { interior }
    }

    /// Sub-rectangle of a Dirichlet box given as coordinate fractions
    /// `[x0, x1, y0, y1]` of the box; nodes strictly inside are interior.
    pub fn rectangle(grid: &ConformalGrid, fractions: [f64; 4]) -> Result<Self> {
        if grid.topology != Topology::DirichletRectangle {
            return Err(Error::InvalidMask(
                "a rectangular sub-domain requires a Dirichlet rectangle grid".into(),
            ));
        }
        let [x0, x1, y0, y1] = fractions;
        let ok = |a: f64, b: f64| (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) && a < b;
        if !ok(x0, x1) || !ok(y0, y1) {
            return Err(Error::InvalidMask(format!(
                "fractions {fractions:?} must satisfy 0 <= lo < hi <= 1"
            )));
        }
        let (lx, ly) = grid.extent();
        let eps = 1e-12;
        Self::from_fn(grid, |x, y| {
            x > x0 * lx + eps * lx
                && x < x1 * lx - eps * lx
                && y > y0 * ly + eps * ly
                && y < y1 * ly - eps * ly
        })
    }

    /// Builds and validates a mask from a predicate on node coordinates.
    pub fn from_fn(grid: &ConformalGrid, inside: impl Fn(f64, f64) -> bool) -> Result<Self> {
        let interior = (0..grid.node_count())
            .map(|k| {
                let (x, y) = grid.coords(k);
                inside(x, y)
            })
            .collect();
        let mask = Self { interior };
        mask.validate(grid)?;
        Ok(mask)
    }

    pub fn validate(&self, grid: &ConformalGrid) -> Result<()> {
        if self.interior.len() != grid.node_count() {
            return Err(Error::InvalidMask(format!(
                "mask has {} nodes, grid has {}",
                self.interior.len(),
                grid.node_count()
            )));
        }
        match grid.topology {
            Topology::PeriodicTorus => {
                if !self.interior.iter().all(|&b| b) {
                    return Err(Error::InvalidMask(
                        "a periodic torus has no boundary; the mask must cover every node".into(),
                    ));
                }
            }
            Topology::DirichletRectangle => {
                for j in 0..grid.ny {
                    for i in 0..grid.nx {
                        if grid.is_rim(i, j) && self.interior[grid.idx(i, j)] {
                            return Err(Error::InvalidMask(format!(
                                "rim node ({i}, {j}) marked interior"
                            )));
                        }
                    }
                }
            }
        }
        if !self.is_connected(grid) {
            return Err(Error::InvalidMask("interior is not connected".into()));
        }
        Ok(())
    }

    fn is_connected(&self, grid: &ConformalGrid) -> bool {
        let Some(start) = self.interior.iter().position(|&b| b) else {
            return true;
        };
        let mut seen = vec![false; self.interior.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 1;
        while let Some(k) = queue.pop_front() {
            for (i, j) in grid.neighbours(k % grid.nx, k / grid.nx) {
                let m = grid.idx(i, j);
                if self.interior[m] && !seen[m] {
                    seen[m] = true;
                    reached += 1;
                    queue.push_back(m);
                }
            }
        }
        reached == self.count()
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.interior[k]
    }

    pub fn count(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.interior
    }

    /// Node indices of the interior in row-major order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        self.interior
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect()
    }

    /// Zeroes `u` outside the domain.
    pub fn restrict(&self, u: &ScalarField) -> ScalarField {
        u.iter()
            .zip(&self.interior)
            .map(|(&v, &inside)| if inside { v } else { 0.0 })
            .collect::<Vec<_>>()
            .into()
    }
}

/// Second difference along x at `(i, j)`, times `hx^2`. Uses a one-sided
/// second-order stencil on the rim of a rectangle.
fn second_diff_x(grid: &ConformalGrid, u: &[f64], i: usize, j: usize) -> f64 {
    let at = |i: usize| u[grid.idx(i, j)];
    second_diff(grid.nx, grid.topology, i, at)
}

fn second_diff_y(grid: &ConformalGrid, u: &[f64], i: usize, j: usize) -> f64 {
    let at = |j: usize| u[grid.idx(i, j)];
    second_diff(grid.ny, grid.topology, j, at)
}

fn second_diff(n: usize, topology: Topology, i: usize, at: impl Fn(usize) -> f64) -> f64 {
    let c = at(i);
    match topology {
        Topology::PeriodicTorus => {
            let prev = at((i + n - 1) % n);
            let next = at((i + 1) % n);
            (next - c) + (prev - c)
        }
        Topology::DirichletRectangle => {
            if i == 0 {
                // 2u0 - 5u1 + 4u2 - u3 in difference form
                2.0 * (c - at(1)) - 3.0 * (at(1) - at(2)) + (at(2) - at(3))
            } else if i == n - 1 {
                2.0 * (c - at(n - 2)) - 3.0 * (at(n - 2) - at(n - 3)) + (at(n - 3) - at(n - 4))
            } else {
                (at(i + 1) - c) + (at(i - 1) - c)
            }
        }
    }
}

/// Flat 5-point Laplacian `Delta_0 u` at every node, with one-sided stencils on
/// the rim of a rectangle.
pub fn flat_laplacian(grid: &ConformalGrid, u: &ScalarField) -> ScalarField {
    let (ihx2, ihy2) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));
    let mut out = Vec::with_capacity(grid.node_count());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            out.push(second_diff_x(grid, u, i, j) * ihx2 + second_diff_y(grid, u, i, j) * ihy2);
        }
    }
    out.into()
}

/// Scalar curvature `R = -2 e^{-2 phi} Delta_0 phi` (twice the Gauss curvature).
pub fn scalar_curvature(grid: &ConformalGrid) -> ScalarField {
    let lap = flat_laplacian(grid, &grid.phi);
    lap.iter()
        .zip(grid.phi.iter())
        // + 0.0 turns -0.0 into 0.0 on flat regions
        .map(|(l, p)| -2.0 * (-2.0 * p).exp() * l + 0.0)
        .collect::<Vec<_>>()
        .into()
}

/// Lumped quadrature weights `e^{2 phi} hx hy` for `integral . dv`.
pub fn volume_weights(grid: &ConformalGrid) -> ScalarField {
    let cell = grid.hx * grid.hy;
    grid.phi
        .iter()
        .map(|p| (2.0 * p).exp() * cell)
        .collect::<Vec<_>>()
        .into()
}

/// `Delta_g u = e^{-2 phi} Delta_0 u`. On a rectangle the rim entries are zero;
/// `u` is expected to vanish there.
pub fn laplace_beltrami_apply(grid: &ConformalGrid, u: &ScalarField) -> ScalarField {
    assert_eq!(u.len(), grid.node_count(), "field/grid size mismatch");
    let (ihx2, ihy2) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));
    let mut out = vec![0.0; grid.node_count()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_rim(i, j) {
                continue;
            }
            let k = grid.idx(i, j);
            let lap = second_diff_x(grid, u, i, j) * ihx2 + second_diff_y(grid, u, i, j) * ihy2;
            out[k] = (-2.0 * grid.phi[k]).exp() * lap;
        }
    }
    out.into()
}

/// `integral g^{ij} u_i v_j dv`, which in conformal 2-D form is the flat
/// Dirichlet form summed over grid edges.
pub fn dirichlet_energy(grid: &ConformalGrid, u: &ScalarField, v: &ScalarField) -> f64 {
    assert_eq!(u.len(), grid.node_count(), "field/grid size mismatch");
    assert_eq!(v.len(), grid.node_count(), "field/grid size mismatch");
    let periodic = grid.topology == Topology::PeriodicTorus;
    let (wx, wy) = (grid.hy / grid.hx, grid.hx / grid.hy);
    let mut sum = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            if i + 1 < grid.nx || periodic {
                let m = grid.idx((i + 1) % grid.nx, j);
                sum += wx * (u[m] - u[k]) * (v[m] - v[k]);
            }
            if j + 1 < grid.ny || periodic {
                let m = grid.idx(i, (j + 1) % grid.ny);
                sum += wy * (u[m] - u[k]) * (v[m] - v[k]);
            }
        }
    }
    sum
}

/// Centred first differences `(d/dx u, d/dy u)` at `(i, j)`; one-sided
/// second-order on the rim of a rectangle.
pub(crate) fn gradient_at(grid: &ConformalGrid, u: &[f64], i: usize, j: usize) -> (f64, f64) {
    let dx = first_diff(grid.nx, grid.topology, i, |i| u[grid.idx(i, j)]) / grid.hx;
    let dy = first_diff(grid.ny, grid.topology, j, |j| u[grid.idx(i, j)]) / grid.hy;
    (dx, dy)
}

fn first_diff(n: usize, topology: Topology, i: usize, at: impl Fn(usize) -> f64) -> f64 {
    match topology {
        Topology::PeriodicTorus => 0.5 * (at((i + 1) % n) - at((i + n - 1) % n)),
        Topology::DirichletRectangle => {
            if i == 0 {
                -1.5 * at(0) + 2.0 * at(1) - 0.5 * at(2)
            } else if i == n - 1 {
                1.5 * at(n - 1) - 2.0 * at(n - 2) + 0.5 * at(n - 3)
            } else {
                0.5 * (at(i + 1) - at(i - 1))
            }
        }
    }
}

/// Nodal gradient field of `u`.
pub fn gradient(grid: &ConformalGrid, u: &ScalarField) -> (ScalarField, ScalarField) {
    let mut gx = Vec::with_capacity(grid.node_count());
    let mut gy = Vec::with_capacity(grid.node_count());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (a, b) = gradient_at(grid, u, i, j);
            gx.push(a);
            gy.push(b);
        }
    }
    (gx.into(), gy.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bump_torus(n: usize, eps: f64) -> ConformalGrid {
        ConformalGrid::torus(n, n, 1.0, 1.0, |x, _| eps * (2.0 * PI * x).sin()).unwrap()
    }

    #[test]
    fn rejects_coarse_and_unbounded_grids() {
        assert!(matches!(
            ConformalGrid::torus(7, 16, 1.0, 1.0, |_, _| 0.0),
            Err(Error::InvalidGrid(_))
        ));
        assert!(ConformalGrid::torus(8, 8, 1.0, 1.0, |_, _| 51.0).is_err());
        assert!(ConformalGrid::torus(8, 8, 1.0, 1.0, |_, _| f64::NAN).is_err());
        assert!(ConformalGrid::new(
            8,
            8,
            0.0,
            0.1,
            Topology::PeriodicTorus,
            ScalarField::zeros(64),
            0.0
        )
        .is_err());
        assert!(ConformalGrid::torus(8, 8, 1.0, 1.0, |_, _| 50.0).is_ok());
    }

    #[test]
    fn flat_and_constant_metrics_have_zero_curvature() {
        for grid in [
            ConformalGrid::torus(16, 12, 1.0, 2.0, |_, _| 0.0).unwrap(),
            ConformalGrid::torus(16, 12, 1.0, 2.0, |_, _| 0.7).unwrap(),
            ConformalGrid::rectangle(16, 12, 1.0, 1.0, |_, _| -1.3).unwrap(),
        ] {
            assert!(scalar_curvature(&grid).iter().all(|&r| r == 0.0));
        }
    }

    #[test]
    fn curvature_of_sine_factor_matches_symbolic() {
        let eps = 0.05;
        let k = 2.0 * PI;
        let grid = bump_torus(128, eps);
        let r = scalar_curvature(&grid);
        let exact = grid.sample(|x, _| {
            let phi = eps * (k * x).sin();
            2.0 * eps * k * k * (k * x).sin() * (-2.0 * phi).exp()
        });
        let err = r.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // truncation ~ eps k^4 h^2 / 6
        assert!(err < 2e-3, "err = {err}");
    }

    #[test]
    fn one_sided_rim_curvature_is_second_order() {
        let phi = |x: f64, y: f64| 0.1 * (x * x - 0.5 * y * y * y + x * y);
        let lap = |_: f64, y: f64| 0.1 * (2.0 - 3.0 * y);
        let err_at = |cells: usize| {
            let grid = ConformalGrid::rectangle(cells, cells, 1.0, 1.0, phi).unwrap();
            let r = scalar_curvature(&grid);
            let exact = grid.sample(|x, y| -2.0 * (-2.0 * phi(x, y)).exp() * lap(x, y));
            r.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        // cubic data: the one-sided stencil is exact, central one too
        assert!(err_at(16) < 1e-9);
        let quartic = |x: f64, _y: f64| 0.1 * x.powi(4);
        let grid = ConformalGrid::rectangle(32, 32, 1.0, 1.0, quartic).unwrap();
        let r = scalar_curvature(&grid);
        let exact = grid.sample(|x, _| -2.0 * (-2.0 * quartic(x, 0.0)).exp() * 1.2 * x * x);
        let k = grid.idx(0, 5);
        assert!((r[k] - exact[k]).abs() < 0.05);
    }

    #[test]
    fn volume_weights_scale_with_conformal_factor() {
        let flat = ConformalGrid::rectangle(10, 10, 1.0, 1.0, |_, _| 0.0).unwrap();
        let w = volume_weights(&flat);
        assert!(w.iter().all(|&v| (v - 0.01).abs() < 1e-15));
        let doubled = ConformalGrid::rectangle(10, 10, 1.0, 1.0, |_, _| 0.5 * 2f64.ln()).unwrap();
        let w2 = volume_weights(&doubled);
        for (a, b) in w.iter().zip(w2.iter()) {
            assert!((b - 2.0 * a).abs() < 1e-15);
        }
    }

    #[test]
    fn torus_area_matches_quadrature_oracle() {
        // oracle: mean of exp(2 eps sin(2 pi s)) on [0, 1] by composite Simpson, 20001 points
        let eps = 0.3;
        let f = |s: f64| (2.0 * eps * (2.0 * PI * s).sin()).exp();
        let m = 20000;
        let h = 1.0 / m as f64;
        let mut acc = f(0.0) + f(1.0);
        for k in 1..m {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        let mean = acc * h / 3.0;
        let l = 2.0;
        let grid = ConformalGrid::torus(64, 64, l, l, |x, _| eps * (2.0 * PI * x / l).sin()).unwrap();
        let area: f64 = volume_weights(&grid).iter().sum();
        assert!((area - l * l * mean).abs() < 1e-10 * l * l, "{area} vs {}", l * l * mean);
    }

    #[test]
    fn laplace_beltrami_constants_and_fourier_modes() {
        let grid = ConformalGrid::torus(32, 32, 1.0, 1.0, |x, y| 0.1 * (x + 2.0 * y).cos()).unwrap();
        let one = ScalarField::new(vec![1.0; grid.node_count()]);
        assert!(laplace_beltrami_apply(&grid, &one).iter().all(|&v| v == 0.0));

        let l = 2.0;
        let k = 2.0 * PI / l;
        let eps = 0.2;
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| {
                let grid =
                    ConformalGrid::torus(n, n, l, l, |_, y| eps * (k * y).sin()).unwrap();
                let u = grid.sample(|x, _| (k * x).sin());
                let lu = laplace_beltrami_apply(&grid, &u);
                let exact =
                    grid.sample(|x, y| -(-2.0 * eps * (k * y).sin()).exp() * k * k * (k * x).sin());
                lu.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 2e-2 && errs[0] / errs[1] > 3.9, "{errs:?}");
    }

    #[test]
    fn dirichlet_energy_of_first_square_mode() {
        let ratio = |cells: usize| {
            let grid = ConformalGrid::rectangle(cells, cells, 1.0, 1.0, |_, _| 0.0).unwrap();
            let u = grid.sample(|x, y| (PI * x).sin() * (PI * y).sin());
            let w = volume_weights(&grid);
            dirichlet_energy(&grid, &u, &u) / u.weighted_dot(&u, &w)
        };
        let target = 2.0 * PI * PI;
        let (e1, e2) = ((ratio(32) - target).abs(), (ratio(64) - target).abs());
        assert!(e2 < 2e-2 && e1 / e2 > 3.9, "{e1} {e2}");
    }

    #[test]
    fn dirichlet_energy_is_conformally_invariant_and_kills_constants() {
        let grid = bump_torus(24, 0.3);
        let one = ScalarField::new(vec![1.0; grid.node_count()]);
        assert_eq!(dirichlet_energy(&grid, &one, &one), 0.0);
        let u = grid.sample(|x, y| (2.0 * PI * x).cos() + (2.0 * PI * y).sin());
        let v = grid.sample(|x, y| x * (1.0 - x) * (PI * y).sin());
        let shifted = grid.shifted(1.7).unwrap();
        assert_eq!(
            dirichlet_energy(&grid, &u, &v),
            dirichlet_energy(&shifted, &u, &v)
        );
    }

    #[test]
    fn curvature_scales_under_constant_shift() {
        let grid = bump_torus(32, 0.4);
        let c = 0.8;
        let r = scalar_curvature(&grid);
        let rs = scalar_curvature(&grid.shifted(c).unwrap());
        let scale = r.max_abs();
        for (a, b) in r.iter().zip(rs.iter()) {
            assert!((b - (-2.0 * c).exp() * a).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn masks_validate_topology_and_connectivity() {
        let rect = ConformalGrid::rectangle(20, 20, 1.0, 1.0, |_, _| 0.0).unwrap();
        let full = DomainMask::full(&rect);
        assert_eq!(full.count(), 19 * 19);
        let sub = DomainMask::rectangle(&rect, [0.25, 0.75, 0.25, 0.75]).unwrap();
        assert_eq!(sub.count(), 9 * 9);
        assert!(DomainMask::from_fn(&rect, |x, _| !(0.3..=0.7).contains(&x)).is_err());
        assert!(DomainMask::from_fn(&rect, |_, _| true).is_err());
        let torus = bump_torus(16, 0.1);
        assert!(DomainMask::from_fn(&torus, |x, _| x < 0.5).is_err());
        assert_eq!(DomainMask::full(&torus).count(), 256);
        assert!(DomainMask::rectangle(&torus, [0.1, 0.9, 0.1, 0.9]).is_err());
    }
}
