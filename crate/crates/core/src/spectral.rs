//! Discrete Laplace-Beltrami eigenproblem `A f = mu M f`.
//!
//! `A` is the flat 5-point stiffness `hx hy (-Delta_0)` restricted to the
//! interior nodes of the domain and `M = diag(e^{2 phi} hx hy)` is the lumped
//! mass, so every metric dependence of the 2-D problem lives in `M`.
//!
//! The smallest eigenpairs come from shift-and-invert subspace iteration with
//! Rayleigh-Ritz projection in the `M` inner product. Converged Ritz pairs are
//! locked and deflated from the active block; the optional mean-zero
//! constraint keeps every iterate `M`-orthogonal to the constants.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{volume_weights, ConformalGrid, DomainMask, ScalarField};
use crate::linalg::{SkylineCholesky, SparseSym};

/// Largest number of eigenpairs a single solve may request.
pub const MAX_COUNT: usize = 20;
pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-4;

/// Relative gap under which neighbouring eigenvalues form a cluster.
pub const CLUSTER_REL_GAP: f64 = 1e-6;

/// Overlap margin below which mode tracking is reported as ambiguous.
pub const AMBIGUITY_MARGIN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    None,
    MeanZero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub mu: f64,
    /// Eigenfunction on all grid nodes, zero outside the domain,
    /// normalised by `sum f^2 dv = 1`.
    pub f: ScalarField,
    pub residual: f64,
    pub mode_index: usize,
}

#[derive(Clone, Debug)]
pub struct OperatorPair {
    stiffness: SparseSym,
    mass: Vec<f64>,
    nodes: Vec<usize>,
    node_count: usize,
}

impl OperatorPair {
    pub fn stiffness(&self) -> &SparseSym {
        &self.stiffness
    }
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
    /// Grid node of each unknown.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Restricts a grid field to the unknowns.
    pub fn gather(&self, u: &ScalarField) -> Vec<f64> {
        self.nodes.iter().map(|&k| u[k]).collect()
    }

    /// Expands unknowns to a grid field, zero elsewhere.
    pub fn scatter(&self, x: &[f64]) -> ScalarField {
        let mut out = vec![0.0; self.node_count];
        for (&k, &v) in self.nodes.iter().zip(x) {
            out[k] = v;
        }
        out.into()
    }

    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        self.stiffness.bilinear(x, x) / m_dot(&self.mass, x, x)
    }

    /// `||A x - mu M x|| / ||M x||`.
    pub fn residual(&self, x: &[f64], mu: f64) -> f64 {
        let ax = self.stiffness.mul(x);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..x.len() {
            let mx = self.mass[i] * x[i];
            num += (ax[i] - mu * mx).powi(2);
            den += mx * mx;
        }
        (num / den).sqrt()
    }
}

/// Assembles the generalized problem on the interior of `mask`.
pub fn assemble(grid: &ConformalGrid, mask: &DomainMask) -> Result<OperatorPair> {
    mask.validate(grid)?;
    let nodes = mask.interior_nodes();
    if nodes.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let mut unknown = vec![usize::MAX; grid.node_count()];
    for (r, &k) in nodes.iter().enumerate() {
        unknown[k] = r;
    }
    let (wx, wy) = (grid.hy() / grid.hx(), grid.hx() / grid.hy());
    let nx = grid.nx();
    let rows = nodes
        .iter()
        .map(|&k| {
            let (i, j) = (k % nx, k / nx);
            let mut row = Vec::with_capacity(5);
            let mut diag = 0.0;
            for (ni, nj) in grid.neighbours(i, j) {
                let w = if nj == j { wx } else { wy };
                diag += w;
                let m = unknown[grid.idx(ni, nj)];
                if m != usize::MAX {
                    row.push((m, -w));
                }
            }
            row.push((unknown[k], diag));
            row
        })
        .collect();
    let weights = volume_weights(grid);
    Ok(OperatorPair {
        stiffness: SparseSym::from_rows(rows),
        mass: nodes.iter().map(|&k| weights[k]).collect(),
        nodes,
        node_count: grid.node_count(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 400,
            guard: 4,
            seed: 0x5eed_1a2b,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenSolution {
    pub pairs: Vec<EigenPair>,
    /// Lowest Ritz value of the unconverged remainder of the block.
    pub next_ritz: Option<f64>,
    pub iterations: usize,
}

/// The `count` smallest eigenpairs in ascending order.
pub fn smallest_eigenpairs(
    ops: &OperatorPair,
    count: usize,
    tol: f64,
    constraint: Constraint,
) -> Result<Vec<EigenPair>> {
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    solve(ops, count, &opts, constraint).map(|s| s.pairs)
}

fn m_dot(m: &[f64], x: &[f64], y: &[f64]) -> f64 {
    m.iter().zip(x).zip(y).map(|((m, a), b)| m * a * b).sum()
}

/// `x -= (x, y)_M y` for an `M`-normalised `y`.
fn m_project_out(m: &[f64], x: &mut [f64], y: &[f64]) {
    let c = m_dot(m, x, y);
    for (xi, yi) in x.iter_mut().zip(y) {
        *xi -= c * yi;
    }
}

fn m_normalise(m: &[f64], x: &mut [f64]) -> f64 {
    let norm = m_dot(m, x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

struct Deflation<'a> {
    mass: &'a [f64],
    fixed: Vec<Vec<f64>>,
}

impl Deflation<'_> {
    fn apply(&self, x: &mut [f64]) {
        for _ in 0..2 {
            for y in &self.fixed {
                m_project_out(self.mass, x, y);
            }
        }
    }
}

pub fn solve(
    ops: &OperatorPair,
    count: usize,
    opts: &SolverOptions,
    constraint: Constraint,
) -> Result<EigenSolution> {
    if count == 0 || count > MAX_COUNT {
        return Err(Error::InvalidArgument(format!(
            "eigenpair count {count} outside 1..={MAX_COUNT}"
        )));
    }
    if !(MIN_TOL..=MAX_TOL).contains(&opts.tol) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]",
            opts.tol
        )));
    }
    let n = ops.dim();
    let mass = &ops.mass;
    let mut deflation = Deflation {
        mass,
        fixed: Vec::new(),
    };
    if constraint == Constraint::MeanZero {
        let mut one = vec![1.0; n];
        m_normalise(mass, &mut one);
        deflation.fixed.push(one);
    }
    let available = n - deflation.fixed.len();
    if count > available {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenpairs from a problem with {available} admissible dimensions"
        )));
    }
    let block = (count + opts.guard).min(available);

    let factor = shift_invert_factor(ops)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    };

    let mut active: Vec<Vec<f64>> = (0..block).map(|_| random_vec(&mut rng)).collect();
    let mut locked: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let mut last_residual = f64::INFINITY;
    let mut rhs = vec![0.0; n];

    for iter in 1..=opts.max_iter {
        // w = (A - sigma M)^{-1} M v
        for v in active.iter_mut() {
            for i in 0..n {
                rhs[i] = mass[i] * v[i];
            }
            factor.solve_in_place(&mut rhs);
            v.copy_from_slice(&rhs);
        }
        orthonormalise(&deflation, &mut active, &mut rng, &mut random_vec);

        let width = active.len();
        let mut h = DMatrix::<f64>::zeros(width, width);
        let av: Vec<Vec<f64>> = active.iter().map(|v| ops.stiffness.mul(v)).collect();
        for a in 0..width {
            for b in a..width {
                let val: f64 = active[a].iter().zip(&av[b]).map(|(x, y)| x * y).sum();
                h[(a, b)] = val;
                h[(b, a)] = val;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..width).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut ritz: Vec<(f64, Vec<f64>)> = order
            .iter()
            .map(|&c| {
                let mut x = vec![0.0; n];
                for (r, v) in active.iter().enumerate() {
                    let coef = eig.eigenvectors[(r, c)];
                    for i in 0..n {
                        x[i] += coef * v[i];
                    }
                }
                (eig.eigenvalues[c], x)
            })
            .collect();

        let mut newly_locked = 0;
        for (theta, x) in ritz.iter() {
            if locked.len() >= count {
                break;
            }
            let res = ops.residual(x, *theta);
            if res <= opts.tol {
                locked.push((*theta, x.clone(), res));
                newly_locked += 1;
            } else {
                last_residual = res;
                break;
            }
        }
        for (_, x, _) in locked.iter().skip(locked.len() - newly_locked) {
            let mut y = x.clone();
            m_normalise(mass, &mut y);
            deflation.fixed.push(y);
        }

        if locked.len() >= count {
            let next_ritz = ritz.get(newly_locked).map(|r| r.0);
            return Ok(EigenSolution {
                pairs: finish(ops, locked),
                next_ritz,
                iterations: iter,
            });
        }

        let remaining = ritz.split_off(newly_locked);
        active = remaining.into_iter().map(|r| r.1).collect();
        let target = (block - locked.len()).min(available - locked.len());
        while active.len() < target {
            active.push(random_vec(&mut rng));
        }
        active.truncate(target);
    }
    Err(Error::NoConvergence {
        mode_index: locked.len(),
        iterations: opts.max_iter,
        residual: last_residual,
    })
}

fn orthonormalise(
    deflation: &Deflation<'_>,
    block: &mut [Vec<f64>],
    rng: &mut ChaCha8Rng,
    random_vec: &mut impl FnMut(&mut ChaCha8Rng) -> Vec<f64>,
) {
    let mass = deflation.mass;
    for a in 0..block.len() {
        let mut attempts = 0;
        loop {
            let before = m_dot(mass, &block[a], &block[a]).sqrt();
            let (done, rest) = block.split_at_mut(a);
            let x = &mut rest[0];
            deflation.apply(x);
            for _ in 0..2 {
                for y in done.iter() {
                    m_project_out(mass, x, y);
                }
            }
            let after = m_normalise(mass, x);
            if after > 1e-10 * before && after.is_finite() {
                break;
            }
            attempts += 1;
            assert!(attempts < 8, "cannot extend the search block");
            *x = random_vec(rng);
        }
    }
}

fn shift_invert_factor(ops: &OperatorPair) -> Result<SkylineCholesky> {
    const PIVOT_TOL: f64 = 1e-10;
    if let Ok(f) = SkylineCholesky::factor(&ops.stiffness, None, PIVOT_TOL) {
        return Ok(f);
    }
    // singular stiffness (closed torus): invert A + delta M instead
    let diag = ops.stiffness.diag();
    let mean_ratio =
        diag.iter().zip(&ops.mass).map(|(a, m)| a / m).sum::<f64>() / diag.len() as f64;
    let delta = 1e-4 * mean_ratio;
    SkylineCholesky::factor(&ops.stiffness, Some((delta, &ops.mass)), PIVOT_TOL).map_err(|e| {
        Error::InvalidArgument(format!(
            "stiffness is not positive semi-definite (pivot {} at row {})",
            e.pivot, e.row
        ))
    })
}

fn finish(ops: &OperatorPair, mut locked: Vec<(f64, Vec<f64>, f64)>) -> Vec<EigenPair> {
    locked.sort_by(|a, b| a.0.total_cmp(&b.0));
    locked
        .into_iter()
        .enumerate()
        .map(|(index, (_, mut x, _))| {
            m_normalise(&ops.mass, &mut x);
            // deterministic sign: largest entry positive
            let (mut best, mut arg) = (0.0_f64, 0);
            for (i, v) in x.iter().enumerate() {
                if v.abs() > best * (1.0 + 1e-12) {
                    best = v.abs();
                    arg = i;
                }
            }
            if x[arg] < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            let mu = ops.rayleigh_quotient(&x);
            EigenPair {
                mu,
                residual: ops.residual(&x, mu),
                f: ops.scatter(&x),
                mode_index: index,
            }
        })
        .collect()
}

/// Maximal runs of consecutive pairs whose eigenvalue gaps are below
/// `CLUSTER_REL_GAP * mu`, as index ranges into `pairs`.
pub fn clusters(pairs: &[EigenPair]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut begin = 0;
    for i in 1..=pairs.len() {
        let split = i == pairs.len() || {
            let (a, b) = (pairs[i - 1].mu, pairs[i].mu);
            (b - a).abs() >= CLUSTER_REL_GAP * a.abs().max(b.abs())
        };
        if split {
            out.push(begin..i);
            begin = i;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tracked {
    pub pair: EigenPair,
    /// Index of the chosen candidate.
    pub candidate: usize,
    /// `|<f_prev, M f>|` of the chosen candidate.
    pub overlap: f64,
    /// Runner-up overlap when it lies within the ambiguity margin.
    pub ambiguous_with: Option<(usize, f64)>,
}

/// Continues an eigenbranch by maximal mass-weighted overlap.
///
/// `weights` are the volume weights of the metric the candidates were solved on.
pub fn track_mode(prev: &EigenPair, candidates: &[EigenPair], weights: &ScalarField) -> Result<Tracked> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to track".into()));
    }
    let overlaps: Vec<f64> = candidates
        .iter()
        .map(|c| {
            if c.f.len() != prev.f.len() {
                return Err(Error::InvalidArgument(
                    "candidate and previous eigenfunction sizes differ".into(),
                ));
            }
            Ok(prev.f.weighted_dot(&c.f, weights))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| overlaps[b].abs().total_cmp(&overlaps[a].abs()).then(a.cmp(&b)));
    let best = order[0];
    let ambiguous_with = order.get(1).and_then(|&second| {
        (overlaps[best].abs() - overlaps[second].abs() < AMBIGUITY_MARGIN)
            .then_some((second, overlaps[second].abs()))
    });
    let mut pair = candidates[best].clone();
    if overlaps[best] < 0.0 {
        pair.f.iter_mut().for_each(|v| *v = -*v);
    }
    pair.mode_index = prev.mode_index;
    Ok(Tracked {
        pair,
        candidate: best,
        overlap: overlaps[best].abs(),
        ambiguous_with,
    })
}
