//! Closed-form Ricci-flow solutions.
//!
//! Every family here is homogeneous, so the scalar curvature is spatially
//! constant and the flow only rescales the metric factors:
//!
//! | family                  | scale at time t            | R(t)                 |
//! |-------------------------|----------------------------|----------------------|
//! | round `S^n`, radius r   | `r^2 = r0^2 - 2(n-1)t`     | `n(n-1)/r^2`         |
//! | hyperbolic, scale c     | `c = c0 + 2t`              | `-2/c`               |
//! | flat torus              | static                     | `0`                  |
//! | `S^2(a) x S^1(b)`       | `a^2 = a0^2 - 2t`, `b = b0`| `2/a^2`              |

use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelGeometry {
    RoundSphere { dim: usize, r0: f64 },
    /// Compact hyperbolic surface of curvature `-1/c0`. Its Laplace spectrum has
    /// no closed form, so the nonzero initial eigenvalues may be supplied.
    HyperbolicScaled { c0: f64, spectrum: Option<Vec<f64>> },
    FlatTorus { lx: f64, ly: f64 },
    SphereCircleProduct { a0: f64, b0: f64 },
}

/// Scale parameters of a model at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub t: f64,
    pub kind: StateKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateKind {
    RoundSphere { dim: usize, radius: f64 },
    HyperbolicScaled { scale: f64 },
    FlatTorus { lx: f64, ly: f64 },
    SphereCircleProduct { a: f64, b: f64 },
}

/// Extreme eigenvalues of `g^{-1} E` for the Einstein tensor `E = Ric - R/2 g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EinsteinBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl EinsteinBounds {
    /// Smallest `a >= 0` with `E >= -a g`.
    pub fn a_required(&self) -> f64 {
        (-self.lambda_min).max(0.0)
    }
}

/// A smooth eigenbranch of a model: the quantum numbers that identify a mode
/// independently of how the ladder is ordered at a given time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    /// Spherical harmonic degree `k`.
    Sphere { k: usize },
    /// Index into the supplied hyperbolic spectrum (0 is the constant mode).
    Hyperbolic { index: usize },
    /// Lattice mode `(p, q)` of the flat torus, `p, q >= 0`.
    Torus { p: usize, q: usize },
    /// Degree `l` on the sphere factor, frequency `m` on the circle.
    Product { l: usize, m: usize },
}

impl ModelGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Self::RoundSphere { dim, r0 } => {
                if *dim < 2 {
                    return Err(Error::InvalidModel(format!("sphere dimension {dim} < 2")));
                }
                positive("r0", *r0)
            }
            Self::HyperbolicScaled { c0, spectrum } => {
                positive("c0", *c0)?;
                if let Some(s) = spectrum {
                    if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        return Err(Error::InvalidModel(
                            "hyperbolic spectrum entries must be positive".into(),
                        ));
                    }
                    if s.windows(2).any(|w| w[1] < w[0]) {
                        return Err(Error::InvalidModel(
                            "hyperbolic spectrum must be sorted ascending".into(),
                        ));
                    }
                }
                Ok(())
            }
            Self::FlatTorus { lx, ly } => positive("lx", *lx).and(positive("ly", *ly)),
            Self::SphereCircleProduct { a0, b0 } => positive("a0", *a0).and(positive("b0", *b0)),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::RoundSphere { dim, .. } => *dim,
            Self::SphereCircleProduct { .. } => 3,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RoundSphere { .. } => "RoundSphere",
            Self::HyperbolicScaled { .. } => "HyperbolicScaled",
            Self::FlatTorus { .. } => "FlatTorus",
            Self::SphereCircleProduct { .. } => "SphereCircleProduct",
        }
    }

    /// Multiplies every initial length by `s` (the hyperbolic scale is an area).
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Self::RoundSphere { dim, r0 } => Self::RoundSphere {
                dim: *dim,
                r0: r0 * s,
            },
            Self::HyperbolicScaled { c0, spectrum } => Self::HyperbolicScaled {
                c0: c0 * s * s,
                spectrum: spectrum.as_ref().map(|v| v.iter().map(|l| l / (s * s)).collect()),
            },
            Self::FlatTorus { lx, ly } => Self::FlatTorus {
                lx: lx * s,
                ly: ly * s,
            },
            Self::SphereCircleProduct { a0, b0 } => Self::SphereCircleProduct {
                a0: a0 * s,
                b0: b0 * s,
            },
        }
    }
}

/// First time at which the closed-form solution degenerates.
pub fn maximal_time(model: &ModelGeometry) -> f64 {
    match model {
        ModelGeometry::RoundSphere { dim, r0 } => r0 * r0 / (2.0 * (*dim as f64 - 1.0)),
        ModelGeometry::SphereCircleProduct { a0, .. } => a0 * a0 / 2.0,
        ModelGeometry::HyperbolicScaled { .. } | ModelGeometry::FlatTorus { .. } => f64::INFINITY,
    }
}

fn check_time(model: &ModelGeometry, t: f64) -> Result<()> {
    let t_max = maximal_time(model);
    if t.is_finite() && t >= 0.0 && t < t_max {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange { t, t_max })
    }
}

/// Scale parameters of the model at time `t`.
pub fn advance_model(model: &ModelGeometry, t: f64) -> Result<ModelState> {
    check_time(model, t)?;
    let kind = match model {
        ModelGeometry::RoundSphere { dim, r0 } => StateKind::RoundSphere {
            dim: *dim,
            radius: (r0 * r0 - 2.0 * (*dim as f64 - 1.0) * t).sqrt(),
        },
        ModelGeometry::HyperbolicScaled { c0, .. } => StateKind::HyperbolicScaled {
            scale: c0 + 2.0 * t,
        },
        ModelGeometry::FlatTorus { lx, ly } => StateKind::FlatTorus { lx: *lx, ly: *ly },
        ModelGeometry::SphereCircleProduct { a0, b0 } => StateKind::SphereCircleProduct {
            a: (a0 * a0 - 2.0 * t).sqrt(),
            b: *b0,
        },
    };
    Ok(ModelState { t, kind })
}

/// Squared metric scale `r^2`, `c`, `a^2` (or 1 for the torus).
pub(crate) fn squared_scale(model: &ModelGeometry, t: f64) -> f64 {
    match model {
        ModelGeometry::RoundSphere { dim, r0 } => r0 * r0 - 2.0 * (*dim as f64 - 1.0) * t,
        ModelGeometry::HyperbolicScaled { c0, .. } => c0 + 2.0 * t,
        ModelGeometry::FlatTorus { .. } => 1.0,
        ModelGeometry::SphereCircleProduct { a0, .. } => a0 * a0 - 2.0 * t,
    }
}

pub fn model_scalar_curvature(model: &ModelGeometry, t: f64) -> Result<f64> {
    check_time(model, t)?;
    let s = squared_scale(model, t);
    Ok(match model {
        ModelGeometry::RoundSphere { dim, .. } => {
            let n = *dim as f64;
            n * (n - 1.0) / s
        }
        ModelGeometry::HyperbolicScaled { .. } => -2.0 / s,
        ModelGeometry::FlatTorus { .. } => 0.0,
        ModelGeometry::SphereCircleProduct { .. } => 2.0 / s,
    })
}

pub fn model_einstein_bounds(model: &ModelGeometry, t: f64) -> Result<EinsteinBounds> {
    check_time(model, t)?;
    let s = squared_scale(model, t);
    Ok(match model {
        ModelGeometry::RoundSphere { dim, .. } => {
            let n = *dim as f64;
            // + 0.0 normalises -0.0 for n = 2
            let e = -(n - 1.0) * (n - 2.0) / (2.0 * s) + 0.0;
            EinsteinBounds {
                lambda_min: e,
                lambda_max: e,
            }
        }
        ModelGeometry::SphereCircleProduct { .. } => EinsteinBounds {
            lambda_min: -1.0 / s,
            lambda_max: 0.0,
        },
        _ => EinsteinBounds {
            lambda_min: 0.0,
            lambda_max: 0.0,
        },
    })
}

/// Ricci eigenvalues of `g^{-1} Ric` in the relevant blocks, used by the
/// variation identities: `(sphere-block, circle-block)`.
pub(crate) fn ricci_eigenvalues(model: &ModelGeometry, t: f64) -> Result<(f64, f64)> {
    check_time(model, t)?;
    let s = squared_scale(model, t);
    Ok(match model {
        ModelGeometry::RoundSphere { dim, .. } => {
            let v = (*dim as f64 - 1.0) / s;
            (v, v)
        }
        ModelGeometry::HyperbolicScaled { .. } => (-1.0 / s, -1.0 / s),
        ModelGeometry::FlatTorus { .. } => (0.0, 0.0),
        ModelGeometry::SphereCircleProduct { .. } => (1.0 / s, 0.0),
    })
}

/// Resolves a ladder index at time `t` to the branch occupying it.
///
/// Index 0 is the constant mode. For the sphere and hyperbolic families the
/// ladder is ordered by the degree / supplied spectrum; for the flat torus it
/// runs over distinct nonzero lattice eigenvalues; for the product family it
/// runs over `(l, m)` pairs sorted by eigenvalue at `t`, ties broken by `(l, m)`.
pub fn branch_at(model: &ModelGeometry, mode: usize, t: f64) -> Result<Branch> {
    check_time(model, t)?;
    match model {
        ModelGeometry::RoundSphere { .. } => Ok(Branch::Sphere { k: mode }),
        ModelGeometry::HyperbolicScaled { spectrum, .. } => {
            let known = spectrum.as_ref().map_or(0, |s| s.len());
            if mode > 0 && mode > known {
                return Err(Error::UnknownSpectrum { mode });
            }
            Ok(Branch::Hyperbolic { index: mode })
        }
        ModelGeometry::FlatTorus { lx, ly } => Ok(torus_ladder(*lx, *ly, mode)),
        ModelGeometry::SphereCircleProduct { .. } => {
            let (l, m) = product_ladder(model, t, mode + 1)[mode];
            Ok(Branch::Product { l, m })
        }
    }
}

fn torus_value(lx: f64, ly: f64, p: usize, q: usize) -> f64 {
    let (a, b) = (2.0 * PI * p as f64 / lx, 2.0 * PI * q as f64 / ly);
    a * a + b * b
}

/// Representative lattice mode of the `mode`-th distinct torus eigenvalue.
fn torus_ladder(lx: f64, ly: f64, mode: usize) -> Branch {
    if mode == 0 {
        return Branch::Torus { p: 0, q: 0 };
    }
    let mut bound = 1usize;
    loop {
        let mut entries: Vec<(f64, usize, usize)> = (0..=bound)
            .flat_map(|p| (0..=bound).map(move |q| (p, q)))
            .filter(|&(p, q)| p + q > 0)
            .map(|(p, q)| (torus_value(lx, ly, p, q), p, q))
            .collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        // every lattice point with value below the cutoff is present
        let cutoff = torus_value(lx, ly, bound + 1, 0).min(torus_value(lx, ly, 0, bound + 1));
        let mut distinct: Vec<(f64, usize, usize)> = Vec::new();
        for e in entries.into_iter().filter(|e| e.0 < cutoff) {
            match distinct.last() {
                Some(last) if (e.0 - last.0).abs() <= 1e-12 * e.0 => {}
                _ => distinct.push(e),
            }
        }
        if distinct.len() >= mode {
            let (_, p, q) = distinct[mode - 1];
            return Branch::Torus { p, q };
        }
        bound *= 2;
    }
}

/// First `count` product modes `(l, m)` sorted by eigenvalue at `t`.
pub fn product_ladder(model: &ModelGeometry, t: f64, count: usize) -> Vec<(usize, usize)> {
    let ModelGeometry::SphereCircleProduct { b0, .. } = model else {
        return Vec::new();
    };
    let a2 = squared_scale(model, t);
    let value = |l: usize, m: usize| (l * (l + 1)) as f64 / a2 + (m * m) as f64 / (b0 * b0);
    let mut cutoff = value(1, 0).max(value(0, 1));
    loop {
        let mut pairs = Vec::new();
        let mut l = 0;
        while value(l, 0) <= cutoff {
            let mut m = 0;
            while value(l, m) <= cutoff {
                pairs.push((l, m));
                m += 1;
            }
            l += 1;
        }
        if pairs.len() >= count {
            pairs.sort_by(|x, y| {
                value(x.0, x.1)
                    .partial_cmp(&value(y.0, y.1))
                    .unwrap_or(Ordering::Equal)
                    .then(x.cmp(y))
            });
            pairs.truncate(count);
            return pairs;
        }
        cutoff *= 2.0;
    }
}

/// Eigenvalue of a fixed branch at time `t`.
pub fn branch_eigenvalue(model: &ModelGeometry, branch: Branch, t: f64) -> Result<f64> {
    check_time(model, t)?;
    closed_form_eigenvalue(model, branch, t)
}

/// The closed-form eigenvalue wherever the formula is defined, including the
/// backward continuation `t < 0` (used by finite-difference oracles at `t = 0`).
pub fn closed_form_eigenvalue(model: &ModelGeometry, branch: Branch, t: f64) -> Result<f64> {
    let s = squared_scale(model, t);
    if !(s > 0.0) {
        return Err(Error::TimeOutOfRange {
            t,
            t_max: maximal_time(model),
        });
    }
    match (model, branch) {
        (ModelGeometry::RoundSphere { dim, .. }, Branch::Sphere { k }) => {
            Ok((k * (k + dim - 1)) as f64 / s)
        }
        (ModelGeometry::HyperbolicScaled { c0, spectrum }, Branch::Hyperbolic { index }) => {
            if index == 0 {
                return Ok(0.0);
            }
            let lambda0 = spectrum
                .as_ref()
                .and_then(|sp| sp.get(index - 1))
                .ok_or(Error::UnknownSpectrum { mode: index })?;
            Ok(lambda0 * c0 / s)
        }
        (ModelGeometry::FlatTorus { lx, ly }, Branch::Torus { p, q }) => {
            Ok(torus_value(*lx, *ly, p, q))
        }
        (ModelGeometry::SphereCircleProduct { b0, .. }, Branch::Product { l, m }) => {
            Ok((l * (l + 1)) as f64 / s + (m * m) as f64 / (b0 * b0))
        }
        _ => Err(Error::InvalidArgument(format!(
            "branch {branch:?} does not belong to {}",
            model.name()
        ))),
    }
}

/// Closed-form `integral E_ij f^i f^j dv` for a normalised eigenfunction of `branch`.
pub fn einstein_term(model: &ModelGeometry, branch: Branch, t: f64) -> Result<f64> {
    let bounds = model_einstein_bounds(model, t)?;
    let mu = branch_eigenvalue(model, branch, t)?;
    match (model, branch) {
        // E = e g with constant e: integral E(df, df) = e * integral |df|^2 = e * mu
        (ModelGeometry::RoundSphere { .. }, _) => Ok(bounds.lambda_min * mu),
        // only the circle derivative feels E = -1/a^2 there
        (ModelGeometry::SphereCircleProduct { b0, .. }, Branch::Product { m, .. }) => {
            Ok(bounds.lambda_min * (m * m) as f64 / (b0 * b0))
        }
        _ => Ok(0.0),
    }
}

/// `d mu / dt = mu R + 2 integral E_ij f^i f^j` evaluated in closed form.
pub fn branch_rate_prediction(model: &ModelGeometry, branch: Branch, t: f64) -> Result<f64> {
    let r = model_scalar_curvature(model, t)?;
    let mu = branch_eigenvalue(model, branch, t)?;
    let e = einstein_term(model, branch, t)?;
    Ok(crate::monotonicity::predicted_rate_general(r, e, mu))
}

pub fn model_eigenvalue(model: &ModelGeometry, mode: usize, t: f64) -> Result<f64> {
    let branch = branch_at(model, mode, t)?;
    branch_eigenvalue(model, branch, t)
}

pub fn model_rate_prediction(model: &ModelGeometry, mode: usize, t: f64) -> Result<f64> {
    let branch = branch_at(model, mode, t)?;
    branch_rate_prediction(model, branch, t)
}
