//! Scenario configuration, read from TOML with dotted keys (`flow.dt = 1e-5`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::catalog::PhiExpr;
use crate::error::{Error, Result};
use crate::geometry::Topology;
use crate::models::ModelGeometry;

/// Every check a scenario may request, in report order.
pub const ALL_CHECKS: [&str; 9] = [
    "rate2d",
    "rate_general",
    "prop1",
    "main_theorem",
    "eq5",
    "inverse_metric",
    "eq6",
    "eq7",
    "bianchi",
];

pub const CHECK_DESCRIPTIONS: [(&str, &str); 9] = [
    ("rate2d", "mu' = mu int R f^2 dv on surfaces, predicted against observed"),
    ("rate_general", "mu' = mu R + 2 int E(df, df) on closed model geometries"),
    ("prop1", "exponential eigenvalue bounds under signed curvature"),
    ("main_theorem", "mu non-decreasing when E >= -a g and R >= 2a"),
    ("eq5", "d/dt dv = -R dv"),
    ("inverse_metric", "d/dt g^{ij} = 2 R^{ij}"),
    ("eq6", "integrated Laplacian variation chain"),
    ("eq7", "Delta' u = 2 R^{ij} u_ij (R Delta u on surfaces)"),
    ("bianchi", "contracted Bianchi identity 2 R_{ij;j} = R_i"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Grid,
    Model,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub name: Option<String>,
    pub lane: Lane,
    #[serde(default)]
    pub geometry: RawGeometry,
    #[serde(default)]
    pub grid: RawGrid,
    #[serde(default)]
    pub domain: RawDomain,
    #[serde(default)]
    pub flow: RawFlow,
    #[serde(default)]
    pub spectral: RawSpectral,
    #[serde(default)]
    pub checks: RawChecks,
    #[serde(default)]
    pub output: RawOutput,
    #[serde(default)]
    pub refine: RawRefine,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGeometry {
    pub family: Option<String>,
    pub dim: Option<usize>,
    pub r0: Option<f64>,
    pub c0: Option<f64>,
    pub spectrum: Option<Vec<f64>>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub topology: Option<String>,
    pub n: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
    pub phi: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDomain {
    pub rect: Option<[f64; 4]>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFlow {
    pub dt: Option<f64>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub stride: Option<usize>,
    pub safety: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpectral {
    pub modes: Option<usize>,
    pub tol: Option<f64>,
    pub extra: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChecks {
    pub run: Option<Vec<String>>,
    #[serde(default)]
    pub tol: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRefine {
    pub levels: Option<usize>,
}

/// Grid-lane setup.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub topology: Topology,
    /// Nodes per side on the torus, cells per side on the rectangle.
    pub n: (usize, usize),
    pub extent: (f64, f64),
    pub phi: PhiExpr,
    /// Dirichlet domain as fractions `[x0, x1, y0, y1]`; `None` is the full interior.
    pub rect: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LaneSpec {
    Grid(GridSpec),
    Model(ModelGeometry),
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub lane: LaneSpec,
    pub dt: Option<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub stride: Option<usize>,
    pub safety: f64,
    /// Sample times on the model lane.
    pub samples: usize,
    pub modes: usize,
    pub extra: usize,
    pub spectral_tol: f64,
    pub checks: Vec<String>,
    pub tol_overrides: BTreeMap<String, f64>,
    pub output_dir: PathBuf,
    pub refine_levels: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} = {v} must be positive and finite")))
    }
}

fn unused<T>(name: &str, v: &Option<T>, lane: &str) -> Result<()> {
    match v {
        Some(_) => Err(invalid(format!("{name} does not apply to the {lane} lane"))),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into());
        }
        Ok(cfg)
    }

    pub fn from_raw(raw: RawScenario) -> Result<Self> {
        let lane = match raw.lane {
            Lane::Grid => {
                if raw.geometry != RawGeometry::default() {
                    return Err(invalid("geometry.* keys do not apply to the grid lane"));
                }
                LaneSpec::Grid(grid_spec(&raw.grid, &raw.domain)?)
            }
            Lane::Model => {
                if raw.grid != RawGrid::default() {
                    return Err(invalid("grid.* keys do not apply to the model lane"));
                }
                unused("domain.rect", &raw.domain.rect, "model")?;
                unused("flow.dt", &raw.flow.dt, "model")?;
                unused("flow.stride", &raw.flow.stride, "model")?;
                unused("flow.safety", &raw.flow.safety, "model")?;
                LaneSpec::Model(model_spec(&raw.geometry)?)
            }
        };
        let is_grid = matches!(lane, LaneSpec::Grid(_));
        if is_grid {
            unused("flow.t_start", &raw.flow.t_start, "grid")?;
            unused("flow.samples", &raw.flow.samples, "grid")?;
        }

        let f = &raw.flow;
        let t_start = f.t_start.unwrap_or(0.0);
        if !(t_start >= 0.0 && t_start.is_finite()) {
            return Err(invalid(format!("flow.t_start = {t_start} must be nonnegative")));
        }
        let t_end = f.t_end.ok_or_else(|| invalid("flow.t_end is required"))?;
        if !(t_end > t_start && t_end.is_finite()) {
            return Err(invalid(format!("flow.t_end = {t_end} must exceed flow.t_start = {t_start}")));
        }
        let dt = match (is_grid, f.dt) {
            (true, Some(dt)) => Some(positive("flow.dt", dt)?),
            (true, None) => return Err(invalid("flow.dt is required on the grid lane")),
            (false, _) => None,
        };
        if f.stride == Some(0) {
            return Err(invalid("flow.stride must be positive"));
        }
        let safety = f.safety.unwrap_or(crate::flow::DEFAULT_SAFETY);
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(invalid(format!("flow.safety = {safety} must lie in (0, 1]")));
        }
        let samples = f.samples.unwrap_or(51);
        if samples < 3 {
            return Err(invalid("flow.samples must be at least 3"));
        }

        let s = &raw.spectral;
        let modes = s.modes.unwrap_or(1);
        let extra = s.extra.unwrap_or(1);
        if modes == 0 || modes + extra > crate::spectral::MAX_COUNT {
            return Err(invalid(format!(
                "spectral.modes + spectral.extra must lie in 1..={}",
                crate::spectral::MAX_COUNT
            )));
        }
        let spectral_tol = s.tol.unwrap_or(1e-9);
        if !(crate::spectral::MIN_TOL..=crate::spectral::MAX_TOL).contains(&spectral_tol) {
            return Err(invalid(format!(
                "spectral.tol = {spectral_tol} outside [{:e}, {:e}]",
                crate::spectral::MIN_TOL,
                crate::spectral::MAX_TOL
            )));
        }

        let checks = raw.checks.run.clone().unwrap_or_else(|| default_checks(is_grid));
        if checks.is_empty() {
            return Err(invalid("checks.run must name at least one check"));
        }
        for c in checks.iter().chain(raw.checks.tol.keys()) {
            if !ALL_CHECKS.contains(&c.as_str()) {
                return Err(invalid(format!("unknown check {c:?} (see `rsl catalog`)")));
            }
        }
        let mut seen = Vec::new();
        for c in &checks {
            if seen.contains(c) {
                return Err(invalid(format!("check {c:?} listed twice")));
            }
            seen.push(c.clone());
        }
        for (c, &t) in &raw.checks.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(format!("checks.tol.{c} = {t} must be nonnegative")));
            }
        }
        if let Some(levels) = raw.refine.levels {
            validate_levels(levels)?;
        }
        Ok(Self {
            name: raw.name.unwrap_or_default(),
            lane,
            dt,
            t_start,
            t_end,
            stride: f.stride,
            safety,
            samples,
            modes,
            extra,
            spectral_tol,
            checks,
            tol_overrides: raw.checks.tol,
            output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from(".")),
            refine_levels: raw.refine.levels,
        })
    }

    pub fn tolerance(&self, check: &str, default: f64) -> f64 {
        self.tol_overrides.get(check).copied().unwrap_or(default)
    }
}

pub fn validate_levels(levels: usize) -> Result<()> {
    if (2..=4).contains(&levels) {
        Ok(())
    } else {
        Err(invalid(format!(
            "refinement needs 2 to 4 levels (an order needs at least two), got {levels}"
        )))
    }
}

fn default_checks(grid: bool) -> Vec<String> {
    let list: &[&str] = if grid {
        &["rate2d", "eq5", "inverse_metric", "eq6", "eq7", "bianchi"]
    } else {
        &["rate_general", "eq5", "inverse_metric", "eq6", "eq7", "bianchi"]
    };
    list.iter().map(|s| s.to_string()).collect()
}

fn grid_spec(g: &RawGrid, d: &RawDomain) -> Result<GridSpec> {
    let topology = match g.topology.as_deref() {
        Some("torus") => Topology::PeriodicTorus,
        Some("rectangle") => Topology::DirichletRectangle,
        Some(other) => return Err(invalid(format!("grid.topology {other:?} (expected torus or rectangle)"))),
        None => return Err(invalid("grid.topology is required")),
    };
    let n = match (g.n, g.nx, g.ny) {
        (Some(n), None, None) => (n, n),
        (None, Some(nx), Some(ny)) => (nx, ny),
        (None, None, None) => return Err(invalid("grid.n (or grid.nx and grid.ny) is required")),
        _ => return Err(invalid("give either grid.n or both grid.nx and grid.ny")),
    };
    let extent = (
        positive("grid.lx", g.lx.unwrap_or(1.0))?,
        positive("grid.ly", g.ly.unwrap_or(1.0))?,
    );
    let phi = PhiExpr::parse(g.phi.as_deref().unwrap_or("flat"))?;
    if let Some(r) = d.rect {
        if topology != Topology::DirichletRectangle {
            return Err(invalid("domain.rect needs grid.topology = \"rectangle\""));
        }
        if !(0.0 <= r[0] && r[0] < r[1] && r[1] <= 1.0 && 0.0 <= r[2] && r[2] < r[3] && r[3] <= 1.0) {
            return Err(invalid(format!("domain.rect {r:?} must be increasing fractions in [0, 1]")));
        }
    }
    Ok(GridSpec {
        topology,
        n,
        extent,
        phi,
        rect: d.rect,
    })
}

fn model_spec(g: &RawGeometry) -> Result<ModelGeometry> {
    let family = g.family.as_deref().ok_or_else(|| invalid("geometry.family is required"))?;
    let allowed: &[&str] = match family {
        "RoundSphere" => &["dim", "r0"],
        "HyperbolicScaled" => &["c0", "spectrum"],
        "FlatTorus" => &["lx", "ly"],
        "SphereCircleProduct" => &["a0", "b0"],
        other => {
            return Err(invalid(format!(
                "geometry.family {other:?} (expected RoundSphere, HyperbolicScaled, FlatTorus or SphereCircleProduct)"
            )))
        }
    };
    let present = [
        ("dim", g.dim.is_some()),
        ("r0", g.r0.is_some()),
        ("c0", g.c0.is_some()),
        ("spectrum", g.spectrum.is_some()),
        ("lx", g.lx.is_some()),
        ("ly", g.ly.is_some()),
        ("a0", g.a0.is_some()),
        ("b0", g.b0.is_some()),
    ];
    if let Some((key, _)) = present.iter().find(|(k, p)| *p && !allowed.contains(k)) {
        return Err(invalid(format!("geometry.{key} does not apply to {family}")));
    }
    let model = match family {
        "RoundSphere" => ModelGeometry::RoundSphere {
            dim: g.dim.unwrap_or(2),
            r0: g.r0.unwrap_or(1.0),
        },
        "HyperbolicScaled" => ModelGeometry::HyperbolicScaled {
            c0: g.c0.unwrap_or(1.0),
            spectrum: g.spectrum.clone(),
        },
        "FlatTorus" => ModelGeometry::FlatTorus {
            lx: g.lx.unwrap_or(1.0),
            ly: g.ly.unwrap_or(1.0),
        },
        _ => ModelGeometry::SphereCircleProduct {
            a0: g.a0.unwrap_or(1.0),
            b0: g.b0.unwrap_or(1.0),
        },
    };
    model.validate()?;
    Ok(model)
}
