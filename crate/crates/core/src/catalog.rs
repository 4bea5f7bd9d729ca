//! Built-in initial conformal factors.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{ConformalGrid, Topology};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiExpr {
    Flat,
    Const(f64),
    /// `amplitude * sin(2 pi x / Lx)`.
    SinX(f64),
    SinY(f64),
    /// Gaussian `amplitude * exp(-d^2 / (2 width^2))` around `(cx, cy)`. On the
    /// torus `d` is the smooth periodic distance `(L / pi) sin(pi dx / L)`.
    Bump { cx: f64, cy: f64, amplitude: f64, width: f64 },
}

impl PhiExpr {
    /// Parses `flat`, `const(c)`, `sinx(a)`, `siny(a)`, `bump(cx, cy, amplitude, width)`.
    /// `sinx`/`siny` without arguments use amplitude 0.1.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        let (head, args) = match s.find('(') {
            Some(open) => {
                let close = s.rfind(')').filter(|&c| c == s.len() - 1).ok_or_else(|| {
                    Error::InvalidArgument(format!("unbalanced parentheses in {text:?}"))
                })?;
                let args = s[open + 1..close]
                    .split(',')
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidArgument(format!("bad number {a:?} in {text:?}")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (s[..open].trim(), args)
            }
            None => (s, Vec::new()),
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{head} takes {n} argument(s), got {} in {text:?}",
                    args.len()
                )))
            }
        };
        let expr = match head {
            "flat" => {
                arity(0)?;
                Self::Flat
            }
            "const" => {
                arity(1)?;
                Self::Const(args[0])
            }
            "sinx" | "siny" => {
                let a = match args.len() {
                    0 => 0.1,
                    1 => args[0],
                    _ => return Err(Error::InvalidArgument(format!("{head} takes at most 1 argument"))),
                };
                if head == "sinx" {
                    Self::SinX(a)
                } else {
                    Self::SinY(a)
                }
            }
            "bump" => {
                arity(4)?;
                Self::Bump {
                    cx: args[0],
                    cy: args[1],
                    amplitude: args[2],
                    width: args[3],
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown phi expression {head:?} (expected flat, const, sinx, siny or bump)"
                )))
            }
        };
        expr.validate()?;
        Ok(expr)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            Self::Flat => true,
            Self::Const(c) | Self::SinX(c) | Self::SinY(c) => c.is_finite(),
            Self::Bump { cx, cy, amplitude, width } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidArgument(format!("bump width {width} must be positive")));
                }
                [cx, cy, amplitude, width].iter().all(|v| v.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("non-finite parameter in {self}")))
        }
    }

    /// Value at `(x, y)` on a domain of extent `(lx, ly)`.
    pub fn eval(&self, topology: Topology, lx: f64, ly: f64, x: f64, y: f64) -> f64 {
        match *self {
            Self::Flat => 0.0,
            Self::Const(c) => c,
            Self::SinX(a) => a * (2.0 * PI * x / lx).sin(),
            Self::SinY(a) => a * (2.0 * PI * y / ly).sin(),
            Self::Bump { cx, cy, amplitude, width } => {
                let d = |u: f64, c: f64, l: f64| match topology {
                    Topology::PeriodicTorus => l / PI * (PI * (u - c) / l).sin(),
                    Topology::DirichletRectangle => u - c,
                };
                let (dx, dy) = (d(x, cx, lx), d(y, cy, ly));
                amplitude * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn torus(&self, nx: usize, ny: usize, lx: f64, ly: f64) -> Result<ConformalGrid> {
        ConformalGrid::torus(nx, ny, lx, ly, |x, y| self.eval(Topology::PeriodicTorus, lx, ly, x, y))
    }

    pub fn rectangle(&self, cells_x: usize, cells_y: usize, lx: f64, ly: f64) -> Result<ConformalGrid> {
        ConformalGrid::rectangle(cells_x, cells_y, lx, ly, |x, y| {
            self.eval(Topology::DirichletRectangle, lx, ly, x, y)
        })
    }

    /// Grid of the given topology; `n` is the node count per side on the
    /// torus and the cell count per side on the rectangle.
    pub fn grid(&self, topology: Topology, n: (usize, usize), extent: (f64, f64)) -> Result<ConformalGrid> {
        match topology {
            Topology::PeriodicTorus => self.torus(n.0, n.1, extent.0, extent.1),
            Topology::DirichletRectangle => self.rectangle(n.0, n.1, extent.0, extent.1),
        }
    }
}

impl fmt::Display for PhiExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Flat => write!(f, "flat"),
            Self::Const(c) => write!(f, "const({c})"),
            Self::SinX(a) => write!(f, "sinx({a})"),
            Self::SinY(a) => write!(f, "siny({a})"),
            Self::Bump { cx, cy, amplitude, width } => write!(f, "bump({cx}, {cy}, {amplitude}, {width})"),
        }
    }
}

/// Catalog entries: `(syntax, description)`, in listing order.
pub const PHI_CATALOG: [(&str, &str); 5] = [
    ("flat", "phi = 0, the flat metric"),
    ("const(c)", "phi = c, a homothetic flat metric"),
    ("sinx(a)", "phi = a sin(2 pi x / Lx)"),
    ("siny(a)", "phi = a sin(2 pi y / Ly)"),
    ("bump(cx, cy, amplitude, width)", "Gaussian bump, periodised on the torus"),
];
