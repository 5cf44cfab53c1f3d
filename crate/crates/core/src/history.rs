//! Discretized phase points and initial-function families.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Mesh resolution used when none is given.
pub const DEFAULT_MESH: usize = 256;

/// Samples `u_i = x(t + s_i)`, `s_i = -1 + i/N`, of a solution over one delay
/// interval ending at `t_anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryVector {
    values: Vec<f64>,
    t_anchor: f64,
}

impl HistoryVector {
    pub fn new(values: Vec<f64>, t_anchor: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput(
                "a history vector needs n_mesh >= 2 (at least 3 samples)".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "history sample {i} is not finite"
            )));
        }
        Ok(HistoryVector { values, t_anchor })
    }

    /// Constant history `u ≡ value`.
    pub fn constant(value: f64, n_mesh: usize, t_anchor: f64) -> Result<Self> {
        Self::new(vec![value; n_mesh + 1], t_anchor)
    }

    pub(crate) fn from_parts_unchecked(values: Vec<f64>, t_anchor: f64) -> Self {
        HistoryVector { values, t_anchor }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_mesh(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n_mesh() as f64
    }

    pub fn t_anchor(&self) -> f64 {
        self.t_anchor
    }

    /// `x(t)`, the right endpoint.
    pub fn current(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `x(t-1)`, the left endpoint.
    pub fn lagged(&self) -> f64 {
        self.values[0]
    }

    pub fn sup_distance(&self, other: &HistoryVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + scale * direction` (same anchor).
    pub fn offset(&self, direction: &[f64], scale: f64) -> Result<HistoryVector> {
        if direction.len() != self.values.len() {
            return Err(Error::InvalidInput("direction length mismatch".into()));
        }
        let values = self
            .values
            .iter()
            .zip(direction)
            .map(|(u, d)| u + scale * d)
            .collect();
        HistoryVector::new(values, self.t_anchor)
    }

    /// Point on the segment from `self` (at 0) to `other` (at 1).
    pub fn lerp(&self, other: &HistoryVector, theta: f64) -> HistoryVector {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + theta * (b - a))
            .collect();
        HistoryVector::from_parts_unchecked(values, self.t_anchor)
    }
}

/// Generator `g` of the ODE `x' = g(x)` that shapes an initial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeGenerator {
    /// `g(x) = offset + rate * x`; `Affine { 0, 0 }` gives constant functions.
    Affine { offset: f64, rate: f64 },
}

impl OdeGenerator {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            OdeGenerator::Affine { offset, rate } => offset + rate * x,
        }
    }
}

/// A family of initial functions on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialFamily {
    /// `x(t) = x0`.
    Constant(f64),
    /// `x(t) = a + b t`.
    Linear { a: f64, b: f64 },
    /// `x(t) = a cos 2πt + b sin 2πt`.
    Sinusoidal { a: f64, b: f64 },
    /// Euler solution of `x' = g(x)`, `x(0) = x0`, with the DDE's own step.
    OdeGenerated { generator: OdeGenerator, x0: f64 },
}

impl InitialFamily {
    /// Samples `x(i/N)`, `i = 0..=N`.
    pub fn sample(&self, n_mesh: usize) -> Vec<f64> {
        let n = n_mesh as f64;
        match *self {
            InitialFamily::Constant(x0) => vec![x0; n_mesh + 1],
            InitialFamily::Linear { a, b } => {
                (0..=n_mesh).map(|i| a + b * (i as f64 / n)).collect()
            }
            InitialFamily::Sinusoidal { a, b } => (0..=n_mesh)
                .map(|i| {
                    let t = i as f64 / n;
                    a * (TAU * t).cos() + b * (TAU * t).sin()
                })
                .collect(),
            InitialFamily::OdeGenerated { generator, x0 } => {
                let h = 1.0 / n;
                let mut out = Vec::with_capacity(n_mesh + 1);
                let mut x = x0;
                out.push(x);
                for _ in 0..n_mesh {
                    x += h * generator.eval(x);
                    out.push(x);
                }
                out
            }
        }
    }

    /// Initial value `x(0)`.
    pub fn initial_value(&self) -> f64 {
        match *self {
            InitialFamily::Constant(x0) => x0,
            InitialFamily::Linear { a, .. } => a,
            InitialFamily::Sinusoidal { a, .. } => a,
            InitialFamily::OdeGenerated { x0, .. } => x0,
        }
    }

    /// `(A, B)` coordinates of two-parameter families.
    pub fn coefficients(&self) -> Option<(f64, f64)> {
        match *self {
            InitialFamily::Linear { a, b } | InitialFamily::Sinusoidal { a, b } => Some((a, b)),
            _ => None,
        }
    }
}

impl fmt::Display for InitialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialFamily::Constant(x0) => write!(f, "const:{x0}"),
            InitialFamily::Linear { a, b } => write!(f, "linear:{a},{b}"),
            InitialFamily::Sinusoidal { a, b } => write!(f, "sin:{a},{b}"),
            InitialFamily::OdeGenerated {
                generator: OdeGenerator::Affine { offset, rate },
                x0,
            } => write!(f, "ode:{offset},{rate},{x0}"),
        }
    }
}

impl FromStr for InitialFamily {
    type Err = Error;

    /// `const:X0`, `linear:A,B`, `sin:A,B`, or `ode:OFFSET,RATE,X0`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("family `{s}` lacks a `kind:` prefix")))?;
        let nums = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number `{p}` in family `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let want = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "family `{kind}` takes {k} coefficient(s), got {}",
                    nums.len()
                )))
            }
        };
        match kind {
            "const" | "constant" => {
                want(1)?;
                Ok(InitialFamily::Constant(nums[0]))
            }
            "linear" => {
                want(2)?;
                Ok(InitialFamily::Linear {
                    a: nums[0],
                    b: nums[1],
                })
            }
            "sin" | "sinusoidal" => {
                want(2)?;
                Ok(InitialFamily::Sinusoidal {
                    a: nums[0],
                    b: nums[1],
                })
            }
            "ode" => {
                want(3)?;
                Ok(InitialFamily::OdeGenerated {
                    generator: OdeGenerator::Affine {
                        offset: nums[0],
                        rate: nums[1],
                    },
                    x0: nums[2],
                })
            }
            other => Err(Error::InvalidInput(format!("unknown family `{other}`"))),
        }
    }
}

/// One-parameter families indexed by the initial value `x0`, as used by the
/// density machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    Constant,
    Ode(OdeGenerator),
}

impl FamilyKind {
    pub fn with_x0(self, x0: f64) -> InitialFamily {
        match self {
            FamilyKind::Constant => InitialFamily::Constant(x0),
            FamilyKind::Ode(generator) => InitialFamily::OdeGenerated { generator, x0 },
        }
    }

    #[inline]
    pub(crate) fn g(self, x: f64) -> f64 {
        match self {
            FamilyKind::Constant => 0.0,
            FamilyKind::Ode(g) => g.eval(x),
        }
    }
}

/// History vector on `[0, 1]` (anchored at `t = 1`) for `family`.
pub fn initial_history(family: &InitialFamily, n_mesh: usize) -> Result<HistoryVector> {
    if n_mesh < 2 {
        return Err(Error::InvalidInput("n_mesh must be >= 2".into()));
    }
    HistoryVector::new(family.sample(n_mesh), 1.0)
}
