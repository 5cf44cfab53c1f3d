//! Scalar delay differential equations `x'(t) = f(x(t), x(t-1))`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Named model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    MackeyGlass,
    PiecewiseConstant,
    TentFeedback,
    LinearToy,
    QuadraticToy,
    Custom,
}

impl ModelId {
    pub fn name(self) -> &'static str {
        match self {
            ModelId::MackeyGlass => "mackey-glass",
            ModelId::PiecewiseConstant => "piecewise-constant",
            ModelId::TentFeedback => "tent",
            ModelId::LinearToy => "linear",
            ModelId::QuadraticToy => "quadratic",
            ModelId::Custom => "custom",
        }
    }

    /// Parameters that must be supplied to [`make_system`].
    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            ModelId::MackeyGlass => &["alpha", "beta", "n"],
            ModelId::PiecewiseConstant => &["alpha", "c", "x1", "x2"],
            ModelId::TentFeedback => &["epsilon"],
            ModelId::LinearToy => &["alpha"],
            ModelId::QuadraticToy | ModelId::Custom => &[],
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mackey-glass" | "mackeyglass" | "mg" => ModelId::MackeyGlass,
            "piecewise-constant" | "piecewiseconstant" | "pwc" => ModelId::PiecewiseConstant,
            "tent" | "tent-feedback" | "tentfeedback" => ModelId::TentFeedback,
            "linear" | "linear-toy" | "lineartoy" => ModelId::LinearToy,
            "quadratic" | "quadratic-toy" | "quadratictoy" => ModelId::QuadraticToy,
            "custom" => ModelId::Custom,
            other => return Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        })
    }
}

/// Right-hand side of a user-defined system.
pub type CustomRhs = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    MackeyGlass {
        alpha: f64,
        beta: f64,
        n: Exponent,
    },
    PiecewiseConstant {
        alpha: f64,
        c: f64,
        x1: f64,
        x2: f64,
    },
    Tent {
        epsilon: f64,
    },
    Linear {
        alpha: f64,
    },
    Quadratic,
    Custom(CustomRhs),
}

#[derive(Clone, Copy)]
enum Exponent {
    Int(i32),
    Real(f64),
}

impl Exponent {
    #[inline]
    fn pow(self, x: f64) -> f64 {
        match self {
            Exponent::Int(k) => x.powi(k),
            Exponent::Real(r) => x.powf(r),
        }
    }
}

/// A validated delay equation with unit delay.
#[derive(Clone)]
pub struct DelaySystem {
    id: ModelId,
    params: BTreeMap<String, f64>,
    kind: Kind,
}

impl fmt::Debug for DelaySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelaySystem")
            .field("id", &self.id)
            .field("params", &self.params)
            .finish()
    }
}

/// Builds and validates a named system from its parameter map.
pub fn make_system(id: ModelId, params: &BTreeMap<String, f64>) -> Result<DelaySystem> {
    let get = |name: &str| -> Result<f64> {
        let v = *params
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))?;
        if !v.is_finite() {
            return Err(Error::invalid(name, "must be finite"));
        }
        Ok(v)
    };
    let kind = match id {
        ModelId::MackeyGlass => {
            let (alpha, beta, n) = (get("alpha")?, get("beta")?, get("n")?);
            if alpha <= 0.0 {
                return Err(Error::invalid("alpha", "must be > 0"));
            }
            if beta <= 0.0 {
                return Err(Error::invalid("beta", "must be > 0"));
            }
            if n < 1.0 {
                return Err(Error::invalid("n", "must be >= 1"));
            }
            let n = if n.fract() == 0.0 && n <= i32::MAX as f64 {
                Exponent::Int(n as i32)
            } else {
                Exponent::Real(n)
            };
            Kind::MackeyGlass { alpha, beta, n }
        }
        ModelId::PiecewiseConstant => {
            let (alpha, c, x1, x2) = (get("alpha")?, get("c")?, get("x1")?, get("x2")?);
            if x1 >= x2 {
                return Err(Error::invalid("x1", "must satisfy x1 < x2"));
            }
            Kind::PiecewiseConstant { alpha, c, x1, x2 }
        }
        ModelId::TentFeedback => {
            let epsilon = get("epsilon")?;
            if epsilon <= 0.0 {
                return Err(Error::invalid("epsilon", "must be > 0"));
            }
            Kind::Tent { epsilon }
        }
        ModelId::LinearToy => Kind::Linear {
            alpha: get("alpha")?,
        },
        ModelId::QuadraticToy => Kind::Quadratic,
        ModelId::Custom => {
            return Err(Error::InvalidInput(
                "custom systems are built with DelaySystem::custom".into(),
            ))
        }
    };
    Ok(DelaySystem {
        id,
        params: params.clone(),
        kind,
    })
}

impl DelaySystem {
    /// Convenience constructor from `(name, value)` pairs.
    pub fn new(id: ModelId, params: &[(&str, f64)]) -> Result<Self> {
        let map = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        make_system(id, &map)
    }

    pub fn mackey_glass(alpha: f64, beta: f64, n: f64) -> Result<Self> {
        Self::new(
            ModelId::MackeyGlass,
            &[("alpha", alpha), ("beta", beta), ("n", n)],
        )
    }

    pub fn piecewise_constant(alpha: f64, c: f64, x1: f64, x2: f64) -> Result<Self> {
        Self::new(
            ModelId::PiecewiseConstant,
            &[("alpha", alpha), ("c", c), ("x1", x1), ("x2", x2)],
        )
    }

    pub fn tent(epsilon: f64) -> Result<Self> {
        Self::new(ModelId::TentFeedback, &[("epsilon", epsilon)])
    }

    pub fn linear(alpha: f64) -> Result<Self> {
        Self::new(ModelId::LinearToy, &[("alpha", alpha)])
    }

    pub fn quadratic() -> Self {
        Self::new(ModelId::QuadraticToy, &[]).expect("no parameters to validate")
    }

    /// A system with an arbitrary right-hand side `f(x, x_lag)`.
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        DelaySystem {
            id: ModelId::Custom,
            params: BTreeMap::new(),
            kind: Kind::Custom(Arc::new(f)),
        }
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Always 1: time is measured in units of the delay.
    pub fn delay(&self) -> f64 {
        1.0
    }

    /// `f(x, x_lag)`.
    #[inline]
    pub fn rhs(&self, x: f64, x_lag: f64) -> f64 {
        match &self.kind {
            Kind::MackeyGlass { alpha, beta, n } => {
                -alpha * x + beta * x_lag / (1.0 + n.pow(x_lag))
            }
            Kind::PiecewiseConstant { alpha, c, x1, x2 } => {
                let on = *x1 <= x_lag && x_lag <= *x2;
                -alpha * x + if on { *c } else { 0.0 }
            }
            Kind::Tent { epsilon } => (-x + 1.0 - 1.9 * x_lag.abs()) / epsilon,
            Kind::Linear { alpha } => alpha * x_lag,
            Kind::Quadratic => -x_lag * x_lag,
            Kind::Custom(f) => f(x, x_lag),
        }
    }

    /// Increment of one fixed step `h` from `x`, given the lagged samples at
    /// the start (`lag0`) and end (`lag1`) of the lagged step interval.
    ///
    /// This is the explicit Euler increment `h f(x, lag0)` for every model
    /// except the piecewise-constant feedback, whose indicator is integrated
    /// exactly over the linear interpolant between `lag0` and `lag1`. Without
    /// that, the discretized time-one map would be piecewise affine and
    /// contracting, with threshold crossings snapped to the mesh.
    #[inline]
    pub fn step_increment(&self, x: f64, lag0: f64, lag1: f64, h: f64) -> f64 {
        match &self.kind {
            Kind::PiecewiseConstant { alpha, c, x1, x2 } => {
                h * (-alpha * x + c * occupied_fraction(lag0, lag1, *x1, *x2))
            }
            _ => h * self.rhs(x, lag0),
        }
    }

    /// `(decay, feedback)` such that `f(x, y) = -decay * x + feedback(y)`,
    /// when the model has that form.
    pub fn decay_feedback(&self) -> Option<(f64, Feedback)> {
        Some(match &self.kind {
            Kind::MackeyGlass { alpha, beta, n } => (
                *alpha,
                Feedback::MackeyGlass {
                    beta: *beta,
                    n: match n {
                        Exponent::Int(k) => *k as f64,
                        Exponent::Real(r) => *r,
                    },
                },
            ),
            Kind::PiecewiseConstant { alpha, c, x1, x2 } => (
                *alpha,
                Feedback::Indicator {
                    c: *c,
                    x1: *x1,
                    x2: *x2,
                },
            ),
            Kind::Tent { epsilon } => (1.0 / epsilon, Feedback::Tent { epsilon: *epsilon }),
            Kind::Linear { alpha } => (0.0, Feedback::Linear { slope: *alpha }),
            Kind::Quadratic => (0.0, Feedback::NegSquare),
            Kind::Custom(_) => return None,
        })
    }

    /// True when `f(-x, -y) = -f(x, y)` exactly.
    pub fn is_odd(&self) -> bool {
        match &self.kind {
            Kind::MackeyGlass { n, .. } => matches!(n, Exponent::Int(k) if k % 2 == 0),
            Kind::Linear { .. } => true,
            _ => false,
        }
    }
}

/// Fraction of `θ ∈ [0,1]` where `a + θ (b - a)` lies in `[lo, hi]`.
#[inline]
pub(crate) fn occupied_fraction(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    if a == b {
        return if lo <= a && a <= hi { 1.0 } else { 0.0 };
    }
    let d = b - a;
    let (mut t0, mut t1) = ((lo - a) / d, (hi - a) / d);
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    (t1.min(1.0) - t0.max(0.0)).max(0.0)
}

/// The delayed-feedback term of a system of the form `-decay * x + F(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feedback {
    MackeyGlass { beta: f64, n: f64 },
    Indicator { c: f64, x1: f64, x2: f64 },
    Tent { epsilon: f64 },
    Linear { slope: f64 },
    NegSquare,
}

impl Feedback {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Feedback::MackeyGlass { beta, n } => {
                let p = if n.fract() == 0.0 {
                    y.powi(n as i32)
                } else {
                    y.powf(n)
                };
                beta * y / (1.0 + p)
            }
            Feedback::Indicator { c, x1, x2 } => {
                if x1 <= y && y <= x2 {
                    c
                } else {
                    0.0
                }
            }
            Feedback::Tent { epsilon } => (1.0 - 1.9 * y.abs()) / epsilon,
            Feedback::Linear { slope } => slope * y,
            Feedback::NegSquare => -y * y,
        }
    }
}
