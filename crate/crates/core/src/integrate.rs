//! Fixed-step Euler integration on the uniform mesh `h = 1/N`.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::history::{initial_history, FamilyKind, HistoryVector, InitialFamily};
use crate::system::DelaySystem;

/// Any `|x|` above this (or a non-finite value) is reported as overflow.
pub const OVERFLOW_LIMIT: f64 = 1e12;

#[inline]
fn check(x: f64, t: f64) -> Result<f64> {
    if x.is_finite() && x.abs() <= OVERFLOW_LIMIT {
        Ok(x)
    } else {
        Err(Error::Overflow { t })
    }
}

/// One Euler step: drop the oldest sample and append `x_{n+1}`.
pub fn euler_step(system: &DelaySystem, state: &HistoryVector) -> Result<HistoryVector> {
    let u = state.values();
    let n = state.n_mesh();
    let h = state.step();
    let next = u[n] + system.step_increment(u[n], u[0], u[1], h);
    let t = state.t_anchor() + h;
    check(next, t)?;
    let mut values = Vec::with_capacity(n + 1);
    values.extend_from_slice(&u[1..]);
    values.push(next);
    Ok(HistoryVector::from_parts_unchecked(values, t))
}

/// The discretized time-one map: `N` Euler steps.
///
/// Equivalent to applying [`euler_step`] `N` times, computed in place: the new
/// history starts at the old right endpoint and its `i`-th sample only needs
/// the old samples `i-1` and `i` as lagged values.
pub fn time_one_map(system: &DelaySystem, state: &HistoryVector) -> Result<HistoryVector> {
    let mut out = vec![0.0; state.values().len()];
    time_one_map_into(system, state.values(), &mut out).map_err(|k| Error::Overflow {
        t: state.t_anchor() + k as f64 * state.step(),
    })?;
    Ok(HistoryVector::from_parts_unchecked(
        out,
        state.t_anchor() + 1.0,
    ))
}

/// Slice form of [`time_one_map`]; on overflow returns the offending step.
pub(crate) fn time_one_map_into(
    system: &DelaySystem,
    u: &[f64],
    out: &mut [f64],
) -> std::result::Result<(), usize> {
    let n = u.len() - 1;
    let h = 1.0 / n as f64;
    out[0] = u[n];
    for i in 1..=n {
        let x = out[i - 1];
        let next = x + system.step_increment(x, u[i - 1], u[i], h);
        if !(next.is_finite() && next.abs() <= OVERFLOW_LIMIT) {
            return Err(i);
        }
        out[i] = next;
    }
    Ok(())
}

/// Uniformly sampled solution `x(k h)`, `k = 0, 1, ...`, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub step: f64,
    pub values: Vec<f64>,
    pub family: Option<InitialFamily>,
}

impl SolutionPath {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    /// Linear interpolation of the samples at time `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.values, self.step, t)
    }

    /// Samples from `t_from` (rounded down to the mesh) to the end.
    pub fn tail_from(&self, t_from: f64) -> &[f64] {
        let k = ((t_from / self.step).floor().max(0.0) as usize).min(self.values.len());
        &self.values[k..]
    }

    /// History vector ending at sample `k` (needs `k >= n_mesh`).
    pub fn history_at(&self, k: usize, n_mesh: usize) -> Option<HistoryVector> {
        if k < n_mesh || k >= self.values.len() {
            return None;
        }
        Some(HistoryVector::from_parts_unchecked(
            self.values[k - n_mesh..=k].to_vec(),
            self.time(k),
        ))
    }

    /// CSV with header `t,x`, shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x")?;
        for (k, x) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.time(k), x)?;
        }
        Ok(())
    }
}

fn interpolate(values: &[f64], step: f64, t: f64) -> Option<f64> {
    if t < 0.0 || values.is_empty() {
        return None;
    }
    let pos = t / step;
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    if k + 1 >= values.len() {
        return (k == values.len() - 1 && frac.abs() < 1e-9).then(|| values[k]);
    }
    if frac < 1e-12 {
        Some(values[k])
    } else if frac > 1.0 - 1e-12 {
        Some(values[k + 1])
    } else {
        Some(values[k] + frac * (values[k + 1] - values[k]))
    }
}

/// Ring-buffered Euler recursion `x_{n+1} = x_n + increment(x_n, x_{n-N}, x_{n-N+1})`.
pub(crate) struct Stepper<'a> {
    system: &'a DelaySystem,
    buf: Vec<f64>,
    /// Index of the oldest sample, `x_{n-N}`.
    head: usize,
    h: f64,
    /// Time of the newest sample.
    t: f64,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(system: &'a DelaySystem, history: &[f64], t_anchor: f64) -> Self {
        let n = history.len() - 1;
        Stepper {
            system,
            buf: history.to_vec(),
            head: 0,
            h: 1.0 / n as f64,
            t: t_anchor,
        }
    }

    #[inline]
    pub(crate) fn step(&mut self) -> Result<f64> {
        let len = self.buf.len();
        let lag0 = self.buf[self.head];
        let lag1 = self.buf[if self.head + 1 == len {
            0
        } else {
            self.head + 1
        }];
        let x = self.buf[if self.head == 0 {
            len - 1
        } else {
            self.head - 1
        }];
        let next = x + self.system.step_increment(x, lag0, lag1, self.h);
        self.t += self.h;
        check(next, self.t)?;
        self.buf[self.head] = next;
        self.head = if self.head + 1 == len {
            0
        } else {
            self.head + 1
        };
        Ok(next)
    }

    pub(crate) fn current(&self) -> f64 {
        let len = self.buf.len();
        self.buf[if self.head == 0 {
            len - 1
        } else {
            self.head - 1
        }]
    }

    /// Oldest sample, `x(t - 1)`.
    pub(crate) fn lagged(&self) -> f64 {
        self.buf[self.head]
    }

    pub(crate) fn history(&self) -> HistoryVector {
        let mut v = Vec::with_capacity(self.buf.len());
        v.extend_from_slice(&self.buf[self.head..]);
        v.extend_from_slice(&self.buf[..self.head]);
        HistoryVector::from_parts_unchecked(v, self.t)
    }
}

fn steps_for(t: f64, n_mesh: usize) -> usize {
    (t * n_mesh as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Solution from `t = 0` to `t_end` for the initial function `family` on
/// `[0, 1]`, sampled at `h = 1/N`.
pub fn integrate(
    system: &DelaySystem,
    family: &InitialFamily,
    t_end: f64,
    n_mesh: usize,
) -> Result<SolutionPath> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidInput("t_end must be > 0".into()));
    }
    let hist = initial_history(family, n_mesh)?;
    let total = steps_for(t_end, n_mesh);
    let mut values = Vec::with_capacity(total + 1);
    values.extend_from_slice(&hist.values()[..=n_mesh.min(total)]);
    if total > n_mesh {
        let mut st = Stepper::new(system, hist.values(), 1.0);
        for _ in n_mesh..total {
            values.push(st.step()?);
        }
    }
    Ok(SolutionPath {
        step: 1.0 / n_mesh as f64,
        values,
        family: Some(*family),
    })
}

/// Continues a trajectory from `state` for `t_span` time units, returning the
/// samples after `state`'s right endpoint.
pub fn continue_from(system: &DelaySystem, state: &HistoryVector, t_span: f64) -> Result<Vec<f64>> {
    let n = state.n_mesh();
    let steps = steps_for(t_span, n);
    let mut st = Stepper::new(system, state.values(), state.t_anchor());
    (0..steps).map(|_| st.step()).collect()
}

/// `S_t : x0 ↦ x(t)` for the one-parameter family `kind`, by Euler
/// integration on the `N` mesh (linear interpolation between mesh points).
pub fn scalar_solution_map(
    system: &DelaySystem,
    kind: FamilyKind,
    x0: f64,
    t: f64,
    n_mesh: usize,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput("t must be >= 0".into()));
    }
    if t == 0.0 {
        return Ok(x0);
    }
    let hist = initial_history(&kind.with_x0(x0), n_mesh)?;
    let n = n_mesh as f64;
    if t <= 1.0 {
        return Ok(interpolate(hist.values(), 1.0 / n, t).expect("t within the history"));
    }
    let pos = t * n;
    let k_lo = (pos + 1e-9).floor() as usize;
    let frac = pos - k_lo as f64;
    let mut st = Stepper::new(system, hist.values(), 1.0);
    let mut x = hist.current();
    for _ in n_mesh..k_lo {
        x = st.step()?;
    }
    if frac.abs() < 1e-9 {
        return Ok(x);
    }
    let next = st.step()?;
    Ok(x + frac * (next - x))
}
