//! Multistability and transient chaos: attractor templates, basin rasters,
//! escape times and saddle-tracking algorithms on the time-one map.

mod basin;
mod escape;
mod saddle;

pub use basin::{
    basin_raster, boundary_bisect, classify_state, resolve_time, BasinRaster, BasinRect, Bisection,
    Settled,
};
pub use escape::{escape_time, region_from_templates, EscapeRegion, DEFAULT_T_CAP};
pub use saddle::{
    modified_stagger_step, pim_orbit, stagger_step, straddle_orbit, PimTriple, SaddleRun,
    StaggerEvent, StaggerParams,
};

use crate::error::{Error, Result};
use crate::exec;
use crate::history::{initial_history, InitialFamily};
use crate::integrate::Stepper;
use crate::system::DelaySystem;

/// Attractor label type; `None` means UNRESOLVED.
pub type Label = u32;

/// Relative match tolerance for periodic templates (fraction of amplitude).
pub const DEFAULT_TOL_FRACTION: f64 = 0.05;
/// Absolute match tolerance for fixed points.
pub const FIXED_POINT_TOL: f64 = 1e-3;
/// Sub-sample resolution of the phase scan.
const PHASE_SUBSTEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorKind {
    FixedPoint,
    Periodic,
}

impl AttractorKind {
    pub fn name(self) -> &'static str {
        match self {
            AttractorKind::FixedPoint => "fixed_point",
            AttractorKind::Periodic => "periodic",
        }
    }
}

/// A stored attractor (or saddle-type periodic orbit) used for matching.
///
/// Periodic templates keep one period of samples at the mesh step plus the
/// fractional period, and compare against windows at every phase on a grid
/// eight times finer than the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorTemplate {
    label: Label,
    kind: AttractorKind,
    samples: Vec<f64>,
    step: f64,
    /// Period in samples (fractional); 0 for fixed points.
    period_samples: f64,
    tol: f64,
    saddle: bool,
    fine: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl AttractorTemplate {
    pub fn fixed_point(label: Label, value: f64, step: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidInput("fixed point must be finite".into()));
        }
        check_step(step)?;
        Ok(AttractorTemplate {
            label,
            kind: AttractorKind::FixedPoint,
            samples: vec![value],
            step,
            period_samples: 0.0,
            tol: FIXED_POINT_TOL,
            saddle: false,
            fine: vec![value],
            lo: value,
            hi: value,
        })
    }

    /// Periodic template from one period of samples. `period_samples` is the
    /// period measured in samples and must satisfy
    /// `samples.len() - 1 < period_samples <= samples.len()`.
    pub fn periodic(
        label: Label,
        samples: Vec<f64>,
        step: f64,
        period_samples: f64,
    ) -> Result<Self> {
        check_step(step)?;
        let n = samples.len();
        if n < 2 || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "periodic template needs at least 2 finite samples".into(),
            ));
        }
        if !(period_samples > (n - 1) as f64 && period_samples <= n as f64 + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "period of {period_samples} samples does not fit {n} stored samples"
            )));
        }
        let m = ((period_samples * PHASE_SUBSTEPS as f64).round() as usize).max(1);
        let fine = (0..m)
            .map(|j| {
                let phi = j as f64 * period_samples / m as f64;
                let k = phi.floor() as usize;
                let frac = phi - k as f64;
                let a = samples[k.min(n - 1)];
                let b = if k + 1 < n {
                    samples[k + 1]
                } else {
                    samples[0]
                };
                a + frac * (b - a)
            })
            .collect();
        let (lo, hi) = min_max(&samples);
        Ok(AttractorTemplate {
            label,
            kind: AttractorKind::Periodic,
            tol: DEFAULT_TOL_FRACTION * (hi - lo),
            samples,
            step,
            period_samples,
            saddle: false,
            fine,
            lo,
            hi,
        })
    }

    /// Template extracted from the end of a settled solution, or `None` if the
    /// tail is neither constant nor periodic.
    pub fn from_tail(label: Label, tail: &[f64], step: f64) -> Option<Self> {
        if tail.len() < 8 {
            return None;
        }
        let (lo, hi) = min_max(tail);
        if hi - lo <= 1e-9 * (1.0 + lo.abs().max(hi.abs())) {
            return Self::fixed_point(label, tail[tail.len() - 1], step).ok();
        }
        let p = detect_period(tail)?;
        let n = p.ceil() as usize;
        let samples = tail[tail.len() - n..].to_vec();
        Self::periodic(label, samples, step, p).ok()
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    /// Marks the orbit as saddle-type (unstable).
    pub fn as_saddle(mut self) -> Self {
        self.saddle = true;
        self
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn kind(&self) -> AttractorKind {
        self.kind
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Period in time units (0 for fixed points).
    pub fn period(&self) -> f64 {
        self.period_samples * self.step
    }

    pub fn period_samples(&self) -> f64 {
        self.period_samples
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_saddle(&self) -> bool {
        self.saddle
    }

    pub fn amplitude(&self) -> f64 {
        self.hi - self.lo
    }

    /// The mirror image `x ↦ -x` with a new label.
    pub fn negated(&self, label: Label) -> Self {
        let flip = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        AttractorTemplate {
            label,
            samples: flip(&self.samples),
            fine: flip(&self.fine),
            lo: -self.hi,
            hi: -self.lo,
            ..self.clone()
        }
    }

    /// Phase-aligned sup distance between `window` (samples at the template
    /// step) and the template. Exact when it is at most `cutoff`; otherwise
    /// `+∞`.
    pub fn distance(&self, window: &[f64], cutoff: f64) -> f64 {
        if window.is_empty() {
            return f64::INFINITY;
        }
        let (wlo, whi) = min_max(window);
        match self.kind {
            AttractorKind::FixedPoint => {
                let x = self.samples[0];
                let d = (whi - x).max(x - wlo);
                if d <= cutoff {
                    d
                } else {
                    f64::INFINITY
                }
            }
            AttractorKind::Periodic => {
                // Cheap necessary conditions before the phase scan.
                if whi - self.hi > cutoff || self.lo - wlo > cutoff {
                    return f64::INFINITY;
                }
                let covers = window.len() as f64 >= self.period_samples + 1.0;
                if covers && (self.hi - whi > cutoff || wlo - self.lo > cutoff) {
                    return f64::INFINITY;
                }
                let m = self.fine.len();
                let ratio = m as f64 / self.period_samples;
                let mut best = f64::INFINITY;
                for o in 0..m {
                    let bound = best.min(cutoff);
                    let mut d: f64 = 0.0;
                    for (k, &w) in window.iter().enumerate() {
                        let idx = (o as f64 + k as f64 * ratio).round() as usize % m;
                        d = d.max((w - self.fine[idx]).abs());
                        if d > bound {
                            break;
                        }
                    }
                    if d <= bound && d < best {
                        best = d;
                    }
                }
                best
            }
        }
    }

    /// Whether `window` matches this template within its tolerance.
    pub fn matches(&self, window: &[f64]) -> bool {
        self.distance(window, self.tol) < self.tol
    }
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("step", "must be positive"))
    }
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        })
}

/// Longest template period in samples.
pub(crate) fn longest_period(templates: &[AttractorTemplate]) -> f64 {
    templates
        .iter()
        .map(|t| t.period_samples)
        .fold(0.0, f64::max)
}

/// Classification window length in samples: two periods of the longest
/// template, and at least one delay interval.
pub(crate) fn window_len(templates: &[AttractorTemplate], n_mesh: usize) -> usize {
    ((2.0 * longest_period(templates)).ceil() as usize + 1).max(n_mesh + 1)
}

/// Label of the unique template matching `tail`, or `None` (UNRESOLVED) when
/// no template or more than one matches, or when the tail is shorter than two
/// periods of the longest template.
pub fn classify_attractor(tail: &[f64], templates: &[AttractorTemplate]) -> Option<Label> {
    if (tail.len() as f64) < 2.0 * longest_period(templates) {
        return None;
    }
    let mut found = None;
    for t in templates {
        if t.matches(tail) {
            if found.is_some() {
                return None;
            }
            found = Some(t.label);
        }
    }
    found
}

/// Fractional period (in samples) of a periodic sequence, if one is found
/// with residual below 3% of the amplitude.
pub fn detect_period(x: &[f64]) -> Option<f64> {
    let len = x.len();
    let (lo, hi) = min_max(x);
    let amp = hi - lo;
    if amp <= 0.0 {
        return None;
    }
    let gap = |p: usize, cut: f64| -> f64 {
        let mut d: f64 = 0.0;
        for k in 0..len - p {
            d = d.max((x[k + p] - x[k]).abs());
            if d >= cut {
                break;
            }
        }
        d
    };
    let coarse = 0.25 * amp;
    let max_p = len / 2;
    // Leave the short-lag region, then take the first return.
    let mut p = 1;
    while p <= max_p && gap(p, coarse) < coarse {
        p += 1;
    }
    while p <= max_p && gap(p, coarse) >= coarse {
        p += 1;
    }
    if p > max_p {
        return None;
    }
    let mut best = gap(p, f64::INFINITY);
    while p < max_p {
        let next = gap(p + 1, f64::INFINITY);
        if next >= best {
            break;
        }
        best = next;
        p += 1;
    }
    // Sub-sample refinement by linear interpolation.
    let frac_gap = |q: f64| -> f64 {
        let whole = q.floor() as usize;
        let f = q - whole as f64;
        let mut d: f64 = 0.0;
        for k in 0..len - whole - 1 {
            let y = x[k + whole] + f * (x[k + whole + 1] - x[k + whole]);
            d = d.max((y - x[k]).abs());
        }
        d
    };
    let (mut q_best, mut d_best) = (p as f64, f64::INFINITY);
    for j in -32..=32 {
        let q = p as f64 + j as f64 / 32.0;
        if q < 1.0 || q.ceil() as usize + 1 >= len {
            continue;
        }
        let d = frac_gap(q);
        if d < d_best {
            d_best = d;
            q_best = q;
        }
    }
    (d_best < 0.03 * amp).then_some(q_best)
}

/// Integrates from `family` to `t_end` and returns the last `window` samples,
/// or `None` on overflow.
pub(crate) fn settled_tail(
    system: &DelaySystem,
    family: &InitialFamily,
    t_end: f64,
    window: usize,
    n_mesh: usize,
) -> Option<Vec<f64>> {
    let hist = initial_history(family, n_mesh).ok()?;
    let steps = ((t_end - 1.0).max(0.0) * n_mesh as f64).round() as usize;
    let mut st = Stepper::new(system, hist.values(), 1.0);
    let mut tail = std::collections::VecDeque::with_capacity(window + 1);
    for &v in hist.values() {
        tail.push_back(v);
    }
    for _ in 0..steps {
        tail.push_back(st.step().ok()?);
        if tail.len() > window {
            tail.pop_front();
        }
    }
    while tail.len() > window {
        tail.pop_front();
    }
    Some(tail.into_iter().collect())
}

/// Finds the attractors reached from a list of initial functions.
///
/// Each candidate is integrated to `t_settle` and the last `window` time
/// units are tested for periodicity. New templates are labelled in candidate
/// order, so the result does not depend on the execution strategy. For odd
/// systems the mirror image of every template is added if not already found.
pub fn discover_templates(
    system: &DelaySystem,
    candidates: &[InitialFamily],
    t_settle: f64,
    window: f64,
    n_mesh: usize,
) -> Result<Vec<AttractorTemplate>> {
    if window <= 0.0 || t_settle < window + 1.0 {
        return Err(Error::invalid("t_settle", "must exceed window + 1"));
    }
    let step = 1.0 / n_mesh as f64;
    let w = (window * n_mesh as f64).round() as usize;
    let tails = exec::map_slice(candidates, |f| settled_tail(system, f, t_settle, w, n_mesh));
    let mut templates: Vec<AttractorTemplate> = Vec::new();
    for tail in tails.into_iter().flatten() {
        if templates.iter().any(|t| t.matches(&tail)) {
            continue;
        }
        if let Some(t) = AttractorTemplate::from_tail(templates.len() as Label, &tail, step) {
            templates.push(t);
        }
    }
    if system.is_odd() {
        let found = templates.len();
        for i in 0..found {
            let mirror = templates[i].negated(templates.len() as Label);
            let tail = mirror_window(&mirror, w);
            if !templates.iter().any(|t| t.matches(&tail)) {
                templates.push(mirror);
            }
        }
    }
    Ok(templates)
}

/// `len` consecutive samples of a template, wrapping around its period.
fn mirror_window(t: &AttractorTemplate, len: usize) -> Vec<f64> {
    match t.kind {
        AttractorKind::FixedPoint => vec![t.samples[0]; len],
        AttractorKind::Periodic => {
            let m = t.fine.len();
            let ratio = m as f64 / t.period_samples;
            (0..len)
                .map(|k| t.fine[(k as f64 * ratio).round() as usize % m])
                .collect()
        }
    }
}

/// Label of the template that is the mirror image of `label`'s template.
pub fn mirror_label(templates: &[AttractorTemplate], label: Label) -> Option<Label> {
    let t = templates.iter().find(|t| t.label == label)?;
    let len = window_len(templates, (1.0 / t.step).round() as usize);
    let tail: Vec<f64> = mirror_window(t, len).iter().map(|x| -x).collect();
    classify_attractor(&tail, templates)
}
