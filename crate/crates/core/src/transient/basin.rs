use std::collections::BTreeSet;
use std::io::{self, Write};

use super::{classify_attractor, window_len, AttractorKind, AttractorTemplate, Label};
use crate::error::{Error, Result};
use crate::exec;
use crate::history::{initial_history, HistoryVector, InitialFamily};
use crate::integrate::time_one_map_into;
use crate::system::DelaySystem;

/// Outcome of integrating until the solution matches a template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settled {
    pub label: Option<Label>,
    /// Start time of the first matching window.
    pub resolved_at: Option<f64>,
    /// Time reached (earlier than `t_max` on a match or overflow).
    pub t_end: f64,
}

/// Integrates from `state` in delay-interval steps up to time `t_max`,
/// classifying the trailing window after each step.
pub fn classify_state(
    system: &DelaySystem,
    state: &HistoryVector,
    templates: &[AttractorTemplate],
    t_max: f64,
) -> Settled {
    let n = state.n_mesh();
    let h = state.step();
    let w = window_len(templates, n);
    let mut trail: Vec<f64> = state.values().to_vec();
    let mut cur = state.values().to_vec();
    let mut next = vec![0.0; n + 1];
    let mut t = state.t_anchor();
    loop {
        if trail.len() >= w {
            let window = &trail[trail.len() - w..];
            if let Some(label) = classify_attractor(window, templates) {
                return Settled {
                    label: Some(label),
                    resolved_at: Some(t - (w - 1) as f64 * h),
                    t_end: t,
                };
            }
        }
        if t + 1.0 > t_max + 1e-9 {
            break;
        }
        if time_one_map_into(system, &cur, &mut next).is_err() {
            break;
        }
        std::mem::swap(&mut cur, &mut next);
        t += 1.0;
        trail.extend_from_slice(&cur[1..]);
        if trail.len() > 4 * w {
            trail.drain(..trail.len() - w);
        }
    }
    Settled {
        label: None,
        resolved_at: None,
        t_end: t,
    }
}

/// [`classify_state`] for an initial function on `[0, 1]`.
pub fn resolve_time(
    system: &DelaySystem,
    family: &InitialFamily,
    templates: &[AttractorTemplate],
    t_max: f64,
    n_mesh: usize,
) -> Result<Settled> {
    let hist = initial_history(family, n_mesh)?;
    Ok(classify_state(system, &hist, templates, t_max))
}

/// Rectangle in the `(A, B)` plane of `x(t) = A + B t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinRect {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl BasinRect {
    pub fn new(a_min: f64, a_max: f64, b_min: f64, b_max: f64) -> Result<Self> {
        let ok = [a_min, a_max, b_min, b_max].iter().all(|v| v.is_finite())
            && a_min <= a_max
            && b_min <= b_max;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "bad rectangle [{a_min},{a_max}]x[{b_min},{b_max}]"
            )));
        }
        Ok(BasinRect {
            a_min,
            a_max,
            b_min,
            b_max,
        })
    }

    /// Symmetric under `(A, B) ↦ (-A, -B)`.
    pub fn is_centered(&self) -> bool {
        (self.a_min + self.a_max).abs() <= 1e-12 * (1.0 + self.a_max.abs())
            && (self.b_min + self.b_max).abs() <= 1e-12 * (1.0 + self.b_max.abs())
    }
}

/// Per-pixel attractor labels over an `(A, B)` grid. Row 0 is the largest `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinRaster {
    pub rect: BasinRect,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Option<Label>>,
    /// Registered templates: label, kind, saddle flag.
    pub legend: Vec<(Label, AttractorKind, bool)>,
}

impl BasinRaster {
    /// Pixel-centre coordinates of column `i`, row `j`.
    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        pixel_center(&self.rect, self.width, self.height, i, j)
    }

    pub fn label(&self, i: usize, j: usize) -> Option<Label> {
        self.labels[j * self.width + i]
    }

    pub fn distinct_labels(&self) -> BTreeSet<Label> {
        self.labels.iter().flatten().copied().collect()
    }

    pub fn unresolved_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Gray level of a label; UNRESOLVED is white.
    pub fn gray(&self, label: Option<Label>) -> u8 {
        let Some(l) = label else { return 255 };
        let k = self.legend.iter().position(|e| e.0 == l).unwrap_or(0);
        let n = self.legend.len().max(2) - 1;
        (k * 200 / n) as u8
    }

    /// Fraction of pixels whose label disagrees with the mirror pixel under
    /// `(A, B) ↦ (-A, -B)`, after mapping labels through `pair`.
    pub fn mirror_mismatch(&self, pair: impl Fn(Label) -> Option<Label>) -> Result<f64> {
        if !self.rect.is_centered() {
            return Err(Error::InvalidInput(
                "rectangle is not centred at the origin".into(),
            ));
        }
        let mut bad = 0usize;
        for j in 0..self.height {
            for i in 0..self.width {
                let here = self.label(i, j).and_then(&pair);
                let there = self.label(self.width - 1 - i, self.height - 1 - j);
                if here != there {
                    bad += 1;
                }
            }
        }
        Ok(bad as f64 / self.labels.len() as f64)
    }

    /// ASCII PGM (P2), maxval 255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "P2")?;
        writeln!(w, "{} {}", self.width, self.height)?;
        writeln!(w, "255")?;
        for j in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|i| self.gray(self.label(i, j)).to_string())
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Sidecar lookup table `label,gray,attractor_kind`; UNRESOLVED is `-1`.
    pub fn write_legend_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "label,gray,attractor_kind")?;
        for &(l, kind, saddle) in &self.legend {
            let name = if saddle {
                format!("{}_saddle", kind.name())
            } else {
                kind.name().to_string()
            };
            writeln!(w, "{l},{},{name}", self.gray(Some(l)))?;
        }
        writeln!(w, "-1,255,unresolved")
    }

    /// CSV `A,B,label`, one row per pixel; UNRESOLVED is `-1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "A,B,label")?;
        for j in 0..self.height {
            for i in 0..self.width {
                let (a, b) = self.pixel_center(i, j);
                let l = self.label(i, j).map_or(-1, i64::from);
                writeln!(w, "{a},{b},{l}")?;
            }
        }
        Ok(())
    }
}

fn pixel_center(rect: &BasinRect, width: usize, height: usize, i: usize, j: usize) -> (f64, f64) {
    let a = rect.a_min + (i as f64 + 0.5) * (rect.a_max - rect.a_min) / width as f64;
    let b = rect.b_max - (j as f64 + 0.5) * (rect.b_max - rect.b_min) / height as f64;
    (a, b)
}

/// Classifies the initial functions `x(t) = A + B t` at every pixel centre.
///
/// Each pixel is integrated until its trailing window matches a template or
/// `t_max` is reached; pixels still unmatched are UNRESOLVED.
pub fn basin_raster(
    system: &DelaySystem,
    rect: BasinRect,
    width: usize,
    height: usize,
    t_max: f64,
    templates: &[AttractorTemplate],
    n_mesh: usize,
) -> Result<BasinRaster> {
    if templates.is_empty() {
        return Err(Error::InvalidInput(
            "basin_raster needs at least one template".into(),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("resolution", "must be at least 1x1"));
    }
    if n_mesh < 2 {
        return Err(Error::invalid("n_mesh", "must be >= 2"));
    }
    let labels = exec::map_indexed(width * height, |p| {
        let (a, b) = pixel_center(&rect, width, height, p % width, p / width);
        resolve_time(
            system,
            &InitialFamily::Linear { a, b },
            templates,
            t_max,
            n_mesh,
        )
        .ok()
        .and_then(|s| s.label)
    });
    Ok(BasinRaster {
        rect,
        width,
        height,
        labels,
        legend: templates
            .iter()
            .map(|t| (t.label(), t.kind(), t.is_saddle()))
            .collect(),
    })
}

/// Result of [`boundary_bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub label_a: Label,
    pub label_b: Label,
    /// Number of midpoint classifications performed.
    pub evaluations: usize,
}

impl Bisection {
    pub fn gap(&self) -> f64 {
        (self.a.0 - self.b.0).hypot(self.a.1 - self.b.1)
    }
}

/// Bisects the segment between two `(A, B)` points in different basins until
/// the straddling pair is closer than `eps`.
///
/// A midpoint that is still unresolved at `t_max` is retried once with
/// `2 t_max`; if that also fails the result is [`Error::LostClassification`].
#[allow(clippy::too_many_arguments)]
pub fn boundary_bisect(
    system: &DelaySystem,
    pa: (f64, f64),
    pb: (f64, f64),
    templates: &[AttractorTemplate],
    eps: f64,
    t_max: f64,
    n_mesh: usize,
) -> Result<Bisection> {
    if eps <= 0.0 {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let classify = |p: (f64, f64)| -> Result<Option<Label>> {
        let fam = InitialFamily::Linear { a: p.0, b: p.1 };
        let s = resolve_time(system, &fam, templates, t_max, n_mesh)?;
        if s.label.is_some() {
            return Ok(s.label);
        }
        Ok(resolve_time(system, &fam, templates, 2.0 * t_max, n_mesh)?.label)
    };
    let la = classify(pa)?.ok_or(Error::LostClassification)?;
    let lb = classify(pb)?.ok_or(Error::LostClassification)?;
    if la == lb {
        return Err(Error::InvalidInput(format!(
            "both endpoints lie in the basin of attractor {la}"
        )));
    }
    let mut out = Bisection {
        a: pa,
        b: pb,
        label_a: la,
        label_b: lb,
        evaluations: 0,
    };
    while out.gap() >= eps {
        let mid = (0.5 * (out.a.0 + out.b.0), 0.5 * (out.a.1 + out.b.1));
        if mid == out.a || mid == out.b {
            break;
        }
        let l = classify(mid)?.ok_or(Error::LostClassification)?;
        out.evaluations += 1;
        if l == out.label_a {
            out.a = mid;
        } else {
            out.b = mid;
            out.label_b = l;
        }
    }
    Ok(out)
}
