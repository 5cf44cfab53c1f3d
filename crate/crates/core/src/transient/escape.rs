use super::{min_max, AttractorTemplate};
use crate::error::{Error, Result};
use crate::history::HistoryVector;
use crate::integrate::time_one_map_into;
use crate::system::DelaySystem;

/// Default escape-time cap, in time-one-map iterates.
pub const DEFAULT_T_CAP: u32 = 200;

/// Transient region `R`: states inside the bounding box whose distance to
/// every registered template exceeds that template's radius.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeRegion {
    templates: Vec<(AttractorTemplate, f64)>,
    bbox: (f64, f64),
}

/// Region excluding a `delta`-neighbourhood of each template.
pub fn region_from_templates(
    templates: &[AttractorTemplate],
    delta: f64,
    bbox: (f64, f64),
) -> Result<EscapeRegion> {
    let mut r = EscapeRegion::new(bbox)?;
    for t in templates {
        r.register(t.clone(), delta)?;
    }
    Ok(r)
}

impl EscapeRegion {
    /// Region bounded only by `bbox` on every history sample.
    pub fn new(bbox: (f64, f64)) -> Result<Self> {
        if !(bbox.0 < bbox.1) {
            return Err(Error::invalid(
                "bbox",
                "lower bound must be below upper bound",
            ));
        }
        Ok(EscapeRegion {
            templates: Vec::new(),
            bbox,
        })
    }

    /// Adds a template with exclusion radius `delta`.
    pub fn register(&mut self, template: AttractorTemplate, delta: f64) -> Result<()> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        self.templates.push((template, delta));
        Ok(())
    }

    pub fn templates(&self) -> impl Iterator<Item = &AttractorTemplate> {
        self.templates.iter().map(|(t, _)| t)
    }

    pub fn bbox(&self) -> (f64, f64) {
        self.bbox
    }

    /// Whether a history (as samples) lies in `R`.
    pub fn contains(&self, u: &[f64]) -> bool {
        let (lo, hi) = min_max(u);
        if lo < self.bbox.0 || hi > self.bbox.1 {
            return false;
        }
        self.templates.iter().all(|(t, d)| t.distance(u, *d) > *d)
    }

    /// Smallest distance-to-radius ratio over the registered templates.
    pub fn clearance(&self, u: &[f64]) -> f64 {
        self.templates
            .iter()
            .map(|(t, d)| t.distance(u, f64::INFINITY) / d)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `T(x) = min{n > 0 : S̃ⁿ(x) ∉ R}`, with `t_cap + 1` standing for "did not
/// escape within `t_cap` iterates". Overflow counts as leaving `R`.
pub fn escape_time(
    system: &DelaySystem,
    state: &HistoryVector,
    region: &EscapeRegion,
    t_cap: u32,
) -> u32 {
    escape_time_slice(system, state.values(), region, t_cap)
}

pub(crate) fn escape_time_slice(
    system: &DelaySystem,
    u: &[f64],
    region: &EscapeRegion,
    t_cap: u32,
) -> u32 {
    let mut cur = u.to_vec();
    let mut next = vec![0.0; u.len()];
    for n in 1..=t_cap {
        if time_one_map_into(system, &cur, &mut next).is_err() || !region.contains(&next) {
            return n;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    t_cap + 1
}
