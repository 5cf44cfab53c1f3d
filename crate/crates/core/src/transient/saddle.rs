use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::escape::escape_time_slice;
use super::{classify_attractor, classify_state, AttractorTemplate, EscapeRegion, Label};
use crate::error::{Error, Result};
use crate::history::HistoryVector;
use crate::integrate::time_one_map;
use crate::system::DelaySystem;

/// One accepted perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggerEvent {
    pub step: usize,
    /// Sup-norm of the perturbation.
    pub norm: f64,
    /// Random draws used, including the accepted one.
    pub tries: usize,
}

/// A perturbed trajectory of the time-one map.
///
/// `states[n + 1]` differs from `S̃(states[n])` by `stagger_norms[n + 1]` in
/// the sup norm; `stagger_norms[0]` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleRun {
    pub states: Vec<HistoryVector>,
    pub escape_times: Vec<Option<u32>>,
    pub stagger_norms: Vec<f64>,
    pub events: Vec<StaggerEvent>,
    /// Number of times the modified algorithm reverted to an earlier iterate.
    pub backtracks: usize,
}

impl SaddleRun {
    fn empty() -> Self {
        SaddleRun {
            states: Vec::new(),
            escape_times: Vec::new(),
            stagger_norms: Vec::new(),
            events: Vec::new(),
            backtracks: 0,
        }
    }

    fn push(&mut self, state: HistoryVector, t: Option<u32>, gap: f64) {
        self.states.push(state);
        self.escape_times.push(t);
        self.stagger_norms.push(gap);
    }

    fn truncate(&mut self, len: usize) {
        self.states.truncate(len);
        self.escape_times.truncate(len);
        self.stagger_norms.truncate(len);
        self.events.retain(|e| e.step < len);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Smallest recorded escape time.
    pub fn min_escape_time(&self) -> Option<u32> {
        self.escape_times.iter().flatten().copied().min()
    }

    /// Largest sup-norm gap `‖x_{n+1} − S̃(x_n)‖`, recomputed from the states.
    pub fn max_gap(&self, system: &DelaySystem) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for w in self.states.windows(2) {
            worst = worst.max(time_one_map(system, &w[0])?.sup_distance(&w[1]));
        }
        Ok(worst)
    }

    /// The pseudo-orbit as one sampled solution: all samples of the first
    /// state followed by the newest delay interval of each later state.
    pub fn series(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(first) = self.states.first() {
            out.extend_from_slice(first.values());
        }
        for s in self.states.iter().skip(1) {
            out.extend_from_slice(&s.values()[1..]);
        }
        out
    }

    /// First window (start sample, label) of the series that matches a
    /// template, scanning window starts every `stride` samples.
    pub fn first_match(
        &self,
        templates: &[AttractorTemplate],
        window: usize,
        stride: usize,
    ) -> Option<(usize, Label)> {
        let s = self.series();
        let stride = stride.max(1);
        let mut start = 0;
        while start + window <= s.len() {
            if let Some(l) = classify_attractor(&s[start..start + window], templates) {
                return Some((start, l));
            }
            start += stride;
        }
        None
    }

    /// Saddle-type template from the last `window` time units of the run.
    pub fn extract_orbit(&self, label: Label, window: f64) -> Option<AttractorTemplate> {
        let s = self.series();
        let step = self.states.first()?.step();
        let w = ((window / step).round() as usize).min(s.len());
        AttractorTemplate::from_tail(label, &s[s.len() - w..], step).map(|t| t.as_saddle())
    }

    /// CSV `step,x_right_endpoint,escape_time,stagger_norm`; unknown escape
    /// times are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,x_right_endpoint,escape_time,stagger_norm")?;
        for (n, s) in self.states.iter().enumerate() {
            let t = self.escape_times[n]
                .map(|t| t.to_string())
                .unwrap_or_default();
            writeln!(w, "{n},{},{t},{}", s.current(), self.stagger_norms[n])?;
        }
        Ok(())
    }
}

/// Tuning of the stagger-and-step algorithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggerParams {
    /// Minimum allowed escape time `T*`.
    pub t_star: u32,
    /// Perturbation bound.
    pub eps: f64,
    /// Smallest perturbation magnitude drawn.
    pub eps_min: f64,
    /// Optional draws per iterate in the modified algorithm.
    pub n_tries: usize,
    /// Draws allowed in a mandatory search before giving up.
    pub attempt_cap: usize,
    /// How many iterates the modified algorithm may revert.
    pub backtrack_depth: usize,
    pub t_cap: u32,
    pub seed: u64,
}

impl StaggerParams {
    pub fn new(t_star: u32, eps: f64, seed: u64) -> Self {
        StaggerParams {
            t_star,
            eps,
            eps_min: eps * 1e-3,
            n_tries: 5,
            attempt_cap: 500,
            backtrack_depth: 8,
            t_cap: super::DEFAULT_T_CAP,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps_min > 0.0 && self.eps_min < self.eps) {
            return Err(Error::invalid("eps", "need 0 < eps_min < eps"));
        }
        if self.t_star >= self.t_cap {
            return Err(Error::invalid("t_star", "must be below t_cap"));
        }
        if self.attempt_cap == 0 || self.n_tries == 0 {
            return Err(Error::invalid("attempt_cap", "must be positive"));
        }
        Ok(())
    }
}

/// Gaussian direction scaled to a log-uniform sup-norm magnitude in
/// `[eps_min, eps)`.
fn draw_perturbation(rng: &mut ChaCha8Rng, dim: usize, p: &StaggerParams) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = sup(&dir);
    let mag = 10f64.powf(rng.random_range(p.eps_min.log10()..p.eps.log10()));
    let scale = if norm > 0.0 { mag / norm } else { 0.0 };
    dir.iter_mut().for_each(|v| *v *= scale);
    dir
}

fn perturbed(x: &HistoryVector, r: &[f64]) -> HistoryVector {
    let v = x.values().iter().zip(r).map(|(a, b)| a + b).collect();
    HistoryVector::from_parts_unchecked(v, x.t_anchor())
}

fn sup(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Escape time after one map step, using `T(S̃x) = T(x) − 1` when `T(x)` is
/// known exactly.
fn next_escape(
    system: &DelaySystem,
    next: &HistoryVector,
    t: u32,
    region: &EscapeRegion,
    t_cap: u32,
) -> u32 {
    if t > t_cap {
        escape_time_slice(system, next.values(), region, t_cap)
    } else {
        t.saturating_sub(1)
    }
}

/// Stagger-and-step: whenever `T(x_n) ≤ T*`, random perturbations are drawn
/// until one gives `T > T*`; then one map step.
pub fn stagger_step(
    system: &DelaySystem,
    region: &EscapeRegion,
    x0: &HistoryVector,
    params: &StaggerParams,
    n_steps: usize,
) -> Result<SaddleRun> {
    params.validate()?;
    let esc = |x: &HistoryVector| escape_time_slice(system, x.values(), region, params.t_cap);
    let mut t = esc(x0);
    if t <= params.t_star {
        return Err(Error::InvalidInput(format!(
            "initial escape time {t} does not exceed T* = {}",
            params.t_star
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut run = SaddleRun::empty();
    let mut x = x0.clone();
    for n in 0..n_steps {
        let mut gap = 0.0;
        if t <= params.t_star {
            let mut tries = 0;
            loop {
                tries += 1;
                if tries > params.attempt_cap {
                    return Err(Error::StaggerExhausted { step: n });
                }
                let r = draw_perturbation(&mut rng, x.values().len(), params);
                let y = perturbed(&x, &r);
                let ty = esc(&y);
                if ty > params.t_star {
                    gap = sup(&r);
                    run.events.push(StaggerEvent {
                        step: n,
                        norm: gap,
                        tries,
                    });
                    x = y;
                    t = ty;
                    break;
                }
            }
        }
        run.push(x.clone(), Some(t), gap);
        if n + 1 < n_steps {
            let next = time_one_map(system, &x)?;
            t = next_escape(system, &next, t, region, params.t_cap);
            x = next;
        }
    }
    Ok(run)
}

/// Modified stagger-and-step.
///
/// At every iterate up to `n_tries` perturbations are tried and one is
/// accepted only if it strictly increases the escape time. While
/// `T(x_n) ≤ T*` the search is mandatory and continues up to `attempt_cap`
/// draws. If that fails the run reverts to an earlier iterate (up to
/// `backtrack_depth` back) and searches there with ten times the cap for a
/// perturbation beating the escape time previously recorded at that iterate.
pub fn modified_stagger_step(
    system: &DelaySystem,
    region: &EscapeRegion,
    x0: &HistoryVector,
    params: &StaggerParams,
    n_steps: usize,
) -> Result<SaddleRun> {
    params.validate()?;
    let esc = |x: &HistoryVector| escape_time_slice(system, x.values(), region, params.t_cap);
    let t0 = esc(x0);
    if t0 <= params.t_star {
        return Err(Error::InvalidInput(format!(
            "initial escape time {t0} does not exceed T* = {}",
            params.t_star
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // Unperturbed images S̃(x_{n-1}) with their escape times.
    let mut pre: Vec<(HistoryVector, u32)> = vec![(x0.clone(), t0)];
    let mut run = SaddleRun::empty();
    let mut n = 0;
    while n < n_steps {
        let (base, t_base) = pre[n].clone();
        let mandatory = t_base <= params.t_star;
        let limit = if mandatory {
            params.attempt_cap
        } else {
            params.n_tries
        };
        let mut chosen = None;
        if t_base <= params.t_cap {
            for tries in 1..=limit {
                let r = draw_perturbation(&mut rng, base.values().len(), params);
                let y = perturbed(&base, &r);
                let ty = esc(&y);
                if ty > t_base {
                    chosen = Some((y, ty, sup(&r), tries));
                    break;
                }
            }
        }
        match chosen {
            Some((y, ty, norm, tries)) => {
                run.events.push(StaggerEvent {
                    step: n,
                    norm,
                    tries,
                });
                run.push(y, Some(ty), norm);
            }
            None if !mandatory => run.push(base, Some(t_base), 0.0),
            None => {
                let (m, y, ty, norm, tries) = backtrack(&mut rng, &pre, &run, n, params, &esc)
                    .ok_or(Error::StaggerExhausted { step: n })?;
                run.backtracks += 1;
                if run.backtracks > n_steps.max(100) {
                    return Err(Error::StaggerExhausted { step: n });
                }
                run.truncate(m);
                pre.truncate(m + 1);
                run.events.push(StaggerEvent {
                    step: m,
                    norm,
                    tries,
                });
                run.push(y, Some(ty), norm);
                n = m;
            }
        }
        n += 1;
        if n < n_steps {
            let last = &run.states[n - 1];
            let t_last = run.escape_times[n - 1].unwrap_or(0);
            let next = time_one_map(system, last)?;
            let tn = next_escape(system, &next, t_last, region, params.t_cap);
            pre.push((next, tn));
        }
    }
    Ok(run)
}

type Found = (usize, HistoryVector, u32, f64, usize);

fn backtrack(
    rng: &mut ChaCha8Rng,
    pre: &[(HistoryVector, u32)],
    run: &SaddleRun,
    n: usize,
    params: &StaggerParams,
    esc: &impl Fn(&HistoryVector) -> u32,
) -> Option<Found> {
    for back in 1..=params.backtrack_depth.min(n) {
        let m = n - back;
        let (base, _) = &pre[m];
        let target = run.escape_times[m].unwrap_or(0);
        if target > params.t_cap {
            continue;
        }
        for tries in 1..=10 * params.attempt_cap {
            let r = draw_perturbation(rng, base.values().len(), params);
            let y = perturbed(base, &r);
            let ty = esc(&y);
            if ty > target {
                return Some((m, y, ty, sup(&r), tries));
            }
        }
    }
    None
}

/// Straddle-orbit method: keeps a pair of states in different basins within
/// `eps` of each other (sup norm) and steps both with the time-one map.
///
/// Basins are decided by integrating up to `t_classify` time units and
/// matching `templates`. The pair is bisected before each step until the
/// images are closer than `eps`, so the recorded orbit of `x_A` is an
/// `eps`-pseudo-orbit.
pub fn straddle_orbit(
    system: &DelaySystem,
    xa: &HistoryVector,
    xb: &HistoryVector,
    templates: &[AttractorTemplate],
    eps: f64,
    n_steps: usize,
    t_classify: f64,
) -> Result<SaddleRun> {
    if eps <= 0.0 {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let basin = |x: &HistoryVector| {
        classify_state(system, x, templates, x.t_anchor() + t_classify)
            .label
            .ok_or(Error::BasinAmbiguity)
    };
    let la = basin(xa)?;
    let lb = basin(xb)?;
    if la == lb {
        return Err(Error::InvalidInput(format!(
            "both states lie in basin {la}"
        )));
    }
    let (mut a, mut b) = (xa.clone(), xb.clone());
    let halve = |a: &mut HistoryVector, b: &mut HistoryVector| -> Result<()> {
        let mid = a.lerp(b, 0.5);
        if basin(&mid)? == la {
            *a = mid;
        } else {
            *b = mid;
        }
        Ok(())
    };
    while a.sup_distance(&b) >= eps {
        halve(&mut a, &mut b)?;
    }
    let mut run = SaddleRun::empty();
    let mut prev_image: Option<HistoryVector> = None;
    for _ in 0..n_steps {
        let (sa, sb) = loop {
            let sa = time_one_map(system, &a)?;
            let sb = time_one_map(system, &b)?;
            if sa.sup_distance(&sb) < eps {
                break (sa, sb);
            }
            let before = a.sup_distance(&b);
            halve(&mut a, &mut b)?;
            if a.sup_distance(&b) >= before {
                return Err(Error::BasinAmbiguity);
            }
        };
        let gap = prev_image.as_ref().map_or(0.0, |p| p.sup_distance(&a));
        run.push(a, None, gap);
        prev_image = Some(sa.clone());
        a = sa;
        b = sb;
    }
    Ok(run)
}

/// Points `x_a, x_b, x_c` with `x_b` on the segment and
/// `T(x_b) > max(T(x_a), T(x_c))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PimTriple {
    pub a: HistoryVector,
    pub b: HistoryVector,
    pub c: HistoryVector,
}

/// Proper-interior-maximum method.
///
/// The segment `x_a x_c` is refined by evaluating escape times at `n_refine`
/// equally spaced points and keeping the sub-triple around the first run of
/// maximal escape times. Refinement is repeated before every step until the
/// images of the endpoints are within `eps`; the recorded orbit is `x_a`.
#[allow(clippy::too_many_arguments)]
pub fn pim_orbit(
    system: &DelaySystem,
    region: &EscapeRegion,
    triple: &PimTriple,
    n_refine: usize,
    eps: f64,
    n_steps: usize,
    t_cap: u32,
) -> Result<SaddleRun> {
    if n_refine < 3 {
        return Err(Error::invalid("n_refine", "must be >= 3"));
    }
    if eps <= 0.0 {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let esc = |x: &HistoryVector| escape_time_slice(system, x.values(), region, t_cap);
    let (ta, tb, tc) = (esc(&triple.a), esc(&triple.b), esc(&triple.c));
    if tb <= ta.max(tc) {
        return Err(Error::InvalidInput(format!(
            "not a PIM triple: T = ({ta}, {tb}, {tc})"
        )));
    }
    let refine = |a: &mut HistoryVector, c: &mut HistoryVector, step: usize| -> Result<u32> {
        let pts: Vec<HistoryVector> = (0..n_refine)
            .map(|k| a.lerp(c, k as f64 / (n_refine - 1) as f64))
            .collect();
        let ts: Vec<u32> = pts.iter().map(&esc).collect();
        let best = *ts.iter().max().unwrap();
        let i = ts.iter().position(|&t| t == best).unwrap();
        let j = i + ts[i..].iter().take_while(|&&t| t == best).count() - 1;
        if i == 0 || j == n_refine - 1 || (i == 1 && j == n_refine - 2) {
            return Err(Error::NoInteriorMaximum { step });
        }
        *a = pts[i - 1].clone();
        *c = pts[j + 1].clone();
        Ok(best)
    };
    let (mut a, mut c) = (triple.a.clone(), triple.c.clone());
    while a.sup_distance(&c) >= eps {
        refine(&mut a, &mut c, 0)?;
    }
    let mut run = SaddleRun::empty();
    let mut prev_image: Option<HistoryVector> = None;
    for n in 0..n_steps {
        let (sa, sc) = loop {
            let sa = time_one_map(system, &a)?;
            let sc = time_one_map(system, &c)?;
            if sa.sup_distance(&sc) < eps {
                break (sa, sc);
            }
            refine(&mut a, &mut c, n)?;
        };
        let gap = prev_image.as_ref().map_or(0.0, |p| p.sup_distance(&a));
        let t = esc(&a);
        run.push(a, Some(t), gap);
        prev_image = Some(sa.clone());
        a = sa;
        c = sc;
    }
    Ok(run)
}
