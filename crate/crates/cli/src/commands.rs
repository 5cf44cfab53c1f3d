//! Subcommand implementations.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delaydense::asymptotics::{
    scpf_build, scpf_iterate, solution_histogram, stationary_vector, trace2d_histogram,
    ulam_matrix, TimeSeries, DEFAULT_SCPF_GRID,
};
use delaydense::density::{
    apply_pl_pf, build_pl_map, quadratic_map_invariant_density, quadratic_map_pf, sample_ensemble,
    track_support_curve, uniform_edges, Density1D, PfEvaluation, DEFAULT_BINS, DEFAULT_PL_MESH,
};
use delaydense::ergostats::{
    correlation_dimension, delay_embedding, kaplan_yorke, lyapunov_spectrum, PointCloud,
};
use delaydense::transient::{
    basin_raster, boundary_bisect, discover_templates, escape_time, mirror_label,
    modified_stagger_step, pim_orbit, region_from_templates, resolve_time, stagger_step,
    straddle_orbit, AttractorTemplate, BasinRect, EscapeRegion, PimTriple, SaddleRun,
    StaggerParams, DEFAULT_T_CAP,
};
use delaydense::{
    initial_history, integrate, make_system, time_one_map, DelaySystem, FamilyKind, HistoryVector,
    InitialFamily, ModelId, OdeGenerator, DEFAULT_MESH,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{read_states, read_templates, write_states, write_templates, Emitter};

/// Keys every subcommand accepts.
pub const COMMON_KEYS: &[&str] = &[
    "model", "alpha", "beta", "n", "c", "x1", "x2", "epsilon", "mesh", "seed", "out",
];

const DISCOVERY_KEYS: &[&str] = &[
    "rect",
    "discover_rect",
    "discover_grid",
    "t_settle",
    "window",
    "templates",
    "templates_out",
    "t_max",
];

/// Subcommand names with their specific keys.
pub fn command_keys(name: &str) -> Option<Vec<&'static str>> {
    let own: &[&str] = match name {
        "simulate" => &["family", "t_end"],
        "density" => &["rho0", "family_kind", "t", "samples", "bins", "range"],
        "plmap" => &["rho0", "family_kind", "t", "k", "bins", "range", "eval"],
        "support-curve" => &["rho0", "family_kind", "x0_range", "points", "t_end"],
        "hist" => &["family", "h_sample", "samples", "burn_in", "bins", "range"],
        "trace2d" => &[
            "family",
            "h_sample",
            "samples",
            "burn_in",
            "bins",
            "range",
            "range_lag",
            "sidecar",
        ],
        "ulam" => &[
            "family", "h_sample", "samples", "burn_in", "bins", "range", "tol", "max_iter",
            "matrix",
        ],
        "scpf" => &["h", "range", "grid", "iterations", "rho0", "trace"],
        "basin" => &["width", "height", "legend", "csv"],
        "bisect" => &["pa", "pb", "tol"],
        "saddle" => &[
            "method",
            "t_star",
            "eps",
            "eps_min",
            "delta",
            "n_tries",
            "attempt_cap",
            "backtrack_depth",
            "t_cap",
            "steps",
            "start",
            "segment",
            "segment_points",
            "warmup",
            "bbox",
            "exclude",
            "start_states",
            "orbit_out",
            "states_out",
            "orbit_window",
            "bisect_tol",
            "t_classify",
            "n_refine",
        ],
        "lyapunov" => &["states", "family", "t_end", "k", "renorm_every"],
        "corrdim" => &[
            "states", "cloud", "points", "lags", "every", "r_min", "r_max", "radii", "theiler",
        ],
        "oracle-quadmap" => &["steps", "bins"],
        "kaplan-yorke" => &["lambda"],
        _ => return None,
    };
    let mut keys: Vec<&str> = COMMON_KEYS.to_vec();
    keys.extend_from_slice(own);
    if matches!(name, "basin" | "bisect" | "saddle") {
        keys.extend_from_slice(DISCOVERY_KEYS);
    }
    Some(keys)
}

pub const COMMANDS: &[(&str, &str)] = &[
    (
        "simulate",
        "Integrate one initial function and write the solution",
    ),
    (
        "density",
        "Ensemble histogram of x(t) over random initial values",
    ),
    (
        "plmap",
        "Transported density from the piecewise-linear solution map",
    ),
    (
        "support-curve",
        "Track the curve carrying the density of x(t)",
    ),
    ("hist", "Histogram of one long solution"),
    (
        "trace2d",
        "2-D histogram of (x(t), x(t - 1)) along one solution",
    ),
    (
        "ulam",
        "Transition matrix and stationary vector from a sampled series",
    ),
    ("scpf", "Iterate the self-consistent transfer operator"),
    (
        "basin",
        "Basin-of-attraction raster over linear initial functions",
    ),
    ("bisect", "Bisect a segment to a basin boundary"),
    (
        "saddle",
        "Track a chaotic saddle by stagger-and-step, straddle or PIM",
    ),
    ("lyapunov", "Leading Lyapunov exponents along a run"),
    ("corrdim", "Correlation dimension of a run or a test cloud"),
    (
        "oracle-quadmap",
        "Quadratic-map transfer operator against its invariant density",
    ),
    ("kaplan-yorke", "Lyapunov dimension of a given spectrum"),
];

/// Runs `name`; returns the summary line.
pub fn dispatch(name: &str, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut em = Emitter::new(cfg);
    let summary = match name {
        "simulate" => simulate(cfg, &mut em),
        "density" => density(cfg, &mut em),
        "plmap" => plmap(cfg, &mut em),
        "support-curve" => support_curve(cfg, &mut em),
        "hist" => hist(cfg, &mut em),
        "trace2d" => trace2d(cfg, &mut em),
        "ulam" => ulam(cfg, &mut em),
        "scpf" => scpf(cfg, &mut em),
        "basin" => basin(cfg, &mut em),
        "bisect" => bisect(cfg, &mut em),
        "saddle" => saddle(cfg, &mut em),
        "lyapunov" => lyapunov(cfg, &mut em),
        "corrdim" => corrdim(cfg, &mut em),
        "oracle-quadmap" => oracle_quadmap(cfg, &mut em),
        "kaplan-yorke" => kaplan_yorke_cmd(cfg),
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }?;
    let paths: Vec<String> = em
        .written()
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    Ok(if paths.is_empty() {
        format!("{name}: {summary}")
    } else {
        format!("{name}: {summary}; wrote {}", paths.join(", "))
    })
}

fn validation(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

fn system(cfg: &ExperimentConfig) -> Result<DelaySystem, CliError> {
    let id: ModelId = cfg
        .require_string("model")?
        .parse()
        .map_err(|e: delaydense::Error| validation("model", e.to_string()))?;
    if id == ModelId::Custom {
        return Err(validation("model", "custom systems are library-only"));
    }
    let mut params = std::collections::BTreeMap::new();
    for &p in id.required_params() {
        params.insert(p.to_string(), cfg.require::<f64>(p)?);
    }
    Ok(make_system(id, &params)?)
}

fn mesh(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    cfg.get_or("mesh", DEFAULT_MESH)
}

fn out_path(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    Ok(PathBuf::from(cfg.require_string("out")?))
}

/// Sibling of `out` with `suffix` replacing its extension.
fn sibling(out: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn family(cfg: &ExperimentConfig) -> Result<InitialFamily, CliError> {
    cfg.require_string("family")?
        .parse()
        .map_err(|e: delaydense::Error| validation("family", e.to_string()))
}

fn family_kind(cfg: &ExperimentConfig) -> Result<FamilyKind, CliError> {
    let s = cfg.string_or("family_kind", "const");
    if s == "const" || s == "constant" {
        return Ok(FamilyKind::Constant);
    }
    let coeffs = s
        .strip_prefix("ode:")
        .and_then(|r| {
            let v: Vec<f64> = r.split(',').filter_map(|p| p.trim().parse().ok()).collect();
            (v.len() == 2).then_some(v)
        })
        .ok_or_else(|| {
            validation(
                "family_kind",
                format!("expected `const` or `ode:OFFSET,RATE`, got `{s}`"),
            )
        })?;
    Ok(FamilyKind::Ode(OdeGenerator::Affine {
        offset: coeffs[0],
        rate: coeffs[1],
    }))
}

/// `uniform:LO,HI`.
fn rho0(cfg: &ExperimentConfig) -> Result<Density1D, CliError> {
    let s = cfg.require_string("rho0")?;
    let v: Option<Vec<f64>> = s
        .strip_prefix("uniform:")
        .map(|r| r.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    match v {
        Some(v) if v.len() == 2 => Ok(Density1D::uniform(v[0], v[1], 1)?),
        _ => Err(validation(
            "rho0",
            format!("expected `uniform:LO,HI`, got `{s}`"),
        )),
    }
}

fn edges(cfg: &ExperimentConfig, range_key: &str) -> Result<Vec<f64>, CliError> {
    let r = cfg.require_list(range_key, 2)?;
    let bins = cfg.get_or("bins", DEFAULT_BINS)?;
    if r[1] <= r[0] || r.iter().any(|v| !v.is_finite()) || bins == 0 {
        return Err(validation(range_key, "need lo < hi and bins > 0"));
    }
    Ok(uniform_edges(r[0], r[1], bins))
}

fn seed(cfg: &ExperimentConfig) -> Result<u64, CliError> {
    cfg.require("seed")
}

fn simulate(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let fam = family(cfg)?;
    let path = integrate(&sys, &fam, cfg.require("t_end")?, mesh(cfg)?)?;
    em.write(&out_path(cfg)?, |w| path.write_csv(w))?;
    Ok(format!("integrated to t = {}", path.t_end()))
}

fn density(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let rho = rho0(cfg)?;
    let kind = family_kind(cfg)?;
    let e = edges(cfg, "range")?;
    let h = sample_ensemble(
        &sys,
        &rho,
        kind,
        cfg.require("t")?,
        cfg.require("samples")?,
        seed(cfg)?,
        &e,
        mesh(cfg)?,
    )?;
    em.write(&out_path(cfg)?, |w| h.density.write_csv(w))?;
    Ok(format!(
        "{} retained, {} dropped, {} outside the grid",
        h.retained, h.dropped, h.outside
    ))
}

fn plmap(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let rho = rho0(cfg)?;
    let kind = family_kind(cfg)?;
    let k: usize = cfg.get_or("k", DEFAULT_PL_MESH)?;
    let mesh_x = uniform_edges(rho.lo(), rho.hi(), k.max(1));
    let map = build_pl_map(&sys, kind, &mesh_x, cfg.require("t")?, mesh(cfg)?)?;
    let mode = match cfg.string_or("eval", "pointwise").as_str() {
        "pointwise" => PfEvaluation::Pointwise,
        "bin-average" | "bin_average" => PfEvaluation::BinAverage,
        other => return Err(validation("eval", format!("unknown mode `{other}`"))),
    };
    let d = apply_pl_pf(&map, &rho, &edges(cfg, "range")?, mode)?;
    em.write(&out_path(cfg)?, |w| d.write_csv(w))?;
    Ok(format!("mass on grid {:.6}", d.mass()))
}

fn support_curve(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let kind = family_kind(cfg)?;
    let r = cfg.require_list("x0_range", 2)?;
    let m: usize = cfg.get_or("points", 200)?;
    if m < 2 {
        return Err(validation("points", "need at least 2"));
    }
    let xs: Vec<f64> = (0..m)
        .map(|i| r[0] + (r[1] - r[0]) * i as f64 / (m - 1) as f64)
        .collect();
    let mut curve = track_support_curve(&sys, kind, &xs, cfg.require("t_end")?, mesh(cfg)?)?;
    if cfg.contains("rho0") {
        curve = curve.weighted_by(&rho0(cfg)?);
    }
    em.write(&out_path(cfg)?, |w| curve.write_csv(w))?;
    Ok(format!("{} points at t = {}", curve.points.len(), curve.t))
}

struct SeriesSpec {
    family: InitialFamily,
    h_sample: f64,
    samples: usize,
    burn_in: usize,
}

fn series_spec(cfg: &ExperimentConfig) -> Result<SeriesSpec, CliError> {
    Ok(SeriesSpec {
        family: family(cfg)?,
        h_sample: cfg.get_or("h_sample", 1.0 / mesh(cfg)? as f64)?,
        samples: cfg.require("samples")?,
        burn_in: cfg.get_or("burn_in", 0)?,
    })
}

fn hist(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let s = series_spec(cfg)?;
    let e = edges(cfg, "range")?;
    let d = solution_histogram(
        &sys,
        &s.family,
        s.h_sample,
        s.samples,
        s.burn_in,
        &e,
        mesh(cfg)?,
    )?;
    em.write(&out_path(cfg)?, |w| d.write_csv(w))?;
    Ok(format!("mass on grid {:.6}", d.mass()))
}

fn trace2d(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let s = series_spec(cfg)?;
    let current = edges(cfg, "range")?;
    let lagged = if cfg.contains("range_lag") {
        edges(cfg, "range_lag")?
    } else {
        current.clone()
    };
    let h = trace2d_histogram(
        &sys,
        &s.family,
        s.h_sample,
        s.samples,
        s.burn_in,
        &lagged,
        &current,
        mesh(cfg)?,
    )?;
    let out = out_path(cfg)?;
    em.write(&out, |w| h.write_pgm(w))?;
    let side = cfg
        .string("sidecar")
        .map(PathBuf::from)
        .unwrap_or_else(|| sibling(&out, ".txt"));
    em.write(&side, |w| {
        w.extend_from_slice(h.pgm_sidecar().as_bytes());
        Ok(())
    })?;
    Ok(format!("{}x{} cells", h.nx(), h.ny()))
}

fn ulam(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let s = series_spec(cfg)?;
    let e = edges(cfg, "range")?;
    let ts = TimeSeries::generate(
        &sys,
        &s.family,
        s.h_sample,
        s.samples,
        s.burn_in,
        mesh(cfg)?,
    )?;
    let p = ulam_matrix(ts.retained(), &e)?;
    let st = stationary_vector(
        &p,
        cfg.get_or("tol", 1e-12)?,
        cfg.get_or("max_iter", 100_000)?,
    )?;
    let d = Density1D::from_masses(e, &st.p)?;
    em.write(&out_path(cfg)?, |w| d.write_csv(w))?;
    if let Some(m) = cfg.string("matrix") {
        em.write(&PathBuf::from(m), |w| p.write_csv(w))?;
    }
    Ok(format!(
        "stationary vector after {} iterations{}",
        st.iterations,
        if st.multiple_fixed_points {
            " (not unique)"
        } else {
            ""
        }
    ))
}

fn scpf(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let r = cfg.require_list("range", 2)?;
    let op = scpf_build(
        &sys,
        cfg.get_or("h", 1.0 / 32.0)?,
        r[0],
        r[1],
        cfg.get_or("grid", DEFAULT_SCPF_GRID)?,
    )?;
    let u0 = rho0(cfg)?.rebin(op.cell_edges())?;
    let steps = scpf_iterate(&op, &u0, cfg.require("iterations")?)?;
    let last = steps
        .last()
        .ok_or_else(|| validation("iterations", "must be positive"))?;
    em.write(&out_path(cfg)?, |w| last.density.write_csv(w))?;
    if let Some(t) = cfg.string("trace") {
        em.write(&PathBuf::from(t), |w| {
            use std::io::Write;
            writeln!(w, "iteration,l1_change,center_of_mass,std_dev")?;
            for (i, s) in steps.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    i + 1,
                    s.l1_change,
                    s.center_of_mass,
                    s.std_dev
                )?;
            }
            Ok(())
        })?;
    }
    Ok(format!(
        "center of mass {:.6}, standard deviation {:.6}",
        last.center_of_mass, last.std_dev
    ))
}

fn rect(cfg: &ExperimentConfig, key: &str) -> Result<BasinRect, CliError> {
    let r = cfg.require_list(key, 4)?;
    BasinRect::new(r[0], r[1], r[2], r[3]).map_err(|e| validation(key, e.to_string()))
}

/// Templates from `templates` or discovered on a grid of linear initial
/// functions over `discover_rect` (default `rect`).
fn templates(
    cfg: &ExperimentConfig,
    em: &mut Emitter,
    sys: &DelaySystem,
) -> Result<Vec<AttractorTemplate>, CliError> {
    let t = if let Some(p) = cfg.input_path("templates")? {
        read_templates(&p)?
    } else {
        let key = if cfg.contains("discover_rect") {
            "discover_rect"
        } else {
            "rect"
        };
        let r = cfg.require_list(key, 4)?;
        let g: usize = cfg.get_or("discover_grid", 12)?;
        let mut cands = Vec::with_capacity(g * g);
        for i in 0..g {
            for j in 0..g {
                cands.push(InitialFamily::Linear {
                    a: r[0] + (i as f64 + 0.5) * (r[1] - r[0]) / g as f64,
                    b: r[2] + (j as f64 + 0.5) * (r[3] - r[2]) / g as f64,
                });
            }
        }
        discover_templates(
            sys,
            &cands,
            cfg.get_or("t_settle", 300.0)?,
            cfg.get_or("window", 20.0)?,
            mesh(cfg)?,
        )?
    };
    if t.is_empty() {
        return Err(validation("templates", "no attractor templates"));
    }
    if let Some(p) = cfg.string("templates_out") {
        em.write(&PathBuf::from(p), |w| write_templates(w, &t))?;
    }
    Ok(t)
}

fn basin(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let tpl = templates(cfg, em, &sys)?;
    let rc = rect(cfg, "rect")?;
    let raster = basin_raster(
        &sys,
        rc,
        cfg.get_or("width", 512)?,
        cfg.get_or("height", 512)?,
        cfg.get_or("t_max", 200.0)?,
        &tpl,
        mesh(cfg)?,
    )?;
    let out = out_path(cfg)?;
    em.write(&out, |w| raster.write_pgm(w))?;
    let legend = cfg
        .string("legend")
        .map(PathBuf::from)
        .unwrap_or_else(|| sibling(&out, ".legend.csv"));
    em.write(&legend, |w| raster.write_legend_csv(w))?;
    if let Some(c) = cfg.string("csv") {
        em.write(&PathBuf::from(c), |w| raster.write_csv(w))?;
    }
    let mut summary = format!(
        "{} distinct labels, {} unresolved pixels",
        raster.distinct_labels().len(),
        raster.unresolved_count()
    );
    if sys.is_odd() && rc.is_centered() {
        let m = raster.mirror_mismatch(|l| mirror_label(&tpl, l))?;
        summary.push_str(&format!(", mirror mismatch {:.4}%", 100.0 * m));
    }
    Ok(summary)
}

fn point(cfg: &ExperimentConfig, key: &str) -> Result<(f64, f64), CliError> {
    let v = cfg.require_list(key, 2)?;
    Ok((v[0], v[1]))
}

fn bisect(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let tpl = templates(cfg, em, &sys)?;
    let n = mesh(cfg)?;
    let t_max = cfg.get_or("t_max", 200.0)?;
    let b = boundary_bisect(
        &sys,
        point(cfg, "pa")?,
        point(cfg, "pb")?,
        &tpl,
        cfg.get_or("tol", 1e-12)?,
        t_max,
        n,
    )?;
    let settle = |p: (f64, f64)| {
        resolve_time(
            &sys,
            &InitialFamily::Linear { a: p.0, b: p.1 },
            &tpl,
            2.0 * t_max,
            n,
        )
    };
    let (sa, sb) = (settle(b.a)?, settle(b.b)?);
    let fmt = |t: Option<f64>| t.map(|t| t.to_string()).unwrap_or_default();
    em.write(&out_path(cfg)?, |w| {
        use std::io::Write;
        writeln!(w, "endpoint,A,B,label,resolved_at")?;
        writeln!(
            w,
            "a,{},{},{},{}",
            b.a.0,
            b.a.1,
            b.label_a,
            fmt(sa.resolved_at)
        )?;
        writeln!(
            w,
            "b,{},{},{},{}",
            b.b.0,
            b.b.1,
            b.label_b,
            fmt(sb.resolved_at)
        )
    })?;
    Ok(format!(
        "boundary between labels {} and {} at A = {}, B = {} after {} evaluations; transient {} / {}",
        b.label_a,
        b.label_b,
        b.a.0,
        b.a.1,
        b.evaluations,
        fmt(sa.resolved_at),
        fmt(sb.resolved_at)
    ))
}

fn stagger_params(cfg: &ExperimentConfig) -> Result<StaggerParams, CliError> {
    let t_star = cfg.require("t_star")?;
    let eps: f64 = cfg.require("eps")?;
    let mut p = StaggerParams::new(t_star, eps, seed(cfg)?);
    p.eps_min = cfg.get_or("eps_min", p.eps_min)?;
    p.n_tries = cfg.get_or("n_tries", p.n_tries)?;
    p.attempt_cap = cfg.get_or("attempt_cap", p.attempt_cap)?;
    p.backtrack_depth = cfg.get_or("backtrack_depth", p.backtrack_depth)?;
    p.t_cap = cfg.get_or("t_cap", DEFAULT_T_CAP)?;
    Ok(p)
}

/// Escape region from the stable templates plus any excluded saddle orbits
/// (and their mirror images for odd systems).
fn saddle_region(
    cfg: &ExperimentConfig,
    sys: &DelaySystem,
    tpl: &[AttractorTemplate],
) -> Result<(EscapeRegion, Vec<AttractorTemplate>), CliError> {
    let delta = cfg.get_or("delta", 0.25)?;
    let bbox = cfg.list_or("bbox", &[-10.0, 10.0])?;
    if bbox.len() != 2 {
        return Err(validation("bbox", "expected LO,HI"));
    }
    let mut region = region_from_templates(tpl, delta, (bbox[0], bbox[1]))?;
    let mut all = tpl.to_vec();
    if let Some(p) = cfg.input_path("exclude")? {
        for t in read_templates(&p)? {
            let mut next = all.iter().map(|t| t.label()).max().unwrap_or(0) + 1;
            let t = t.with_label(next).as_saddle();
            let mirror = sys.is_odd().then(|| {
                next += 1;
                t.negated(next)
            });
            for t in std::iter::once(t).chain(mirror) {
                region.register(t.clone(), delta)?;
                all.push(t);
            }
        }
    }
    Ok((region, all))
}

/// `(A, B)` coordinates of a linear initial function.
type Point = (f64, f64);

/// Endpoints of the first sub-interval of `segment` whose ends settle onto
/// different attractors, refined by bisection.
fn boundary_pair(
    cfg: &ExperimentConfig,
    sys: &DelaySystem,
    tpl: &[AttractorTemplate],
) -> Result<(Point, Point), CliError> {
    let s = cfg.require_list("segment", 4)?;
    let m: usize = cfg.get_or("segment_points", 41)?;
    if m < 2 {
        return Err(validation("segment_points", "need at least 2"));
    }
    let n = mesh(cfg)?;
    let t_max = cfg.get_or("t_max", 200.0)?;
    let pts: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let f = i as f64 / (m - 1) as f64;
            (s[0] + f * (s[2] - s[0]), s[1] + f * (s[3] - s[1]))
        })
        .collect();
    let labels = delaydense::exec::map_slice(&pts, |p| {
        resolve_time(
            sys,
            &InitialFamily::Linear { a: p.0, b: p.1 },
            tpl,
            t_max,
            n,
        )
        .map(|s| s.label)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let k = (0..m - 1)
        .find(|&k| labels[k].is_some() && labels[k + 1].is_some() && labels[k] != labels[k + 1])
        .ok_or_else(|| validation("segment", "no basin boundary along the segment"))?;
    let b = boundary_bisect(
        sys,
        pts[k],
        pts[k + 1],
        tpl,
        cfg.get_or("bisect_tol", 1e-12)?,
        t_max,
        n,
    )?;
    Ok((b.a, b.b))
}

fn advanced(sys: &DelaySystem, x: HistoryVector, maps: usize) -> Result<HistoryVector, CliError> {
    let mut x = x;
    for _ in 0..maps {
        x = time_one_map(sys, &x)?;
    }
    Ok(x)
}

/// Starting state: the first state of `start_states` whose escape time
/// exceeds `T*`, the family `start`, or a boundary point on `segment`, the
/// last two advanced by `warmup` maps.
fn saddle_start(
    cfg: &ExperimentConfig,
    sys: &DelaySystem,
    tpl: &[AttractorTemplate],
    region: &EscapeRegion,
    p: &StaggerParams,
) -> Result<HistoryVector, CliError> {
    let n = mesh(cfg)?;
    if let Some(path) = cfg.input_path("start_states")? {
        let states = read_states(&path)?;
        return states
            .into_iter()
            .find(|x| escape_time(sys, x, region, p.t_cap) > p.t_star)
            .ok_or_else(|| validation("start_states", "no state escapes later than T*"));
    }
    let fam = if cfg.contains("start") {
        cfg.require_string("start")?
            .parse::<InitialFamily>()
            .map_err(|e| validation("start", e.to_string()))?
    } else {
        let (a, _) = boundary_pair(cfg, sys, tpl)?;
        InitialFamily::Linear { a: a.0, b: a.1 }
    };
    advanced(sys, initial_history(&fam, n)?, cfg.get_or("warmup", 10)?)
}

fn saddle(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    // every method is seeded so that reruns are reproducible
    seed(cfg)?;
    let sys = system(cfg)?;
    let method = cfg.string_or("method", "stagger");
    let tpl = templates(cfg, em, &sys)?;
    let steps: usize = cfg.require("steps")?;
    let (region, all) = saddle_region(cfg, &sys, &tpl)?;
    let n = mesh(cfg)?;
    let run: SaddleRun = match method.as_str() {
        "stagger" | "modified" => {
            let p = stagger_params(cfg)?;
            let x0 = saddle_start(cfg, &sys, &tpl, &region, &p)?;
            if method == "stagger" {
                stagger_step(&sys, &region, &x0, &p, steps)?
            } else {
                modified_stagger_step(&sys, &region, &x0, &p, steps)?
            }
        }
        "straddle" => {
            let (a, b) = boundary_pair(cfg, &sys, &tpl)?;
            let xa = initial_history(&InitialFamily::Linear { a: a.0, b: a.1 }, n)?;
            let xb = initial_history(&InitialFamily::Linear { a: b.0, b: b.1 }, n)?;
            straddle_orbit(
                &sys,
                &xa,
                &xb,
                &tpl,
                cfg.require("eps")?,
                steps,
                cfg.get_or("t_classify", 200.0)?,
            )?
        }
        "pim" => {
            let s = cfg.require_list("segment", 4)?;
            let t_cap = cfg.get_or("t_cap", DEFAULT_T_CAP)?;
            let m: usize = cfg.get_or("segment_points", 41)?;
            let end = |a: f64, b: f64| initial_history(&InitialFamily::Linear { a, b }, n);
            let (xa, xc) = (end(s[0], s[1])?, end(s[2], s[3])?);
            let pts: Vec<HistoryVector> = (0..m)
                .map(|k| xa.lerp(&xc, k as f64 / (m - 1) as f64))
                .collect();
            let ts = delaydense::exec::map_slice(&pts, |x| escape_time(&sys, x, &region, t_cap));
            let best = (1..m - 1)
                .max_by_key(|&k| (ts[k], std::cmp::Reverse(k)))
                .unwrap_or(0);
            let triple = PimTriple {
                a: xa,
                b: pts[best].clone(),
                c: xc,
            };
            pim_orbit(
                &sys,
                &region,
                &triple,
                cfg.get_or("n_refine", 9)?,
                cfg.require("eps")?,
                steps,
                t_cap,
            )?
        }
        other => return Err(validation("method", format!("unknown method `{other}`"))),
    };
    em.write(&out_path(cfg)?, |w| run.write_csv(w))?;
    if let Some(p) = cfg.string("states_out") {
        em.write(&PathBuf::from(p), |w| write_states(w, &run.states))?;
    }
    let mut summary = format!("{} iterates, {} staggers", run.len(), run.events.len());
    if let Some(t) = run.min_escape_time() {
        summary.push_str(&format!(", min escape time {t}"));
    }
    if run.backtracks > 0 {
        summary.push_str(&format!(", {} backtracks", run.backtracks));
    }
    let window = 2.0 * all.iter().map(|t| t.period_samples()).fold(0.0, f64::max);
    match run.first_match(&all, window.ceil() as usize + 1, 16) {
        Some((k, l)) => summary.push_str(&format!(", matches template {l} at sample {k}")),
        None => summary.push_str(", no template match"),
    }
    let label = all.iter().map(|t| t.label()).max().unwrap_or(0) + 1;
    match run.extract_orbit(label, cfg.get_or("orbit_window", 20.0)?) {
        Some(orbit) => {
            summary.push_str(&format!(
                ", converged to a periodic orbit of period {}",
                orbit.period()
            ));
            if let Some(p) = cfg.string("orbit_out") {
                em.write(&PathBuf::from(p), |w| write_templates(w, &[orbit]))?;
            }
        }
        None => summary.push_str(", no periodic orbit"),
    }
    Ok(summary)
}

fn lyapunov(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let sys = system(cfg)?;
    let k = cfg.get_or("k", 5)?;
    let every = cfg.get_or("renorm_every", 1)?;
    let seed = seed(cfg)?;
    let spec = if let Some(p) = cfg.input_path("states")? {
        let states = read_states(&p)?;
        lyapunov_spectrum(&sys, states.as_slice(), k, every, seed)?
    } else {
        let path = integrate(&sys, &family(cfg)?, cfg.require("t_end")?, mesh(cfg)?)?;
        lyapunov_spectrum(&sys, &path, k, every, seed)?
    };
    em.write(&out_path(cfg)?, |w| spec.write_csv(w))?;
    let list: Vec<String> = spec.exponents.iter().map(|l| format!("{l:.4}")).collect();
    let ky = kaplan_yorke(&spec.exponents)
        .map(|d| format!("{d:.2}"))
        .unwrap_or_else(|_| "undefined".into());
    Ok(format!(
        "exponents [{}] bits/time over {} steps, Kaplan-Yorke dimension {ky}",
        list.join(", "),
        spec.steps
    ))
}

fn corrdim(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let cloud = if let Some(p) = cfg.input_path("states")? {
        let states = read_states(&p)?;
        let first = states
            .first()
            .ok_or_else(|| validation("states", "file has no states"))?;
        let step = first.step();
        let mut series = first.values().to_vec();
        for s in &states[1..] {
            series.extend_from_slice(&s.values()[1..]);
        }
        let lags = cfg.list_or("lags", &[1.0, 0.0, 0.5])?;
        delay_embedding(&series, step, &lags, cfg.get_or("every", 16)?)?
    } else {
        let shape = cfg.require_string("cloud")?;
        let m: usize = cfg.get_or("points", 2000)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed(cfg)?);
        let pts: Vec<Vec<f64>> = match shape.as_str() {
            "circle" => (0..m)
                .map(|_| {
                    let a = rng.random::<f64>() * std::f64::consts::TAU;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            "square" => (0..m)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                .collect(),
            other => return Err(validation("cloud", format!("unknown shape `{other}`"))),
        };
        PointCloud::from_points(&pts)?
    };
    let cd = correlation_dimension(
        &cloud,
        cfg.get_or("r_min", 0.01)?,
        cfg.get_or("r_max", 2.0)?,
        cfg.get_or("radii", 24)?,
        cfg.get_or("theiler", 10)?,
    )?;
    em.write(&out_path(cfg)?, |w| cd.write_csv(w))?;
    Ok(format!(
        "correlation dimension {:.4} from {} points (fit r in [{}, {}])",
        cd.dimension,
        cloud.len(),
        cd.r[cd.fit.0],
        cd.r[cd.fit.1]
    ))
}

/// L1 distance to the invariant density over bins inside `[0.01, 0.99]`.
pub fn quadmap_error(d: &Density1D) -> Result<f64, delaydense::Error> {
    let star = Density1D::from_fn(d.edges().to_vec(), quadratic_map_invariant_density)?;
    let e = d.edges();
    d.l1_distance_where(&star, |i| e[i] >= 0.01 && e[i + 1] <= 0.99)
}

fn oracle_quadmap(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<String, CliError> {
    let bins = cfg.get_or("bins", 1000)?;
    let mut d = Density1D::uniform(0.0, 1.0, bins)?;
    for _ in 0..cfg.get_or("steps", 6)? {
        d = quadratic_map_pf(&d)?;
    }
    em.write(&out_path(cfg)?, |w| d.write_csv(w))?;
    Ok(format!(
        "L1 distance to the invariant density {:.6}",
        quadmap_error(&d)?
    ))
}

fn kaplan_yorke_cmd(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let l = cfg
        .list("lambda")?
        .ok_or_else(|| validation("lambda", "required but not given"))?;
    let d = kaplan_yorke(&l)?;
    Ok(format!("{d:.2}"))
}
