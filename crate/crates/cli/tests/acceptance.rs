//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 3, 6, 8 and 10 run through the CLI binary so that criterion 14
//! can rerun the same commands with a different worker count and compare the
//! output files byte for byte. Set `ACCEPTANCE_ONLY=1,5,9` to run a subset.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use delaydense::asymptotics::{
    scpf_build, scpf_iterate, stationary_vector, ulam_matrix, TimeSeries,
};
use delaydense::density::{
    apply_pl_pf, build_pl_map, explicit_pf_linear_on, explicit_pf_quadratic_on,
    sampling_requirement, uniform_edges, Density1D, PfEvaluation,
};
use delaydense::ergostats::{
    correlation_dimension, delay_embedding, kaplan_yorke, lyapunov_spectrum, PointCloud,
};
use delaydense::transient::{
    boundary_bisect, classify_attractor, classify_state, discover_templates, escape_time,
    mirror_label, region_from_templates, resolve_time, AttractorTemplate,
};
use delaydense::{time_one_map, DelaySystem, FamilyKind, HistoryVector, InitialFamily};
use delaydense_cli::commands::quadmap_error;
use delaydense_cli::output::{read_states, read_templates};

const MG_SADDLE: [&str; 8] = [
    "--model",
    "mackey-glass",
    "--alpha",
    "6.153846153846154",
    "--beta",
    "73.84615384615384",
    "--n",
    "10",
];
const PWC: [&str; 10] = [
    "--model",
    "piecewise-constant",
    "--alpha",
    "3.25",
    "--c",
    "20.5",
    "--x1",
    "1",
    "--x2",
    "2",
];

type Outcome = Result<(bool, String), String>;

/// Offset between consecutive windows tested against the templates.
const WINDOW_STRIDE: usize = 16;

struct Suite {
    only: Option<BTreeSet<u32>>,
    results: Vec<(u32, bool)>,
    work: PathBuf,
    /// CLI invocations per criterion, replayed by criterion 14.
    replay: BTreeMap<u32, Vec<Vec<String>>>,
}

impl Suite {
    fn wants(&self, id: u32) -> bool {
        self.only.as_ref().is_none_or(|s| s.contains(&id))
    }

    fn run(
        &mut self,
        id: u32,
        name: &str,
        limit: Option<Duration>,
        f: impl FnOnce(&mut Suite) -> Outcome,
    ) {
        if !self.wants(id) {
            return;
        }
        let start = Instant::now();
        let outcome = f(self);
        let took = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = limit {
            if took > limit {
                pass = false;
                detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
            }
        }
        let line = format!(
            "criterion {id:>2} {} {name}: {detail} [{:.1}s]\n",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        let mut out = std::io::stdout();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
        self.results.push((id, pass));
    }

    /// Runs the CLI in `dir` with `threads` workers; returns stdout.
    fn cli(&self, dir: &Path, threads: usize, args: &[String]) -> Result<String, String> {
        fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_delaydense"))
            .args(args)
            .current_dir(dir)
            .env("DELAYDENSE_THREADS", threads.to_string())
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "`delaydense {}` exited with {:?}: {}",
                args.join(" "),
                out.status.code(),
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    /// Runs a CLI command for criterion `id` in the primary work directory
    /// and remembers it for the determinism rerun.
    fn recorded(&mut self, id: u32, args: &[&str]) -> Result<String, String> {
        let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        let out = self.cli(&self.work.join("t1"), 1, &args)?;
        self.replay.entry(id).or_default().push(args);
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.work.join("t1").join(name)
    }
}

/// Data rows of a CSV written by the CLI (comments and header dropped).
fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn density_csv(path: &Path) -> Result<Density1D, String> {
    let rows = csv_rows(path)?;
    let num = |s: &str| s.parse::<f64>().map_err(|e| e.to_string());
    let mut edges = vec![num(&rows[0][0])?];
    let mut d = Vec::new();
    for r in &rows {
        edges.push(num(&r[1])?);
        d.push(num(&r[2])?);
    }
    Density1D::new(edges, d).map_err(|e| e.to_string())
}

fn l1(a: &Density1D, b: &Density1D, keep: impl Fn(usize) -> bool) -> f64 {
    (0..a.bins())
        .filter(|&i| keep(i))
        .map(|i| (a.density()[i] - b.density()[i]).abs() * a.width(i))
        .sum()
}

fn criterion_1() -> Outcome {
    let mut d = Density1D::uniform(0.0, 1.0, 1000).map_err(|e| e.to_string())?;
    for _ in 0..6 {
        d = delaydense::density::quadratic_map_pf(&d).map_err(|e| e.to_string())?;
    }
    let err = quadmap_error(&d).map_err(|e| e.to_string())?;
    Ok((err < 0.05, format!("L1 = {err:.4} (< 0.05)")))
}

fn criterion_2() -> Outcome {
    let rho0 = Density1D::uniform(0.0, 1.0, 1).map_err(|e| e.to_string())?;
    let mesh_x = uniform_edges(0.0, 1.0, 1000);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for t in [1.25, 1.5, 1.75] {
        for (label, sys) in [
            ("linear a=1", DelaySystem::linear(1.0)),
            ("linear a=-1", DelaySystem::linear(-1.0)),
            ("quadratic", Ok(DelaySystem::quadratic())),
        ] {
            let sys = sys.map_err(|e| e.to_string())?;
            let map = build_pl_map(&sys, FamilyKind::Constant, &mesh_x, t, 1000)
                .map_err(|e| e.to_string())?;
            let (lo, hi) = map
                .mesh_y
                .iter()
                .fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
            let pad = 0.05 * (hi - lo);
            let edges = uniform_edges(lo - pad, hi + pad, 100);
            let pl = apply_pl_pf(&map, &rho0, &edges, PfEvaluation::BinAverage)
                .map_err(|e| e.to_string())?;
            let (exact, singular) = if label == "quadratic" {
                let c = t - 1.0;
                let fold = 0.25 / c;
                let e = explicit_pf_quadratic_on(&rho0, t, &edges).map_err(|e| e.to_string())?;
                (e, Some(fold))
            } else {
                let alpha = if label.ends_with("=1") { 1.0 } else { -1.0 };
                (
                    explicit_pf_linear_on(&rho0, alpha, t, &edges).map_err(|e| e.to_string())?,
                    None,
                )
            };
            let keep = |i: usize| singular.is_none_or(|y| !(edges[i] <= y && y <= edges[i + 1]));
            let d = l1(&pl, &exact, keep);
            worst = worst.max(d);
            parts.push(format!("{label} t={t}: {d:.1e}"));
        }
    }
    Ok((
        worst <= 1e-2,
        format!("max L1 = {worst:.2e} (<= 1e-2); {}", parts.join(", ")),
    ))
}

fn criterion_3(s: &mut Suite) -> Outcome {
    // x(t) at one delay after the constant history, i.e. t = 2 on our clock
    let sys = DelaySystem::mackey_glass(2.0, 4.0, 10.0).map_err(|e| e.to_string())?;
    let rho0 = Density1D::uniform(0.3, 1.3, 1).map_err(|e| e.to_string())?;
    let t = 2.0;
    let n = 100_000u64;
    let map = build_pl_map(
        &sys,
        FamilyKind::Constant,
        &uniform_edges(0.3, 1.3, 1000),
        t,
        256,
    )
    .map_err(|e| e.to_string())?;
    let (lo, hi) = map
        .mesh_y
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
    let (lo, hi) = (lo - 1e-3 * (hi - lo), hi + 1e-3 * (hi - lo));
    let range = format!("--range={lo},{hi}");
    s.recorded(
        3,
        &[
            "density",
            "--model",
            "mackey-glass",
            "--alpha",
            "2",
            "--beta",
            "4",
            "--n",
            "10",
            "--rho0",
            "uniform:0.3,1.3",
            "--t",
            "2",
            "--samples",
            "100000",
            "--seed",
            "3",
            "--bins",
            "100",
            &range,
            "--out",
            "c3_ensemble.csv",
        ],
    )?;
    let ens = density_csv(&s.path("c3_ensemble.csv"))?;
    let pl = apply_pl_pf(&map, &rho0, ens.edges(), PfEvaluation::BinAverage)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for i in 0..ens.bins() {
        let w = ens.width(i);
        let p = pl.density()[i] * w;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let dev = (ens.density()[i] * w - p).abs();
        let z = if sigma > 0.0 {
            dev / sigma
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
        if z > 3.0 {
            bad += 1;
        }
    }
    Ok((
        bad == 0,
        format!(
            "{bad} of {} bins beyond 3 sigma, max |z| = {worst:.2}",
            ens.bins()
        ),
    ))
}

fn criterion_4() -> Outcome {
    let n = sampling_requirement(0.01, 0.01).map_err(|e| e.to_string())?;
    Ok((
        n == 3_960_000,
        format!("sampling_requirement(0.01, 0.01) = {n}"),
    ))
}

fn criterion_5() -> Outcome {
    let sys = DelaySystem::mackey_glass(2.0, 4.0, 10.0).map_err(|e| e.to_string())?;
    let m = 100_000;
    let ts = TimeSeries::generate(&sys, &InitialFamily::Constant(0.5), 0.5, m, 0, 256)
        .map_err(|e| e.to_string())?;
    let x = ts.retained();
    let (lo, hi) = x
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let r = 100;
    let edges = uniform_edges(lo, hi + 1e-9 * (hi - lo), r);
    let p = ulam_matrix(x, &edges).map_err(|e| e.to_string())?;
    let mut hist = vec![0.0; r];
    for &v in x {
        hist[delaydense::density::bin_index(&edges, v).unwrap()] += 1.0 / x.len() as f64;
    }
    let ph = p.apply(&hist);
    let d: f64 = ph.iter().zip(&hist).map(|(a, b)| (a - b).abs()).sum();
    let bound = r as f64 / m as f64;
    let st = stationary_vector(&p, 1e-12, 1_000_000).map_err(|e| e.to_string())?;
    let ds: f64 = st.p.iter().zip(&hist).map(|(a, b)| (a - b).abs()).sum();
    Ok((
        d <= bound,
        format!("|P hist - hist|_1 = {d:.2e} (<= {bound:.0e}); stationary vector differs from hist by {ds:.2e}"),
    ))
}

fn criterion_6(s: &mut Suite) -> Outcome {
    let tent = ["--model", "tent", "--epsilon", "0.3"];
    let grid = ["--bins", "50", "--range=-1,1"];
    let hist_args: Vec<&str> = ["hist"]
        .iter()
        .chain(&tent)
        .chain(&[
            "--family",
            "const:0.7",
            "--h-sample",
            "1",
            "--samples",
            "1000000",
            "--burn-in",
            "10000",
        ])
        .chain(&grid)
        .chain(&["--out", "c6_solution.csv"])
        .copied()
        .collect();
    s.recorded(6, &hist_args)?;
    let ens_args: Vec<&str> = ["density"]
        .iter()
        .chain(&tent)
        .chain(&[
            "--rho0",
            "uniform:0,1",
            "--t",
            "100",
            "--samples",
            "10000",
            "--seed",
            "6",
        ])
        .chain(&grid)
        .chain(&["--out", "c6_ensemble.csv"])
        .copied()
        .collect();
    s.recorded(6, &ens_args)?;
    let a = density_csv(&s.path("c6_solution.csv"))?;
    let b = density_csv(&s.path("c6_ensemble.csv"))?;
    let d = l1(&a, &b, |_| true);
    Ok((
        d < 0.08,
        format!("L1 = {d:.4} (< 0.08), 50 bins on [-1, 1]"),
    ))
}

fn criterion_7() -> Outcome {
    let sys = DelaySystem::tent(0.3).map_err(|e| e.to_string())?;
    let op = scpf_build(&sys, 1.0 / 32.0, -1.0, 1.1, 512).map_err(|e| e.to_string())?;
    let u0 = Density1D::uniform(-1.0, 1.1, 1)
        .and_then(|u| u.rebin(op.cell_edges()))
        .map_err(|e| e.to_string())?;
    let steps = scpf_iterate(&op, &u0, 500).map_err(|e| e.to_string())?;
    let target = 1.0 / 2.9;
    let hit = steps
        .iter()
        .position(|s| (s.center_of_mass - target).abs() < 0.01 && s.std_dev < 0.02);
    let last = steps.last().unwrap();
    Ok((
        hit.is_some(),
        format!(
            "collapsed at iteration {}; final center {:.5} (1/2.9 = {target:.5}), std {:.2e}",
            hit.map_or("none".into(), |i| (i + 1).to_string()),
            last.center_of_mass,
            last.std_dev
        ),
    ))
}

/// Label at pixel `(i, j)` of a raster CSV `A,B,label`.
fn raster_labels(path: &Path, width: usize, height: usize) -> Result<Vec<Option<u32>>, String> {
    let rows = csv_rows(path)?;
    if rows.len() != width * height {
        return Err(format!(
            "raster has {} pixels, expected {}",
            rows.len(),
            width * height
        ));
    }
    rows.iter()
        .map(|r| {
            let l: i64 = r[2]
                .parse()
                .map_err(|e: std::num::ParseIntError| e.to_string())?;
            Ok((l >= 0).then_some(l as u32))
        })
        .collect()
}

fn criterion_8(s: &mut Suite) -> Outcome {
    let size = 128;
    let mut pwc_args: Vec<&str> = vec!["basin"];
    pwc_args.extend(PWC);
    pwc_args.extend([
        "--rect=0,3,-4,4",
        "--width",
        "128",
        "--height",
        "128",
        "--templates-out",
        "c8_pwc_templates.csv",
        "--csv",
        "c8_pwc.csv",
        "--out",
        "c8_pwc.pgm",
    ]);
    s.recorded(8, &pwc_args)?;
    let pwc = raster_labels(&s.path("c8_pwc.csv"), size, size)?;
    let distinct: BTreeSet<u32> = pwc.iter().flatten().copied().collect();

    let mut mg_args: Vec<&str> = vec!["basin"];
    mg_args.extend(MG_SADDLE);
    mg_args.extend([
        "--rect=-2,2,-2,2",
        "--width",
        "128",
        "--height",
        "128",
        "--templates-out",
        "c8_mg_templates.csv",
        "--csv",
        "c8_mg.csv",
        "--out",
        "c8_mg.pgm",
    ]);
    s.recorded(8, &mg_args)?;
    let mg = raster_labels(&s.path("c8_mg.csv"), size, size)?;
    let tpl = read_templates(&s.path("c8_mg_templates.csv")).map_err(|e| e.to_string())?;
    // CSV rows run over rows j then columns i; the mirror of (i, j) is
    // (size-1-i, size-1-j), i.e. row index k ↦ size²-1-k
    let n = size * size;
    let mismatched = (0..n)
        .filter(|&k| mg[n - 1 - k] != mg[k].and_then(|l| mirror_label(&tpl, l)))
        .count();
    let frac = mismatched as f64 / n as f64;
    Ok((
        distinct.len() >= 4 && frac <= 0.01,
        format!(
            "piecewise-constant: {} labels (>= 4); Mackey-Glass mirror mismatch {:.2}% (<= 1%)",
            distinct.len(),
            100.0 * frac
        ),
    ))
}

fn criterion_9() -> Outcome {
    let sys =
        DelaySystem::mackey_glass(1.0 / 0.1625, 12.0 / 0.1625, 10.0).map_err(|e| e.to_string())?;
    let mut cands = Vec::new();
    for i in 0..12 {
        for j in 0..12 {
            cands.push(InitialFamily::Linear {
                a: -2.0 + (i as f64 + 0.5) / 3.0,
                b: -2.0 + (j as f64 + 0.5) / 3.0,
            });
        }
    }
    let tpl = discover_templates(&sys, &cands, 300.0, 20.0, 256).map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64)> = (0..=40).map(|k| (0.4 + 0.005 * k as f64, -0.6)).collect();
    let labels: Vec<Option<u32>> = pts
        .iter()
        .map(|p| {
            resolve_time(
                &sys,
                &InitialFamily::Linear { a: p.0, b: p.1 },
                &tpl,
                200.0,
                256,
            )
            .map(|s| s.label)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let k = (0..40)
        .find(|&k| labels[k].is_some() && labels[k + 1].is_some() && labels[k] != labels[k + 1])
        .ok_or("no boundary on the segment")?;
    let b = boundary_bisect(&sys, pts[k], pts[k + 1], &tpl, 1e-12, 200.0, 256)
        .map_err(|e| e.to_string())?;
    let x = delaydense::initial_history(&InitialFamily::Linear { a: b.a.0, b: b.a.1 }, 256)
        .map_err(|e| e.to_string())?;
    let settled = classify_state(&sys, &x, &tpl, 1000.0);
    // independent check: no window of the solution before the reported time
    // matches any template
    let path = delaydense::integrate(
        &sys,
        &InitialFamily::Linear { a: b.a.0, b: b.a.1 },
        1000.0,
        256,
    )
    .map_err(|e| e.to_string())?;
    let resolved = settled.resolved_at.ok_or("boundary point never resolved")?;
    let window =
        (2.0 * tpl.iter().map(|t| t.period_samples()).fold(256.0, f64::max)).ceil() as usize + 1;
    let first_match = (0..)
        .map(|k| k * WINDOW_STRIDE)
        .take_while(|&k| k + window <= path.values.len())
        .find(|&k| classify_attractor(&path.values[k..k + window], &tpl).is_some())
        .map(|k| k as f64 / 256.0);
    let unresolved = first_match.unwrap_or(f64::INFINITY).min(resolved);
    Ok((
        unresolved >= 30.0,
        format!(
            "bisected to A = {:.12}, B = -0.6 with gap {:.1e}; unresolved for {unresolved:.1} time units (>= 30)",
            b.a.0,
            b.gap()
        ),
    ))
}

struct SaddleFiles {
    states: PathBuf,
    run: PathBuf,
}

fn run_csv(path: &Path) -> Result<Vec<(u32, f64)>, String> {
    csv_rows(path)?
        .iter()
        .map(|r| {
            let t = r[2].parse::<u32>().map_err(|e| e.to_string())?;
            let g = r[3].parse::<f64>().map_err(|e| e.to_string())?;
            Ok((t, g))
        })
        .collect()
}

/// Series of consecutive history vectors.
fn series(states: &[HistoryVector]) -> Vec<f64> {
    let mut s = states[0].values().to_vec();
    for x in &states[1..] {
        s.extend_from_slice(&x.values()[1..]);
    }
    s
}

/// Start of the first window of `states` that matches a template.
fn first_template_match(states: &[HistoryVector], tpl: &[AttractorTemplate]) -> Option<usize> {
    let s = series(states);
    let window =
        (2.0 * tpl.iter().map(|t| t.period_samples()).fold(0.0, f64::max)).ceil() as usize + 1;
    (0..)
        .map(|k| k * WINDOW_STRIDE)
        .take_while(|&k| k + window <= s.len())
        .find(|&k| classify_attractor(&s[k..k + window], tpl).is_some())
}

fn criterion_10(s: &mut Suite, mg_out: &mut Option<SaddleFiles>) -> Outcome {
    let t_star = 60u32;
    let eps = 1e-3;
    let mut a: Vec<&str> = vec!["saddle"];
    a.extend(MG_SADDLE);
    a.extend([
        "--rect=-2,2,-2,2",
        "--segment=0.4,-0.6,0.6,-0.6",
        "--method",
        "stagger",
        "--t-star",
        "60",
        "--eps",
        "1e-3",
        "--steps",
        "3000",
        "--seed",
        "1",
        "--templates-out",
        "c10_templates.csv",
        "--orbit-out",
        "c10_orbit.csv",
        "--states-out",
        "c10_stagger_states.csv",
        "--out",
        "c10_stagger.csv",
    ]);
    let first = s.recorded(10, &a)?;
    let orbit_path = s.path("c10_orbit.csv");
    if !orbit_path.is_file() {
        return Ok((
            false,
            format!("unmodified run did not converge: {}", first.trim()),
        ));
    }
    let sys =
        DelaySystem::mackey_glass(1.0 / 0.1625, 12.0 / 0.1625, 10.0).map_err(|e| e.to_string())?;
    let tpl = read_templates(&s.path("c10_templates.csv")).map_err(|e| e.to_string())?;
    let orbit = read_templates(&orbit_path)
        .map_err(|e| e.to_string())?
        .remove(0);
    // saddle type: not one of the attractors, and an unperturbed solution
    // started on it leaves and settles elsewhere
    let stagger_states =
        read_states(&s.path("c10_stagger_states.csv")).map_err(|e| e.to_string())?;
    let last = stagger_states.last().unwrap();
    let is_attractor = classify_attractor(orbit.samples(), &tpl).is_some();
    let settled = classify_state(&sys, last, &tpl, last.t_anchor() + 400.0);
    let saddle_type = !is_attractor && settled.label.is_some();

    let mut b: Vec<&str> = vec!["saddle"];
    b.extend(MG_SADDLE);
    b.extend([
        "--templates",
        "c10_templates.csv",
        "--exclude",
        "c10_orbit.csv",
        "--start-states",
        "c10_stagger_states.csv",
        "--method",
        "modified",
        "--t-star",
        "60",
        "--eps",
        "1e-3",
        "--steps",
        "600",
        "--seed",
        "2",
        "--states-out",
        "c10_modified_states.csv",
        "--out",
        "c10_modified.csv",
    ]);
    s.recorded(10, &b)?;
    let files = SaddleFiles {
        states: s.path("c10_modified_states.csv"),
        run: s.path("c10_modified.csv"),
    };
    let rows = run_csv(&files.run)?;
    let min_t = rows.iter().map(|r| r.0).min().unwrap_or(0);
    let states = read_states(&files.states).map_err(|e| e.to_string())?;
    let mut all = tpl.clone();
    let next = tpl.iter().map(|t| t.label()).max().unwrap() + 1;
    all.push(orbit.clone().with_label(next));
    all.push(orbit.negated(next + 1));
    let matched = first_template_match(&states, &all);
    let mut gap: f64 = 0.0;
    for w in states.windows(2) {
        let image = time_one_map(&sys, &w[0]).map_err(|e| e.to_string())?;
        gap = gap.max(image.sup_distance(&w[1]));
    }
    let region = {
        let mut r = region_from_templates(&tpl, 0.25, (-10.0, 10.0)).map_err(|e| e.to_string())?;
        r.register(all[all.len() - 2].clone(), 0.25)
            .map_err(|e| e.to_string())?;
        r.register(all[all.len() - 1].clone(), 0.25)
            .map_err(|e| e.to_string())?;
        r
    };
    // spot-check the logged escape times against a fresh computation
    let logged_ok = (0..states.len())
        .step_by(50)
        .all(|k| escape_time(&sys, &states[k], &region, 200) == rows[k].0);
    let pass = saddle_type
        && states.len() >= 500
        && min_t > t_star - 1
        && matched.is_none()
        && gap < eps
        && logged_ok;
    *mg_out = Some(files);
    Ok((
        pass,
        format!(
            "stagger converged to a period-{:.4} orbit (saddle type: {saddle_type}); modified run: {} iterates, \
             min escape time {min_t} (>= {t_star}), template match over windows every {WINDOW_STRIDE} samples: {}, max gap {gap:.1e} (< {eps:.0e}), \
             logged escape times reproduce: {logged_ok}",
            orbit.period(),
            states.len(),
            matched.map_or("none".to_string(), |k| format!("at sample {k}"))
        ),
    ))
}

fn criterion_11() -> Outcome {
    let pwc = kaplan_yorke(&[0.54, 0.0, -1.5, -8.2, -12.0]).map_err(|e| e.to_string())?;
    let mg = kaplan_yorke(&[0.60, 0.0, -0.50, -3.1, -3.8]).map_err(|e| e.to_string())?;
    let (a, b) = (format!("{pwc:.2}"), format!("{mg:.2}"));
    Ok((a == "2.36" && b == "3.03", format!("{a} and {b}")))
}

fn pwc_saddle(s: &mut Suite) -> Result<SaddleFiles, String> {
    let mut a: Vec<&str> = vec!["saddle"];
    a.extend(PWC);
    a.extend([
        "--rect=0,3,-4,4",
        "--segment=0,1.8,0.03,1.8",
        "--method",
        "modified",
        "--t-star",
        "40",
        "--eps",
        "1e-4",
        "--steps",
        "600",
        "--seed",
        "2",
        "--states-out",
        "c12_pwc_states.csv",
        "--out",
        "c12_pwc.csv",
    ]);
    s.recorded(12, &a)?;
    Ok(SaddleFiles {
        states: s.path("c12_pwc_states.csv"),
        run: s.path("c12_pwc.csv"),
    })
}

fn criterion_12(runs: &[(&str, DelaySystem, &SaddleFiles, f64)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sys, files, table) in runs {
        let states = read_states(&files.states).map_err(|e| e.to_string())?;
        let spec =
            lyapunov_spectrum(sys, states.as_slice(), 5, 1, 12).map_err(|e| e.to_string())?;
        let l = &spec.exponents;
        let positive = spec.count_above(0.1);
        let neutral = l.iter().filter(|x| x.abs() <= 0.1).count();
        let ok = positive == 1 && neutral == 1 && (l[0] - table).abs() <= 0.3;
        pass &= ok;
        let list: Vec<String> = l.iter().map(|x| format!("{x:.3}")).collect();
        parts.push(format!("{name} [{}] vs lambda1 = {table}", list.join(", ")));
    }
    Ok((pass, parts.join("; ")))
}

fn sample_cloud(shape: &str, n: usize) -> PointCloud {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            match shape {
                "circle" => vec![
                    (u * std::f64::consts::TAU).cos(),
                    (u * std::f64::consts::TAU).sin(),
                ],
                _ => vec![u, v],
            }
        })
        .collect();
    PointCloud::from_points(&pts).unwrap()
}

fn criterion_13(runs: &[(&str, &SaddleFiles, f64)]) -> Outcome {
    let circle = correlation_dimension(&sample_cloud("circle", 3000), 0.005, 0.2, 16, 0)
        .map_err(|e| e.to_string())?;
    let square = correlation_dimension(&sample_cloud("square", 3000), 0.01, 0.2, 16, 0)
        .map_err(|e| e.to_string())?;
    let mut pass = (circle.dimension - 1.0).abs() <= 0.1 && (square.dimension - 2.0).abs() <= 0.1;
    let mut parts = vec![
        format!("circle {:.3} (1 +- 0.1)", circle.dimension),
        format!("square {:.3} (2 +- 0.1)", square.dimension),
    ];
    for (name, files, table) in runs {
        let states = read_states(&files.states).map_err(|e| e.to_string())?;
        let step = states[0].step();
        let cloud = delay_embedding(&series(&states), step, &[1.0, 0.0, 0.5], 16)
            .map_err(|e| e.to_string())?;
        let cd = correlation_dimension(&cloud, 0.01, 2.0, 24, 10).map_err(|e| e.to_string())?;
        pass &= (cd.dimension - table).abs() <= 0.5;
        parts.push(format!("{name} {:.3} ({table} +- 0.5)", cd.dimension));
    }
    Ok((pass, parts.join(", ")))
}

fn criterion_14(s: &mut Suite) -> Outcome {
    let mut compared = 0;
    let mut differing = Vec::new();
    let other = s.work.join("t4");
    let replay = s.replay.clone();
    for (id, cmds) in &replay {
        if !matches!(id, 3 | 6 | 8 | 10) {
            continue;
        }
        for args in cmds {
            s.cli(&other, 4, args)?;
        }
    }
    let mut names: Vec<PathBuf> = fs::read_dir(&other)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    for p in names {
        let name = p.file_name().unwrap();
        let a = fs::read(s.work.join("t1").join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(&p).map_err(|e| e.to_string())?;
        compared += 1;
        if a != b {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    let ids: Vec<String> = replay
        .keys()
        .filter(|k| matches!(k, 3 | 6 | 8 | 10))
        .map(u32::to_string)
        .collect();
    Ok((
        compared > 0 && differing.is_empty() && ids.len() == 4,
        format!(
            "{compared} files from criteria {} identical between 1 and 4 workers{}",
            ids.join(", "),
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {}", differing.join(", "))
            }
        ),
    ))
}

fn main() {
    let only = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| {
        let mut ids: BTreeSet<u32> = v.split(',').filter_map(|x| x.trim().parse().ok()).collect();
        // the determinism check replays the CLI runs of these criteria
        if ids.contains(&14) {
            ids.extend([3, 6, 8, 10]);
        }
        ids
    });
    let work = std::env::temp_dir().join(format!("delaydense-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&work);
    let mut s = Suite {
        only,
        results: Vec::new(),
        work: work.clone(),
        replay: BTreeMap::new(),
    };
    let secs = Duration::from_secs;
    s.run(1, "quadratic-map oracle", Some(secs(1)), |_| criterion_1());
    s.run(2, "explicit PF equivalence", Some(secs(10)), |_| {
        criterion_2()
    });
    s.run(3, "ensemble vs operator", Some(secs(60)), criterion_3);
    s.run(4, "sampling formula", None, |_| criterion_4());
    s.run(5, "Ulam circularity", None, |_| criterion_5());
    s.run(
        6,
        "asymptotic density agreement",
        Some(secs(600)),
        criterion_6,
    );
    s.run(7, "self-consistent PF collapse", Some(secs(60)), |_| {
        criterion_7()
    });
    s.run(8, "multistability", Some(secs(1800)), criterion_8);
    s.run(9, "chaotic transient", Some(secs(300)), |_| criterion_9());
    let mut mg_saddle = None;
    s.run(10, "saddle tracking", Some(secs(1800)), |s| {
        criterion_10(s, &mut mg_saddle)
    });
    s.run(11, "Kaplan-Yorke exactness", None, |_| criterion_11());
    let needs_pwc = s.wants(12) || s.wants(13);
    let pwc_saddle = if needs_pwc {
        pwc_saddle(&mut s)
    } else {
        Err("not requested".into())
    };
    let mg_system = DelaySystem::mackey_glass(1.0 / 0.1625, 12.0 / 0.1625, 10.0).unwrap();
    let pwc_system = DelaySystem::piecewise_constant(3.25, 20.5, 1.0, 2.0).unwrap();
    s.run(12, "Lyapunov properties", None, |_| {
        let pwc = pwc_saddle
            .as_ref()
            .map_err(|e| format!("piecewise-constant run: {e}"))?;
        let mg = mg_saddle
            .as_ref()
            .ok_or("Mackey-Glass saddle run unavailable (criterion 10)")?;
        criterion_12(&[
            ("piecewise-constant", pwc_system.clone(), pwc, 0.54),
            ("Mackey-Glass", mg_system.clone(), mg, 0.60),
        ])
    });
    s.run(13, "correlation dimension", None, |_| {
        let pwc = pwc_saddle
            .as_ref()
            .map_err(|e| format!("piecewise-constant run: {e}"))?;
        let mg = mg_saddle
            .as_ref()
            .ok_or("Mackey-Glass saddle run unavailable (criterion 10)")?;
        criterion_13(&[
            ("piecewise-constant", pwc, 1.96),
            ("Mackey-Glass", mg, 2.24),
        ])
    });
    s.run(14, "determinism across worker counts", None, criterion_14);

    let failed: Vec<u32> = s.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let summary = format!(
        "acceptance: {} passed, {} failed{}\n",
        s.results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({failed:?})")
        }
    );
    std::io::stdout().write_all(summary.as_bytes()).unwrap();
    let _ = fs::remove_dir_all(&work);
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
