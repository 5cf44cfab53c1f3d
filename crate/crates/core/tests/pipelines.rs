use delaydense::density::{
    explicit_pf_linear, quadratic_map_pf, sample_ensemble, uniform_edges, Density1D,
};
use delaydense::exec::{with_strategy, Strategy};
use delaydense::transient::{
    basin_raster, boundary_bisect, discover_templates, escape_time, modified_stagger_step,
    region_from_templates, resolve_time, stagger_step, AttractorTemplate, BasinRect, EscapeRegion,
    SaddleRun, StaggerParams,
};
use delaydense::{
    initial_history, time_one_map, DelaySystem, FamilyKind, InitialFamily, DEFAULT_MESH,
};

fn pwc() -> DelaySystem {
    DelaySystem::piecewise_constant(3.25, 20.5, 1.0, 2.0).unwrap()
}

fn pwc_templates() -> Vec<AttractorTemplate> {
    let mut cands = Vec::new();
    for i in 0..12 {
        for j in 0..12 {
            cands.push(InitialFamily::Linear {
                a: 3.0 * (i as f64 + 0.5) / 12.0,
                b: -4.0 + 8.0 * (j as f64 + 0.5) / 12.0,
            });
        }
    }
    discover_templates(&pwc(), &cands, 300.0, 20.0, DEFAULT_MESH).unwrap()
}

/// Neighbouring points on `B = 1.8`, `0 <= A <= 0.03`, with different labels.
fn straddling_points(templates: &[AttractorTemplate]) -> ((f64, f64), (f64, f64)) {
    let pts: Vec<(f64, f64)> = (0..=40).map(|k| (0.03 * k as f64 / 40.0, 1.8)).collect();
    let label = |p: &(f64, f64)| {
        resolve_time(
            &pwc(),
            &InitialFamily::Linear { a: p.0, b: p.1 },
            templates,
            200.0,
            DEFAULT_MESH,
        )
        .unwrap()
        .label
    };
    let labels: Vec<_> = pts.iter().map(label).collect();
    let k = (0..40)
        .find(|&k| labels[k].is_some() && labels[k + 1].is_some() && labels[k] != labels[k + 1])
        .expect("segment crosses a basin boundary");
    (pts[k], pts[k + 1])
}

#[test]
fn quadratic_map_iterates_approach_the_arcsine_density() {
    let mut d = Density1D::uniform(0.0, 1.0, 1000).unwrap();
    for _ in 0..6 {
        d = quadratic_map_pf(&d).unwrap();
    }
    let mids = d.midpoints();
    let err: f64 = (0..d.bins())
        .filter(|&i| mids[i] > 0.05 && mids[i] < 0.95)
        .map(|i| {
            let exact = 1.0 / (std::f64::consts::PI * (mids[i] * (1.0 - mids[i])).sqrt());
            (d.density()[i] - exact).abs() * d.width(i)
        })
        .sum();
    assert!(err < 0.05, "L1 = {err}");
}

#[test]
fn linear_delay_pushes_a_uniform_density_to_a_scaled_uniform() {
    // x(t) = x0 (1 + a (t - 1)) on the first delay interval
    for (a, t) in [(1.0, 1.5), (-0.5, 1.8)] {
        let rho0 = Density1D::uniform(0.0, 1.0, 1).unwrap();
        let out = explicit_pf_linear(&rho0, a, t).unwrap();
        let scale: f64 = 1.0 + a * (t - 1.0);
        let (lo, hi) = out.support().unwrap();
        assert!((lo - 0.0f64.min(scale)).abs() < 1e-9 && (hi - scale.max(0.0)).abs() < 1e-9);
        let mids = out.midpoints();
        for (i, &m) in mids.iter().enumerate() {
            if m > lo && m < hi {
                assert!((out.density()[i] - 1.0 / scale.abs()).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn ensemble_matches_the_closed_form_on_the_first_interval() {
    let sys = DelaySystem::linear(1.0).unwrap();
    let rho0 = Density1D::uniform(0.0, 1.0, 1).unwrap();
    let edges = uniform_edges(0.0, 1.5, 30);
    let ens = sample_ensemble(
        &sys,
        &rho0,
        FamilyKind::Constant,
        1.5,
        40_000,
        7,
        &edges,
        64,
    )
    .unwrap();
    assert_eq!(ens.retained, 40_000);
    for (i, &d) in ens.density.density().iter().enumerate() {
        let exact: f64 = 1.0 / 1.5;
        let sigma = (exact * 0.05 / 40_000.0).sqrt() / 0.05;
        assert!((d - exact).abs() < 5.0 * sigma, "bin {i}: {d}");
    }
}

#[test]
fn strategies_give_identical_results() {
    let sys = DelaySystem::mackey_glass(2.0, 4.0, 10.0).unwrap();
    let rho0 = Density1D::uniform(0.3, 1.3, 1).unwrap();
    let edges = uniform_edges(0.0, 2.0, 40);
    let run = |s| {
        with_strategy(s, || {
            sample_ensemble(&sys, &rho0, FamilyKind::Constant, 5.0, 2000, 11, &edges, 64).unwrap()
        })
    };
    assert_eq!(run(Strategy::Sequential), run(Strategy::Parallel));

    let templates = pwc_templates();
    let rect = BasinRect::new(0.0, 3.0, -4.0, 4.0).unwrap();
    let raster = |s| {
        with_strategy(s, || {
            basin_raster(&pwc(), rect, 8, 8, 150.0, &templates, DEFAULT_MESH).unwrap()
        })
    };
    let (a, b) = (raster(Strategy::Sequential), raster(Strategy::Parallel));
    assert_eq!(a, b);
    assert!(a.distinct_labels().len() >= 2);
}

#[test]
fn bisection_returns_a_straddling_pair() {
    let sys = pwc();
    let templates = pwc_templates();
    let (pa, pb) = straddling_points(&templates);
    let b = boundary_bisect(&sys, pa, pb, &templates, 1e-10, 200.0, DEFAULT_MESH).unwrap();
    assert_ne!(b.label_a, b.label_b);
    assert!(b.gap() < 1e-10);
    for (p, label) in [(b.a, b.label_a), (b.b, b.label_b)] {
        let s = resolve_time(
            &sys,
            &InitialFamily::Linear { a: p.0, b: p.1 },
            &templates,
            400.0,
            DEFAULT_MESH,
        )
        .unwrap();
        assert_eq!(s.label, Some(label));
    }
}

fn check_pseudo_orbit(
    sys: &DelaySystem,
    region: &EscapeRegion,
    run: &SaddleRun,
    params: &StaggerParams,
    n: usize,
) {
    assert_eq!(run.len(), n);
    assert!(run.min_escape_time().unwrap() > params.t_star);
    for k in 0..run.len() - 1 {
        let image = time_one_map(sys, &run.states[k]).unwrap();
        let gap = image.sup_distance(&run.states[k + 1]);
        assert!(gap < params.eps, "step {k}: gap {gap}");
        assert!((gap - run.stagger_norms[k + 1]).abs() < 1e-12);
    }
    for (k, t) in run.escape_times.iter().enumerate().step_by(15) {
        assert_eq!(
            Some(escape_time(sys, &run.states[k], region, params.t_cap)),
            *t
        );
    }
}

#[test]
fn modified_stagger_run_is_a_pseudo_orbit_above_the_floor() {
    let sys = pwc();
    let templates = pwc_templates();
    let region = region_from_templates(&templates, 0.25, (-10.0, 10.0)).unwrap();
    let (pa, pb) = straddling_points(&templates);
    let b = boundary_bisect(&sys, pa, pb, &templates, 1e-12, 200.0, DEFAULT_MESH).unwrap();
    let x0 = initial_history(&InitialFamily::Linear { a: b.a.0, b: b.a.1 }, DEFAULT_MESH).unwrap();
    let params = StaggerParams::new(20, 1e-4, 5);
    assert!(escape_time(&sys, &x0, &region, params.t_cap) > params.t_star);
    let run = modified_stagger_step(&sys, &region, &x0, &params, 60).unwrap();
    check_pseudo_orbit(&sys, &region, &run, &params, 60);
}

#[test]
fn stagger_run_is_a_pseudo_orbit_above_the_floor() {
    let sys = DelaySystem::mackey_glass(1.0 / 0.1625, 12.0 / 0.1625, 10.0).unwrap();
    let mut cands = Vec::new();
    for i in 0..12 {
        for j in 0..12 {
            cands.push(InitialFamily::Linear {
                a: -2.0 + (i as f64 + 0.5) / 3.0,
                b: -2.0 + (j as f64 + 0.5) / 3.0,
            });
        }
    }
    let templates = discover_templates(&sys, &cands, 300.0, 20.0, DEFAULT_MESH).unwrap();
    let region = region_from_templates(&templates, 0.25, (-10.0, 10.0)).unwrap();
    let pts: Vec<(f64, f64)> = (0..=40).map(|k| (0.4 + 0.005 * k as f64, -0.6)).collect();
    let labels: Vec<_> = pts
        .iter()
        .map(|p| {
            resolve_time(
                &sys,
                &InitialFamily::Linear { a: p.0, b: p.1 },
                &templates,
                200.0,
                DEFAULT_MESH,
            )
            .unwrap()
            .label
        })
        .collect();
    let k = (0..40)
        .find(|&k| labels[k].is_some() && labels[k + 1].is_some() && labels[k] != labels[k + 1])
        .unwrap();
    let b = boundary_bisect(
        &sys,
        pts[k],
        pts[k + 1],
        &templates,
        1e-12,
        200.0,
        DEFAULT_MESH,
    )
    .unwrap();
    let mut x0 =
        initial_history(&InitialFamily::Linear { a: b.a.0, b: b.a.1 }, DEFAULT_MESH).unwrap();
    for _ in 0..10 {
        x0 = time_one_map(&sys, &x0).unwrap();
    }
    let params = StaggerParams::new(60, 1e-3, 1);
    assert!(escape_time(&sys, &x0, &region, params.t_cap) > params.t_star);
    let run = stagger_step(&sys, &region, &x0, &params, 100).unwrap();
    check_pseudo_orbit(&sys, &region, &run, &params, 100);
    assert!(!run.events.is_empty());
}
