//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured quantities, then asserts.
//!
//! The expensive flows are computed once and shared between tests.

use lmcf_core::blowup::{
    density_ratio_n, density_ratio_profile, fit_lawlor, fit_plane_pair, gaussian_density, graph_over_pair,
    huisken_check, max_available_k, normalizing_rotation, rescale, sandwich_check, type_ii_select,
    RescalingSpec, SpacetimePoint, Window,
};
use lmcf_core::curve::{curves_intersect, lagrangian_angle_field, self_intersects, ProfileCurve};
use lmcf_core::geometry::{directed_hausdorff, hausdorff_in_ball, wrap_angle, HermiteSpline};
use lmcf_core::models::{
    bumped_line, lawlor_margin_for_radius, lawlor_profile, neves_margin_for_radius, neves_profile,
    plane_pair_profile, radial_line,
};
use lmcf_core::solver::{angle_at_ray, detect_singularity, evolve, sector_area, Snapshot};
use lmcf_core::{curvature_field, FlowTrajectory, Point, SingularityReport, SolverParams, Termination, TypeClass};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const H: f64 = 0.05;
const RADIUS: f64 = 22.0;
const BC: f64 = 18.0;
const BETA: f64 = 2.0 * PI / 3.0;
const DIVERGENCE: f64 = 10.0;

fn verdict(criterion: u32, pass: bool, detail: String) {
    println!("criterion {criterion}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

struct Run {
    traj: FlowTrajectory,
    wall: Duration,
}

fn timed(initial: ProfileCurve, params: SolverParams) -> Run {
    let start = Instant::now();
    let traj = evolve(initial, params).expect("flow runs");
    Run { traj, wall: start.elapsed() }
}

fn neves_params(a_stop: f64) -> SolverParams {
    SolverParams {
        h: H,
        a_stop,
        curvature_resolution: 2.0,
        dt_cfl: 0.25,
        t_max: 10.0,
        bc_radius: BC,
        snapshot_every: 0.05,
        a2_snapshot_factor: 1.2,
        ..SolverParams::default()
    }
}

fn neves_run(beta: f64, a_stop: f64) -> Run {
    let c = neves_profile(beta, 2, neves_margin_for_radius(beta, RADIUS), H).unwrap();
    timed(c, neves_params(a_stop))
}

/// Neves `β = 2π/3`, `n = 2`, run to `|A| = 5000`.
fn run2() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| neves_run(BETA, 5000.0))
}

fn run2_report() -> &'static SingularityReport {
    static R: OnceLock<SingularityReport> = OnceLock::new();
    R.get_or_init(|| detect_singularity(&run2().traj, DIVERGENCE))
}

fn run_055() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| neves_run(0.55 * PI, 1000.0))
}

fn run_070() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| neves_run(0.7 * PI, 1000.0))
}

fn stationary_params() -> SolverParams {
    SolverParams { h: H, t_max: 1.0, bc_radius: BC, snapshot_every: 0.25, ..SolverParams::default() }
}

fn lawlor_initial() -> ProfileCurve {
    lawlor_profile(1.0, FRAC_PI_2, 2, lawlor_margin_for_radius(1.0, 2, RADIUS), H).unwrap()
}

fn lawlor_run() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| timed(lawlor_initial(), stationary_params()))
}

fn radial_run() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| timed(radial_line(0.4, 2, RADIUS, H).unwrap(), stationary_params()))
}

fn bump_run() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| {
        let c = bumped_line(0.3, 2, RADIUS, H, 0.3, 2.0, 1.0).unwrap();
        let params =
            SolverParams { h: H, t_max: 10.0, bc_radius: BC, snapshot_every: 0.25, ..SolverParams::default() };
        timed(c, params)
    })
}

/// Inner partner of run (2) for the avoidance test: Neves `β = 0.55π`,
/// rotated into the sector of run (2) and pushed outwards by a factor 2.
fn nested_initial() -> ProfileCurve {
    let beta = 0.55 * PI;
    let c = neves_profile(beta, 2, neves_margin_for_radius(beta, RADIUS / 2.0), H).unwrap();
    c.rotated(0.5 * (BETA - beta)).unwrap().scaled(2.0).unwrap()
}

fn nested_run() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| {
        let t_end = run2().traj.last().t;
        timed(nested_initial(), SolverParams { t_max: t_end, ..neves_params(1000.0) })
    })
}

/// Points of the Hermite spline through `nodes`, `per` per segment.
fn densify(nodes: &[Point], per: usize) -> Vec<Point> {
    let spline = HermiteSpline::new(nodes, false);
    let mut out = Vec::with_capacity(spline.segments() * per + 1);
    for j in 0..spline.segments() {
        for i in 0..per {
            out.push(spline.eval_local(j, i as f64 / per as f64).0);
        }
    }
    out.push(*nodes.last().unwrap());
    out
}

fn convergence_curve(h: f64) -> Vec<Point> {
    let c = neves_profile(BETA, 2, neves_margin_for_radius(BETA, RADIUS), h).unwrap();
    let params = SolverParams { h, t_max: 1.0, snapshot_every: 1.0, ..neves_params(1e4) };
    evolve(c, params).unwrap().last().curve.nodes().to_vec()
}

fn theta_osc_monotone(traj: &FlowTrajectory, tol: f64) -> Option<(usize, f64)> {
    traj.series.windows(2).enumerate().find_map(|(i, w)| {
        let rise = w[1].theta_osc - w[0].theta_osc;
        (rise > tol).then_some((i, rise))
    })
}

fn first_self_intersection(traj: &FlowTrajectory) -> Option<f64> {
    traj.snapshots.iter().find(|s| !self_intersects(&s.curve, true).is_empty()).map(|s| s.t)
}

#[test]
fn criterion_01_special_lagrangians_are_stationary() {
    let lawlor = lawlor_run();
    let radial = radial_run();
    let d_lawlor = hausdorff_in_ball(lawlor_initial().nodes(), lawlor.traj.last().curve.nodes(), 5.0);
    let line0 = radial_line(0.4, 2, RADIUS, H).unwrap();
    let d_radial = hausdorff_in_ball(line0.nodes(), radial.traj.last().curve.nodes(), 5.0);
    let wall = lawlor.wall.max(radial.wall);
    let pass = lawlor.traj.last().t == 1.0
        && radial.traj.last().t == 1.0
        && d_lawlor <= 5.0 * H * H
        && d_radial <= 1e-12
        && wall < Duration::from_secs(60);
    verdict(
        1,
        pass,
        format!(
            "lawlor d_H={d_lawlor:.3e} (bound {:.3e}), radial d_H={d_radial:.1e}, wall {:.1}s",
            5.0 * H * H,
            wall.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_neves_flows_become_singular_at_the_origin() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (beta, run) in [(BETA, run2()), (0.55 * PI, run_055()), (0.7 * PI, run_070())] {
        let report = detect_singularity(&run.traj, DIVERGENCE);
        let dist = report.location.norm();
        let ok = run.traj.termination == Some(Termination::CurvatureStop)
            && report.t_est.is_finite()
            && dist <= 10.0 * H
            && run.wall < Duration::from_secs(300);
        pass &= ok;
        detail.push(format!(
            "β/π={:.3}: T={:.5} |x|={dist:.2e} wall {:.0}s",
            beta / PI,
            report.t_est,
            run.wall.as_secs_f64()
        ));
    }
    verdict(2, pass, detail.join("; "));
}

#[test]
fn criterion_03_singularity_is_type_ii() {
    let r = run2_report();
    let pass = r.fit_exponent > 1.2 && r.product_growth > 10.0 && r.type_class == TypeClass::TypeIILike;
    verdict(
        3,
        pass,
        format!(
            "q={:.4} growth={:.1} class={:?} window={:?}",
            r.fit_exponent, r.product_growth, r.type_class, r.fit_window
        ),
    );
}

fn type_i_fits() -> Vec<(f64, lmcf_core::ModelFit, [f64; 2])> {
    let report = run2_report();
    let factors: Vec<f64> = (0..=8).map(|i| 2f64.powi(i)).collect();
    let spec = RescalingSpec::type_i(report.t_est, &factors, -1.0).unwrap();
    rescale(&run2().traj, &spec)
        .into_iter()
        .map(|rs| {
            let curve = rs.curve.unwrap_or_else(|| panic!("λ={} unavailable: {:?}", rs.lambda, rs.flag));
            let fit = fit_plane_pair(&curve, Window::Annulus { inner: 0.25, outer: 2.0 }).unwrap();
            let ratios = [fit.alpha1, fit.alpha2]
                .map(|a| density_ratio_profile(&curve, Point::from_polar(1.0, a), 0.5).ratio);
            (rs.lambda, fit, ratios)
        })
        .collect()
}

#[test]
fn criterion_04_type_i_blowup_is_a_plane_pair() {
    let fits = type_i_fits();
    let (lambda, last, ratios) = fits.last().unwrap();
    let angle_err = (last.inter_angle / FRAC_PI_2 - 1.0).abs();
    let monotone = fits.windows(2).all(|w| w[1].1.residual < w[0].1.residual);
    let density_err = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let residuals: Vec<String> = fits.iter().map(|f| format!("{:.3}", f.1.residual)).collect();
    let pass = angle_err < 0.01 && monotone && density_err < 0.02;
    verdict(
        4,
        pass,
        format!(
            "λ={lambda}: angle {:.5} (rel {angle_err:.2e}), residuals [{}], density {:.4}/{:.4}",
            last.inter_angle,
            residuals.join(" "),
            ratios[0],
            ratios[1]
        ),
    );
}

#[test]
fn criterion_05_type_ii_blowup_is_a_lawlor_neck() {
    let report = run2_report();
    let traj = &run2().traj;
    let k = max_available_k(traj, report.t_est).unwrap();
    let sel = type_ii_select(traj, report.t_est, k).unwrap();
    let spec = RescalingSpec::type_ii(&[sel], 0.0).unwrap();
    let rs = rescale(traj, &spec).pop().unwrap();
    let curve = rs.curve.unwrap();
    let max_a2 = curvature_field(&curve).unwrap().max_a2();
    let fit = fit_lawlor(&curve, Window::Ball { radius: 3.0 }).unwrap();
    let type_i_theta = type_i_fits().last().unwrap().1.theta_bar;
    let theta_err = wrap_angle(fit.theta_bar - type_i_theta).abs();
    let pass = fit.residual < 0.05 && (max_a2 - 1.0).abs() <= 0.1 && theta_err < 0.02;
    verdict(
        5,
        pass,
        format!(
            "k={k} λ={:.1}: residual {:.3e}, B={:.4}, max A²={max_a2:.4}, θ̄ {:.5} vs {:.5}",
            rs.lambda,
            fit.residual,
            fit.b.unwrap_or(f64::NAN),
            fit.theta_bar,
            type_i_theta
        ),
    );
}

#[test]
fn criterion_06_intermediate_scales_are_graphical() {
    let report = run2_report();
    let traj = &run2().traj;
    let k_max = max_available_k(traj, report.t_est).unwrap();
    let sels: Vec<_> =
        [k_max / 64, k_max / 16, k_max / 4, k_max].iter().map(|&k| type_ii_select(traj, report.t_est, k).unwrap()).collect();
    let lambdas: Vec<f64> = sels.iter().map(|s| s.a.sqrt()).collect();
    let spec = RescalingSpec::intermediate(&sels, &lambdas, report.t_est, 0.0).unwrap();
    let window = Window::Annulus { inner: 0.1, outer: 2.0 };
    let mut norms = Vec::new();
    let mut sandwich_ok = true;
    let mut detail = Vec::new();
    for rs in rescale(traj, &spec) {
        let curve = rs.curve.unwrap();
        let pair = fit_plane_pair(&curve, window).unwrap();
        let g = graph_over_pair(&curve, &pair, window);
        let normalized = curve.rotated(normalizing_rotation(pair.theta_bar, 2)).unwrap();
        let theta = lagrangian_angle_field(&normalized).unwrap().theta;
        let eps = normalized
            .nodes()
            .iter()
            .zip(&theta)
            .filter(|(z, _)| z.norm() <= 2.0)
            .map(|(_, t)| wrap_angle(t - FRAC_PI_2).abs())
            .fold(0.0, f64::max);
        let sw = sandwich_check(&normalized, eps, Window::Ball { radius: 2.0 }, 1e-9).unwrap();
        sandwich_ok &= sw.checked > 0 && sw.violations.is_empty();
        detail.push(format!("λ={:.1}: sup {:.2e} der {:.2e} ε {eps:.3}", rs.lambda, g.sup, g.derivative));
        norms.push(g);
    }
    let graphical = norms.iter().all(|g| g.graphical);
    let decreasing = norms.windows(2).all(|w| w[1].sup < w[0].sup && w[1].derivative < w[0].derivative);
    verdict(
        6,
        graphical && decreasing && sandwich_ok,
        format!("graphical={graphical} decreasing={decreasing} sandwich={sandwich_ok}; {}", detail.join("; ")),
    );
}

#[test]
fn criterion_07_monotonicity_and_density() {
    let report = run2_report();
    let traj = &run2().traj;
    let center = SpacetimePoint { x: report.location, t: report.t_est };
    let r_max = report.t_est.sqrt() * 0.99;
    let r_min = 0.01;
    let grid: Vec<f64> = (0..20).map(|i| r_min * (r_max / r_min).powf(i as f64 / 19.0)).collect();
    let huisken = huisken_check(traj, center, &grid, 1e-3, 2.0).unwrap();
    let all_probed = huisken.probes.iter().all(|p| p.theta.is_some());

    let o = Point::new(0.0, 0.0);
    let line = radial_line(0.3, 2, RADIUS, H).unwrap();
    let plane_err = (gaussian_density(&line, o, 0.8).unwrap() - 1.0).abs();
    let pair = plane_pair_profile(FRAC_PI_2, 2, RADIUS, H).unwrap();
    let pair_theta: f64 = pair.rays.iter().map(|c| gaussian_density(c, o, 0.8).unwrap()).sum();
    let pair_err = (pair_theta - 2.0).abs();
    let (d, r) = (0.6, 0.7);
    let offset = Point::from_polar(d, 0.3 + FRAC_PI_2);
    let expected = (-d * d / (4.0 * r * r)).exp();
    let offset_err = (gaussian_density(&line, offset, r).unwrap() - expected).abs();
    let cone_1d: f64 = pair.rays.iter().map(|c| density_ratio_profile(c, o, 1.5).ratio).sum::<f64>() / 2.0;
    let cone_nd: f64 = pair.rays.iter().map(|c| density_ratio_n(c, 1.5)).sum();
    let cone_err = (2.0 * cone_1d - cone_nd).abs();

    let thetas: Vec<f64> = huisken.probes.iter().filter_map(|p| p.theta).collect();
    let pass = all_probed
        && huisken.violations.is_empty()
        && huisken.scale_invariance_error < 1e-6
        && plane_err < 1e-6
        && pair_err < 1e-6
        && offset_err < 1e-6
        && cone_err < 1e-9;
    verdict(
        7,
        pass,
        format!(
            "Θ {:.4}..{:.4} violations {}, scale err {:.1e}, plane {plane_err:.1e}, pair {pair_err:.1e}, offset {offset_err:.1e}, cone {cone_err:.1e}",
            thetas.first().unwrap(),
            thetas.last().unwrap(),
            huisken.violations.len(),
            huisken.scale_invariance_error
        ),
    );
}

#[test]
fn criterion_08_long_time_existence_through_the_origin() {
    let run = bump_run();
    let traj = &run.traj;
    let initial = traj.series[0].max_a2;
    let late = traj.series.iter().filter(|e| e.t >= 1.0).map(|e| e.max_a2).fold(0.0, f64::max);
    let pass = traj.termination == Some(Termination::Horizon)
        && traj.last().t == 10.0
        && late <= 2.0 * initial
        && run.wall < Duration::from_secs(300);
    verdict(
        8,
        pass,
        format!(
            "reached t={} ({:?}), max A² after t=1 {late:.3e} vs initial {initial:.3e}, wall {:.0}s",
            traj.last().t,
            traj.termination,
            run.wall.as_secs_f64()
        ),
    );
}

/// `dA/dt` on the regular snapshot grid by a five-point stencil, against
/// `θ(ε) - θ(β-ε)` at the middle snapshot. Returns the worst relative gap and
/// the rate at the first usable time.
fn area_law(snaps: &[&Snapshot], eps: f64, dt: f64) -> (f64, f64) {
    let area = |s: &Snapshot| sector_area(&s.curve, eps, BETA - eps).unwrap();
    let mut worst: f64 = 0.0;
    let mut first = f64::NAN;
    for i in 2..snaps.len() - 2 {
        let rate = (8.0 * (area(snaps[i + 1]) - area(snaps[i - 1])) - (area(snaps[i + 2]) - area(snaps[i - 2])))
            / (12.0 * dt);
        let c = &snaps[i].curve;
        let law = angle_at_ray(c, eps).unwrap() - angle_at_ray(c, BETA - eps).unwrap();
        worst = worst.max(((rate - law) / law).abs());
        if first.is_nan() {
            first = rate;
        }
    }
    (worst, first)
}

#[test]
fn criterion_09_angle_maximum_principle_and_area_law() {
    let runs: [(&str, &FlowTrajectory); 7] = [
        ("lawlor", &lawlor_run().traj),
        ("radial", &radial_run().traj),
        ("run2", &run2().traj),
        ("0.55π", &run_055().traj),
        ("0.7π", &run_070().traj),
        ("bump", &bump_run().traj),
        ("nested", &nested_run().traj),
    ];
    let mut osc_ok = true;
    let mut bad = Vec::new();
    for (name, traj) in runs {
        if let Some((i, rise)) = theta_osc_monotone(traj, 1e-3) {
            osc_ok = false;
            bad.push(format!("{name}@{i}+{rise:.1e}"));
        }
    }

    let dt = 0.05;
    let grid: Vec<&Snapshot> = run2()
        .traj
        .snapshots
        .iter()
        .filter(|s| ((s.t / dt).round() * dt - s.t).abs() < 1e-9)
        .collect();
    let eps_values = [0.2, 0.1, 0.05, 0.025];
    let laws: Vec<(f64, f64)> = eps_values.iter().map(|&e| area_law(&grid, e, dt)).collect();
    let worst = laws.iter().map(|l| l.0).fold(0.0, f64::max);
    // the rate is smooth in ε; extrapolate the two smallest linearly to ε = 0
    let (r1, r2) = (laws[2].1, laws[3].1);
    let limit = 2.0 * r2 - r1;
    let target = PI - 2.0 * BETA;
    let limit_err = (limit / target - 1.0).abs();
    let pass = osc_ok && worst < 1e-3 && limit_err < 0.02;
    verdict(
        9,
        pass,
        format!(
            "θ-osc monotone={osc_ok} {bad:?}; area law worst rel {worst:.2e} over ε={eps_values:?}; ε→0 rate {limit:.5} vs {target:.5} (rel {limit_err:.2e})"
        ),
    );
}

#[test]
fn criterion_10_embeddedness_and_avoidance() {
    let runs: [(&str, &FlowTrajectory); 7] = [
        ("lawlor", &lawlor_run().traj),
        ("radial", &radial_run().traj),
        ("run2", &run2().traj),
        ("0.55π", &run_055().traj),
        ("0.7π", &run_070().traj),
        ("bump", &bump_run().traj),
        ("nested", &nested_run().traj),
    ];
    let crossings: Vec<String> =
        runs.iter().filter_map(|(name, t)| first_self_intersection(t).map(|time| format!("{name}@{time}"))).collect();

    let outer = &run2().traj;
    let inner = &nested_run().traj;
    let initially_disjoint = curves_intersect(&outer.snapshots[0].curve, &inner.snapshots[0].curve).is_empty();
    let mut common = 0;
    let mut meetings = Vec::new();
    for s in &inner.snapshots {
        if let Some(o) = outer.snapshots.iter().find(|o| o.t == s.t) {
            common += 1;
            if !curves_intersect(&o.curve, &s.curve).is_empty() {
                meetings.push(s.t);
            }
        }
    }
    let pass = crossings.is_empty() && initially_disjoint && common > 10 && meetings.is_empty();
    verdict(
        10,
        pass,
        format!(
            "self-intersections {crossings:?}; nested pair disjoint at start={initially_disjoint}, {common} common times, meetings {meetings:?}"
        ),
    );
}

#[test]
fn criterion_11_second_order_convergence() {
    let reference = densify(&convergence_curve(H / 4.0), 8);
    let err = |h: f64| {
        let nodes: Vec<Point> = convergence_curve(h).into_iter().filter(|z| z.norm() <= 5.0).collect();
        directed_hausdorff(&nodes, &reference)
    };
    let (coarse, fine) = (err(2.0 * H), err(H));
    let ratio = coarse / fine;
    verdict(
        11,
        (3.0..=5.0).contains(&ratio),
        format!("t∈[0,1]: error {coarse:.3e} at h={}, {fine:.3e} at h={H}, ratio {ratio:.3}", 2.0 * H),
    );
}
