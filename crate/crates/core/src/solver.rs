//! Explicit integration of the equivariant flow `∂γ/∂t = (k - (n-1)p) ν`, and
//! detection of the singular time from the curvature history.

use crate::curve::{
    curvature_field, lagrangian_angle_field, resample_graded, CurvatureField, CurveError,
    ProfileCurve, Symmetry,
};
use crate::geometry::{cross, gauss_legendre8, length_in_disk, wrap_angle, HermiteSpline, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Relative node spacing: the local spacing is `h` times the local length
    /// scale `min(max(|γ|, r_floor), curvature_resolution / |A|)`.
    pub h: f64,
    /// `c` in `Δt = c·σ²/(1 + max|A|²·σ²)`, `σ` the smallest segment.
    pub dt_cfl: f64,
    /// Stop once `max |A| ≥ a_stop`.
    pub a_stop: f64,
    pub dt_min: f64,
    pub t_max: f64,
    pub regrid_every: u64,
    /// Nodes beyond this radius are frozen, with a `C¹` blend over
    /// `[R_bc, 1.1·R_bc]`.
    pub bc_radius: f64,
    /// Time between regular snapshots.
    pub snapshot_every: f64,
    /// An extra snapshot is taken whenever `max |A|²` has grown by this factor
    /// since the previous one; values `≤ 1` disable this.
    pub a2_snapshot_factor: f64,
    pub max_spacing: f64,
    pub curvature_resolution: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            h: 0.05,
            dt_cfl: 0.2,
            a_stop: 1e3,
            dt_min: 1e-16,
            t_max: 1.0,
            regrid_every: 10,
            bc_radius: 10.0,
            snapshot_every: 0.1,
            a2_snapshot_factor: 1.25,
            max_spacing: 0.5,
            curvature_resolution: 1.0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |field: &'static str, reason: &'static str| {
            Err(SolverError::InvalidParams { field, reason })
        };
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.h) {
            return bad("h", "must be positive");
        }
        if !(self.dt_cfl > 0.0 && self.dt_cfl <= 0.25) {
            return bad("dt_cfl", "must lie in (0, 0.25]");
        }
        if !finite_pos(self.a_stop) {
            return bad("a_stop", "must be positive");
        }
        if !finite_pos(self.dt_min) {
            return bad("dt_min", "must be positive");
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return bad("t_max", "must be finite and non-negative");
        }
        if self.regrid_every == 0 {
            return bad("regrid_every", "must be at least 1");
        }
        if !finite_pos(self.bc_radius) {
            return bad("bc_radius", "must be positive");
        }
        if !(self.snapshot_every >= 0.0) {
            return bad("snapshot_every", "must be non-negative");
        }
        if !finite_pos(self.max_spacing) {
            return bad("max_spacing", "must be positive");
        }
        if !finite_pos(self.curvature_resolution) {
            return bad("curvature_resolution", "must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    CurvatureStop,
    StepUnderflow,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Horizon => "horizon",
            Termination::CurvatureStop => "curvature_stop",
            Termination::StepUnderflow => "step_underflow",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub curve: ProfileCurve,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub t: f64,
    pub max_a2: f64,
    pub min_abs_gamma: f64,
    pub theta_osc: f64,
    pub length_in_ball: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<SeriesEntry>,
    pub termination: Option<Termination>,
    /// Radius of the ball used for `length_in_ball`.
    pub ball_radius: f64,
}

impl FlowTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    /// Curve at time `t` by blending the bracketing snapshots: nodes of the
    /// later snapshot are moved towards their closest points on the earlier
    /// one. `None` outside the snapshot range.
    pub fn curve_at(&self, t: f64) -> Option<ProfileCurve> {
        let first = self.snapshots.first()?;
        let last = self.last();
        if t < first.t || t > last.t {
            return None;
        }
        let j = self.snapshots.partition_point(|s| s.t < t);
        let hi = &self.snapshots[j];
        if hi.t == t || j == 0 {
            return Some(hi.curve.clone());
        }
        let lo = &self.snapshots[j - 1];
        let w = (t - lo.t) / (hi.t - lo.t);
        let target = lo.curve.nodes();
        let nodes = hi
            .curve
            .nodes()
            .iter()
            .map(|&p| {
                let q = closest_point_on_polyline(p, target);
                q + (p - q) * w
            })
            .collect();
        hi.curve.with_nodes(nodes).ok()
    }
}

fn closest_point_on_polyline(p: Point, poly: &[Point]) -> Point {
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for w in poly.windows(2) {
        let d = w[1] - w[0];
        let len2 = d.norm_sqr();
        let t = if len2 > 0.0 { (crate::geometry::dot(p - w[0], d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = w[0] + d * t;
        let dist = (p - q).norm_sqr();
        if dist < best_d {
            best_d = dist;
            best = q;
        }
    }
    best
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: &'static str },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("non-finite node at t = {t}")]
    NonFinite { t: f64, partial: Box<FlowTrajectory> },
    #[error("curve broke down at t = {t}: {source}")]
    Breakdown { t: f64, source: CurveError, partial: Box<FlowTrajectory> },
}

/// Curvature levels below this are rounding noise on straight pieces.
const A2_NOISE: f64 = 1e-10;

/// Weight applied to the velocity at radius `r`.
fn boundary_weight(r: f64, bc_radius: f64) -> f64 {
    if r <= bc_radius {
        1.0
    } else if r >= 1.1 * bc_radius {
        0.0
    } else {
        let x = (r - bc_radius) / (0.1 * bc_radius);
        1.0 - x * x * (3.0 - 2.0 * x)
    }
}

/// Nodal velocity `H ν`, with the origin node and both ends held fixed and
/// the far field frozen past `bc_radius`.
pub fn rhs(curve: &ProfileCurve, bc_radius: f64) -> Result<Vec<Point>, CurveError> {
    let field = curvature_field(curve)?;
    Ok(velocity_from_field(curve, &field, bc_radius))
}

fn velocity_from_field(curve: &ProfileCurve, field: &CurvatureField, bc_radius: f64) -> Vec<Point> {
    let z = curve.nodes();
    let m = z.len();
    let mut v: Vec<Point> = (0..m)
        .map(|j| field.normal[j] * (field.h[j] * boundary_weight(z[j].norm(), bc_radius)))
        .collect();
    v[0] = Point::new(0.0, 0.0);
    v[m - 1] = Point::new(0.0, 0.0);
    v
}

/// Target spacing at each node for the graded mesh.
pub fn target_spacing(curve: &ProfileCurve, field: &CurvatureField, params: &SolverParams) -> Vec<f64> {
    let z = curve.nodes();
    let r_floor = match curve.symmetry() {
        Symmetry::ThroughOrigin => 1.0,
        Symmetry::TwoComponent => 0.0,
    };
    let floor = params.h / params.a_stop;
    let mut sigma: Vec<f64> = z
        .iter()
        .zip(&field.a2)
        .map(|(p, &a2)| {
            let curv_scale = if a2 > 0.0 { params.curvature_resolution / a2.sqrt() } else { f64::INFINITY };
            (params.h * p.norm().max(r_floor).min(curv_scale)).clamp(floor, params.max_spacing)
        })
        .collect();
    // limit the grading to slope h along the curve
    let arc = curve.arc_lengths();
    for j in 1..sigma.len() {
        sigma[j] = sigma[j].min(sigma[j - 1] + params.h * (arc[j] - arc[j - 1]));
    }
    for j in (0..sigma.len() - 1).rev() {
        sigma[j] = sigma[j].min(sigma[j + 1] + params.h * (arc[j + 1] - arc[j]));
    }
    sigma
}

/// Everything needed to continue a run exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorState {
    pub curve: ProfileCurve,
    pub t: f64,
    pub steps: u64,
    /// Index of the next regular snapshot time `k · snapshot_every`.
    pub next_snapshot: u64,
    pub snapshot_pending: bool,
    pub last_snapshot_a2: f64,
    pub last_snapshot_t: Option<f64>,
    pub snapshots_taken: u64,
    pub termination: Option<Termination>,
}

/// Result of one call to [`Integrator::advance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Advance {
    /// A snapshot with this index was appended.
    Snapshot(usize),
    /// The run ended; the final snapshot (if new) has been appended.
    Finished(Termination),
}

pub struct Integrator {
    params: SolverParams,
    state: IntegratorState,
    trajectory: FlowTrajectory,
}

impl Integrator {
    pub fn new(initial: ProfileCurve, params: SolverParams) -> Result<Self, SolverError> {
        params.validate()?;
        curvature_field(&initial)?;
        let state = IntegratorState {
            curve: initial,
            t: 0.0,
            steps: 0,
            next_snapshot: 1,
            snapshot_pending: true,
            last_snapshot_a2: 0.0,
            last_snapshot_t: None,
            snapshots_taken: 0,
            termination: None,
        };
        Ok(Self::from_state(state, params))
    }

    /// Continues from a saved state; the trajectory starts empty.
    pub fn from_state(state: IntegratorState, params: SolverParams) -> Self {
        let ball_radius = params.bc_radius;
        Integrator {
            params,
            state,
            trajectory: FlowTrajectory { snapshots: Vec::new(), series: Vec::new(), termination: None, ball_radius },
        }
    }

    pub fn state(&self) -> &IntegratorState {
        &self.state
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn trajectory(&self) -> &FlowTrajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> FlowTrajectory {
        self.trajectory
    }

    fn record(&mut self, field: &CurvatureField) {
        let curve = &self.state.curve;
        let theta_osc = lagrangian_angle_field(curve).map_or(f64::NAN, |a| a.oscillation());
        let length_in_ball: f64 = curve
            .full_profile()
            .iter()
            .map(|poly| length_in_disk(poly, Point::new(0.0, 0.0), self.params.bc_radius))
            .sum();
        self.trajectory.series.push(SeriesEntry {
            t: self.state.t,
            max_a2: field.max_a2(),
            min_abs_gamma: curve.min_radius(),
            theta_osc,
            length_in_ball,
        });
        self.trajectory.snapshots.push(Snapshot { t: self.state.t, curve: curve.clone() });
        self.state.last_snapshot_a2 = field.max_a2();
        self.state.last_snapshot_t = Some(self.state.t);
        self.state.snapshot_pending = false;
        self.state.snapshots_taken += 1;
    }

    fn finish(&mut self, field: &CurvatureField, why: Termination) -> Advance {
        if self.state.last_snapshot_t != Some(self.state.t) {
            self.record(field);
        }
        self.state.termination = Some(why);
        self.trajectory.termination = Some(why);
        Advance::Finished(why)
    }

    fn fail_curve(&self, source: CurveError) -> SolverError {
        let partial = Box::new(self.trajectory.clone());
        match source {
            CurveError::NonFinite(_) => SolverError::NonFinite { t: self.state.t, partial },
            source => SolverError::Breakdown { t: self.state.t, source, partial },
        }
    }

    /// Steps until the next snapshot is taken or the run ends.
    pub fn advance(&mut self) -> Result<Advance, SolverError> {
        if let Some(why) = self.state.termination {
            return Ok(Advance::Finished(why));
        }
        let p = &self.params;
        let (bc, cfl, a_stop, t_max, every, factor) =
            (p.bc_radius, p.dt_cfl, p.a_stop, p.t_max, p.snapshot_every, p.a2_snapshot_factor);
        loop {
            let field = curvature_field(&self.state.curve).map_err(|e| self.fail_curve(e))?;
            let a2max = field.max_a2();
            if !a2max.is_finite() {
                return Err(self.fail_curve(CurveError::NonFinite(0)));
            }
            let grown = factor > 1.0 && a2max >= self.state.last_snapshot_a2.max(A2_NOISE) * factor;
            if self.state.snapshot_pending || grown {
                self.record(&field);
                return Ok(Advance::Snapshot(self.trajectory.snapshots.len() - 1));
            }
            if a2max.sqrt() >= a_stop {
                return Ok(self.finish(&field, Termination::CurvatureStop));
            }
            if self.state.t >= t_max {
                return Ok(self.finish(&field, Termination::Horizon));
            }

            let z = self.state.curve.nodes();
            let sigma = z.windows(2).map(|w| (w[1] - w[0]).norm()).fold(f64::INFINITY, f64::min);
            let mut dt = cfl * sigma * sigma / (1.0 + a2max * sigma * sigma);
            if dt < self.params.dt_min {
                return Ok(self.finish(&field, Termination::StepUnderflow));
            }
            // land exactly on the next regular snapshot time or the horizon
            let mut landing = None;
            let grid_t = if every > 0.0 { self.state.next_snapshot as f64 * every } else { f64::INFINITY };
            let stop_t = grid_t.min(t_max);
            if self.state.t + dt >= stop_t {
                dt = stop_t - self.state.t;
                landing = Some(stop_t);
            }

            let v1 = velocity_from_field(&self.state.curve, &field, bc);
            let stage: Vec<Point> = z.iter().zip(&v1).map(|(&x, &v)| x + v * dt).collect();
            let stage = self.state.curve.with_nodes(stage).map_err(|e| self.fail_curve(e))?;
            let field1 = curvature_field(&stage).map_err(|e| self.fail_curve(e))?;
            let v2 = velocity_from_field(&stage, &field1, bc);
            let next: Vec<Point> =
                z.iter().zip(v1.iter().zip(&v2)).map(|(&x, (&a, &b))| x + (a + b) * (0.5 * dt)).collect();
            let mut curve = self.state.curve.with_nodes(next).map_err(|e| self.fail_curve(e))?;

            self.state.steps += 1;
            match landing {
                Some(tl) => {
                    self.state.t = tl;
                    if tl == grid_t {
                        self.state.next_snapshot += 1;
                        self.state.snapshot_pending = true;
                    }
                }
                None => self.state.t += dt,
            }
            if self.state.steps % self.params.regrid_every == 0 {
                let f = curvature_field(&curve).map_err(|e| self.fail_curve(e))?;
                let spacing = target_spacing(&curve, &f, &self.params);
                curve = resample_graded(&curve, &spacing).map_err(|e| self.fail_curve(e))?;
            }
            self.state.curve = curve;
        }
    }

    pub fn run(mut self) -> Result<FlowTrajectory, SolverError> {
        while let Advance::Snapshot(_) = self.advance()? {}
        Ok(self.trajectory)
    }
}

pub fn evolve(initial: ProfileCurve, params: SolverParams) -> Result<FlowTrajectory, SolverError> {
    Integrator::new(initial, params)?.run()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeClass {
    TypeILike,
    TypeIILike,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub t_est: f64,
    pub location: Point,
    pub type_class: TypeClass,
    /// `q` in `max |A|² ≈ C/(T - t)^q`.
    pub fit_exponent: f64,
    pub fit_constant: f64,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
    /// Max of `max|A|²·(T - t)` over the last decade over its median over the
    /// first decade.
    pub product_growth: f64,
    /// Series indices `[start, end]` used by the fit.
    pub fit_window: (usize, usize),
}

impl SingularityReport {
    fn none() -> Self {
        SingularityReport {
            t_est: f64::NAN,
            location: Point::new(f64::NAN, f64::NAN),
            type_class: TypeClass::None,
            fit_exponent: f64::NAN,
            fit_constant: f64::NAN,
            fit_residual: f64::NAN,
            product_growth: f64::NAN,
            fit_window: (0, 0),
        }
    }
}

/// Least-squares `log a2 = log C - q log(T - t)` for fixed `T`: returns
/// `(q, C, sum of squared residuals)`.
fn power_fit(t: &[f64], a2: &[f64], big_t: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = t.iter().map(|&ti| (big_t - ti).ln()).collect();
    let ys: Vec<f64> = a2.iter().map(|a| a.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (-slope, intercept.exp(), sse)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Fits the blowup time and rate to a curvature history `(t, max|A|²)` and
/// classifies it. Only the part after the minimum of `max|A|²` is used.
pub fn classify_series(t: &[f64], a2: &[f64], divergence_factor: f64) -> (f64, f64, f64, f64, f64, TypeClass, (usize, usize)) {
    let n = t.len();
    let start = (0..n).min_by(|&i, &j| a2[i].total_cmp(&a2[j])).unwrap_or(0);
    let end = n - 1;
    let a2_last = a2[end];
    if n < 4 || end - start < 3 {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, TypeClass::None, (start, end));
    }
    let fit_start = (start..=end).find(|&i| a2[i] >= a2_last / 10.0).unwrap_or(start);
    let fit_start = fit_start.min(end - 3);
    let (ft, fa) = (&t[fit_start..], &a2[fit_start..]);
    let t_last = t[end];
    let span = (t_last - t[start]).max(f64::MIN_POSITIVE);
    // profile the fit over u = log(T - t_last)
    let sse = |u: f64| power_fit(ft, fa, t_last + u.exp()).2;
    let (u_lo, u_hi) = ((span * 1e-14).ln(), (span * 10.0).ln());
    let grid = 400;
    let mut best = (f64::INFINITY, u_lo);
    for i in 0..=grid {
        let u = u_lo + (u_hi - u_lo) * i as f64 / grid as f64;
        let e = sse(u);
        if e < best.0 {
            best = (e, u);
        }
    }
    let du = (u_hi - u_lo) / grid as f64;
    let u = golden_min(sse, best.1 - du, best.1 + du, 1e-13);
    let t_est = t_last + u.exp();
    let (q, c, sse_min) = power_fit(ft, fa, t_est);
    let rms = (sse_min / ft.len() as f64).sqrt();

    let products: Vec<f64> = (start..=end).map(|i| a2[i] * (t_est - t[i])).collect();
    let a2_first = a2[start];
    let first: Vec<f64> =
        (start..=end).filter(|&i| a2[i] <= 10.0 * a2_first).map(|i| products[i - start]).collect();
    let last_max = (start..=end)
        .filter(|&i| a2[i] >= a2_last / 10.0)
        .map(|i| products[i - start])
        .fold(f64::NEG_INFINITY, f64::max);
    let growth = last_max / median(first);
    let class = if growth > divergence_factor { TypeClass::TypeIILike } else { TypeClass::TypeILike };
    (t_est, q, c, rms, growth, class, (fit_start, end))
}

/// Singular time, location and Type I/II classification for a run that
/// ended at the curvature stop.
pub fn detect_singularity(traj: &FlowTrajectory, divergence_factor: f64) -> SingularityReport {
    if traj.termination != Some(Termination::CurvatureStop) || traj.series.len() < 4 {
        return SingularityReport::none();
    }
    let t: Vec<f64> = traj.series.iter().map(|e| e.t).collect();
    let a2: Vec<f64> = traj.series.iter().map(|e| e.max_a2).collect();
    let (t_est, q, c, rms, growth, class, window) = classify_series(&t, &a2, divergence_factor);
    let location = curvature_concentration(&traj.last().curve).unwrap_or(Point::new(f64::NAN, f64::NAN));
    SingularityReport {
        t_est,
        location,
        type_class: class,
        fit_exponent: q,
        fit_constant: c,
        fit_residual: rms,
        product_growth: growth,
        fit_window: window,
    }
}

/// `|A|²`-weighted centroid of the nodes carrying at least half the maximum.
pub fn curvature_concentration(curve: &ProfileCurve) -> Option<Point> {
    let field = curvature_field(curve).ok()?;
    let half = 0.5 * field.max_a2();
    let (mut sum, mut weight) = (Point::new(0.0, 0.0), 0.0);
    for (z, &a2) in curve.nodes().iter().zip(&field.a2) {
        if a2 >= half {
            sum += z * a2;
            weight += a2;
        }
    }
    (weight > 0.0).then(|| sum / weight)
}

/// Where the curve crosses the ray at polar angle `alpha`: `(segment, u)` with
/// the crossing at `z[segment] + u·(z[segment+1] - z[segment])`.
pub fn ray_crossing(curve: &ProfileCurve, alpha: f64) -> Option<(usize, f64)> {
    let rot = Point::from_polar(1.0, -alpha);
    let z = curve.nodes();
    for j in 0..z.len() - 1 {
        let (w0, w1) = (z[j] * rot, z[j + 1] * rot);
        if (w0.im < 0.0) == (w1.im < 0.0) || w0.im == w1.im {
            continue;
        }
        let u = w0.im / (w0.im - w1.im);
        if w0.re + u * (w1.re - w0.re) > 0.0 {
            return Some((j, u));
        }
    }
    None
}

/// Crossing with the ray at `alpha` located on the Hermite spline through the
/// nodes: `(segment, local parameter)`.
fn spline_ray_crossing(curve: &ProfileCurve, spline: &HermiteSpline, alpha: f64) -> Option<(usize, f64)> {
    let (j, u) = ray_crossing(curve, alpha)?;
    let rot = Point::from_polar(1.0, -alpha);
    let mut t = u;
    for _ in 0..20 {
        let (p, v) = spline.eval_local(j, t);
        let (f, df) = ((p * rot).im, (v * rot).im);
        if df == 0.0 {
            break;
        }
        let step = f / df;
        t -= step;
        if !(0.0..=1.0).contains(&t) {
            return Some((j, u));
        }
        if step.abs() < 1e-15 {
            break;
        }
    }
    Some((j, t))
}

fn spline_of(curve: &ProfileCurve) -> HermiteSpline {
    HermiteSpline::new(curve.nodes(), curve.symmetry() == Symmetry::ThroughOrigin)
}

/// `½∫ r² dα` over the polar angles `[a0, a1]` for a curve that is a polar
/// graph there, integrated along the Hermite spline through the nodes.
pub fn sector_area(curve: &ProfileCurve, a0: f64, a1: f64) -> Option<f64> {
    let spline = spline_of(curve);
    let c0 = spline_ray_crossing(curve, &spline, a0)?;
    let c1 = spline_ray_crossing(curve, &spline, a1)?;
    let (lo, hi) = if c0 <= c1 { (c0, c1) } else { (c1, c0) };
    let piece = |j: usize, t0: f64, t1: f64| {
        gauss_legendre8(t0, t1, |t| {
            let (p, v) = spline.eval_local(j, t);
            0.5 * cross(p, v)
        })
    };
    let area = if lo.0 == hi.0 {
        piece(lo.0, lo.1, hi.1)
    } else {
        piece(lo.0, lo.1, 1.0) + (lo.0 + 1..hi.0).map(|j| piece(j, 0.0, 1.0)).sum::<f64>() + piece(hi.0, 0.0, hi.1)
    };
    Some(area.abs())
}

/// Lagrangian angle where the curve crosses the ray at `alpha`, from the
/// Hermite spline tangent, on the branch of the unwrapped node field.
pub fn angle_at_ray(curve: &ProfileCurve, alpha: f64) -> Option<f64> {
    let spline = spline_of(curve);
    let (j, t) = spline_ray_crossing(curve, &spline, alpha)?;
    let theta = lagrangian_angle_field(curve).ok()?.theta;
    let (p, v) = spline.eval_local(j, t);
    let local = (curve.n() - 1) as f64 * p.arg() + v.arg();
    Some(theta[j] + wrap_angle(local - theta[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{lawlor_profile, radial_line};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn circle(rho: f64, m: usize) -> ProfileCurve {
        let nodes = (0..=m).map(|j| Point::from_polar(rho, 0.1 + 2.0 * j as f64 / m as f64)).collect();
        ProfileCurve::two_component(nodes, 2).unwrap()
    }

    #[test]
    fn rhs_vanishes_on_radial_line() {
        let c = radial_line(0.4, 2, 3.0, 0.1).unwrap();
        assert!(rhs(&c, 10.0).unwrap().iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn rhs_on_circle_is_inward_n_over_rho() {
        let rho = 1.5;
        let c = circle(rho, 200);
        let v = rhs(&c, 10.0).unwrap();
        for (z, vj) in c.nodes().iter().zip(&v).skip(1).take(199) {
            let inward = -crate::geometry::dot(*vj, z / z.norm());
            assert!((inward - 2.0 / rho).abs() < 1e-9, "{inward}");
        }
    }

    #[test]
    fn rhs_small_on_lawlor() {
        let h = 0.01;
        let c = lawlor_profile(1.0, FRAC_PI_2, 2, 0.05, h).unwrap();
        let v = rhs(&c, 100.0).unwrap();
        assert!(v.iter().map(|v| v.norm()).fold(0.0, f64::max) < h * h);
    }

    #[test]
    fn invalid_params_name_the_field() {
        let p = SolverParams { dt_cfl: 0.5, ..SolverParams::default() };
        match p.validate() {
            Err(SolverError::InvalidParams { field, .. }) => assert_eq!(field, "dt_cfl"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn snapshots_land_on_the_time_grid() {
        let c = radial_line(0.3, 2, 2.0, 0.1).unwrap();
        let params = SolverParams { t_max: 0.05, snapshot_every: 0.02, ..SolverParams::default() };
        let traj = evolve(c, params).unwrap();
        let times = traj.times();
        assert_eq!(times, vec![0.0, 0.02, 0.04, 0.05]);
        assert_eq!(traj.termination, Some(Termination::Horizon));
        assert_eq!(traj.series.len(), traj.snapshots.len());
    }

    #[test]
    fn shrinking_circle_hits_curvature_stop() {
        // closed circles shrink in finite time: ρ² = ρ₀² - 2n t
        let m = 400;
        let mut nodes: Vec<Point> = (0..m).map(|j| Point::from_polar(1.0, 2.0 * PI * j as f64 / m as f64)).collect();
        nodes.push(nodes[0]);
        let c = ProfileCurve::two_component(nodes, 2).unwrap();
        let params = SolverParams {
            h: 0.05,
            a_stop: 4.0,
            t_max: 1.0,
            regrid_every: 1_000_000,
            bc_radius: 10.0,
            ..SolverParams::default()
        };
        let traj = evolve(c, params).unwrap();
        assert_eq!(traj.termination, Some(Termination::CurvatureStop));
        // |A|² = (1 + 3(n-1))/ρ² = 4/ρ² for n = 2, stop at ρ = 1/2
        let t_stop = traj.last().t;
        assert!((t_stop - (1.0 - 0.25) / 4.0).abs() < 5e-3, "{t_stop}");
    }

    #[test]
    fn synthetic_type_i_and_ii_series() {
        let t: Vec<f64> = (0..200).map(|i| 1.0 - 10f64.powf(-4.0 * i as f64 / 199.0)).collect();
        let a1: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 - t)).collect();
        let a2: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 - t).powi(2)).collect();
        let r1 = classify_series(&t, &a1, 10.0);
        assert!((r1.0 - 1.0).abs() < 1e-6, "{}", r1.0);
        assert_eq!(r1.5, TypeClass::TypeILike);
        let r2 = classify_series(&t, &a2, 10.0);
        assert!((r2.0 - 1.0).abs() < 1e-6, "{}", r2.0);
        assert!((r2.1 - 2.0).abs() < 1e-6);
        assert_eq!(r2.5, TypeClass::TypeIILike);
    }

    #[test]
    fn sector_area_of_circle_arc() {
        let c = circle(2.0, 4000);
        let area = sector_area(&c, 0.5, 1.5).unwrap();
        assert!((area - 0.5 * 4.0 * 1.0).abs() < 1e-6);
    }
}
