//! Parabolic rescalings, Gaussian density, and fits of blowup limits to the
//! plane-pair and Lawlor-neck families.

use crate::curve::{curvature_field, CurveError, ProfileCurve, Symmetry};
use crate::geometry::{dot, length_in_disk, point_polyline_distance, wrap_angle, Point};
use crate::models::{lawlor_angle_range, plane_pair_angles};
use crate::quad::{integrate, integrate_to_infinity, sphere_exponential_scaled};
use crate::solver::FlowTrajectory;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlowupError {
    #[error("scale r = {0} must be positive")]
    BadScale(f64),
    #[error("no snapshot at or before T - 1/k = {limit}; smallest usable k is {min_k}")]
    EmptyWindow { limit: f64, min_k: u64 },
    #[error("only {got} nodes in the fit window, need at least {needed}")]
    TooFewNodes { got: usize, needed: usize },
    #[error("curve is not radially graphical (polar angle reverses at node {0})")]
    NotRadiallyGraphical(usize),
    #[error("node angles span {span} rad, more than a neck can cover ({max})")]
    AngleSpanTooWide { span: f64, max: f64 },
    #[error("rescaling factors must be positive and strictly increasing")]
    BadFactors,
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Spacetime point `(x₀, t₀)` with `x₀` in the profile plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub x: Point,
    pub t: f64,
}

fn gaussian_integrand(z: Point, x0: Point, r: f64, n: u32) -> f64 {
    let rho = z.norm();
    if rho == 0.0 {
        return if n == 1 { (4.0 * PI * r * r).powf(-0.5) * 2.0 * (-x0.norm_sqr() / (4.0 * r * r)).exp() } else { 0.0 };
    }
    let four_r2 = 4.0 * r * r;
    let kappa = dot(z, x0) / (2.0 * r * r);
    let nearest = (z - x0).norm_sqr().min((z + x0).norm_sqr());
    four_r2.powf(-0.5 * n as f64) * PI.powf(-0.5 * n as f64)
        * rho.powi(n as i32 - 1)
        * sphere_exponential_scaled(n, kappa)
        * (-nearest / four_r2).exp()
}

/// Gaussian density ratio `Θ` of the submanifold generated by `curve` at
/// scale `r` about `x₀`: the curve is taken at time `t₀ - r²`. The integral
/// runs over the stored component (it generates the whole submanifold) and
/// continues each free end along its end tangent to infinity.
pub fn gaussian_density(curve: &ProfileCurve, x0: Point, r: f64) -> Result<f64, BlowupError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(BlowupError::BadScale(r));
    }
    let n = curve.n();
    let z = curve.nodes();
    let f = |p: Point| gaussian_integrand(p, x0, r, n);
    let tol = 1e-14;
    let mut total = 0.0;
    for w in z.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b - a).norm();
        // skip segments far outside the Gaussian
        let d = crate::geometry::point_segment_distance(x0, a, b)
            .min(crate::geometry::point_segment_distance(-x0, a, b));
        if d > 12.0 * r + 1e-300 && d * d / (4.0 * r * r) > 60.0 {
            continue;
        }
        total += integrate(|u| f(a + (b - a) * u) * len, 0.0, 1.0, tol, 1e-12, 64).value;
    }
    let mut ends: Vec<(Point, Point)> = Vec::new();
    if !curve.is_closed() {
        let m = z.len();
        ends.push((z[m - 1], (z[m - 1] - z[m - 2]) / (z[m - 1] - z[m - 2]).norm()));
        if curve.symmetry() == Symmetry::TwoComponent {
            ends.push((z[0], (z[0] - z[1]) / (z[0] - z[1]).norm()));
        }
    }
    for (p, dir) in ends {
        total += integrate_to_infinity(|s| f(p + dir * s), 0.0, tol, 1e-12, 200).value;
    }
    Ok(total)
}

/// One point of a Huisken monotonicity probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProbe {
    pub center: SpacetimePoint,
    pub r: f64,
    /// `None` when `t₀ - r²` lies outside the trajectory.
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuiskenReport {
    pub probes: Vec<DensityProbe>,
    /// `(i, Θ(r_i) - Θ(r_{i+1}))` for every adjacent decrease beyond tolerance.
    pub violations: Vec<(usize, f64)>,
    /// Largest `|Θ(λ·l, λx₀, λr) - Θ(l, x₀, r)|` over the probes.
    pub scale_invariance_error: f64,
}

/// Evaluates `Θ(·, X, r)` over `r_grid` (sorted ascending), flags decreases
/// beyond `tol`, and recomputes every probe on the flow rescaled by `lambda`
/// about `X`.
pub fn huisken_check(
    traj: &FlowTrajectory,
    center: SpacetimePoint,
    r_grid: &[f64],
    tol: f64,
    lambda: f64,
) -> Result<HuiskenReport, BlowupError> {
    let mut probes = Vec::with_capacity(r_grid.len());
    let mut scale_err: f64 = 0.0;
    for &r in r_grid {
        let theta = match traj.curve_at(center.t - r * r) {
            None => None,
            Some(curve) => {
                let value = gaussian_density(&curve, center.x, r)?;
                let scaled = curve.scaled(lambda)?;
                let other = gaussian_density(&scaled, center.x * lambda, r * lambda)?;
                scale_err = scale_err.max((other - value).abs());
                Some(value)
            }
        };
        probes.push(DensityProbe { center, r, theta });
    }
    let mut violations = Vec::new();
    let valid: Vec<(usize, f64)> = probes.iter().enumerate().filter_map(|(i, p)| p.theta.map(|t| (i, t))).collect();
    for w in valid.windows(2) {
        let drop = w[0].1 - w[1].1;
        if drop > tol {
            violations.push((w[0].0, drop));
        }
    }
    Ok(HuiskenReport { probes, violations, scale_invariance_error: scale_err })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeIISelection {
    pub k: u64,
    pub snapshot: usize,
    pub t: f64,
    pub node: usize,
    pub point: Point,
    /// `A_k = |A|` at the selected point.
    pub a: f64,
    /// `|A|²·(T - 1/k - t)` at the maximiser.
    pub objective: f64,
}

/// Maximises `|A(p,t)|²·(T - 1/k - t)` over snapshots with `t ≤ T - 1/k`
/// and all their nodes.
pub fn type_ii_select(traj: &FlowTrajectory, t_est: f64, k: u64) -> Result<TypeIISelection, BlowupError> {
    let limit = t_est - 1.0 / k as f64;
    let mut best: Option<TypeIISelection> = None;
    for (i, snap) in traj.snapshots.iter().enumerate() {
        if snap.t > limit {
            continue;
        }
        let field = curvature_field(&snap.curve)?;
        for (j, &a2) in field.a2.iter().enumerate() {
            let objective = a2 * (limit - snap.t);
            if best.map_or(true, |b| objective > b.objective) {
                best = Some(TypeIISelection {
                    k,
                    snapshot: i,
                    t: snap.t,
                    node: j,
                    point: snap.curve.nodes()[j],
                    a: a2.sqrt(),
                    objective,
                });
            }
        }
    }
    best.ok_or_else(|| {
        let first = traj.snapshots.first().map_or(t_est, |s| s.t);
        let min_k = if t_est > first { (1.0 / (t_est - first)).ceil() as u64 } else { u64::MAX };
        BlowupError::EmptyWindow { limit, min_k }
    })
}

/// Largest `k` for which `T - 1/k` does not exceed the last snapshot time.
pub fn max_available_k(traj: &FlowTrajectory, t_est: f64) -> Option<u64> {
    let gap = t_est - traj.last().t;
    (gap > 0.0).then(|| (1.0 / gap).floor() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RescalingKind {
    TypeI,
    TypeII,
    Intermediate,
}

impl std::fmt::Display for RescalingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RescalingKind::TypeI => "typeI",
            RescalingKind::TypeII => "typeII",
            RescalingKind::Intermediate => "intermediate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleItem {
    pub lambda: f64,
    pub center: SpacetimePoint,
}

/// Finite checks of the intermediate-scale conditions `δ_i = λ_i/A_i → 0`
/// and `λ_i²(T - t_i) → ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntermediateTrends {
    pub delta: Vec<f64>,
    pub parabolic: Vec<f64>,
    pub delta_decreasing: bool,
    pub parabolic_increasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescalingSpec {
    pub kind: RescalingKind,
    pub items: Vec<RescaleItem>,
    /// Rescaled time at which each item is evaluated.
    pub tau: f64,
    pub trends: Option<IntermediateTrends>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|&x| x > 0.0 && x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

impl RescalingSpec {
    /// Centre `(O, T)`, one item per factor.
    pub fn type_i(t_est: f64, factors: &[f64], tau: f64) -> Result<Self, BlowupError> {
        if !strictly_increasing(factors) {
            return Err(BlowupError::BadFactors);
        }
        let center = SpacetimePoint { x: Point::new(0.0, 0.0), t: t_est };
        Ok(RescalingSpec {
            kind: RescalingKind::TypeI,
            items: factors.iter().map(|&lambda| RescaleItem { lambda, center }).collect(),
            tau,
            trends: None,
        })
    }

    /// Centres `(p_k, t_k)`, factors `A_k`.
    pub fn type_ii(selections: &[TypeIISelection], tau: f64) -> Result<Self, BlowupError> {
        let factors: Vec<f64> = selections.iter().map(|s| s.a).collect();
        if factors.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(BlowupError::BadFactors);
        }
        Ok(RescalingSpec {
            kind: RescalingKind::TypeII,
            items: selections
                .iter()
                .map(|s| RescaleItem { lambda: s.a, center: SpacetimePoint { x: s.point, t: s.t } })
                .collect(),
            tau,
            trends: None,
        })
    }

    /// Centres `(O, t_k)` with the given factors; records the trend checks.
    pub fn intermediate(
        selections: &[TypeIISelection],
        factors: &[f64],
        t_est: f64,
        tau: f64,
    ) -> Result<Self, BlowupError> {
        if factors.len() != selections.len() || !strictly_increasing(factors) {
            return Err(BlowupError::BadFactors);
        }
        let delta: Vec<f64> = factors.iter().zip(selections).map(|(l, s)| l / s.a).collect();
        let parabolic: Vec<f64> = factors.iter().zip(selections).map(|(l, s)| l * l * (t_est - s.t)).collect();
        let trends = IntermediateTrends {
            delta_decreasing: strictly_decreasing(&delta),
            parabolic_increasing: strictly_increasing(&parabolic),
            delta,
            parabolic,
        };
        Ok(RescalingSpec {
            kind: RescalingKind::Intermediate,
            items: selections
                .iter()
                .zip(factors)
                .map(|(s, &lambda)| RescaleItem {
                    lambda,
                    center: SpacetimePoint { x: Point::new(0.0, 0.0), t: s.t },
                })
                .collect(),
            tau,
            trends: Some(trends),
        })
    }
}

/// A rescaled snapshot `λ(l_t - x₀)`, stored as `λ·l_t` together with the
/// translation `-λx₀` so that it stays an equivariant profile curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledSnapshot {
    pub lambda: f64,
    pub tau: f64,
    /// Unrescaled time `t₀ + τ/λ²`.
    pub t: f64,
    pub curve: Option<ProfileCurve>,
    pub shift: Point,
    /// Why `curve` is missing.
    pub flag: Option<String>,
}

impl RescaledSnapshot {
    /// The rescaled nodes with the translation applied.
    pub fn translated_nodes(&self) -> Option<Vec<Point>> {
        self.curve.as_ref().map(|c| c.nodes().iter().map(|&z| z + self.shift).collect())
    }
}

pub fn rescale(traj: &FlowTrajectory, spec: &RescalingSpec) -> Vec<RescaledSnapshot> {
    spec.items
        .iter()
        .map(|item| {
            let t = item.center.t + spec.tau / (item.lambda * item.lambda);
            let shift = -item.center.x * item.lambda;
            let curve = traj.curve_at(t).map(|c| c.scaled(item.lambda));
            let (curve, flag) = match curve {
                None => (None, Some(format!("t = {t} outside the trajectory"))),
                Some(Err(e)) => (None, Some(e.to_string())),
                Some(Ok(c)) => (Some(c), None),
            };
            RescaledSnapshot { lambda: item.lambda, tau: spec.tau, t, curve, shift, flag }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Window {
    Annulus { inner: f64, outer: f64 },
    Ball { radius: f64 },
    Everything,
}

impl Window {
    pub fn contains(&self, z: Point) -> bool {
        let r = z.norm();
        match *self {
            Window::Annulus { inner, outer } => r >= inner && r <= outer,
            Window::Ball { radius } => r <= radius,
            Window::Everything => true,
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Window::Annulus { inner, outer } => write!(f, "annulus {inner:?}..{outer:?}"),
            Window::Ball { radius } => write!(f, "ball {radius:?}"),
            Window::Everything => f.write_str("all"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    PlanePair,
    LawlorNeck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub family: ModelFamily,
    pub theta_bar: f64,
    /// Plane pair: outgoing ray angle. Neck: upper asymptote `θ̄/n`.
    pub alpha1: f64,
    /// Plane pair: incoming ray angle. Neck: lower asymptote `(θ̄-π)/n`.
    pub alpha2: f64,
    pub b: Option<f64>,
    /// Angle between the two lines, in `[0, π/2]`.
    pub inter_angle: f64,
    /// `|α₁ - α₂ - π/n|` (plane pair), zero for necks.
    pub pair_defect: f64,
    /// Largest distance from a window node to the fitted model.
    pub residual: f64,
    pub window: Window,
    pub nodes_used: usize,
}

/// Two lines through the origin fitted to the nodes in `window`: 2-means on
/// doubled angles, then a total-least-squares direction per cluster.
pub fn fit_plane_pair(curve: &ProfileCurve, window: Window) -> Result<ModelFit, BlowupError> {
    let n = curve.n();
    let idx: Vec<usize> = (0..curve.len()).filter(|&j| curve.nodes()[j].norm() > 0.0 && window.contains(curve.nodes()[j])).collect();
    if idx.len() < 8 {
        return Err(BlowupError::TooFewNodes { got: idx.len(), needed: 8 });
    }
    let z = curve.nodes();
    let doubled: Vec<Point> = idx.iter().map(|&j| (z[j] / z[j].norm()).powi(2)).collect();
    // seeds: first node and the node farthest from it in doubled angle
    let mut c = [doubled[0], doubled[0]];
    let far = (0..doubled.len()).min_by(|&a, &b| dot(doubled[a], c[0]).total_cmp(&dot(doubled[b], c[0]))).unwrap();
    c[1] = doubled[far];
    let mut label = vec![0usize; doubled.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, w) in doubled.iter().enumerate() {
            let l = if dot(*w, c[0]) >= dot(*w, c[1]) { 0 } else { 1 };
            changed |= l != label[i];
            label[i] = l;
        }
        for (k, ck) in c.iter_mut().enumerate() {
            let s: Point = doubled.iter().zip(&label).filter(|(_, &l)| l == k).map(|(w, _)| *w).sum();
            if s.norm() > 0.0 {
                *ck = s / s.norm();
            }
        }
        if !changed {
            break;
        }
    }
    let mut rays = Vec::with_capacity(2);
    for k in 0..2 {
        let members: Vec<usize> = idx.iter().zip(&label).filter(|(_, &l)| l == k).map(|(&j, _)| j).collect();
        if members.is_empty() {
            return Err(BlowupError::TooFewNodes { got: 0, needed: 1 });
        }
        let s: Point = members.iter().map(|&j| z[j] * z[j]).sum();
        let line = 0.5 * s.arg();
        let dir = Point::from_polar(1.0, line);
        let side: f64 = members.iter().map(|&j| dot(z[j], dir)).sum();
        let ray = if side >= 0.0 { line } else { line + PI };
        let mean_index = members.iter().sum::<usize>() as f64 / members.len() as f64;
        rays.push((mean_index, wrap_angle(ray)));
    }
    rays.sort_by(|a, b| a.0.total_cmp(&b.0));
    // in along the earlier cluster, out along the later one (node order)
    let (mut alpha_in, mut alpha_out) = (rays[0].1, rays[1].1);
    let sign = curve.orientation().sign();
    if sign < 0.0 {
        std::mem::swap(&mut alpha_in, &mut alpha_out);
    }
    let nf = n as f64;
    let theta_out = nf * alpha_out;
    let theta_in = nf * alpha_in + PI;
    let theta_bar = wrap_angle(theta_out + 0.5 * wrap_angle(theta_in - theta_out));
    let residual = idx
        .iter()
        .map(|&j| {
            let d1 = (z[j] * Point::from_polar(1.0, -alpha_out)).im.abs();
            let d2 = (z[j] * Point::from_polar(1.0, -alpha_in)).im.abs();
            d1.min(d2)
        })
        .fold(0.0, f64::max);
    let d = wrap_angle(alpha_out - alpha_in).abs() % PI;
    let inter_angle = d.min(PI - d);
    let pair_defect = (wrap_angle(alpha_out - alpha_in - PI / nf)).abs();
    Ok(ModelFit {
        family: ModelFamily::PlanePair,
        theta_bar,
        alpha1: alpha_out,
        alpha2: alpha_in,
        b: None,
        inter_angle,
        pair_defect,
        residual,
        window,
        nodes_used: idx.len(),
    })
}

/// Distance from `z` to the Lawlor neck `(b, θ̄, n)`.
pub fn distance_to_lawlor(z: Point, b: f64, theta_bar: f64, n: u32) -> f64 {
    let nf = n as f64;
    let (lo, hi) = lawlor_angle_range(theta_bar, n);
    let point = |a: f64| Point::from_polar(b / (theta_bar - nf * a).sin().powf(1.0 / nf), a);
    let d2 = |a: f64| (point(a) - z).norm_sqr();
    let a0 = z.arg();
    let a0 = a0 + 2.0 * PI * ((0.5 * (lo + hi) - a0) / (2.0 * PI)).round();
    let span = hi - lo;
    let margin = 1e-12 * span;
    let (mut x, mut y) = ((a0 - 0.25 * span).max(lo + margin), (a0 + 0.25 * span).min(hi - margin));
    if x >= y {
        x = lo + margin;
        y = hi - margin;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = y - g * (y - x);
    let mut d = x + g * (y - x);
    let (mut fc, mut fd) = (d2(c), d2(d));
    for _ in 0..200 {
        if (y - x) < 1e-13 * span {
            break;
        }
        if fc < fd {
            y = d;
            d = c;
            fd = fc;
            c = y - g * (y - x);
            fc = d2(c);
        } else {
            x = c;
            c = d;
            fc = fd;
            d = x + g * (y - x);
            fd = d2(d);
        }
    }
    fc.min(fd).sqrt()
}

/// Fits `log r = log B - (1/n) log sin(θ̄ - nα)` to the nodes in `window`.
pub fn fit_lawlor(curve: &ProfileCurve, window: Window) -> Result<ModelFit, BlowupError> {
    let n = curve.n();
    let nf = n as f64;
    let z: Vec<Point> = curve.nodes().iter().copied().filter(|&p| p.norm() > 0.0 && window.contains(p)).collect();
    if z.len() < 8 {
        return Err(BlowupError::TooFewNodes { got: z.len(), needed: 8 });
    }
    let mut alpha = Vec::with_capacity(z.len());
    alpha.push(z[0].arg());
    for j in 1..z.len() {
        alpha.push(alpha[j - 1] + wrap_angle(z[j].arg() - z[j - 1].arg()));
    }
    let increasing = alpha[alpha.len() - 1] > alpha[0];
    for j in 1..alpha.len() {
        if (alpha[j] > alpha[j - 1]) != increasing {
            return Err(BlowupError::NotRadiallyGraphical(j));
        }
    }
    let (amin, amax) = if increasing { (alpha[0], alpha[alpha.len() - 1]) } else { (alpha[alpha.len() - 1], alpha[0]) };
    let span = amax - amin;
    if span >= PI / nf {
        return Err(BlowupError::AngleSpanTooWide { span, max: PI / nf });
    }
    let log_r: Vec<f64> = z.iter().map(|p| p.norm().ln()).collect();
    // variable projection: for fixed θ̄ the optimal log B is a mean
    let profile = |theta: f64| -> (f64, f64) {
        let terms: Vec<f64> = alpha.iter().zip(&log_r).map(|(&a, &lr)| lr + (theta - nf * a).sin().ln() / nf).collect();
        let b = terms.iter().sum::<f64>() / terms.len() as f64;
        let sse = terms.iter().map(|t| (t - b) * (t - b)).sum();
        (b, sse)
    };
    // admissible θ̄: sin(θ̄ - nα) > 0 on all nodes
    let (t_lo, t_hi) = (nf * amax, nf * amin + PI);
    let grid = 400;
    let mut best = (f64::INFINITY, 0.5 * (t_lo + t_hi));
    for i in 1..grid {
        let th = t_lo + (t_hi - t_lo) * i as f64 / grid as f64;
        let sse = profile(th).1;
        if sse < best.0 {
            best = (sse, th);
        }
    }
    let step = (t_hi - t_lo) / grid as f64;
    let mut theta = {
        let (mut a, mut b) = ((best.1 - step).max(t_lo + 1e-3 * step), (best.1 + step).min(t_hi - 1e-3 * step));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (profile(c).1, profile(d).1);
        while b - a > 1e-10 * step {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = profile(c).1;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = profile(d).1;
            }
        }
        0.5 * (a + b)
    };
    let mut log_b = profile(theta).0;
    // Gauss-Newton polish on (log B, θ̄)
    for _ in 0..20 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&a, &lr) in alpha.iter().zip(&log_r) {
            let arg = theta - nf * a;
            if arg.sin() <= 0.0 {
                break;
            }
            let res = lr - log_b + arg.sin().ln() / nf;
            let jac = [-1.0, arg.cos() / arg.sin() / nf];
            for p in 0..2 {
                jtr[p] += jac[p] * res;
                for q in 0..2 {
                    jtj[p][q] += jac[p] * jac[q];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let d0 = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let d1 = (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let (nb, nt) = (log_b - d0, theta - d1);
        if !(nt > t_lo && nt < t_hi) {
            break;
        }
        log_b = nb;
        theta = nt;
        if d0.abs() < 1e-15 && d1.abs() < 1e-15 {
            break;
        }
    }
    let b = log_b.exp();
    let residual = z.iter().map(|&p| distance_to_lawlor(p, b, theta, n)).fold(0.0, f64::max);
    let (a2, a1) = lawlor_angle_range(theta, n);
    Ok(ModelFit {
        family: ModelFamily::LawlorNeck,
        theta_bar: wrap_angle(theta),
        alpha1: a1,
        alpha2: a2,
        b: Some(b),
        inter_angle: (PI / nf).min(PI - PI / nf),
        pair_defect: 0.0,
        residual,
        window,
        nodes_used: z.len(),
    })
}

/// Length of the curve where the segment Lagrangian angle
/// `(n-1)·arg(midpoint) + arg(direction)` differs from `θ̄` by more than `ε`.
pub fn bad_set_measure(curve: &ProfileCurve, theta_bar: f64, eps: f64, window: Window) -> f64 {
    let nm1 = (curve.n() - 1) as f64;
    let sign = curve.orientation().sign();
    curve
        .nodes()
        .windows(2)
        .filter(|w| window.contains(0.5 * (w[0] + w[1])))
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let dir = (w[1] - w[0]) * sign;
            let theta = if mid.norm() > 0.0 { nm1 * mid.arg() } else { nm1 * dir.arg() } + dir.arg();
            if wrap_angle(theta - theta_bar).abs() > eps {
                (w[1] - w[0]).norm()
            } else {
                0.0
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRatio {
    pub ratio: f64,
    /// False when the curve meets the circle `∂B_δ(x₀)` nearly tangentially.
    pub transversal: bool,
}

/// `H¹((γ ∪ -γ) ∩ B_δ(x₀)) / 2δ`.
pub fn density_ratio_profile(curve: &ProfileCurve, x0: Point, delta: f64) -> DensityRatio {
    let mut length = 0.0;
    let mut transversal = true;
    for poly in curve.full_profile() {
        length += length_in_disk(&poly, x0, delta);
        for w in poly.windows(2) {
            let (ra, rb) = ((w[0] - x0).norm(), (w[1] - x0).norm());
            if (ra - delta) * (rb - delta) <= 0.0 && ra != rb {
                let u = (delta - ra) / (rb - ra);
                let p = w[0] + (w[1] - w[0]) * u - x0;
                let t = (w[1] - w[0]) / (w[1] - w[0]).norm();
                if p.norm() > 0.0 && dot(t, p / p.norm()).abs() < 0.1 {
                    transversal = false;
                }
            }
        }
    }
    DensityRatio { ratio: length / (2.0 * delta), transversal }
}

/// Volume ratio `H^n(L ∩ B_δ(O)) / (V_n δ^n)` of the submanifold generated by
/// `curve`, via the area element `|S^{n-1}|·|γ|^{n-1} ds`.
pub fn density_ratio_n(curve: &ProfileCurve, delta: f64) -> f64 {
    let n = curve.n();
    let nf = n as f64;
    let mut total = 0.0;
    for w in curve.nodes().windows(2) {
        let (a, b) = (w[0], w[1]);
        let (u0, u1) = match segment_disk_span(a, b, delta) {
            Some(s) => s,
            None => continue,
        };
        let len = (b - a).norm();
        total += integrate(|u| (a + (b - a) * u).norm().powi(n as i32 - 1) * len, u0, u1, 1e-15, 1e-13, 64).value;
    }
    // ω_{n-1} cancels against V_n = ω_{n-1}/n
    nf * total / delta.powi(n as i32)
}

/// Parameter interval of the segment `a→b` inside the disk `|z| ≤ δ`.
fn segment_disk_span(a: Point, b: Point, delta: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let qa = d.norm_sqr();
    let qb = 2.0 * dot(a, d);
    let qc = a.norm_sqr() - delta * delta;
    let disc = qb * qb - 4.0 * qa * qc;
    if qa == 0.0 || disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let lo = ((-qb - s) / (2.0 * qa)).max(0.0);
    let hi = ((-qb + s) / (2.0 * qa)).min(1.0);
    (hi > lo).then_some((lo, hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// Radius where the curve crosses the bisector `α = 0`.
    pub b: f64,
    pub eps: f64,
    pub checked: usize,
    /// `(node, r, lower, upper)` for every node outside its bounds.
    pub violations: Vec<(usize, f64, f64, f64)>,
}

/// Node-wise neck comparison bounds for a curve with `|θ - π/2| < ε`, polar
/// angle measured from the bisector where it crosses at radius `b`.
pub fn sandwich_check(curve: &ProfileCurve, eps: f64, window: Window, tol: f64) -> Option<SandwichReport> {
    let n = curve.n() as f64;
    let (j, u) = crate::solver::ray_crossing(curve, 0.0)?;
    let z = curve.nodes();
    let b = (z[j] + (z[j + 1] - z[j]) * u).norm();
    let mut checked = 0;
    let mut violations = Vec::new();
    for (i, &p) in z.iter().enumerate() {
        if p.norm() == 0.0 || !window.contains(p) {
            continue;
        }
        let a = p.arg().abs();
        let (s_lo, s_hi) = ((0.5 * PI + eps - n * a).sin(), (0.5 * PI - eps - n * a).sin());
        if s_lo <= 0.0 || s_hi <= 0.0 || 0.5 * PI - eps - n * a <= 0.0 {
            continue;
        }
        let lower = b * (0.5 * PI + eps).sin().powf(1.0 / n) / s_lo.powf(1.0 / n);
        let upper = b / s_hi.powf(1.0 / n);
        checked += 1;
        let r = p.norm();
        if r < lower * (1.0 - tol) || r > upper * (1.0 + tol) {
            violations.push((i, r, lower, upper));
        }
    }
    Some(SandwichReport { b, eps, checked, violations })
}

/// Size of the curve as a graph `u(x)` over the nearer of two lines through
/// the origin, on the nodes in `window`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNorms {
    pub sup: f64,
    pub derivative: f64,
    pub graphical: bool,
}

pub fn graph_over_pair(curve: &ProfileCurve, fit: &ModelFit, window: Window) -> GraphNorms {
    let z = curve.nodes();
    let rays = [fit.alpha1, fit.alpha2];
    let mut sup: f64 = 0.0;
    let mut derivative: f64 = 0.0;
    let mut graphical = true;
    let mut prev: Option<(usize, usize, f64, f64)> = None;
    for (j, &p) in z.iter().enumerate() {
        if !window.contains(p) || p.norm() == 0.0 {
            prev = None;
            continue;
        }
        let local: Vec<Point> = rays.iter().map(|&a| p * Point::from_polar(1.0, -a)).collect();
        let k = if local[0].im.abs() <= local[1].im.abs() { 0 } else { 1 };
        let (x, u) = (local[k].re, local[k].im);
        if x <= 0.0 {
            graphical = false;
        }
        sup = sup.max(u.abs());
        if let Some((pj, pk, px, pu)) = prev {
            if pk == k && pj + 1 == j {
                if x == px {
                    graphical = false;
                } else {
                    derivative = derivative.max(((u - pu) / (x - px)).abs());
                }
            }
        }
        prev = Some((j, k, x, u));
    }
    // a graph needs x monotone along each branch
    GraphNorms { sup, derivative, graphical: graphical && monotone_branches(z, &rays, window) }
}

fn monotone_branches(z: &[Point], rays: &[f64; 2], window: Window) -> bool {
    let mut last: Option<(usize, f64, f64)> = None;
    for &p in z {
        if !window.contains(p) || p.norm() == 0.0 {
            last = None;
            continue;
        }
        let l0 = p * Point::from_polar(1.0, -rays[0]);
        let l1 = p * Point::from_polar(1.0, -rays[1]);
        let (k, x) = if l0.im.abs() <= l1.im.abs() { (0, l0.re) } else { (1, l1.re) };
        if let Some((pk, px, dir)) = last {
            if pk == k {
                let step = x - px;
                if dir != 0.0 && step * dir <= 0.0 {
                    return false;
                }
                last = Some((k, x, step.signum()));
                continue;
            }
        }
        last = Some((k, x, 0.0));
    }
    true
}

/// Rotation `φ = (π/2 - θ̄)/n` that moves Lagrangian angle `θ̄` to `π/2`.
pub fn normalizing_rotation(theta_bar: f64, n: u32) -> f64 {
    wrap_angle(0.5 * PI - theta_bar) / n as f64
}

/// Ray angles of the plane pair fitted by a neck or pair with angle `θ̄`.
pub fn pair_angles_for(theta_bar: f64, n: u32) -> (f64, f64) {
    plane_pair_angles(theta_bar, n)
}

/// Distance from each node to the nearest point of a polyline, maximised over
/// nodes inside `window`.
pub fn max_node_distance(nodes: &[Point], reference: &[Point], window: Window) -> f64 {
    nodes
        .iter()
        .filter(|p| window.contains(**p))
        .map(|&p| point_polyline_distance(p, reference))
        .fold(0.0, f64::max)
}
