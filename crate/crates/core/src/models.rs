//! Closed-form equivariant special Lagrangians, the singular initial condition
//! of Neves, and the half-line barriers confining almost-calibrated curves to
//! a cone.

use crate::curve::{CurveError, Orientation, ProfileCurve, Symmetry};
use crate::geometry::{gauss_legendre8, wrap_angle, Point};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} = {value} is out of range: {reason}")]
    Parameter { name: &'static str, value: f64, reason: &'static str },
    #[error("empty parameter range [{0}, {1}]")]
    EmptyRange(f64, f64),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

fn check(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::Parameter { name, value, reason })
    }
}

/// Equivariant special Lagrangian models, by profile curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum SpecialLagrangianModel {
    /// Line through the origin at angle `alpha`.
    RadialLine { alpha: f64, n: u32 },
    /// Two lines through the origin carrying the same Lagrangian angle.
    PlanePair { theta_bar: f64, alpha1: f64, alpha2: f64, n: u32 },
    /// `r(α) = B / sin(θ̄ - nα)^{1/n}`.
    LawlorNeck { b: f64, theta_bar: f64, n: u32 },
}

impl SpecialLagrangianModel {
    pub fn plane_pair(theta_bar: f64, n: u32) -> Self {
        let (alpha1, alpha2) = plane_pair_angles(theta_bar, n);
        SpecialLagrangianModel::PlanePair { theta_bar, alpha1, alpha2, n }
    }

    pub fn n(&self) -> u32 {
        match *self {
            SpecialLagrangianModel::RadialLine { n, .. }
            | SpecialLagrangianModel::PlanePair { n, .. }
            | SpecialLagrangianModel::LawlorNeck { n, .. } => n,
        }
    }
}

/// Ray angles `(α₁, α₂) = (θ̄/n, (θ̄-π)/n)` of the plane pair with Lagrangian
/// angle `θ̄`; these are the asymptotes of the Lawlor necks with that angle.
pub fn plane_pair_angles(theta_bar: f64, n: u32) -> (f64, f64) {
    let nf = n as f64;
    (theta_bar / nf, (theta_bar - PI) / nf)
}

/// Radius of the Lawlor neck at polar angle `alpha`, `None` outside its range.
pub fn lawlor_radius(b: f64, theta_bar: f64, n: u32, alpha: f64) -> Option<f64> {
    let s = (theta_bar - n as f64 * alpha).sin();
    let (lo, hi) = lawlor_angle_range(theta_bar, n);
    if alpha <= lo || alpha >= hi || s <= 0.0 {
        None
    } else {
        Some(b / s.powf(1.0 / n as f64))
    }
}

/// Open polar-angle interval `((θ̄-π)/n, θ̄/n)` swept by a Lawlor neck.
pub fn lawlor_angle_range(theta_bar: f64, n: u32) -> (f64, f64) {
    let nf = n as f64;
    ((theta_bar - PI) / nf, theta_bar / nf)
}

/// `sup |A|² = (n-1)(n+2) / B²`, attained at the point closest to the origin.
pub fn lawlor_max_a2(b: f64, n: u32) -> f64 {
    let nf = n as f64;
    (nf - 1.0) * (nf + 2.0) / (b * b)
}

/// Angle margin at which a Lawlor neck reaches radius `radius`.
pub fn lawlor_margin_for_radius(b: f64, n: u32, radius: f64) -> f64 {
    ((b / radius).powi(n as i32)).asin() / n as f64
}

/// Nodes of `param` at uniform arc-length spacing close to `h`, placed
/// exactly on the parametrised curve. `speed` is `|param'|`.
pub(crate) fn sample_by_arc_length(
    param: impl Fn(f64) -> Point,
    speed: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    h: f64,
) -> Vec<Point> {
    const CELLS: usize = 4096;
    let dt = (t1 - t0) / CELLS as f64;
    let mut cum = vec![0.0; CELLS + 1];
    for c in 0..CELLS {
        let a = t0 + dt * c as f64;
        cum[c + 1] = cum[c] + gauss_legendre8(a, a + dt, &speed);
    }
    let total = cum[CELLS];
    let segments = ((total / h).round() as usize).max(4);
    let mut out = Vec::with_capacity(segments + 1);
    out.push(param(t0));
    let mut cell = 0;
    for k in 1..segments {
        let target = total * k as f64 / segments as f64;
        while cum[cell + 1] < target {
            cell += 1;
        }
        let a = t0 + dt * cell as f64;
        let (mut lo, mut hi) = (a, a + dt);
        let mut t = a + dt * (target - cum[cell]) / (cum[cell + 1] - cum[cell]);
        for _ in 0..50 {
            let f = cum[cell] + gauss_legendre8(a, t, &speed) - target;
            if f.abs() <= 1e-14 * total {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - f / speed(t);
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        out.push(param(t));
    }
    out.push(param(t1));
    out
}

/// Lawlor neck profile on `[(θ̄-π)/n + margin, θ̄/n - margin]`, sampled at
/// arc-length spacing `h` with nodes exactly on the closed form.
pub fn lawlor_profile(
    b: f64,
    theta_bar: f64,
    n: u32,
    alpha_margin: f64,
    h: f64,
) -> Result<ProfileCurve, ModelError> {
    check(n >= 2, "n", n as f64, "must be at least 2")?;
    check(b > 0.0, "B", b, "must be positive")?;
    check(h > 0.0, "h", h, "must be positive")?;
    let nf = n as f64;
    check(
        alpha_margin > 0.0 && alpha_margin < PI / (2.0 * nf),
        "alpha_margin",
        alpha_margin,
        "must lie in (0, π/(2n))",
    )?;
    let (lo, hi) = lawlor_angle_range(theta_bar, n);
    let (a0, a1) = (lo + alpha_margin, hi - alpha_margin);
    if a0 >= a1 {
        return Err(ModelError::EmptyRange(a0, a1));
    }
    let radius = |a: f64| b / (theta_bar - nf * a).sin().powf(1.0 / nf);
    let nodes = sample_by_arc_length(
        |a| Point::from_polar(radius(a), a),
        |a| radius(a) / (theta_bar - nf * a).sin(),
        a0,
        a1,
        h,
    );
    Ok(ProfileCurve::new(nodes, n, Symmetry::TwoComponent, Orientation::Forward)?)
}

/// A ray from the origin at angle `alpha`, out to radius `radius`.
pub fn radial_line(alpha: f64, n: u32, radius: f64, h: f64) -> Result<ProfileCurve, ModelError> {
    check(radius > 0.0, "R", radius, "must be positive")?;
    check(h > 0.0 && h <= radius / 2.0, "h", h, "must lie in (0, R/2]")?;
    let m = (radius / h).round() as usize;
    let dir = Point::from_polar(1.0, alpha);
    let nodes = (0..=m).map(|j| dir * (radius * j as f64 / m as f64)).collect();
    Ok(ProfileCurve::new(nodes, n, Symmetry::ThroughOrigin, Orientation::Forward)?)
}

/// The two lines of a special Lagrangian plane pair, each stored as a
/// through-origin ray (its odd reflection completes the line). Ray
/// orientations are chosen so both carry Lagrangian angle `θ̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanePairProfile {
    pub theta_bar: f64,
    pub n: u32,
    /// Ray angles `θ̄/n` and `(θ̄-π)/n`.
    pub angles: [f64; 2],
    pub rays: [ProfileCurve; 2],
}

impl PlanePairProfile {
    pub fn model(&self) -> SpecialLagrangianModel {
        SpecialLagrangianModel::PlanePair {
            theta_bar: self.theta_bar,
            alpha1: self.angles[0],
            alpha2: self.angles[1],
            n: self.n,
        }
    }

    /// The cone profile `γ` joining the two rays at the origin, as a plain
    /// polyline: in along the second ray, out along the first.
    pub fn corner_polyline(&self) -> Vec<Point> {
        let mut out: Vec<Point> = self.rays[1].nodes().iter().rev().copied().collect();
        out.extend_from_slice(&self.rays[0].nodes()[1..]);
        out
    }
}

pub fn plane_pair_profile(
    theta_bar: f64,
    n: u32,
    radius: f64,
    h: f64,
) -> Result<PlanePairProfile, ModelError> {
    check(n >= 2, "n", n as f64, "must be at least 2")?;
    let (a1, a2) = plane_pair_angles(theta_bar, n);
    let outgoing = radial_line(a1, n, radius, h)?;
    // the second ray is traversed towards the origin
    let incoming = radial_line(a2, n, radius, h)?.with_orientation(Orientation::Reversed);
    Ok(PlanePairProfile { theta_bar, n, angles: [a1, a2], rays: [outgoing, incoming] })
}

/// Polar angle at which the Neves curve reaches radius `radius`.
pub fn neves_margin_for_radius(beta: f64, radius: f64) -> f64 {
    beta / PI * (radius.powf(-PI / beta)).asin()
}

/// Radius `sin(πs/β)^{-β/π}` of the Neves initial condition at polar angle `s`.
pub fn neves_radius(beta: f64, s: f64) -> f64 {
    (PI * s / beta).sin().powf(-beta / PI)
}

/// `η₀(s) = sin(πs/β)^{-β/π} e^{is}` on `[margin, β - margin]`, sampled at
/// arc-length spacing `h` with nodes on the closed form.
pub fn neves_profile(
    beta: f64,
    n: u32,
    s_margin: f64,
    h: f64,
) -> Result<ProfileCurve, ModelError> {
    check(n >= 2, "n", n as f64, "must be at least 2")?;
    check(beta > 0.0 && beta < PI, "beta", beta, "must lie in (0, π)")?;
    check(s_margin > 0.0 && s_margin < beta / 2.0, "s_margin", s_margin, "must lie in (0, β/2)")?;
    check(h > 0.0, "h", h, "must be positive")?;
    let nodes = sample_by_arc_length(
        |s| Point::from_polar(neves_radius(beta, s), s),
        |s| neves_radius(beta, s) / (PI * s / beta).sin(),
        s_margin,
        beta - s_margin,
        h,
    );
    Ok(ProfileCurve::new(nodes, n, Symmetry::TwoComponent, Orientation::Forward)?)
}

/// A ray at angle `alpha` with a compactly supported `C²` normal bump
/// `amplitude · (1 - ξ²)³`, `ξ = (x - center) / half_width`, along it. The
/// odd reflection through the origin keeps the full curve smooth.
pub fn bumped_line(
    alpha: f64,
    n: u32,
    radius: f64,
    h: f64,
    amplitude: f64,
    center: f64,
    half_width: f64,
) -> Result<ProfileCurve, ModelError> {
    check(half_width > 0.0, "half_width", half_width, "must be positive")?;
    check(
        center - half_width > 0.0 && center + half_width < radius,
        "center",
        center,
        "bump must lie strictly inside (0, R)",
    )?;
    let dir = Point::from_polar(1.0, alpha);
    let bump = |x: f64| {
        let xi = (x - center) / half_width;
        if xi.abs() >= 1.0 {
            (0.0, 0.0)
        } else {
            let w = 1.0 - xi * xi;
            (amplitude * w * w * w, amplitude * 3.0 * w * w * (-2.0 * xi) / half_width)
        }
    };
    let nodes = sample_by_arc_length(
        |x| dir * Point::new(x, bump(x).0),
        |x| (1.0 + bump(x).1.powi(2)).sqrt(),
        0.0,
        radius,
        h,
    );
    let mut nodes = nodes;
    nodes[0] = Point::new(0.0, 0.0);
    Ok(ProfileCurve::new(nodes, n, Symmetry::ThroughOrigin, Orientation::Forward)?)
}

/// Which barrier family a half-line belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierFamily {
    /// `a_{±ε,k}`: may only be crossed clockwise.
    A,
    /// `b_{±ε,k}`: may only be crossed anticlockwise.
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierLine {
    pub family: BarrierFamily,
    /// `+1` or `-1`: the sign in front of `ε`.
    pub eps_sign: i8,
    pub k: u32,
    pub angle: f64,
}

/// Half-lines `a_{±ε,k}`, `b_{±ε,k}` through the origin at angles
/// `θ̄/n + 2πk/n ± π/(2n) ± ε/n`, `k = 0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeBarrier {
    pub theta_bar: f64,
    pub eps: f64,
    pub n: u32,
}

impl ConeBarrier {
    pub fn new(theta_bar: f64, eps: f64, n: u32) -> Self {
        ConeBarrier { theta_bar, eps, n }
    }

    pub fn angle(&self, family: BarrierFamily, eps_sign: i8, k: u32) -> f64 {
        let nf = self.n as f64;
        let side = match family {
            BarrierFamily::A => 1.0,
            BarrierFamily::B => -1.0,
        };
        self.theta_bar / nf + 2.0 * PI * k as f64 / nf + side * PI / (2.0 * nf)
            + eps_sign as f64 * self.eps / nf
    }

    pub fn lines(&self) -> Vec<BarrierLine> {
        let mut out = Vec::with_capacity(4 * self.n as usize);
        for k in 0..self.n {
            for family in [BarrierFamily::A, BarrierFamily::B] {
                for eps_sign in [1i8, -1] {
                    out.push(BarrierLine { family, eps_sign, k, angle: self.angle(family, eps_sign, k) });
                }
            }
        }
        out
    }
}

/// Sense in which the curve passes through a half-line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rotation {
    Clockwise,
    Anticlockwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierViolation {
    pub line: BarrierLine,
    /// Index of the first node of the crossing segment.
    pub segment: usize,
    pub direction: Rotation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub violations: Vec<BarrierViolation>,
    pub crossings: usize,
    /// `max arg γ - min arg γ` with `arg` unwrapped along the curve.
    pub width: f64,
    /// `width < 2π/n`.
    pub within_bound: bool,
}

/// Checks the crossing-direction certificate of the barrier half-lines and
/// reports the empirical angular width of the curve.
pub fn cone_check(curve: &ProfileCurve, barrier: &ConeBarrier) -> ConeReport {
    let z = curve.nodes();
    let sign = curve.orientation().sign();
    let mut violations = Vec::new();
    let mut crossings = 0;
    for line in barrier.lines() {
        let rot = Point::from_polar(1.0, -line.angle);
        for j in 0..z.len() - 1 {
            let (w0, w1) = (z[j] * rot, z[j + 1] * rot);
            if (w0.im < 0.0) == (w1.im < 0.0) {
                continue;
            }
            let t = w0.im / (w0.im - w1.im);
            if w0.re + t * (w1.re - w0.re) <= 0.0 {
                continue;
            }
            crossings += 1;
            let anticlockwise = (w1.im > w0.im) == (sign > 0.0);
            let direction = if anticlockwise { Rotation::Anticlockwise } else { Rotation::Clockwise };
            let bad = match line.family {
                BarrierFamily::A => direction == Rotation::Anticlockwise,
                BarrierFamily::B => direction == Rotation::Clockwise,
            };
            if bad {
                violations.push(BarrierViolation { line, segment: j, direction });
            }
        }
    }
    // the origin node of a through-origin curve has no polar angle
    let off: Vec<Point> = z.iter().copied().filter(|p| p.norm() > 0.0).collect();
    let mut arg = off[0].arg();
    let (mut lo, mut hi) = (arg, arg);
    for j in 1..off.len() {
        arg += wrap_angle(off[j].arg() - off[j - 1].arg());
        lo = lo.min(arg);
        hi = hi.max(arg);
    }
    let width = hi - lo;
    ConeReport { violations, crossings, width, within_bound: width < 2.0 * PI / barrier.n as f64 }
}
