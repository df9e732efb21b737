//! Discretised profile curves and their geometry.
//!
//! A [`ProfileCurve`] is the intersection of an `O(n)`-equivariant Lagrangian
//! `L ⊂ ℂⁿ` with the plane `ℂ × {0}ⁿ⁻¹`. Either it passes through the origin
//! (then only the half starting at the origin is stored and the other half is
//! the odd reflection), or it avoids the origin (then one component `γ` is
//! stored and the second component is `-γ`).
//!
//! Sign conventions: `τ` is the unit tangent in traversal direction,
//! `ν = J τ` with `J` the rotation by `+π/2`, `k = ⟨γ_ss, ν⟩`,
//! `p = ⟨γ, ν⟩ / |γ|²`, `H = k - (n-1) p` and `|A|² = k² + 3(n-1) p²`.

use crate::geometry::{
    cross, one_sided_derivative, polyline_crossings, rot90, three_point_derivative, wrap_angle,
    HermiteSpline, Point,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("ambient dimension n = {0} must be at least 2")]
    Dimension(u32),
    #[error("curve needs at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("nodes {0} and {1} are closer than the minimal spacing {2:e}")]
    DegenerateSegment(usize, usize, f64),
    #[error("node {0} is not finite")]
    NonFinite(usize),
    #[error("through-origin curve must start exactly at the origin")]
    OriginNodeMissing,
    #[error("two-component curve touches the origin at node {0}")]
    OriginOnTwoComponent(usize),
    #[error("Lagrangian angle jumps by {jump:.3} rad between nodes {node} and {next}; grid too coarse")]
    UnresolvedAngle { node: usize, next: usize, jump: f64 },
    #[error("curve is not closed")]
    NotClosed,
    #[error("origin lies on the curve; winding number undefined")]
    OriginOnCurve,
    #[error("resampling spacing {h:e} is outside [{min:e}, {max:e}]")]
    BadSpacing { h: f64, min: f64, max: f64 },
}

/// How the stored nodes generate the full profile curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    /// Node 0 is the origin; the curve continues as `-γ` through it.
    ThroughOrigin,
    /// Stored component `γ` avoids the origin; `-γ` is the second component.
    TwoComponent,
}

/// Traversal direction relative to the node order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    #[default]
    Forward,
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Forward => 1.0,
            Orientation::Reversed => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reversed,
            Orientation::Reversed => Orientation::Forward,
        }
    }
}

/// Relative minimal node spacing, as a fraction of the bounding-box diagonal.
pub const H_MIN_RELATIVE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    nodes: Vec<Point>,
    n: u32,
    symmetry: Symmetry,
    orientation: Orientation,
}

impl ProfileCurve {
    pub fn new(
        nodes: Vec<Point>,
        n: u32,
        symmetry: Symmetry,
        orientation: Orientation,
    ) -> Result<Self, CurveError> {
        if n < 2 {
            return Err(CurveError::Dimension(n));
        }
        if nodes.len() < 2 {
            return Err(CurveError::TooFewNodes { needed: 2, got: nodes.len() });
        }
        if let Some(j) = nodes.iter().position(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(CurveError::NonFinite(j));
        }
        let h_min = H_MIN_RELATIVE * bbox_diagonal(&nodes);
        for j in 1..nodes.len() {
            if (nodes[j] - nodes[j - 1]).norm() <= h_min {
                return Err(CurveError::DegenerateSegment(j - 1, j, h_min));
            }
        }
        match symmetry {
            Symmetry::ThroughOrigin => {
                if nodes[0] != Point::new(0.0, 0.0) {
                    return Err(CurveError::OriginNodeMissing);
                }
            }
            Symmetry::TwoComponent => {
                if let Some(j) = nodes.iter().position(|p| p.norm() == 0.0) {
                    return Err(CurveError::OriginOnTwoComponent(j));
                }
            }
        }
        Ok(ProfileCurve { nodes, n, symmetry, orientation })
    }

    pub fn two_component(nodes: Vec<Point>, n: u32) -> Result<Self, CurveError> {
        Self::new(nodes, n, Symmetry::TwoComponent, Orientation::Forward)
    }

    pub fn through_origin(nodes: Vec<Point>, n: u32) -> Result<Self, CurveError> {
        Self::new(nodes, n, Symmetry::ThroughOrigin, Orientation::Forward)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn into_nodes(self) -> Vec<Point> {
        self.nodes
    }

    /// Same symmetry class and orientation, new nodes.
    pub fn with_nodes(&self, nodes: Vec<Point>) -> Result<Self, CurveError> {
        Self::new(nodes, self.n, self.symmetry, self.orientation)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn is_closed(&self) -> bool {
        self.nodes.len() > 3 && self.nodes[0] == self.nodes[self.nodes.len() - 1]
    }

    /// Applies `z ↦ factor · z` to every node. Rotations and dilations about
    /// the origin preserve the equivariant structure.
    pub fn transformed(&self, factor: Point) -> Result<Self, CurveError> {
        self.with_nodes(self.nodes.iter().map(|&z| z * factor).collect())
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self, CurveError> {
        self.transformed(Point::new(lambda, 0.0))
    }

    pub fn rotated(&self, phi: f64) -> Result<Self, CurveError> {
        self.transformed(Point::from_polar(1.0, phi))
    }

    /// Polyline of the full profile curve `l = γ ∪ (-γ)`: one polyline for a
    /// through-origin curve, two for a two-component curve.
    pub fn full_profile(&self) -> Vec<Vec<Point>> {
        match self.symmetry {
            Symmetry::ThroughOrigin => {
                let mut full: Vec<Point> = self.nodes[1..].iter().rev().map(|&z| -z).collect();
                full.extend_from_slice(&self.nodes);
                vec![full]
            }
            Symmetry::TwoComponent => {
                vec![self.nodes.clone(), self.nodes.iter().map(|&z| -z).collect()]
            }
        }
    }

    /// Arc length of the stored polyline at each node.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.nodes.len());
        s.push(0.0);
        for j in 1..self.nodes.len() {
            s.push(s[j - 1] + (self.nodes[j] - self.nodes[j - 1]).norm());
        }
        s
    }

    pub fn length(&self) -> f64 {
        *self.arc_lengths().last().unwrap()
    }

    pub fn min_radius(&self) -> f64 {
        self.nodes.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    fn require_nodes(&self, needed: usize) -> Result<(), CurveError> {
        if self.nodes.len() < needed {
            Err(CurveError::TooFewNodes { needed, got: self.nodes.len() })
        } else {
            Ok(())
        }
    }

    /// Unit tangents in node order (not yet corrected for orientation).
    fn node_order_tangents(&self) -> Vec<Point> {
        let z = &self.nodes;
        let m = z.len();
        let mut t = Vec::with_capacity(m);
        for j in 0..m {
            let d = if j == 0 {
                match self.symmetry {
                    Symmetry::ThroughOrigin => z[1],
                    Symmetry::TwoComponent => {
                        let h1 = (z[1] - z[0]).norm();
                        let h2 = (z[2] - z[1]).norm();
                        one_sided_derivative(z[0], z[1], z[2], h1, h2)
                    }
                }
            } else if j == m - 1 {
                let h1 = (z[m - 1] - z[m - 2]).norm();
                let h2 = (z[m - 2] - z[m - 3]).norm();
                -one_sided_derivative(z[m - 1], z[m - 2], z[m - 3], h1, h2)
            } else {
                let hm = (z[j] - z[j - 1]).norm();
                let hp = (z[j + 1] - z[j]).norm();
                three_point_derivative(z[j - 1], z[j], z[j + 1], hm, hp)
            };
            t.push(d / d.norm());
        }
        t
    }

    /// Unit tangents in traversal direction.
    pub fn tangents(&self) -> Result<Vec<Point>, CurveError> {
        self.require_nodes(3)?;
        let s = self.orientation.sign();
        Ok(self.node_order_tangents().into_iter().map(|t| t * s).collect())
    }
}

fn bbox_diagonal(nodes: &[Point]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in nodes {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
}

/// Per-node Lagrangian angle, unwrapped along the curve.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleField {
    pub theta: Vec<f64>,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl AngleField {
    pub fn oscillation(&self) -> f64 {
        self.theta_max - self.theta_min
    }

    /// Almost-calibrated: oscillation strictly below `π`.
    pub fn is_almost_calibrated(&self) -> bool {
        self.oscillation() < PI
    }
}

/// `θ = (n-1) arg γ + arg τ` at every node.
///
/// At the origin node of a through-origin curve `arg γ` is the one-sided limit
/// along the curve, i.e. the direction of node 1.
pub fn lagrangian_angle_field(curve: &ProfileCurve) -> Result<AngleField, CurveError> {
    let tangents = curve.tangents()?;
    let z = curve.nodes();
    let m = z.len();
    let nm1 = (curve.n() - 1) as f64;
    let arg_pos = |j: usize| -> f64 {
        if j == 0 && curve.symmetry() == Symmetry::ThroughOrigin {
            z[1].arg()
        } else {
            z[j].arg()
        }
    };
    let mut theta = Vec::with_capacity(m);
    theta.push(nm1 * arg_pos(0) + tangents[0].arg());
    for j in 1..m {
        let dpos = wrap_angle(arg_pos(j) - arg_pos(j - 1));
        let dtan = wrap_angle(tangents[j].arg() - tangents[j - 1].arg());
        let jump = nm1 * dpos + dtan;
        if jump.abs() >= PI {
            return Err(CurveError::UnresolvedAngle { node: j - 1, next: j, jump });
        }
        theta.push(theta[j - 1] + jump);
    }
    let theta_min = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let theta_max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AngleField { theta, theta_min, theta_max })
}

/// Curvature decomposition at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    pub k: Vec<f64>,
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub a2: Vec<f64>,
    /// Unit normals `ν = J τ`.
    pub normal: Vec<Point>,
}

impl CurvatureField {
    pub fn max_a2(&self) -> f64 {
        self.a2.iter().copied().fold(0.0, f64::max)
    }

    pub fn argmax_a2(&self) -> usize {
        let mut best = 0;
        for (j, &a) in self.a2.iter().enumerate() {
            if a > self.a2[best] {
                best = j;
            }
        }
        best
    }
}

/// Curvature of the circle through three points, signed positive for a left
/// turn.
#[inline]
pub(crate) fn menger_curvature(a: Point, b: Point, c: Point) -> f64 {
    let u = b - a;
    let v = c - b;
    let w = c - a;
    2.0 * cross(u, v) / (u.norm() * v.norm() * w.norm())
}

/// `k`, `p`, `H` and `|A|²` from three-point stencils.
///
/// Interior `k` is the curvature of the circle through neighbouring nodes,
/// less its `(h₊ - h₋)/3 · k'` bias on uneven spacing; open ends extrapolate `k` linearly in arc length. The origin node of a
/// through-origin curve carries `k = p = H = 0`.
pub fn curvature_field(curve: &ProfileCurve) -> Result<CurvatureField, CurveError> {
    curve.require_nodes(3)?;
    let z = curve.nodes();
    let m = z.len();
    let sign = curve.orientation().sign();
    let nm1 = (curve.n() - 1) as f64;
    let through = curve.symmetry() == Symmetry::ThroughOrigin;
    let tangents = curve.node_order_tangents();

    let mut k = vec![0.0; m];
    for j in 1..m - 1 {
        k[j] = menger_curvature(z[j - 1], z[j], z[j + 1]);
    }
    if m > 4 {
        // remove the (h₊ - h₋)/3 · k' bias of the circle through uneven neighbours
        let menger = k.clone();
        for j in 2..m - 2 {
            let hm = (z[j] - z[j - 1]).norm();
            let hp = (z[j + 1] - z[j]).norm();
            let dk = (menger[j + 1] - menger[j - 1]) / (hm + hp);
            k[j] = menger[j] - (hp - hm) / 3.0 * dk;
        }
    }
    if through {
        k[0] = 0.0;
    } else if m == 3 {
        k[0] = k[1];
    } else {
        let h01 = (z[1] - z[0]).norm();
        let h12 = (z[2] - z[1]).norm();
        k[0] = k[1] + (k[1] - k[2]) * h01 / h12;
    }
    if m == 3 {
        k[m - 1] = k[1];
    } else {
        let ha = (z[m - 1] - z[m - 2]).norm();
        let hb = (z[m - 2] - z[m - 3]).norm();
        k[m - 1] = k[m - 2] + (k[m - 2] - k[m - 3]) * ha / hb;
    }

    let mut out = CurvatureField {
        k: Vec::with_capacity(m),
        p: Vec::with_capacity(m),
        h: Vec::with_capacity(m),
        a2: Vec::with_capacity(m),
        normal: Vec::with_capacity(m),
    };
    for j in 0..m {
        let nu_node = rot90(tangents[j]);
        let r2 = z[j].norm_sqr();
        let (kj, pj) = if through && j == 0 {
            (0.0, 0.0)
        } else {
            if r2 == 0.0 {
                return Err(CurveError::OriginOnTwoComponent(j));
            }
            (k[j] * sign, crate::geometry::dot(z[j], nu_node) / r2 * sign)
        };
        out.k.push(kj);
        out.p.push(pj);
        out.h.push(kj - nm1 * pj);
        out.a2.push(kj * kj + 3.0 * nm1 * pj * pj);
        out.normal.push(nu_node * sign);
    }
    Ok(out)
}

/// Largest `|ω(X, Y)|` over tangent pairs of the embedded submanifold
/// `L(s, α) = (a(s) α, b(s) α)`, `α ∈ S^{n-1}`, using centred differences in
/// `s` (node stencils) and in hyperspherical chart coordinates of the sphere
/// with step `h_sphere`.
pub fn verify_lagrangian(curve: &ProfileCurve, h_sphere: f64) -> Result<f64, CurveError> {
    curve.require_nodes(3)?;
    let n = curve.n() as usize;
    let z = curve.nodes();
    let charts = sphere_chart_samples(n);
    let mut worst: f64 = 0.0;
    for j in 1..z.len() - 1 {
        let hm = (z[j] - z[j - 1]).norm();
        let hp = (z[j + 1] - z[j]).norm();
        let dz = three_point_derivative(z[j - 1], z[j], z[j + 1], hm, hp);
        for sigma in &charts {
            let alpha = sphere_point(sigma);
            let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
            vectors.push(embed(dz, &alpha));
            for i in 0..n - 1 {
                let mut plus = sigma.clone();
                let mut minus = sigma.clone();
                plus[i] += h_sphere;
                minus[i] -= h_sphere;
                let ap = sphere_point(&plus);
                let am = sphere_point(&minus);
                let dalpha: Vec<f64> =
                    ap.iter().zip(am.iter()).map(|(p, m)| (p - m) / (2.0 * h_sphere)).collect();
                vectors.push(embed(z[j], &dalpha));
            }
            for a in 0..vectors.len() {
                for b in a + 1..vectors.len() {
                    worst = worst.max(symplectic(&vectors[a], &vectors[b]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `(a α, b α) ∈ ℝⁿ × ℝⁿ` for `z = a + i b`.
fn embed(z: Point, alpha: &[f64]) -> Vec<f64> {
    let n = alpha.len();
    let mut v = vec![0.0; 2 * n];
    for i in 0..n {
        v[i] = z.re * alpha[i];
        v[n + i] = z.im * alpha[i];
    }
    v
}

/// `ω(X, Y) = ⟨J X, Y⟩` with `J(x, y) = (-y, x)`.
fn symplectic(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() / 2;
    let mut s = 0.0;
    for i in 0..n {
        s += -x[n + i] * y[i] + x[i] * y[n + i];
    }
    s
}

/// Hyperspherical coordinates `(φ_1, …, φ_{n-1}) ↦ α ∈ S^{n-1}`.
fn sphere_point(sigma: &[f64]) -> Vec<f64> {
    let n = sigma.len() + 1;
    let mut alpha = vec![0.0; n];
    let mut sin_prod = 1.0;
    for i in 0..n - 1 {
        alpha[i] = sin_prod * sigma[i].cos();
        sin_prod *= sigma[i].sin();
    }
    alpha[n - 1] = sin_prod;
    alpha
}

/// A fixed set of chart points away from the coordinate singularities.
fn sphere_chart_samples(n: usize) -> Vec<Vec<f64>> {
    let angles = [0.37, 1.21, 2.05, 2.83];
    let dims = n - 1;
    let mut out = Vec::new();
    let count = angles.len().pow(dims.min(3) as u32);
    for idx in 0..count {
        let mut sigma = Vec::with_capacity(dims);
        let mut rem = idx;
        for d in 0..dims {
            let a = angles[rem % angles.len()];
            rem /= angles.len();
            // the last chart angle ranges over the full circle
            sigma.push(if d == dims - 1 { 2.0 * a } else { a });
        }
        out.push(sigma);
    }
    out
}

/// A transverse crossing of the profile curve with itself (or its mirror).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intersection {
    pub point: Point,
    /// `(component, segment)`; component 1 is the mirror `-γ`.
    pub first: (usize, usize),
    pub second: (usize, usize),
}

/// Self-intersections of the stored polyline, and with `include_mirror` of the
/// full profile `γ ∪ (-γ)`. Empty exactly when the polyline is embedded.
pub fn self_intersects(curve: &ProfileCurve, include_mirror: bool) -> Vec<Intersection> {
    let polys: Vec<Vec<Point>> = if include_mirror {
        curve.full_profile()
    } else {
        vec![curve.nodes().to_vec()]
    };
    let refs: Vec<&[Point]> = polys.iter().map(|p| p.as_slice()).collect();
    polyline_crossings(&refs)
        .into_iter()
        .map(|c| Intersection { point: c.point, first: c.first, second: c.second })
        .collect()
}

/// Crossings between the full profiles of two curves.
pub fn curves_intersect(a: &ProfileCurve, b: &ProfileCurve) -> Vec<Point> {
    let pa = a.full_profile();
    let pb = b.full_profile();
    let mut refs: Vec<&[Point]> = pa.iter().map(|p| p.as_slice()).collect();
    let split = refs.len();
    refs.extend(pb.iter().map(|p| p.as_slice()));
    polyline_crossings(&refs)
        .into_iter()
        .filter(|c| (c.first.0 < split) != (c.second.0 < split))
        .map(|c| c.point)
        .collect()
}

/// Turning number, winding number about the origin, and the resulting total
/// change of Lagrangian angle around a closed curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurningWinding {
    pub turning: i64,
    pub winding: i64,
    /// `2π T + 2(n-1) π W_O`.
    pub angle_change: f64,
}

pub fn turning_winding(closed: &ProfileCurve) -> Result<TurningWinding, CurveError> {
    if !closed.is_closed() {
        return Err(CurveError::NotClosed);
    }
    let z = closed.nodes();
    let m = z.len() - 1;
    let scale = closed.length();
    for j in 0..m {
        if crate::geometry::point_segment_distance(Point::new(0.0, 0.0), z[j], z[j + 1])
            <= 1e-12 * scale
        {
            return Err(CurveError::OriginOnCurve);
        }
    }
    let sign = closed.orientation().sign();
    let seg = |j: usize| (z[(j + 1) % m] - z[j % m]).arg();
    let mut turn = 0.0;
    let mut wind = 0.0;
    for j in 0..m {
        turn += wrap_angle(seg(j + 1) - seg(j));
        wind += wrap_angle(z[j + 1].arg() - z[j].arg());
    }
    let turning = (sign * turn / (2.0 * PI)).round() as i64;
    let winding = (sign * wind / (2.0 * PI)).round() as i64;
    let nm1 = (closed.n() - 1) as f64;
    Ok(TurningWinding {
        turning,
        winding,
        angle_change: 2.0 * PI * turning as f64 + 2.0 * nm1 * PI * winding as f64,
    })
}

/// Uniform arc-length resampling with spacing as close to `h` as an integer
/// number of segments allows. End nodes (and so an origin node) are kept.
pub fn resample_arclength(curve: &ProfileCurve, h: f64) -> Result<ProfileCurve, CurveError> {
    let length = curve.length();
    let h_min = H_MIN_RELATIVE * bbox_diagonal(curve.nodes());
    if !(h >= h_min && h <= length / 4.0) {
        return Err(CurveError::BadSpacing { h, min: h_min, max: length / 4.0 });
    }
    let spline = HermiteSpline::new(curve.nodes(), curve.symmetry() == Symmetry::ThroughOrigin);
    let total = spline.total_length();
    let segments = ((total / h).round() as usize).max(4);
    let targets: Vec<f64> = (0..=segments).map(|k| total * k as f64 / segments as f64).collect();
    curve.with_nodes(sample_spline(&spline, curve.nodes(), &targets))
}

/// Resamples so that the local spacing follows `spacing[j]` given at the
/// current nodes (interpolated linearly in arc length between them).
pub fn resample_graded(curve: &ProfileCurve, spacing: &[f64]) -> Result<ProfileCurve, CurveError> {
    assert_eq!(spacing.len(), curve.len());
    let spline = HermiteSpline::new(curve.nodes(), curve.symmetry() == Symmetry::ThroughOrigin);
    let arc = spline.node_arc_lengths();
    let m = arc.len();
    // cumulative node count N(s) = ∫ ds / σ(s), with 1/σ linear per segment
    let mut count = vec![0.0; m];
    for j in 1..m {
        let ds = arc[j] - arc[j - 1];
        count[j] = count[j - 1] + 0.5 * ds * (1.0 / spacing[j - 1] + 1.0 / spacing[j]);
    }
    let total = count[m - 1];
    let segments = (total.ceil() as usize).max(4);
    let mut targets = Vec::with_capacity(segments + 1);
    let mut seg = 0;
    for k in 0..=segments {
        let c = total * k as f64 / segments as f64;
        if k == 0 {
            targets.push(0.0);
            continue;
        }
        if k == segments {
            targets.push(spline.total_length());
            continue;
        }
        while seg + 1 < m - 1 && count[seg + 1] < c {
            seg += 1;
        }
        // solve ∫_0^x (g0 + (g1 - g0) u / ds) du = c - count[seg]
        let ds = arc[seg + 1] - arc[seg];
        let g0 = 1.0 / spacing[seg];
        let g1 = 1.0 / spacing[seg + 1];
        let rhs = c - count[seg];
        let a = 0.5 * (g1 - g0) / ds;
        let x = if a.abs() < 1e-14 * g0 / ds {
            rhs / g0
        } else {
            let disc = (g0 * g0 + 4.0 * a * rhs).max(0.0);
            2.0 * rhs / (g0 + disc.sqrt())
        };
        targets.push(arc[seg] + x.clamp(0.0, ds));
    }
    curve.with_nodes(sample_spline(&spline, curve.nodes(), &targets))
}

fn sample_spline(spline: &HermiteSpline, nodes: &[Point], targets: &[f64]) -> Vec<Point> {
    let last = targets.len() - 1;
    targets
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            if k == 0 {
                nodes[0]
            } else if k == last {
                nodes[nodes.len() - 1]
            } else {
                spline.point_at_arc_length(s).0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;
    use std::f64::consts::FRAC_PI_4;

    fn circle(radius: f64, center: Point, m: usize, clockwise: bool) -> ProfileCurve {
        let dir = if clockwise { -1.0 } else { 1.0 };
        let mut nodes: Vec<Point> = (0..m)
            .map(|j| center + Point::from_polar(radius, dir * 2.0 * PI * j as f64 / m as f64))
            .collect();
        nodes.push(nodes[0]);
        ProfileCurve::two_component(nodes, 2).unwrap()
    }

    #[test]
    fn rejects_invalid_construction() {
        assert_eq!(
            ProfileCurve::two_component(vec![pt(1.0, 0.0), pt(2.0, 0.0)], 1),
            Err(CurveError::Dimension(1))
        );
        assert!(matches!(
            ProfileCurve::two_component(vec![pt(1.0, 0.0), pt(1.0, 0.0), pt(2.0, 0.0)], 2),
            Err(CurveError::DegenerateSegment(0, 1, _))
        ));
        assert_eq!(
            ProfileCurve::through_origin(vec![pt(1e-300, 0.0), pt(1.0, 0.0)], 2),
            Err(CurveError::OriginNodeMissing)
        );
        assert_eq!(
            ProfileCurve::two_component(vec![pt(-1.0, 0.0), pt(0.0, 0.0), pt(1.0, 0.0)], 2),
            Err(CurveError::OriginOnTwoComponent(1))
        );
    }

    #[test]
    fn radial_segment_angle_is_n_alpha() {
        let nodes: Vec<Point> = (0..20).map(|j| Point::from_polar(1.0 + 0.1 * j as f64, FRAC_PI_4)).collect();
        let c = ProfileCurve::two_component(nodes, 2).unwrap();
        let f = lagrangian_angle_field(&c).unwrap();
        for t in &f.theta {
            assert!((t - PI / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn angle_at_unit_point_with_vertical_tangent() {
        // small arc of the unit circle around z = 1, traversed upwards
        let nodes: Vec<Point> = (-2..=2).map(|j| Point::from_polar(1.0, 1e-3 * j as f64)).collect();
        let c = ProfileCurve::new(nodes, 3, Symmetry::TwoComponent, Orientation::Forward).unwrap();
        let f = lagrangian_angle_field(&c).unwrap();
        assert!((f.theta[2] - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_is_reported() {
        // θ advances by about 3.4 rad per node
        let nodes: Vec<Point> = (0..5).map(|j| Point::from_polar(1.0, 1.7 * j as f64)).collect();
        let c = ProfileCurve::two_component(nodes, 2).unwrap();
        assert!(matches!(lagrangian_angle_field(&c), Err(CurveError::UnresolvedAngle { .. })));
    }

    #[test]
    fn circle_curvature_under_fixed_normal_convention() {
        let c = circle(1.0, pt(0.0, 0.0), 400, false);
        let f = curvature_field(&c).unwrap();
        for j in 1..c.len() - 1 {
            assert!((f.k[j] - 1.0).abs() < 1e-12, "k = {}", f.k[j]);
            assert!((f.p[j] + 1.0).abs() < 1e-4);
            assert!((f.h[j] - 2.0).abs() < 1e-4);
            assert!((f.a2[j] - 4.0).abs() < 1e-3);
        }
    }

    #[test]
    fn radial_line_has_zero_curvature() {
        for n in 2..5 {
            let nodes: Vec<Point> = (0..30).map(|j| Point::from_polar(0.1 * j as f64, 0.3)).collect();
            let c = ProfileCurve::through_origin(nodes, n).unwrap();
            let f = curvature_field(&c).unwrap();
            assert!(f.k.iter().chain(&f.p).chain(&f.h).chain(&f.a2).all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn winding_of_circles() {
        let tw = turning_winding(&circle(1.0, pt(0.0, 0.0), 64, false)).unwrap();
        assert_eq!((tw.turning, tw.winding), (1, 1));
        let tw = turning_winding(&circle(1.0, pt(2.0, 0.0), 64, false)).unwrap();
        assert_eq!((tw.turning, tw.winding), (1, 0));
        let tw = turning_winding(&circle(1.0, pt(0.0, 0.0), 64, true)).unwrap();
        assert_eq!((tw.turning, tw.winding), (-1, -1));
        assert!((tw.angle_change + 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn winding_requires_closed_curve_off_origin() {
        let open = ProfileCurve::two_component(vec![pt(1.0, 0.0), pt(2.0, 0.0), pt(3.0, 1.0)], 2).unwrap();
        assert_eq!(turning_winding(&open), Err(CurveError::NotClosed));
        let through = circle(1.0, pt(1.0, 0.0), 64, false);
        assert_eq!(turning_winding(&through), Err(CurveError::OriginOnCurve));
    }

    #[test]
    fn figure_eight_crosses_once() {
        let nodes: Vec<Point> = (0..200)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + 0.37) / 200.0;
                pt(3.0 + t.sin(), (2.0 * t).sin() / 2.0)
            })
            .collect();
        let nodes = [nodes.clone(), vec![nodes[0]]].concat();
        let c = ProfileCurve::two_component(nodes, 2).unwrap();
        let hits = self_intersects(&c, false);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].point - pt(3.0, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn resample_segment_to_uniform_grid() {
        let xs = [0.0, 0.05, 0.31, 0.33, 0.6, 0.92, 1.0];
        let c = ProfileCurve::two_component(xs.iter().map(|&x| pt(x, 0.0)).collect(), 2);
        // the origin may not be a node of a two-component curve; shift the segment
        assert!(c.is_err());
        let c = ProfileCurve::through_origin(xs.iter().map(|&x| pt(x, 0.0)).collect(), 2).unwrap();
        let r = resample_arclength(&c, 0.1).unwrap();
        assert_eq!(r.len(), 11);
        for (j, z) in r.nodes().iter().enumerate() {
            assert!((z - pt(0.1 * j as f64, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn resample_rejects_spacing_out_of_range() {
        let c = ProfileCurve::through_origin(vec![pt(0.0, 0.0), pt(0.5, 0.0), pt(1.0, 0.0)], 2).unwrap();
        assert!(matches!(resample_arclength(&c, 0.3), Err(CurveError::BadSpacing { .. })));
    }
}
