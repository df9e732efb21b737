//! Planar primitives on `ℂ ≅ ℝ²`: segments, polyline distances, the cubic
//! Hermite spline used for regridding, and segment-pair intersection.

use num_complex::Complex64;
use std::f64::consts::PI;

/// A point of the profile plane, identified with a complex number.
pub type Point = Complex64;

#[inline]
pub fn pt(x: f64, y: f64) -> Point {
    Complex64::new(x, y)
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a.re * b.re + a.im * b.im
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Rotation by `+π/2`.
#[inline]
pub fn rot90(a: Point) -> Point {
    Complex64::new(-a.im, a.re)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Running unwrap of a sequence of angles.
pub fn unwrap_angles(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    for (j, &a) in raw.iter().enumerate() {
        if j == 0 {
            out.push(a);
        } else {
            let prev = out[j - 1];
            out.push(prev + wrap_angle(a - raw[j - 1]));
        }
    }
    out
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (dot(p - a, d) / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Distance from `p` to a polyline.
pub fn point_polyline_distance(p: Point, poly: &[Point]) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => (p - poly[0]).norm(),
        _ => poly
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Directed Hausdorff distance: sup over nodes of `from` of the distance to `to`.
pub fn directed_hausdorff(from: &[Point], to: &[Point]) -> f64 {
    from.iter()
        .map(|&p| point_polyline_distance(p, to))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two polylines, measured at nodes.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Hausdorff distance restricted to the nodes of each polyline lying in the
/// closed ball `B_radius(O)`; distances are still measured to the whole of the
/// other polyline so that truncation at the ball boundary does not register.
pub fn hausdorff_in_ball(a: &[Point], b: &[Point], radius: f64) -> f64 {
    let inside = |poly: &[Point]| -> Vec<Point> {
        poly.iter().copied().filter(|p| p.norm() <= radius).collect()
    };
    directed_hausdorff(&inside(a), b).max(directed_hausdorff(&inside(b), a))
}

pub fn polyline_length(poly: &[Point]) -> f64 {
    poly.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Length of the part of a polyline lying inside the disk `B_radius(center)`.
pub fn length_in_disk(poly: &[Point], center: Point, radius: f64) -> f64 {
    poly.windows(2)
        .map(|w| segment_length_in_disk(w[0], w[1], center, radius))
        .sum()
}

/// Length of `[a, b] ∩ B_radius(center)`.
pub fn segment_length_in_disk(a: Point, b: Point, center: Point, radius: f64) -> f64 {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        return 0.0;
    }
    // |a - c + t d|² = r² in t ∈ [0, 1]
    let f = a - center;
    let qa = d.norm_sqr();
    let qb = 2.0 * dot(f, d);
    let qc = f.norm_sqr() - radius * radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * len
    }
}

/// Proper intersection of segments `[p0, p1]` and `[q0, q1]`, returning the
/// segment parameters `(t, u)`. Parallel and collinear pairs return `None`.
pub fn segment_intersection(p0: Point, p1: Point, q0: Point, q1: Point) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = cross(r, s);
    if denom == 0.0 {
        return None;
    }
    let w = q0 - p0;
    let t = cross(w, s) / denom;
    let u = cross(w, r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// A crossing between two polyline segments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub point: Point,
    /// `(polyline index, segment index)` of the first segment.
    pub first: (usize, usize),
    /// `(polyline index, segment index)` of the second segment.
    pub second: (usize, usize),
}

/// All crossings between segments of a set of polylines (including each
/// polyline with itself), skipping pairs of adjacent segments of the same
/// polyline. Segments are half-open at their end vertex except the last one of
/// each polyline, so a crossing exactly at a vertex is reported once.
///
/// Candidate pairs come from a sweep over segment x-extents.
pub fn polyline_crossings(polylines: &[&[Point]]) -> Vec<Crossing> {
    struct Seg {
        poly: usize,
        idx: usize,
        last: bool,
        a: Point,
        b: Point,
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
    }
    let mut segs = Vec::new();
    for (pi, poly) in polylines.iter().enumerate() {
        let nseg = poly.len().saturating_sub(1);
        for j in 0..nseg {
            let (a, b) = (poly[j], poly[j + 1]);
            segs.push(Seg {
                poly: pi,
                idx: j,
                last: j + 1 == nseg,
                a,
                b,
                xmin: a.re.min(b.re),
                xmax: a.re.max(b.re),
                ymin: a.im.min(b.im),
                ymax: a.im.max(b.im),
            });
        }
    }
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&i, &j| segs[i].xmin.total_cmp(&segs[j].xmin).then(i.cmp(&j)));

    let closed: Vec<bool> = polylines
        .iter()
        .map(|p| p.len() > 3 && p[0] == p[p.len() - 1])
        .collect();
    let nsegs: Vec<usize> = polylines.iter().map(|p| p.len().saturating_sub(1)).collect();

    let mut active: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for &i in &order {
        let si = &segs[i];
        active.retain(|&j| segs[j].xmax >= si.xmin);
        for &j in &active {
            let sj = &segs[j];
            if sj.ymax < si.ymin || sj.ymin > si.ymax {
                continue;
            }
            if si.poly == sj.poly {
                let (lo, hi) = (si.idx.min(sj.idx), si.idx.max(sj.idx));
                if hi - lo <= 1 {
                    continue;
                }
                if closed[si.poly] && lo == 0 && hi == nsegs[si.poly] - 1 {
                    continue;
                }
            }
            if let Some((t, u)) = segment_intersection(si.a, si.b, sj.a, sj.b) {
                if (t == 1.0 && !si.last) || (u == 1.0 && !sj.last) {
                    continue;
                }
                let (first, second) = if (sj.poly, sj.idx) < (si.poly, si.idx) {
                    ((sj.poly, sj.idx), (si.poly, si.idx))
                } else {
                    ((si.poly, si.idx), (sj.poly, sj.idx))
                };
                out.push(Crossing { point: si.a + (si.b - si.a) * t, first, second });
            }
        }
        active.push(i);
    }
    out.sort_by(|a, b| a.first.cmp(&b.first).then(a.second.cmp(&b.second)));
    out
}

/// Parametric cubic Hermite spline through a polyline, parametrised by
/// cumulative chord length, with five-point (fourth-order) derivative
/// estimates at the nodes.
pub struct HermiteSpline {
    nodes: Vec<Point>,
    derivs: Vec<Point>,
    knots: Vec<f64>,
    /// Cumulative arc length of the spline at each node.
    arc: Vec<f64>,
}

const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL8_X
        .iter()
        .zip(GL8_W.iter())
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

fn low_order_derivatives(nodes: &[Point], knots: &[f64], odd_at_start: bool) -> Vec<Point> {
    let m = nodes.len();
    if m == 2 {
        let d = (nodes[1] - nodes[0]) / (knots[1] - knots[0]);
        return vec![d, d];
    }
    let mut derivs = vec![Point::new(0.0, 0.0); m];
    for j in 1..m - 1 {
        derivs[j] = three_point_derivative(
            nodes[j - 1],
            nodes[j],
            nodes[j + 1],
            knots[j] - knots[j - 1],
            knots[j + 1] - knots[j],
        );
    }
    derivs[0] = if odd_at_start {
        nodes[1] / knots[1]
    } else {
        one_sided_derivative(nodes[0], nodes[1], nodes[2], knots[1], knots[2] - knots[1])
    };
    derivs[m - 1] = -one_sided_derivative(
        nodes[m - 1],
        nodes[m - 2],
        nodes[m - 3],
        knots[m - 1] - knots[m - 2],
        knots[m - 2] - knots[m - 3],
    );
    derivs
}

/// Weights `w` with `f'(x0) ≈ Σ wᵢ f(xs[i])`, exact for polynomials of degree
/// below `xs.len()` (derivative of the Lagrange interpolant).
pub fn first_derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let m = xs.len();
    let mut w = vec![0.0; m];
    for i in 0..m {
        // L_i'(x0) = Σ_{k≠i} 1/(x_i-x_k) Π_{l≠i,k} (x0-x_l)/(x_i-x_l)
        let mut sum = 0.0;
        for k in 0..m {
            if k == i {
                continue;
            }
            let mut prod = 1.0 / (xs[i] - xs[k]);
            for l in 0..m {
                if l != i && l != k {
                    prod *= (x0 - xs[l]) / (xs[i] - xs[l]);
                }
            }
            sum += prod;
        }
        w[i] = sum;
    }
    w
}

impl HermiteSpline {
    /// Builds the spline. With `odd_at_start`, node 0 must be the origin and
    /// the derivative there is taken from the odd reflection `γ(-s) = -γ(s)`.
    pub fn new(nodes: &[Point], odd_at_start: bool) -> Self {
        let m = nodes.len();
        assert!(m >= 2, "spline needs at least two nodes");
        let mut knots = Vec::with_capacity(m);
        knots.push(0.0);
        for j in 1..m {
            knots.push(knots[j - 1] + (nodes[j] - nodes[j - 1]).norm());
        }
        let derivs = if m < 5 {
            low_order_derivatives(nodes, &knots, odd_at_start)
        } else {
            // odd reflection supplies ghost nodes in front of the origin
            let ghosts = if odd_at_start { 2 } else { 0 };
            let mut ext_nodes = Vec::with_capacity(m + ghosts);
            let mut ext_knots = Vec::with_capacity(m + ghosts);
            for g in (1..=ghosts).rev() {
                ext_nodes.push(-nodes[g]);
                ext_knots.push(-knots[g]);
            }
            ext_nodes.extend_from_slice(nodes);
            ext_knots.extend_from_slice(&knots);
            let total = ext_nodes.len();
            (0..m)
                .map(|j| {
                    let c = j + ghosts;
                    let lo = c.saturating_sub(2).min(total - 5);
                    let w = first_derivative_weights(ext_knots[c], &ext_knots[lo..lo + 5]);
                    w.iter().zip(&ext_nodes[lo..lo + 5]).map(|(&wi, &z)| z * wi).sum()
                })
                .collect()
        };
        let mut spline = HermiteSpline { nodes: nodes.to_vec(), derivs, knots, arc: vec![0.0; m] };
        for j in 1..m {
            let seg = spline.segment_arc_length(j - 1, 1.0);
            spline.arc[j] = spline.arc[j - 1] + seg;
        }
        spline
    }

    pub fn total_length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn node_arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Position and parametric velocity on segment `seg` at local parameter
    /// `t ∈ [0, 1]`.
    pub fn eval_local(&self, seg: usize, t: f64) -> (Point, Point) {
        let du = self.knots[seg + 1] - self.knots[seg];
        let (p0, p1) = (self.nodes[seg], self.nodes[seg + 1]);
        let (m0, m1) = (self.derivs[seg] * du, self.derivs[seg + 1] * du);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let pos = p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let vel = p0 * d00 + m0 * d10 + p1 * d01 + m1 * d11;
        (pos, vel)
    }

    fn segment_arc_length(&self, seg: usize, t_end: f64) -> f64 {
        gauss_legendre8(0.0, t_end, |t| self.eval_local(seg, t).1.norm())
    }

    /// Point at arc length `s` (clamped to the spline), with unit tangent.
    pub fn point_at_arc_length(&self, s: f64) -> (Point, Point) {
        let total = self.total_length();
        if s <= 0.0 {
            let (p, v) = self.eval_local(0, 0.0);
            return (p, v / v.norm());
        }
        if s >= total {
            let last = self.nodes.len() - 2;
            let (p, v) = self.eval_local(last, 1.0);
            return (p, v / v.norm());
        }
        let seg = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(j) => {
                let (_, v) = if j == self.nodes.len() - 1 {
                    self.eval_local(j - 1, 1.0)
                } else {
                    self.eval_local(j, 0.0)
                };
                return (self.nodes[j], v / v.norm());
            }
            Err(j) => j - 1,
        };
        let target = s - self.arc[seg];
        let seg_len = self.arc[seg + 1] - self.arc[seg];
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut t = target / seg_len;
        for _ in 0..60 {
            let f = self.segment_arc_length(seg, t) - target;
            if f.abs() <= 1e-15 * seg_len.max(1e-300) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let speed = self.eval_local(seg, t).1.norm();
            let newton = t - f / speed;
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        let (p, v) = self.eval_local(seg, t);
        (p, v / v.norm())
    }
}

/// Second-order derivative with respect to arc length at the middle of three
/// nodes, for spacings `hm` (left) and `hp` (right).
#[inline]
pub fn three_point_derivative(a: Point, b: Point, c: Point, hm: f64, hp: f64) -> Point {
    ((c - b) * (hm / hp) + (b - a) * (hp / hm)) / (hm + hp)
}

/// Second-order one-sided derivative at `a` from nodes `a, b, c` with spacings
/// `h1 = |b - a|`, `h2 = |c - b|`.
#[inline]
pub fn one_sided_derivative(a: Point, b: Point, c: Point, h1: f64, h2: f64) -> Point {
    let ca = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
    let cb = (h1 + h2) / (h1 * h2);
    let cc = -h1 / (h2 * (h1 + h2));
    a * ca + b * cb + c * cc
}
