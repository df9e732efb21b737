//! Adaptive Gauss–Kronrod quadrature and the special functions the density
//! integrals need.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

const K15_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = K15_W[7] * fc;
    let mut g = G7_W[3] * fc;
    for i in 0..7 {
        let dx = half * K15_X[i];
        let pair = f(mid - dx) + f(mid + dx);
        k += K15_W[i] * pair;
        if i % 2 == 1 {
            g += G7_W[i / 2] * pair;
        }
    }
    (k * half, ((k - g) * half).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive 7/15-point Gauss–Kronrod on `[a, b]`; bisects the
/// interval with the largest error estimate until
/// `error ≤ max(abs_tol, rel_tol·|value|)` or `max_intervals` is reached.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, evaluations: 0 };
    }
    let (value, error) = kronrod15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    let mut evaluations = 15;
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < max_intervals {
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&f, worst.a, mid);
        let (v2, e2) = kronrod15(&f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Interval { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Interval { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // resum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|i| i.value).sum();
    let error = heap.iter().map(|i| i.error).sum();
    QuadResult { value, error, evaluations }
}

/// `∫_a^∞ f` through the substitution `x = a + u/(1-u)`.
pub fn integrate_to_infinity(
    f: impl Fn(f64) -> f64,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadResult {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_intervals,
    )
}

/// `e^{-|x|} I₀(x)`: power series for `|x| ≤ 15`, asymptotic expansion beyond.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 15.0 {
        // power series, terms decay once k > x/2
        let q = 0.25 * ax * ax;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-ax).exp()
    } else {
        // asymptotic expansion
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf * ax);
            if term < 1e-17 {
                break;
            }
            sum += term;
        }
        sum / (2.0 * std::f64::consts::PI * ax).sqrt()
    }
}

/// Area of the unit sphere `S^{d-1} ⊂ R^d`.
pub fn sphere_area(d: u32) -> f64 {
    let half = 0.5 * d as f64;
    2.0 * std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// `e^{-|κ|} ∫_{S^{n-1}} e^{κ α₁} dα`: the sphere average of an exponential
/// in one coordinate, scaled to stay finite for large `κ`.
pub fn sphere_exponential_scaled(n: u32, kappa: f64) -> f64 {
    let k = kappa.abs();
    match n {
        1 => 1.0 + (-2.0 * k).exp(),
        2 => 2.0 * std::f64::consts::PI * bessel_i0_scaled(k),
        3 => {
            if k < 1e-8 {
                4.0 * std::f64::consts::PI * (-k).exp() * (1.0 + k * k / 6.0)
            } else {
                2.0 * std::f64::consts::PI * (1.0 - (-2.0 * k).exp()) / k
            }
        }
        _ => {
            // ∫_{S^{n-1}} e^{κt} = |S^{n-2}| ∫_{-1}^{1} e^{κt} (1-t²)^{(n-3)/2} dt
            let e = 0.5 * (n as f64 - 3.0);
            let r = integrate(
                |t| (k * (t - 1.0)).exp() * (1.0 - t * t).max(0.0).powf(e),
                -1.0,
                1.0,
                1e-15,
                1e-13,
                200,
            );
            sphere_area(n - 1) * r.value
        }
    }
}
