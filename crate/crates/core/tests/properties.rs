use lmcf_core::blowup::{fit_lawlor, fit_plane_pair, Window};
use lmcf_core::curve::{curves_intersect, turning_winding, Orientation, Symmetry};
use lmcf_core::geometry::wrap_angle;
use lmcf_core::models::{lawlor_margin_for_radius, lawlor_profile, plane_pair_angles};
use lmcf_core::{lagrangian_angle_field, verify_lagrangian, Point, ProfileCurve};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Polar graph `r = ρ(1 + a sin(kα + φ))` on `[α0, α0 + span]`.
fn wavy(rho: f64, a: f64, k: f64, phi: f64, alpha0: f64, span: f64, n: u32) -> ProfileCurve {
    let m = 200;
    let nodes = (0..=m)
        .map(|j| {
            let alpha = alpha0 + span * j as f64 / m as f64;
            Point::from_polar(rho * (1.0 + a * (k * alpha + phi).sin()), alpha)
        })
        .collect();
    ProfileCurve::two_component(nodes, n).unwrap()
}

fn circle(center: Point, radius: f64, turns: usize, n: u32) -> ProfileCurve {
    let m = 400 * turns;
    // radius modulated once per traversal so repeated passes stay apart
    let mut nodes: Vec<Point> = (0..m)
        .map(|j| {
            let u = j as f64 / m as f64;
            center + Point::from_polar(radius * (1.0 + 0.05 * (2.0 * PI * u).sin()), 2.0 * PI * turns as f64 * u)
        })
        .collect();
    nodes.push(nodes[0]);
    ProfileCurve::new(nodes, n, Symmetry::TwoComponent, Orientation::Forward).unwrap()
}

fn curve_strategy() -> impl Strategy<Value = ProfileCurve> {
    (0.5..3.0f64, 0.0..0.3f64, 1.0..4.0f64, 0.0..6.0f64, -3.0..3.0f64, 0.3..1.2f64, 2u32..5)
        .prop_map(|(rho, a, k, phi, a0, span, n)| wavy(rho, a, k, phi, a0, span, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn angle_is_scale_invariant(c in curve_strategy(), lambda in 0.01..100.0f64) {
        let a = lagrangian_angle_field(&c).unwrap().theta;
        let b = lagrangian_angle_field(&c.scaled(lambda).unwrap()).unwrap().theta;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_shifts_angle_by_n_phi(c in curve_strategy(), phi in -3.0..3.0f64) {
        let a = lagrangian_angle_field(&c).unwrap().theta;
        let b = lagrangian_angle_field(&c.rotated(phi).unwrap()).unwrap().theta;
        let shift = c.n() as f64 * phi;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(wrap_angle(y - x - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn equivariant_curves_are_lagrangian(c in curve_strategy()) {
        prop_assert!(verify_lagrangian(&c, 1e-4).unwrap() < 1e-6);
    }

    #[test]
    fn plane_pair_fit_is_rotation_equivariant(
        b in 0.3..1.5f64,
        theta in -3.0..3.0f64,
        phi in -1.0..1.0f64,
    ) {
        let c = lawlor_profile(b, theta, 2, lawlor_margin_for_radius(b, 2, 30.0), 0.05).unwrap();
        let window = Window::Annulus { inner: 10.0, outer: 25.0 };
        let f0 = fit_plane_pair(&c, window).unwrap();
        let f1 = fit_plane_pair(&c.rotated(phi).unwrap(), window).unwrap();
        prop_assert!(wrap_angle(f1.theta_bar - f0.theta_bar - 2.0 * phi).abs() < 1e-9);
        prop_assert!((f1.inter_angle - f0.inter_angle).abs() < 1e-9);
        prop_assert!((f1.residual - f0.residual).abs() < 1e-9 * (1.0 + f0.residual));
        // the far field of a neck is close to its asymptotic pair
        let (a1, a2) = plane_pair_angles(theta, 2);
        prop_assert!(wrap_angle(f0.alpha1 - a1).abs() < 0.02, "{} {}", f0.alpha1, a1);
        prop_assert!(wrap_angle(f0.alpha2 - a2).abs() < 0.02, "{} {}", f0.alpha2, a2);
    }

    #[test]
    fn intersection_is_symmetric(
        c1 in curve_strategy(),
        shift in -1.0..1.0f64,
        phi in -1.0..1.0f64,
    ) {
        let c2 = c1.rotated(phi).unwrap().scaled(1.0 + 0.3 * shift).unwrap();
        let mut ab = curves_intersect(&c1, &c2);
        let mut ba = curves_intersect(&c2, &c1);
        prop_assert_eq!(ab.len(), ba.len());
        let key = |p: &Point| (p.re, p.im);
        ab.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        ba.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        for (p, q) in ab.iter().zip(&ba) {
            prop_assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn turning_winding_identity(
        cx in -3.0..3.0f64,
        cy in -3.0..3.0f64,
        radius in 0.2..2.0f64,
        turns in 1usize..3,
        n in 2u32..5,
    ) {
        let center = Point::new(cx, cy);
        prop_assume!((center.norm() - radius).abs() > 0.1 * radius);
        let c = circle(center, radius, turns, n);
        let tw = turning_winding(&c).unwrap();
        let encloses = center.norm() < radius;
        prop_assert_eq!(tw.turning, turns as i64);
        prop_assert_eq!(tw.winding, if encloses { turns as i64 } else { 0 });
        // total change of θ along the closed curve, from the node field
        let theta = lagrangian_angle_field(&c).unwrap().theta;
        let change = theta[theta.len() - 1] - theta[0];
        prop_assert!((change - tw.angle_change).abs() < 1e-3, "{} {}", change, tw.angle_change);
    }
}

#[test]
fn lawlor_fit_recovers_parameters_over_a_grid() {
    for n in [2u32, 3] {
        for &b in &[0.5, 1.0, 2.0] {
            for &theta in &[-2.5, -0.7, 0.4, 1.5, 2.9] {
                let c = lawlor_profile(b, theta, n, lawlor_margin_for_radius(b, n, 4.0 * b), 0.01 * b).unwrap();
                let fit = fit_lawlor(&c, Window::Ball { radius: 3.0 * b }).unwrap();
                let got_b = fit.b.unwrap();
                assert!((got_b / b - 1.0).abs() < 1e-6, "n={n} B={b} θ̄={theta}: B={got_b}");
                assert!(wrap_angle(fit.theta_bar - theta).abs() < 1e-6, "n={n} B={b} θ̄={theta}: {}", fit.theta_bar);
                assert!(fit.residual < 1e-6 * b, "residual {}", fit.residual);
            }
        }
    }
}
