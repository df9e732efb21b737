//! Fixtures shared by the benchmarks.

use lmcf_core::models::{lawlor_margin_for_radius, lawlor_profile, neves_margin_for_radius, neves_profile};
use lmcf_core::ProfileCurve;
use std::f64::consts::PI;

/// Neves curve for `β = 2π/3`, `n = 2`, out to radius 22 at spacing `h`.
pub fn neves(h: f64) -> ProfileCurve {
    let beta = 2.0 * PI / 3.0;
    neves_profile(beta, 2, neves_margin_for_radius(beta, 22.0), h).expect("valid Neves parameters")
}

/// Lawlor neck `B = 1`, `θ̄ = π/2`, `n = 2`, out to radius 22.
pub fn lawlor(h: f64) -> ProfileCurve {
    lawlor_profile(1.0, PI / 2.0, 2, lawlor_margin_for_radius(1.0, 2, 22.0), h).expect("valid neck parameters")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        assert!(super::neves(0.05).len() > 500);
        assert!(super::lawlor(0.05).len() > 500);
    }
}
