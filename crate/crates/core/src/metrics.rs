//! Local invariants and entanglement measures of the electron-nuclear gate
//! `sigma_00 (x) R_n0(phi0) + sigma_11 (x) R_n1(phi1)`.
//!
//! All entangling powers here are *scaled*: the overall 2/9 prefactor of the
//! two-qubit entangling power is dropped so values live in `[0, 1]`.
//! Multiply by [`RAW_ENTANGLING_POWER_SCALE`] to recover the raw scale.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::sequence::ConditionalEvolution;
use crate::su2::dot3;

/// Factor converting a scaled entangling power back to the raw two-qubit scale.
pub const RAW_ENTANGLING_POWER_SCALE: f64 = 2.0 / 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPoint {
    pub g1: f64,
    pub g2: f64,
    /// Scaled entangling power `1 - g1`.
    pub ep: f64,
    /// Electron coherence `M`; the |+> survival probability is `(1 + M) / 2`.
    pub m: f64,
}

/// Total branch angles and axis overlap of an (iterated) evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSummary {
    pub phi0: f64,
    pub phi1: f64,
    pub n01: f64,
}

impl AngleSummary {
    /// `n01` is taken from the stored axes even when a rotation angle is
    /// degenerate; it is then multiplied by a vanishing sine.
    pub fn of(ce: &ConditionalEvolution) -> Self {
        AngleSummary { phi0: ce.r0.angle, phi1: ce.r1.angle, n01: dot3(&ce.r0.axis, &ce.r1.axis).clamp(-1.0, 1.0) }
    }
}

fn half_overlap(phi0: f64, phi1: f64, n01: f64) -> f64 {
    let (s0, c0) = (0.5 * phi0).sin_cos();
    let (s1, c1) = (0.5 * phi1).sin_cos();
    c0 * c1 + n01 * s0 * s1
}

/// First Makhlin invariant, real and in `[0, 1]` for this gate family.
pub fn makhlin_g1(phi0: f64, phi1: f64, n01: f64) -> f64 {
    half_overlap(phi0, phi1, n01).powi(2).min(1.0)
}

/// Second Makhlin invariant, in `[1, 3]`.
pub fn makhlin_g2(phi0: f64, phi1: f64, n01: f64) -> f64 {
    let (s0, c0) = (0.5 * phi0).sin_cos();
    let (s1, c1) = (0.5 * phi1).sin_cos();
    1.0 + n01 * phi0.sin() * phi1.sin() + 2.0 * (c0 * c0 * c1 * c1 + n01 * n01 * s0 * s0 * s1 * s1)
}

/// Scaled one-tangle of a nucleus cut from the rest of the register. Only the
/// nucleus' own (iterated) rotation pair enters.
pub fn one_tangle(ce_total: &ConditionalEvolution) -> f64 {
    let a = AngleSummary::of(ce_total);
    1.0 - makhlin_g1(a.phi0, a.phi1, a.n01)
}

/// Electron coherence `M = Re tr[R0 R1^dagger] / 2` of the iterated evolution.
pub fn coherence_m(ce_total: &ConditionalEvolution) -> f64 {
    let a = AngleSummary::of(ce_total);
    half_overlap(a.phi0, a.phi1, a.n01)
}

pub fn metric_point(ce_total: &ConditionalEvolution) -> MetricPoint {
    let a = AngleSummary::of(ce_total);
    let g1 = makhlin_g1(a.phi0, a.phi1, a.n01);
    MetricPoint { g1, g2: makhlin_g2(a.phi0, a.phi1, a.n01), ep: 1.0 - g1, m: half_overlap(a.phi0, a.phi1, a.n01) }
}

/// Iteration count placing `G1` at a minimum for antiparallel axes:
/// `round((2k + 1) pi / s)` for the smallest `k` giving `N >= 1`.
///
/// For antiparallel axes `G1 = cos^2(N (phi0 + phi1) / 2)`, so only the angle
/// sum modulo `2pi` matters; `s` is that sum folded into `(0, pi]`. For
/// `phi0 + phi1 <= pi` this is the sum itself.
pub fn optimal_iterations(phi0: f64, phi1: f64) -> Result<u32> {
    let sum = phi0 + phi1;
    if !sum.is_finite() {
        return Err(Error::NoRotation);
    }
    let wrapped = sum.rem_euclid(TAU);
    let s = if wrapped > PI { TAU - wrapped } else { wrapped };
    if !(s > 1e-12) {
        return Err(Error::NoRotation);
    }
    for k in 0..u32::MAX {
        let n = ((2 * k + 1) as f64 * PI / s).round();
        if n >= 1.0 {
            return Ok(n.min(u32::MAX as f64) as u32);
        }
    }
    Err(Error::NoRotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::su2::Rotation;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn perfect_entangler() {
        assert!(makhlin_g1(FRAC_PI_2, FRAC_PI_2, -1.0).abs() < 1e-15);
        assert!((makhlin_g2(FRAC_PI_2, FRAC_PI_2, -1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unconditional_rotation() {
        for phi in [0.0, 0.3, 2.0, 7.5] {
            assert!((makhlin_g1(phi, phi, 1.0) - 1.0).abs() < 1e-14);
            assert!((makhlin_g2(phi, phi, 1.0) - 3.0).abs() < 1e-14);
        }
        assert_eq!(makhlin_g2(0.0, 0.0, 0.37), 3.0);
    }

    #[test]
    fn uncoupled_spin_has_no_tangle() {
        let r = Rotation::about([0.0, 0.0, 1.0], 1.7);
        let ce = ConditionalEvolution { r0: r, r1: r };
        assert!(one_tangle(&ce).abs() < 1e-15);
        assert!((coherence_m(&ConditionalEvolution::IDENTITY) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resonant_half_dip() {
        let ce = ConditionalEvolution {
            r0: Rotation::extended([1.0, 0.0, 0.0], FRAC_PI_2),
            r1: Rotation::extended([-1.0, 0.0, 0.0], FRAC_PI_2),
        };
        let m = coherence_m(&ce);
        assert!(m.abs() < 1e-15);
        assert!(((1.0 + m) / 2.0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn optimal_iteration_cases() {
        assert_eq!(optimal_iterations(PI / 56.0, PI / 56.0).unwrap(), 28);
        assert_eq!(optimal_iterations(FRAC_PI_2, FRAC_PI_2).unwrap(), 1);
        assert_eq!(optimal_iterations(0.0, 0.0), Err(Error::NoRotation));
        // sum 8 folds to 8 - 2pi, N = round(pi / 1.717) = 2
        assert_eq!(optimal_iterations(4.0, 4.0).unwrap(), 2);
        assert_eq!(optimal_iterations(PI, PI), Err(Error::NoRotation));
    }

    #[test]
    fn optimal_iterations_matches_scan() {
        // first local minimum of G1 over N = 1..200 at n01 = -1
        let (p0, p1) = (0.11, 0.13);
        let g = |n: u32| makhlin_g1(n as f64 * p0, n as f64 * p1, -1.0);
        let first = (1..200u32).find(|&n| g(n) <= g(n + 1) && (n == 1 || g(n) < g(n - 1))).unwrap();
        assert_eq!(first, 13);
        assert_eq!(optimal_iterations(p0, p1).unwrap(), 13);
    }

    proptest! {
        #[test]
        fn optimal_iterations_is_first_scan_minimum(p0 in 0.01f64..6.2, p1 in 0.01f64..6.2) {
            let n = optimal_iterations(p0, p1).unwrap();
            let g = |n: u32| makhlin_g1(n as f64 * p0, n as f64 * p1, -1.0);
            // rounding misses the minimum by at most a quarter of the folded sum
            let s = (p0 + p1).rem_euclid(TAU);
            let s = if s > PI { TAU - s } else { s };
            prop_assert!(g(n) <= (0.25 * s).sin().powi(2) + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn invariant_ranges(p0 in -50.0f64..50.0, p1 in -50.0f64..50.0, n01 in -1.0f64..=1.0) {
            let g1 = makhlin_g1(p0, p1, n01);
            let g2 = makhlin_g2(p0, p1, n01);
            prop_assert!((0.0..=1.0).contains(&g1));
            prop_assert!((1.0 - 1e-12..=3.0 + 1e-12).contains(&g2));
        }

        #[test]
        fn g1_periodicity_and_reflection(p0 in -20.0f64..20.0, p1 in -20.0f64..20.0, n01 in -1.0f64..=1.0) {
            let g = makhlin_g1(p0, p1, n01);
            prop_assert!((g - makhlin_g1(p0 + 4.0 * PI, p1, n01)).abs() < 1e-12);
            prop_assert!((g - makhlin_g1(p0, p1 + 4.0 * PI, n01)).abs() < 1e-12);
            prop_assert!((g - makhlin_g1(-p0, -p1, n01)).abs() < 1e-12);
        }

        #[test]
        fn cpmg_coherence_closed_form(phi in 0.0f64..0.5, n in 1u32..200, n01 in -1.0f64..=1.0) {
            let nphi = phi * n as f64;
            let ce = ConditionalEvolution {
                r0: Rotation::extended([1.0, 0.0, 0.0], nphi),
                r1: Rotation::extended([n01, (1.0 - n01 * n01).sqrt(), 0.0], nphi),
            };
            let expect = 1.0 - (nphi / 2.0).sin().powi(2) * (1.0 - n01);
            prop_assert!((coherence_m(&ce) - expect).abs() < 1e-12);
        }
    }
}
