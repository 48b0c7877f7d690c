//! SU(2) rotation arithmetic for single nuclear spins.
//!
//! A [`Rotation`] with axis `n` and angle `phi` stands for the exact matrix
//! `cos(phi/2) 1 - i sin(phi/2) n.sigma`. The sign of that matrix is kept:
//! the relative sign between the two electron branches is physical for the
//! unoptimized gate fidelity, so nothing here silently drops a factor of -1.
//! Use [`Rotation::equivalent_up_to_phase`] when only the rotation in SO(3)
//! matters.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::spin::BranchField;

/// Angles (rad) below which a rotation axis is treated as undefined.
pub const ANGLE_TOL: f64 = 1e-9;

pub type Vec3 = [f64; 3];
pub type Mat2 = [[Complex64; 2]; 2];

pub(crate) fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Unit quaternion `(w, v)` representing `w 1 - i v.sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Quat {
    pub w: f64,
    pub v: Vec3,
}

impl Quat {
    pub const ONE: Quat = Quat { w: 1.0, v: [0.0; 3] };

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Quat { w: c, v: [s * axis[0], s * axis[1], s * axis[2]] }
    }

    /// Matrix product `self * rhs`, i.e. `rhs` acts first.
    pub fn mul(&self, rhs: &Quat) -> Quat {
        let c = cross3(&self.v, &rhs.v);
        Quat {
            w: self.w * rhs.w - dot3(&self.v, &rhs.v),
            v: [
                self.w * rhs.v[0] + rhs.w * self.v[0] + c[0],
                self.w * rhs.v[1] + rhs.w * self.v[1] + c[1],
                self.w * rhs.v[2] + rhs.w * self.v[2] + c[2],
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    /// Unit axis; arbitrary (conventionally +z) when the angle is degenerate.
    pub axis: Vec3,
    /// Canonical rotations keep this in `[0, 2pi]`; iterated rotations carry
    /// the unfolded total angle.
    pub angle: f64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { axis: [0.0, 0.0, 1.0], angle: 0.0 };

    /// Canonical rotation for any real angle. Folding uses
    /// `R_n(phi) = R_n(phi - 4pi) = R_{-n}(4pi - phi)`, which leaves the
    /// matrix unchanged.
    pub fn about(axis: Vec3, angle: f64) -> Self {
        let n = norm3(&axis);
        if n == 0.0 {
            return Rotation::IDENTITY;
        }
        let axis = [axis[0] / n, axis[1] / n, axis[2] / n];
        let a = angle.rem_euclid(2.0 * TAU);
        if a >= 2.0 * TAU {
            return Rotation { axis, angle: 0.0 };
        }
        if a > TAU {
            return Rotation { axis: [-axis[0], -axis[1], -axis[2]], angle: 2.0 * TAU - a };
        }
        Rotation { axis, angle: a }
    }

    /// Rotation with an unfolded angle (used for iterated evolutions).
    pub fn extended(axis: Vec3, angle: f64) -> Self {
        Rotation { axis, angle }
    }

    pub(crate) fn quat(&self) -> Quat {
        Quat::from_axis_angle(&self.axis, self.angle)
    }

    pub(crate) fn from_quat(q: &Quat) -> Self {
        let s = norm3(&q.v);
        let angle = 2.0 * s.atan2(q.w);
        if s == 0.0 {
            return Rotation { axis: [0.0, 0.0, 1.0], angle };
        }
        Rotation { axis: [q.v[0] / s, q.v[1] / s, q.v[2] / s], angle }
    }

    /// Equivalent of `exp(-i H_j t)` for a branch field held for `t` us.
    pub fn from_branch_field(bf: &BranchField, t: f64) -> Self {
        if bf.degenerate || t == 0.0 {
            return Rotation::IDENTITY;
        }
        Rotation::about(bf.axis, bf.omega * t)
    }

    /// `second * first` as a matrix product: `first` acts first.
    pub fn compose(&self, second: &Rotation) -> Rotation {
        Rotation::from_quat(&second.quat().mul(&self.quat()))
    }

    /// `R^n` keeping the axis and carrying the total angle `n * phi` unfolded.
    pub fn powi(&self, n: u32) -> Rotation {
        Rotation { axis: self.axis, angle: self.angle * n as f64 }
    }

    /// Canonical form of a possibly extended rotation.
    pub fn canonical(&self) -> Rotation {
        Rotation::about(self.axis, self.angle)
    }

    pub fn axis_defined(&self) -> bool {
        (0.5 * self.angle).sin().abs() > 0.5 * ANGLE_TOL
    }

    pub fn matrix(&self) -> Mat2 {
        let q = self.quat();
        let i = Complex64::i();
        [
            [Complex64::new(q.w, 0.0) - i * q.v[2], -i * Complex64::new(q.v[0], -q.v[1])],
            [-i * Complex64::new(q.v[0], q.v[1]), Complex64::new(q.w, 0.0) + i * q.v[2]],
        ]
    }

    /// True when both rotations agree as SO(3) elements (SU(2) up to sign).
    pub fn equivalent_up_to_phase(&self, other: &Rotation, tol: f64) -> bool {
        let a = self.quat();
        let b = other.quat();
        let d = a.w * b.w + dot3(&a.v, &b.v);
        1.0 - d.abs() <= tol
    }
}

/// Axis and angle of a 2x2 unitary. An SU(2) input is reproduced exactly;
/// a U(2) input is first divided by the principal square root of its
/// determinant.
pub fn extract_axis_angle(u: &Mat2) -> Result<Rotation> {
    let adj_u = mat_mul(&adjoint(u), u);
    let mut dev: f64 = 0.0;
    for (r, row) in adj_u.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            let target = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((z - target).norm());
        }
    }
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    dev = dev.max((det.norm() - 1.0).abs());
    if !(dev <= 1e-10) {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let u = if (det - 1.0).norm() > 1e-12 {
        let phase = det.sqrt();
        [[u[0][0] / phase, u[0][1] / phase], [u[1][0] / phase, u[1][1] / phase]]
    } else {
        *u
    };
    // u = w 1 - i (x sx + y sy + z sz)
    let w = 0.5 * (u[0][0] + u[1][1]).re;
    let z = -0.5 * (u[0][0] - u[1][1]).im;
    let x = -0.5 * (u[0][1] + u[1][0]).im;
    let y = 0.5 * (u[1][0] - u[0][1]).re;
    Ok(Rotation::from_quat(&Quat { w, v: [x, y, z] }))
}

/// Dot product of the two rotation axes.
pub fn axis_dot(r0: &Rotation, r1: &Rotation) -> Result<f64> {
    if !r0.axis_defined() || !r1.axis_defined() {
        return Err(Error::DegenerateAxis);
    }
    Ok(dot3(&r0.axis, &r1.axis).clamp(-1.0, 1.0))
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::BranchField;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// exp(-i (a/2) n.sigma) by scaled Taylor series and repeated squaring.
    fn expm_oracle(axis: Vec3, angle: f64) -> Mat2 {
        let i = Complex64::i();
        let h: Mat2 = [[c(axis[2], 0.0), c(axis[0], -axis[1])], [c(axis[0], axis[1]), c(-axis[2], 0.0)]];
        let squarings = 12;
        let scale = -i * (0.5 * angle) / f64::powi(2.0, squarings);
        let x: Mat2 = [[h[0][0] * scale, h[0][1] * scale], [h[1][0] * scale, h[1][1] * scale]];
        let mut term: Mat2 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let mut sum = term;
        for k in 1..30 {
            term = mat_mul(&term, &x);
            for r in 0..2 {
                for cc in 0..2 {
                    term[r][cc] /= k as f64;
                    sum[r][cc] += term[r][cc];
                }
            }
        }
        for _ in 0..squarings {
            sum = mat_mul(&sum, &sum);
        }
        sum
    }

    fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for cc in 0..2 {
                d = d.max((a[r][cc] - b[r][cc]).norm());
            }
        }
        d
    }

    fn unit(v: Vec3) -> Vec3 {
        let n = norm3(&v);
        [v[0] / n, v[1] / n, v[2] / n]
    }

    #[test]
    fn branch_field_half_turn() {
        let omega = crate::spin::units::khz_2pi(100.0);
        let bf = BranchField { omega, axis: [0.6, 0.0, 0.8], degenerate: false };
        let r = Rotation::from_branch_field(&bf, 5.0);
        assert!((r.angle - PI).abs() < 1e-12);
        assert!((dot3(&r.axis, &bf.axis) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let bf = BranchField { omega: 3.0, axis: [1.0, 0.0, 0.0], degenerate: false };
        assert_eq!(Rotation::from_branch_field(&bf, 0.0), Rotation::IDENTITY);
    }

    #[test]
    fn three_pi_folds_to_pi_about_minus_z() {
        let bf = BranchField { omega: 3.0 * PI, axis: [0.0, 0.0, 1.0], degenerate: false };
        let r = Rotation::from_branch_field(&bf, 1.0);
        assert!((r.angle - PI).abs() < 1e-12);
        assert!((r.axis[2] + 1.0).abs() < 1e-12);
        let oracle = expm_oracle([0.0, 0.0, 1.0], 3.0 * PI);
        assert!(max_diff(&r.matrix(), &oracle) < 1e-12);
    }

    #[test]
    fn same_axis_adds_angles() {
        let a = Rotation::about([0.0, 0.0, 1.0], 0.4);
        let b = Rotation::about([0.0, 0.0, 1.0], 1.1);
        let r = a.compose(&b);
        assert!((r.angle - 1.5).abs() < 1e-12);
        assert!((r.axis[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_half_turns_are_identity_up_to_phase() {
        let x = Rotation::about([1.0, 0.0, 0.0], PI);
        let r = x.compose(&x);
        assert!(r.equivalent_up_to_phase(&Rotation::IDENTITY, 1e-12));
        // the exact product is -1, represented as a full 2pi turn
        assert!((r.angle - TAU).abs() < 1e-12);
    }

    #[test]
    fn compose_matches_matrix_product() {
        let first = Rotation::about([1.0, 0.0, 0.0], PI / 2.0);
        let second = Rotation::about([0.0, 1.0, 0.0], PI / 2.0);
        let r = first.compose(&second);
        let oracle = mat_mul(&expm_oracle([0.0, 1.0, 0.0], PI / 2.0), &expm_oracle([1.0, 0.0, 0.0], PI / 2.0));
        assert!(max_diff(&r.matrix(), &oracle) < 1e-12);
        // 2pi/3 about (1, 1, -1)/sqrt(3)
        assert!((r.angle - TAU / 3.0).abs() < 1e-12);
        let s = 1.0 / 3f64.sqrt();
        assert!((dot3(&r.axis, &[s, s, -s]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extract_identity_and_minus_identity() {
        let id = Rotation::IDENTITY.matrix();
        let r = extract_axis_angle(&id).unwrap();
        assert_eq!(r.angle, 0.0);
        assert!(!r.axis_defined());
        let mid: Mat2 = [[c(-1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let r = extract_axis_angle(&mid).unwrap();
        assert!(r.equivalent_up_to_phase(&Rotation::IDENTITY, 1e-15));
        assert!(!r.axis_defined());
    }

    #[test]
    fn extract_quarter_turn_about_x() {
        let u = expm_oracle([1.0, 0.0, 0.0], PI / 2.0);
        let r = extract_axis_angle(&u).unwrap();
        assert!((r.angle - PI / 2.0).abs() < 1e-12);
        assert!((r.axis[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extract_rejects_non_unitary() {
        let u: Mat2 = [[c(1.0, 0.0), c(0.5, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(matches!(extract_axis_angle(&u), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn extract_strips_u2_phase() {
        let phase = Complex64::from_polar(1.0, 0.3);
        let u = expm_oracle(unit([0.2, -0.4, 0.9]), 1.2);
        let v: Mat2 = [[u[0][0] * phase, u[0][1] * phase], [u[1][0] * phase, u[1][1] * phase]];
        let r = extract_axis_angle(&v).unwrap();
        assert!(max_diff(&r.matrix(), &u) < 1e-12);
    }

    #[test]
    fn axis_dot_cases() {
        let a = Rotation::about([1.0, 0.0, 0.0], PI / 2.0);
        let b = Rotation::about([-1.0, 0.0, 0.0], PI / 2.0);
        assert!((axis_dot(&a, &b).unwrap() + 1.0).abs() < 1e-15);
        let z1 = Rotation::about([0.0, 0.0, 1.0], 0.3);
        let z2 = Rotation::about([0.0, 0.0, 1.0], 2.0);
        assert!((axis_dot(&z1, &z2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(axis_dot(&Rotation::IDENTITY, &z1), Err(Error::DegenerateAxis));
    }

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -20.0f64..20.0)
            .prop_filter("nonzero axis", |(x, y, z, _)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z, a)| Rotation::about([x, y, z], a))
    }

    proptest! {
        #[test]
        fn reconstruction_round_trip(r in arb_rotation()) {
            let back = extract_axis_angle(&r.matrix()).unwrap();
            prop_assert!(max_diff(&back.matrix(), &r.matrix()) < 1e-10);
            prop_assert!(back.angle >= 0.0 && back.angle <= TAU);
        }

        #[test]
        fn canonical_matches_taylor_oracle(x in -1.0f64..1.0, z in -1.0f64..1.0, a in -30.0f64..30.0) {
            prop_assume!(x * x + z * z > 1e-3);
            let axis = unit([x, 0.0, z]);
            let r = Rotation::about(axis, a);
            prop_assert!(r.angle >= 0.0 && r.angle <= TAU);
            prop_assert!(max_diff(&r.matrix(), &expm_oracle(axis, a)) < 1e-10);
        }

        #[test]
        fn compose_is_associative(a in arb_rotation(), b in arb_rotation(), c in arb_rotation()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(max_diff(&left.matrix(), &right.matrix()) < 1e-10);
        }

        #[test]
        fn compose_equals_matrix_product(a in arb_rotation(), b in arb_rotation()) {
            let r = a.compose(&b);
            prop_assert!(max_diff(&r.matrix(), &mat_mul(&b.matrix(), &a.matrix())) < 1e-12);
        }
    }
}
