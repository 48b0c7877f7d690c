//! Gate fidelity of the register gate in the presence of bath spins.
//!
//! The target gate is the evolution the target spins would undergo on their
//! own; bath spins start in `|0>` and are traced out. Tracing leaves one Kraus
//! operator per bath bitstring, and each of them is block-diagonal in the
//! electron with scalar weights `c_j p_j` multiplying the target gate.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sequence::ConditionalEvolution;
use crate::su2::Rotation;

/// Bath sizes from which the configuration sum is split across threads.
const PARALLEL_BATH: usize = 12;

/// Which register spins the gate should entangle and which it should leave
/// alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterAssignment {
    targets: Vec<usize>,
    bath: Vec<usize>,
}

impl RegisterAssignment {
    pub fn new(targets: Vec<usize>, bath: Vec<usize>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("at least one target spin is required"));
        }
        let total = targets.len() + bath.len();
        let mut seen = vec![false; total];
        for &i in targets.iter().chain(&bath) {
            if i >= total || seen[i] {
                return Err(Error::invalid(format!(
                    "targets and bath must partition 0..{total}, index {i} is repeated or out of range"
                )));
            }
            seen[i] = true;
        }
        Ok(RegisterAssignment { targets, bath })
    }

    /// The first `n_targets` of `total` spins are targets, the rest bath.
    pub fn leading(n_targets: usize, total: usize) -> Result<Self> {
        if n_targets > total {
            return Err(Error::invalid(format!("{n_targets} targets requested from {total} spins")));
        }
        Self::new((0..n_targets).collect(), (n_targets..total).collect())
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn bath(&self) -> &[usize] {
        &self.bath
    }

    pub fn total(&self) -> usize {
        self.targets.len() + self.bath.len()
    }

    fn check(&self, evol: &[ConditionalEvolution]) -> Result<()> {
        if evol.len() != self.total() {
            return Err(Error::invalid(format!(
                "assignment covers {} spins but {} evolutions were given",
                self.total(),
                evol.len()
            )));
        }
        Ok(())
    }
}

/// `c_j` and `p_j` for one bath bitstring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausTerm {
    pub c: [Complex64; 2],
    pub p: [Complex64; 2],
}

impl KrausTerm {
    pub fn weight(&self, branch: usize) -> Complex64 {
        self.c[branch] * self.p[branch]
    }
}

/// Kraus weights indexed by bath bitstring. Bit `b` (little-endian) is the
/// final state of the `b`-th bath spin: 0 puts it into the `c` product, 1 into
/// the `p` product.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausFactors {
    pub terms: Vec<KrausTerm>,
}

/// `<0|R|0>` and `<1|R|0>`.
fn column_zero(r: &Rotation) -> (Complex64, Complex64) {
    let (s, c) = (0.5 * r.angle).sin_cos();
    let [nx, ny, nz] = r.axis;
    (Complex64::new(c, -nz * s), Complex64::new(ny * s, -nx * s))
}

fn kraus_term(cols: &[[(Complex64, Complex64); 2]], bits: usize) -> KrausTerm {
    let one = Complex64::new(1.0, 0.0);
    let mut t = KrausTerm { c: [one; 2], p: [one; 2] };
    for (b, col) in cols.iter().enumerate() {
        let excited = bits >> b & 1 == 1;
        for (j, &(c, p)) in col.iter().enumerate() {
            if excited {
                t.p[j] *= p;
            } else {
                t.c[j] *= c;
            }
        }
    }
    t
}

pub fn kraus_factors(bath_evol: &[ConditionalEvolution]) -> KrausFactors {
    let cols: Vec<[(Complex64, Complex64); 2]> =
        bath_evol.iter().map(|ce| [column_zero(&ce.r0), column_zero(&ce.r1)]).collect();
    let n = 1usize << cols.len();
    let terms = if cols.len() >= PARALLEL_BATH {
        (0..n).into_par_iter().map(|i| kraus_term(&cols, i)).collect()
    } else {
        (0..n).map(|i| kraus_term(&cols, i)).collect()
    };
    KrausFactors { terms }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityResult {
    pub f: f64,
    pub f_opt: f64,
    /// Electron z-rotation angle of the optimized target, in `[0, pi]`.
    pub theta_star: f64,
    /// Sign of the rotation axis along z.
    pub nz_sign: f64,
}

fn bath_evolutions(assignment: &RegisterAssignment, evol: &[ConditionalEvolution]) -> Vec<ConditionalEvolution> {
    assignment.bath.iter().map(|&i| evol[i]).collect()
}

fn normalize(k: usize, sum: f64) -> f64 {
    let half_d = 2f64.powi(k as i32 - 1);
    ((1.0 + half_d * sum) / (4.0 * half_d + 1.0)).clamp(0.0, 1.0)
}

/// Unoptimized gate fidelity.
pub fn fidelity(assignment: &RegisterAssignment, evol: &[ConditionalEvolution]) -> Result<f64> {
    assignment.check(evol)?;
    let kf = kraus_factors(&bath_evolutions(assignment, evol));
    let sum: f64 = kf.terms.iter().map(|t| (t.weight(0) + t.weight(1)).norm_sqr()).sum();
    Ok(normalize(assignment.targets.len(), sum))
}

/// Fidelity with the target gate preceded by the best electron z-rotation.
pub fn fidelity_optimized(assignment: &RegisterAssignment, evol: &[ConditionalEvolution]) -> Result<FidelityResult> {
    assignment.check(evol)?;
    let k = assignment.targets.len();
    let kf = kraus_factors(&bath_evolutions(assignment, evol));
    // sum_i |u S_i + i v D_i|^2 = [u v] [[a, b], [b, c]] [u v]^T
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for t in &kf.terms {
        let s = t.weight(0) + t.weight(1);
        let d = t.weight(0) - t.weight(1);
        a += s.norm_sqr();
        c += d.norm_sqr();
        b -= (s.conj() * d).im;
    }
    let f = normalize(k, a);
    let mid = 0.5 * (a + c);
    let lambda = mid + (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (mut u, mut v) = if b == 0.0 {
        if a >= c {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else if lambda - c > (lambda - a).abs() {
        (lambda - c, b)
    } else {
        (b, lambda - a)
    };
    let norm = u.hypot(v);
    u /= norm;
    v /= norm;
    if u < 0.0 {
        u = -u;
        v = -v;
    }
    let theta_star = 2.0 * v.abs().atan2(u);
    let nz_sign = if v < 0.0 { -1.0 } else { 1.0 };
    let f_opt = normalize(k, lambda).max(f);
    Ok(FidelityResult { f, f_opt, theta_star, nz_sign })
}

pub mod oracle {
    //! Dense-matrix reference implementations.

    use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2, Vector4};
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::RegisterAssignment;
    use crate::error::{Error, Result};
    use crate::sequence::ConditionalEvolution;
    use crate::su2::{Mat2, Rotation};

    /// Largest register the dense oracle accepts.
    pub const MAX_SPINS: usize = 12;
    const THETA_GRID: usize = 4000;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct BruteForce {
        pub f: f64,
        pub f_opt: f64,
        pub theta_opt: f64,
        /// Max-norm deviation of `sum_i E_i^dagger E_i` from the identity.
        pub completeness_error: f64,
    }

    fn to_dense(m: &Mat2) -> DMatrix<Complex64> {
        DMatrix::from_fn(2, 2, |r, c| m[r][c])
    }

    fn kron_all(rots: impl Iterator<Item = Rotation>) -> DMatrix<Complex64> {
        rots.fold(DMatrix::identity(1, 1), |acc, r| acc.kronecker(&to_dense(&r.matrix())))
    }

    /// Builds `sum_j |j><j| (x) R_j^(1) (x) ... (x) R_j^(L)` explicitly, electron
    /// first and spins in index order.
    pub fn full_evolution(evol: &[ConditionalEvolution]) -> DMatrix<Complex64> {
        let k0 = kron_all(evol.iter().map(|ce| ce.r0));
        let k1 = kron_all(evol.iter().map(|ce| ce.r1));
        let n = k0.nrows();
        let mut u = DMatrix::zeros(2 * n, 2 * n);
        u.view_mut((0, 0), (n, n)).copy_from(&k0);
        u.view_mut((n, n), (n, n)).copy_from(&k1);
        u
    }

    /// Fidelity and z-optimized fidelity from explicit Kraus operators, with
    /// the angle found by grid search and golden-section polish.
    pub fn brute_force_fidelity(assignment: &RegisterAssignment, evol: &[ConditionalEvolution]) -> Result<BruteForce> {
        assignment.check(evol)?;
        let l = evol.len();
        if l > MAX_SPINS {
            return Err(Error::TooLarge { got: l, max: MAX_SPINS });
        }
        let (targets, bath) = (assignment.targets(), assignment.bath());
        let u = full_evolution(evol);
        let target_evol: Vec<_> = targets.iter().map(|&i| evol[i]).collect();
        let u0 = full_evolution(&target_evol);
        let d = u0.nrows();
        let kt = targets.len();

        let full_index = |reduced: usize, bath_bits: usize| -> usize {
            let e = reduced >> kt;
            let mut idx = e << l;
            for (p, &s) in targets.iter().enumerate() {
                idx |= (reduced >> (kt - 1 - p) & 1) << (l - 1 - s);
            }
            for (b, &s) in bath.iter().enumerate() {
                idx |= (bath_bits >> b & 1) << (l - 1 - s);
            }
            idx
        };

        let mut completeness = DMatrix::<Complex64>::zeros(d, d);
        // per Kraus operator: trace of U0^dagger E_i restricted to each electron block
        let mut block_traces = Vec::with_capacity(1 << bath.len());
        for i in 0..1usize << bath.len() {
            let e = DMatrix::from_fn(d, d, |r, c| u[(full_index(r, i), full_index(c, 0))]);
            completeness += e.adjoint() * &e;
            let prod = u0.adjoint() * &e;
            let half = d / 2;
            let t0: Complex64 = (0..half).map(|r| prod[(r, r)]).sum();
            let t1: Complex64 = (half..d).map(|r| prod[(r, r)]).sum();
            block_traces.push((t0, t1));
        }
        let completeness_error = (completeness - DMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);

        let df = d as f64;
        // target R_z(theta) U0: its adjoint puts exp(+i theta/2) on block 0
        let fid = |theta: f64| {
            let ph = Complex64::from_polar(1.0, 0.5 * theta);
            let s: f64 = block_traces.iter().map(|&(t0, t1)| (ph * t0 + ph.conj() * t1).norm_sqr()).sum();
            (df + s) / (df * (df + 1.0))
        };
        let f = fid(0.0);
        let period = 4.0 * std::f64::consts::PI;
        let step = period / THETA_GRID as f64;
        let (best_i, _) = (0..THETA_GRID).map(|i| (i, fid(i as f64 * step))).fold((0, f64::NEG_INFINITY), |b, p| {
            if p.1 > b.1 {
                p
            } else {
                b
            }
        });
        let (theta_opt, f_opt) = golden_max(&fid, (best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
        Ok(BruteForce { f, f_opt: f_opt.max(f), theta_opt: theta_opt.rem_euclid(period), completeness_error })
    }

    fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-12 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) >= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let x = 0.5 * (a + b);
        (x, f(x))
    }

    fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> Vector2<Complex64> {
        let mut z = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let v = Vector2::new(z(), z());
        let n = v.norm();
        v / Complex64::new(n, 0.0)
    }

    fn rotation_2x2(r: &Rotation) -> Matrix2<Complex64> {
        let m = r.matrix();
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    /// Monte Carlo estimate of `(9/4) <tau>` for the electron-nucleus gate,
    /// where `tau = 2 (1 - tr rho^2)` is the one-tangle of the output state
    /// for a Haar-random product input. Its expectation equals `1 - G1`.
    /// Returns `(mean, standard error)`.
    pub fn haar_one_tangle<R: Rng + ?Sized>(ce: &ConditionalEvolution, samples: usize, rng: &mut R) -> (f64, f64) {
        let (r0, r1) = (rotation_2x2(&ce.r0), rotation_2x2(&ce.r1));
        let mut u = Matrix4::<Complex64>::zeros();
        u.fixed_view_mut::<2, 2>(0, 0).copy_from(&r0);
        u.fixed_view_mut::<2, 2>(2, 2).copy_from(&r1);

        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..samples {
            let e = random_qubit(rng);
            let n = random_qubit(rng);
            let psi: Vector4<Complex64> = u * Vector4::new(e[0] * n[0], e[0] * n[1], e[1] * n[0], e[1] * n[1]);
            // reduced state of the electron
            let a = psi[0].norm_sqr() + psi[1].norm_sqr();
            let d = psi[2].norm_sqr() + psi[3].norm_sqr();
            let b = psi[0] * psi[2].conj() + psi[1] * psi[3].conj();
            let purity = a * a + d * d + 2.0 * b.norm_sqr();
            let x = 2.25 * 2.0 * (1.0 - purity);
            sum += x;
            sum2 += x * x;
        }
        let n = samples as f64;
        let mean = sum / n;
        let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}
