//! Locating unit times at which a nucleus' two conditional rotation axes are
//! antiparallel.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sequence::{SequenceKind, UnitSchedule};
use crate::spin::{branch_field, Branch, ElectronQubit, NuclearSpin};
use crate::su2::axis_dot;

/// Minimum depth a dip must reach to count as a resonance.
pub const DIP_ACCEPT: f64 = -0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceWindow {
    pub spin_index: usize,
    pub kind: SequenceKind,
    pub k: u32,
    /// Refined resonance unit time, us.
    pub tau_star: f64,
    /// Half-width of the admissible unit-time window, us.
    pub delta: f64,
    pub dot_at_star: f64,
}

impl ResonanceWindow {
    pub fn range(&self) -> (f64, f64) {
        (self.tau_star - self.delta, self.tau_star + self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Grid points across the bracket before polishing.
    pub grid_points: usize,
    /// Absolute polish tolerance on tau, us.
    pub tau_tol: f64,
    /// Window half-width as a fraction of the refined time.
    pub window_fraction: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { grid_points: 400, tau_tol: 1e-9, window_fraction: 0.05 }
    }
}

/// Default search half-width around the analytic seed, as a fraction of it.
pub const DEFAULT_BRACKET_FRACTION: f64 = 0.15;

/// Analytic resonance estimate `4pi (2k - 1) / (omega0 + omega1)`, valid when
/// the Larmor frequency dominates the hyperfine couplings.
pub fn analytic_resonance(spin: &NuclearSpin, electron: &ElectronQubit, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::invalid("resonance order must be >= 1"));
    }
    let w = branch_field(spin, electron, Branch::Zero).omega + branch_field(spin, electron, Branch::One).omega;
    if !(w > 0.0) {
        return Err(Error::NoPrecession);
    }
    Ok(4.0 * PI * (2 * k - 1) as f64 / w)
}

/// Axis overlap of one unit at `tau`; degenerate (axis-less) units count as +1.
pub fn unit_axis_dot(kind: SequenceKind, tau: f64, spin: &NuclearSpin, electron: &ElectronQubit) -> f64 {
    match UnitSchedule::new(kind, tau) {
        Ok(s) => {
            let ce = s.compile(spin, electron);
            axis_dot(&ce.r0, &ce.r1).unwrap_or(1.0)
        }
        Err(_) => 1.0,
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)].into_iter().fold((x, fx), |best, p| if p.1 < best.1 { p } else { best })
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Polishes the grid minimum at index `i` by golden-section search over its
/// neighbouring cells.
fn polish(f: &impl Fn(f64) -> f64, taus: &[f64], i: usize, tol: f64) -> (f64, f64) {
    let a = taus[i.saturating_sub(1)];
    let b = taus[(i + 1).min(taus.len() - 1)];
    golden_section(f, a, b, tol)
}

/// Refines the order-`k` resonance by minimizing the unit axis overlap over
/// `seed +/- bracket`.
pub fn refine_resonance(
    kind: SequenceKind,
    spin: &NuclearSpin,
    electron: &ElectronQubit,
    k: u32,
    bracket: f64,
) -> Result<ResonanceWindow> {
    refine_resonance_with(kind, spin, electron, k, bracket, &RefineOptions::default())
}

pub fn refine_resonance_with(
    kind: SequenceKind,
    spin: &NuclearSpin,
    electron: &ElectronQubit,
    k: u32,
    bracket: f64,
    opts: &RefineOptions,
) -> Result<ResonanceWindow> {
    if !(bracket > 0.0) {
        return Err(Error::invalid(format!("bracket must be positive, got {bracket}")));
    }
    let seed = analytic_resonance(spin, electron, k)?;
    let lo = (seed - bracket).max(1e-6 * seed);
    let hi = seed + bracket;
    let f = |t: f64| unit_axis_dot(kind, t, spin, electron);
    let taus = grid(lo, hi, opts.grid_points);
    let dots: Vec<f64> = taus.iter().map(|&t| f(t)).collect();
    let (imin, _) =
        dots.iter().enumerate().fold((0, f64::INFINITY), |best, (i, &d)| if d < best.1 { (i, d) } else { best });
    let (tau_star, dot_at_star) = polish(&f, &taus, imin, opts.tau_tol);
    if !(dot_at_star < DIP_ACCEPT) {
        return Err(Error::NoResonanceInBracket { tau: tau_star, best_dot: dot_at_star });
    }
    Ok(ResonanceWindow { spin_index: 0, kind, k, tau_star, delta: opts.window_fraction * tau_star, dot_at_star })
}

/// Refinement with the default bracket (15% of the analytic seed).
pub fn refine_resonance_default(
    kind: SequenceKind,
    spin: &NuclearSpin,
    electron: &ElectronQubit,
    k: u32,
) -> Result<ResonanceWindow> {
    let seed = analytic_resonance(spin, electron, k)?;
    refine_resonance(kind, spin, electron, k, DEFAULT_BRACKET_FRACTION * seed)
}

/// Every dip of the unit axis overlap below [`DIP_ACCEPT`] inside
/// `tau_range`, polished. Each dip is labelled with the nearest analytic order.
pub fn scan_dips(
    kind: SequenceKind,
    spin: &NuclearSpin,
    electron: &ElectronQubit,
    tau_range: (f64, f64),
    grid_step: f64,
) -> Result<Vec<ResonanceWindow>> {
    if !(grid_step > 0.0) {
        return Err(Error::invalid(format!("grid step must be positive, got {grid_step}")));
    }
    let (lo, hi) = (tau_range.0.max(grid_step * 1e-3), tau_range.1);
    if !(hi > lo) {
        return Ok(Vec::new());
    }
    let opts = RefineOptions::default();
    let points = ((hi - lo) / grid_step).ceil() as usize + 1;
    let f = |t: f64| unit_axis_dot(kind, t, spin, electron);
    let taus = grid(lo, hi, points);
    let dots: Vec<f64> = taus.iter().map(|&t| f(t)).collect();
    let w = branch_field(spin, electron, Branch::Zero).omega + branch_field(spin, electron, Branch::One).omega;

    let mut out: Vec<ResonanceWindow> = Vec::new();
    for i in 0..dots.len() {
        let left = if i > 0 { dots[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < dots.len() { dots[i + 1] } else { f64::INFINITY };
        if !(dots[i] <= left && dots[i] < right) {
            continue;
        }
        let (tau_star, d) = polish(&f, &taus, i, opts.tau_tol);
        if !(d < DIP_ACCEPT) {
            continue;
        }
        if out.iter().any(|r| (r.tau_star - tau_star).abs() < 1e-6) {
            continue;
        }
        let k = if w > 0.0 { ((tau_star * w / (4.0 * PI) + 1.0) / 2.0).round().max(1.0) as u32 } else { 1 };
        out.push(ResonanceWindow {
            spin_index: 0,
            kind,
            k,
            tau_star,
            delta: opts.window_fraction * tau_star,
            dot_at_star: d,
        });
    }
    Ok(out)
}
