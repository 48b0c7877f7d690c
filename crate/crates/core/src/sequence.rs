//! Dynamical-decoupling units (CPMG, UDDn) compiled into the pair of
//! conditional nuclear rotations they produce.
//!
//! Pulses are instantaneous, perfect electron pi-flips. A unit always holds
//! an even number of pulses so the electron ends in the branch it started in;
//! odd-order UDD units are therefore two back-to-back halves.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spin::{branch_field, Branch, ElectronQubit, NuclearSpin};
use crate::su2::{Quat, Rotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SequenceKind {
    Cpmg,
    /// Uhrig sequence with `n >= 1` pulses per (half) unit.
    Udd(u32),
}

impl SequenceKind {
    pub const UDD3: SequenceKind = SequenceKind::Udd(3);
    pub const UDD4: SequenceKind = SequenceKind::Udd(4);

    /// The three sequences used for register searches by default.
    pub fn defaults() -> Vec<SequenceKind> {
        vec![SequenceKind::Cpmg, SequenceKind::UDD3, SequenceKind::UDD4]
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKind::Cpmg => write!(f, "CPMG"),
            SequenceKind::Udd(n) => write!(f, "UDD{n}"),
        }
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        if upper == "CPMG" {
            return Ok(SequenceKind::Cpmg);
        }
        if let Some(rest) = upper.strip_prefix("UDD") {
            let n: u32 = rest.parse().map_err(|_| Error::invalid(format!("unknown sequence '{s}'")))?;
            if n < 1 {
                return Err(Error::BadOrder(n));
            }
            return Ok(SequenceKind::Udd(n));
        }
        Err(Error::invalid(format!("unknown sequence '{s}'")))
    }
}

impl Serialize for SequenceKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SequenceKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Conditional rotations of one nucleus for electron branches 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEvolution {
    pub r0: Rotation,
    pub r1: Rotation,
}

impl ConditionalEvolution {
    pub const IDENTITY: ConditionalEvolution = ConditionalEvolution { r0: Rotation::IDENTITY, r1: Rotation::IDENTITY };

    pub fn branch(&self, b: Branch) -> &Rotation {
        match b {
            Branch::Zero => &self.r0,
            Branch::One => &self.r1,
        }
    }
}

/// A candidate control setting: `n_iter` repetitions of a `tau`-long unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePlan {
    pub kind: SequenceKind,
    /// Resonance order the unit time was chosen around.
    pub k: u32,
    /// Unit time, us.
    pub tau: f64,
    pub n_iter: u32,
}

impl PulsePlan {
    pub fn gate_time(&self) -> f64 {
        self.tau * self.n_iter as f64
    }
}

/// Uhrig inter-pulse fractions `q_r`, `r = 1..=n+1`.
pub fn udd_fractions(n: u32) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::BadOrder(n));
    }
    let denom = 2.0 * n as f64 + 2.0;
    let pos = |r: u32| (PI * r as f64 / denom).sin().powi(2);
    Ok((1..=n + 1).map(|r| pos(r) - pos(r - 1)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayoutItem {
    /// Free evolution for the given duration (us).
    Free(f64),
    /// Instantaneous electron pi pulse.
    Pi,
}

fn fractions_for(kind: SequenceKind) -> Result<Vec<f64>> {
    match kind {
        SequenceKind::Cpmg => Ok(vec![0.25, 0.5, 0.25]),
        SequenceKind::Udd(n) => {
            let q = udd_fractions(n)?;
            if n % 2 == 0 {
                return Ok(q);
            }
            // odd n: two halves, the last interval of the first half merging
            // with the first interval of the second
            let m = q.len();
            let mut out = Vec::with_capacity(2 * m - 1);
            out.push(q[0] / 2.0);
            out.extend(q[1..m - 1].iter().map(|x| x / 2.0));
            out.push((q[m - 1] + q[0]) / 2.0);
            out.extend(q[1..m - 1].iter().map(|x| x / 2.0));
            out.push(q[m - 1] / 2.0);
            Ok(out)
        }
    }
}

/// Free-evolution durations of one unit; consecutive entries are separated
/// by a pi pulse. The durations sum to `tau`.
pub fn segment_durations(kind: SequenceKind, tau: f64) -> Result<Vec<f64>> {
    let fractions = fractions_for(kind)?;
    let mut out: Vec<f64> = fractions.iter().map(|q| q * tau).collect();
    let last = out.len() - 1;
    let head: f64 = out[..last].iter().sum();
    out[last] = tau - head;
    Ok(out)
}

/// Ordered free segments and pulses of one unit of total duration `tau`.
pub fn unit_layout(kind: SequenceKind, tau: f64) -> Result<Vec<LayoutItem>> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("unit time must be positive, got {tau}")));
    }
    let segs = segment_durations(kind, tau)?;
    let mut out = Vec::with_capacity(2 * segs.len() - 1);
    for (i, d) in segs.into_iter().enumerate() {
        if i > 0 {
            out.push(LayoutItem::Pi);
        }
        out.push(LayoutItem::Free(d));
    }
    Ok(out)
}

/// Precomputed segment durations for a (kind, tau) pair, shared across spins.
#[derive(Debug, Clone)]
pub struct UnitSchedule {
    pub kind: SequenceKind,
    pub tau: f64,
    segments: Vec<f64>,
}

impl UnitSchedule {
    pub fn new(kind: SequenceKind, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("unit time must be positive, got {tau}")));
        }
        Ok(UnitSchedule { kind, tau, segments: segment_durations(kind, tau)? })
    }

    pub fn compile(&self, spin: &NuclearSpin, electron: &ElectronQubit) -> ConditionalEvolution {
        let fields = [branch_field(spin, electron, Branch::Zero), branch_field(spin, electron, Branch::One)];
        let run = |start: Branch| {
            let mut q = Quat::ONE;
            let mut b = start;
            for &d in &self.segments {
                let f = &fields[b.index()];
                if !f.degenerate {
                    q = Quat::from_axis_angle(&f.axis, f.omega * d).mul(&q);
                }
                b = b.flipped();
            }
            Rotation::from_quat(&q)
        };
        ConditionalEvolution { r0: run(Branch::Zero), r1: run(Branch::One) }
    }
}

/// Conditional rotation pair of one unit for one spin.
pub fn compile_unit(
    kind: SequenceKind,
    tau: f64,
    spin: &NuclearSpin,
    electron: &ElectronQubit,
) -> Result<ConditionalEvolution> {
    Ok(UnitSchedule::new(kind, tau)?.compile(spin, electron))
}

/// `n_iter` repetitions: axes unchanged, total angles left unfolded.
pub fn iterate(ce: &ConditionalEvolution, n_iter: u32) -> ConditionalEvolution {
    ConditionalEvolution { r0: ce.r0.powi(n_iter), r1: ce.r1.powi(n_iter) }
}
