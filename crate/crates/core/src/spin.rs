//! Physical model of the central electron spin and the nuclear spins it
//! couples to.
//!
//! Internal units throughout the crate: angular frequencies in rad/us and
//! times in us. Hyperfine and Larmor values are usually quoted as
//! "2pi x kHz"; use [`units::khz_2pi`] to convert.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod units {
    use std::f64::consts::TAU;

    /// `2pi * value kHz` expressed in rad/us.
    pub fn khz_2pi(value: f64) -> f64 {
        TAU * value * 1e-3
    }

    /// Inverse of [`khz_2pi`].
    pub fn to_khz_2pi(omega: f64) -> f64 {
        omega / (TAU * 1e-3)
    }

    /// `2pi * value MHz/T` expressed in rad/us per tesla.
    pub fn mhz_per_tesla_2pi(value: f64) -> f64 {
        TAU * value
    }

    pub fn gauss(value: f64) -> f64 {
        value * 1e-4
    }
}

/// A nuclear species, identified by its signed gyromagnetic ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    /// rad/us per tesla.
    pub gamma: f64,
}

impl Species {
    pub fn new(name: impl Into<String>, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma == 0.0 {
            return Err(Error::invalid(format!("gyromagnetic ratio must be finite and nonzero, got {gamma}")));
        }
        Ok(Species { name: name.into(), gamma })
    }

    /// 13C, gamma = 2pi * 10.7084 MHz/T.
    pub fn carbon13() -> Self {
        Species { name: "13C".into(), gamma: units::mhz_per_tesla_2pi(10.7084) }
    }

    /// 29Si, gamma = -2pi * 8.465 MHz/T.
    pub fn silicon29() -> Self {
        Species { name: "29Si".into(), gamma: units::mhz_per_tesla_2pi(-8.465) }
    }

    /// Hypothetical 29Si with the sign of its gyromagnetic ratio flipped.
    pub fn silicon29_positive() -> Self {
        Species { name: "29Si+".into(), gamma: units::mhz_per_tesla_2pi(8.465) }
    }

    /// Looks up one of the built-in species by label.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "13C" | "C13" | "C" => Some(Self::carbon13()),
            "29Si" | "Si29" | "Si" => Some(Self::silicon29()),
            "29Si+" => Some(Self::silicon29_positive()),
            _ => None,
        }
    }

    pub fn with_flipped_sign(&self) -> Self {
        Species { name: self.name.clone(), gamma: -self.gamma }
    }
}

/// Signed Larmor frequency `gamma * B` in rad/us.
pub fn larmor_frequency(species: &Species, field_tesla: f64) -> Result<f64> {
    if !(field_tesla >= 0.0) || !field_tesla.is_finite() {
        return Err(Error::invalid(format!("magnetic field must be finite and >= 0, got {field_tesla}")));
    }
    Ok(species.gamma * field_tesla)
}

/// The two electron levels that form the control qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectronQubit {
    pub total_spin: f64,
    pub s0: f64,
    pub s1: f64,
}

fn is_half_integer_multiple(x: f64) -> bool {
    let twice = 2.0 * x;
    (twice - twice.round()).abs() < 1e-12
}

impl ElectronQubit {
    pub fn new(total_spin: f64, s0: f64, s1: f64) -> Result<Self> {
        if !(total_spin > 0.0) || !is_half_integer_multiple(total_spin) {
            return Err(Error::invalid(format!("total spin must be a positive half-integer, got {total_spin}")));
        }
        for s in [s0, s1] {
            let steps = s + total_spin;
            if s.abs() > total_spin + 1e-12 || (steps - steps.round()).abs() > 1e-12 {
                return Err(Error::invalid(format!("projection {s} is not a valid projection of spin {total_spin}")));
            }
        }
        if (s0 - s1).abs() < 1e-12 {
            return Err(Error::invalid("qubit projections s0 and s1 must differ"));
        }
        Ok(ElectronQubit { total_spin, s0, s1 })
    }

    /// Silicon monovacancy in SiC, S = 3/2 with qubit levels (1/2, 3/2).
    pub fn monovacancy() -> Self {
        ElectronQubit { total_spin: 1.5, s0: 0.5, s1: 1.5 }
    }

    /// Neutral divacancy in SiC, S = 1 with qubit levels (0, -1).
    pub fn divacancy() -> Self {
        ElectronQubit { total_spin: 1.0, s0: 0.0, s1: -1.0 }
    }

    pub fn projection(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Zero => self.s0,
            Branch::One => self.s1,
        }
    }
}

/// Electron logical state selecting which conditional Hamiltonian a nucleus sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Zero,
    One,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Zero, Branch::One];

    pub fn flipped(self) -> Self {
        match self {
            Branch::Zero => Branch::One,
            Branch::One => Branch::Zero,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Branch::Zero => 0,
            Branch::One => 1,
        }
    }
}

/// One nuclear spin of the register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearSpin {
    pub species: Species,
    /// Parallel hyperfine component, rad/us.
    pub a_par: f64,
    /// Perpendicular hyperfine component, rad/us. Always >= 0.
    pub a_perp: f64,
    /// Signed Larmor frequency, rad/us.
    pub omega_l: f64,
}

impl NuclearSpin {
    /// Builds a spin in the given field. A negative `a_perp` is folded to its
    /// magnitude (the sign is a nuclear-frame phase).
    pub fn new(species: Species, a_par: f64, a_perp: f64, field_tesla: f64) -> Result<Self> {
        let omega_l = larmor_frequency(&species, field_tesla)?;
        Self::with_larmor(species, omega_l, a_par, a_perp)
    }

    /// Builds a spin with an explicitly quoted Larmor frequency.
    pub fn with_larmor(species: Species, omega_l: f64, a_par: f64, a_perp: f64) -> Result<Self> {
        if ![omega_l, a_par, a_perp].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("spin parameters must be finite"));
        }
        Ok(NuclearSpin { species, a_par, a_perp: a_perp.abs(), omega_l })
    }
}

/// A central electron and the nuclear spins around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub electron: ElectronQubit,
    pub spins: Vec<NuclearSpin>,
}

impl Register {
    pub fn new(electron: ElectronQubit, spins: Vec<NuclearSpin>) -> Self {
        Register { electron, spins }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }
}

/// Effective field seen by a nucleus while the electron sits in one branch:
/// `H_j = (omega/2) axis . sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchField {
    pub omega: f64,
    pub axis: [f64; 3],
    /// Set when `omega == 0`; the axis is then an arbitrary placeholder.
    pub degenerate: bool,
}

pub fn branch_field(spin: &NuclearSpin, electron: &ElectronQubit, branch: Branch) -> BranchField {
    let s = electron.projection(branch);
    let x = s * spin.a_perp;
    let z = spin.omega_l + s * spin.a_par;
    let omega = x.hypot(z);
    if omega == 0.0 {
        return BranchField { omega: 0.0, axis: [0.0, 0.0, 1.0], degenerate: true };
    }
    BranchField { omega, axis: [x / omega, 0.0, z / omega], degenerate: false }
}
