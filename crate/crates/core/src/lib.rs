//! Controllability of nuclear spin registers around a defect electron spin.
//!
//! Pipeline: [`spin`] models the couplings, [`sequence`] compiles a
//! decoupling unit into conditional rotations ([`su2`]), [`resonance`] finds
//! the unit times that entangle a nucleus, [`metrics`] scores entanglement,
//! [`search`] picks a pulse plan for a register, [`fidelity`] rates the
//! resulting gate against the bath, and [`montecarlo`] sweeps random registers.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod cli;
pub mod error;
pub mod fidelity;
pub mod io;
pub mod metrics;
pub mod montecarlo;
pub mod resonance;
pub mod search;
pub mod sequence;
pub mod spin;
pub mod su2;

pub use error::{Error, Result};
