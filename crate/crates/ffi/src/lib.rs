//! C ABI over `spinreg`.
//!
//! Registers live behind an opaque handle. Every call returns a
//! [`SpinregStatus`]; on failure a message is kept per thread and can be read
//! with [`spinreg_last_error_message`]. Sequences are passed as a UDD pulse
//! count, with 0 meaning CPMG.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use spinreg::fidelity::{fidelity_optimized, RegisterAssignment};
use spinreg::metrics::one_tangle;
use spinreg::resonance::refine_resonance_default;
use spinreg::search::{search, SearchConfig};
use spinreg::sequence::{compile_unit, iterate, SequenceKind};
use spinreg::spin::{ElectronQubit, NuclearSpin, Register, Species};
use spinreg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NoResonance = 3,
    NoPrecession = 4,
    NoFeasiblePlan = 5,
    SamplingStuck = 6,
    TooLarge = 7,
    Internal = 8,
}

/// Opaque register: an electron qubit and its nuclear spins.
pub struct SpinregRegister {
    inner: Register,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpinregResonance {
    /// Refined unit time, us.
    pub tau_star: f64,
    /// Half-width of the admissible window, us.
    pub delta: f64,
    pub dot_at_star: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpinregFidelity {
    pub f: f64,
    pub f_opt: f64,
    pub theta_star: f64,
    pub nz_sign: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpinregPlan {
    /// 0 for CPMG, otherwise the UDD pulse count.
    pub udd_order: u32,
    pub k: u32,
    pub tau: f64,
    pub n_iter: u32,
    pub gate_time: f64,
    pub min_target: f64,
    pub max_unwanted: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SpinregStatus {
    match e {
        Error::NoResonanceInBracket { .. } => SpinregStatus::NoResonance,
        Error::NoPrecession | Error::NoRotation => SpinregStatus::NoPrecession,
        Error::SamplingStuck { .. } => SpinregStatus::SamplingStuck,
        Error::TooLarge { .. } => SpinregStatus::TooLarge,
        _ => SpinregStatus::InvalidInput,
    }
}

struct Failure(SpinregStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SpinregStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SpinregStatus::InvalidInput, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpinregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SpinregStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SpinregStatus::Internal
        }
    }
}

unsafe fn register_ref<'a>(reg: *const SpinregRegister) -> Result<&'a Register, Failure> {
    reg.as_ref().map(|r| &r.inner).ok_or_else(|| null("register"))
}

fn kind_of(udd_order: u32) -> SequenceKind {
    if udd_order == 0 {
        SequenceKind::Cpmg
    } else {
        SequenceKind::Udd(udd_order)
    }
}

unsafe fn assignment_of(targets: *const usize, n_targets: usize, total: usize) -> Result<RegisterAssignment, Failure> {
    let targets: Vec<usize> = if n_targets == 0 {
        Vec::new()
    } else if targets.is_null() {
        return Err(null("targets"));
    } else {
        slice::from_raw_parts(targets, n_targets).to_vec()
    };
    if let Some(&t) = targets.iter().find(|&&t| t >= total) {
        return Err(invalid(format!("target index {t} out of range for {total} spins")));
    }
    let bath = (0..total).filter(|i| !targets.contains(i)).collect();
    Ok(RegisterAssignment::new(targets, bath)?)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn spinreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an empty register for an electron of total spin `total_spin`
/// whose qubit uses the levels `s0` and `s1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn spinreg_register_new(
    total_spin: f64,
    s0: f64,
    s1: f64,
    out: *mut *mut SpinregRegister,
) -> SpinregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let electron = ElectronQubit::new(total_spin, s0, s1)?;
        let handle = Box::new(SpinregRegister { inner: Register::new(electron, Vec::new()) });
        *out = Box::into_raw(handle);
        Ok(())
    })
}

/// Frees a register. Null is ignored.
///
/// # Safety
/// `reg` must come from [`spinreg_register_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spinreg_register_free(reg: *mut SpinregRegister) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// Appends a nuclear spin. `species` is "13C", "29Si" or "29Si+"; couplings
/// are in rad/us and the field in tesla.
///
/// # Safety
/// `reg` must be a live handle and `species` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spinreg_register_add_spin(
    reg: *mut SpinregRegister,
    species: *const c_char,
    a_par: f64,
    a_perp: f64,
    field_tesla: f64,
) -> SpinregStatus {
    guard(|| {
        let reg = reg.as_mut().ok_or_else(|| null("register"))?;
        if species.is_null() {
            return Err(null("species"));
        }
        let name = CStr::from_ptr(species).to_str().map_err(|_| invalid("species is not UTF-8"))?;
        let sp = Species::builtin(name).ok_or_else(|| invalid(format!("unknown species '{name}'")))?;
        reg.inner.spins.push(NuclearSpin::new(sp, a_par, a_perp, field_tesla)?);
        Ok(())
    })
}

/// Number of nuclear spins in the register, 0 for a null handle.
///
/// # Safety
/// `reg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinreg_register_len(reg: *const SpinregRegister) -> usize {
    reg.as_ref().map_or(0, |r| r.inner.len())
}

/// Refined order-`k` resonance of spin `index` under the given sequence.
///
/// # Safety
/// `reg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spinreg_refine_resonance(
    reg: *const SpinregRegister,
    index: usize,
    udd_order: u32,
    k: u32,
    out: *mut SpinregResonance,
) -> SpinregStatus {
    guard(|| {
        let reg = register_ref(reg)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spin = reg.spins.get(index).ok_or_else(|| invalid(format!("no spin {index}")))?;
        let w = refine_resonance_default(kind_of(udd_order), spin, &reg.electron, k)?;
        *out = SpinregResonance { tau_star: w.tau_star, delta: w.delta, dot_at_star: w.dot_at_star };
        Ok(())
    })
}

/// One-tangle of every spin after `n_iter` units of length `tau`. `out` must
/// hold `len` values, at least the register size.
///
/// # Safety
/// `reg` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn spinreg_one_tangles(
    reg: *const SpinregRegister,
    udd_order: u32,
    tau: f64,
    n_iter: u32,
    out: *mut f64,
    len: usize,
) -> SpinregStatus {
    guard(|| {
        let reg = register_ref(reg)?;
        if len < reg.len() {
            return Err(invalid(format!("output holds {len} values, register has {}", reg.len())));
        }
        if reg.is_empty() {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let out = slice::from_raw_parts_mut(out, reg.len());
        for (slot, spin) in out.iter_mut().zip(&reg.spins) {
            let unit = compile_unit(kind_of(udd_order), tau, spin, &reg.electron)?;
            *slot = one_tangle(&iterate(&unit, n_iter));
        }
        Ok(())
    })
}

/// Gate fidelity of a plan with the listed spins as targets and the rest as bath.
///
/// # Safety
/// `reg` must be a live handle, `targets` valid for `n_targets` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spinreg_fidelity(
    reg: *const SpinregRegister,
    udd_order: u32,
    tau: f64,
    n_iter: u32,
    targets: *const usize,
    n_targets: usize,
    out: *mut SpinregFidelity,
) -> SpinregStatus {
    guard(|| {
        let reg = register_ref(reg)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let a = assignment_of(targets, n_targets, reg.len())?;
        let evol = reg
            .spins
            .iter()
            .map(|s| compile_unit(kind_of(udd_order), tau, s, &reg.electron).map(|u| iterate(&u, n_iter)))
            .collect::<spinreg::Result<Vec<_>>>()?;
        let r = fidelity_optimized(&a, &evol)?;
        *out = SpinregFidelity { f: r.f, f_opt: r.f_opt, theta_star: r.theta_star, nz_sign: r.nz_sign };
        Ok(())
    })
}

/// Best plan over CPMG, UDD3 and UDD4 with default search settings and the
/// given one-tangle threshold. Returns `NoFeasiblePlan` when none qualifies.
///
/// # Safety
/// `reg` must be a live handle, `targets` valid for `n_targets` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spinreg_search(
    reg: *const SpinregRegister,
    targets: *const usize,
    n_targets: usize,
    eps_threshold: f64,
    out: *mut SpinregPlan,
) -> SpinregStatus {
    guard(|| {
        let reg = register_ref(reg)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let a = assignment_of(targets, n_targets, reg.len())?;
        let config = SearchConfig { eps_threshold, ..SearchConfig::default() };
        let best = search(reg, &a, &config)?
            .ok_or_else(|| Failure(SpinregStatus::NoFeasiblePlan, "no feasible plan".into()))?;
        *out = SpinregPlan {
            udd_order: match best.plan.kind {
                SequenceKind::Cpmg => 0,
                SequenceKind::Udd(n) => n,
            },
            k: best.plan.k,
            tau: best.plan.tau,
            n_iter: best.plan.n_iter,
            gate_time: best.gate_time,
            min_target: best.min_target,
            max_unwanted: best.max_unwanted,
        };
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spinreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
