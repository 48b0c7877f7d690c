use std::ffi::CStr;
use std::ptr;

use spinreg::resonance::refine_resonance_default;
use spinreg::sequence::SequenceKind;
use spinreg::spin::units::{gauss, khz_2pi};
use spinreg::spin::{ElectronQubit, NuclearSpin, Register, Species};
use spinreg_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(spinreg_last_error_message()) }.to_string_lossy().into_owned()
}

struct Handle(*mut SpinregRegister);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { spinreg_register_free(self.0) }
    }
}

const SPINS: [(&str, f64, f64); 3] = [("13C", 60.0, 30.0), ("29Si", -20.0, 25.0), ("13C", -35.0, 50.0)];

fn build() -> Handle {
    let mut reg = ptr::null_mut();
    assert_eq!(unsafe { spinreg_register_new(1.5, 0.5, 1.5, &mut reg) }, SpinregStatus::Ok);
    let h = Handle(reg);
    for (species, a_par, a_perp) in SPINS {
        let name = format!("{species}\0");
        let st = unsafe {
            spinreg_register_add_spin(h.0, name.as_ptr().cast(), khz_2pi(a_par), khz_2pi(a_perp), gauss(83.0))
        };
        assert_eq!(st, SpinregStatus::Ok, "{}", last_error());
    }
    h
}

fn native() -> Register {
    let spins = SPINS
        .iter()
        .map(|&(s, a, b)| NuclearSpin::new(Species::builtin(s).unwrap(), khz_2pi(a), khz_2pi(b), gauss(83.0)).unwrap())
        .collect();
    Register::new(ElectronQubit::monovacancy(), spins)
}

#[test]
fn register_lifecycle() {
    let h = build();
    assert_eq!(unsafe { spinreg_register_len(h.0) }, 3);
    assert_eq!(unsafe { spinreg_register_len(ptr::null()) }, 0);
    unsafe { spinreg_register_free(ptr::null_mut()) };
}

#[test]
fn errors_are_reported() {
    let h = build();
    let st = unsafe { spinreg_register_add_spin(h.0, c"15N".as_ptr(), 1.0, 1.0, 0.01) };
    assert_eq!(st, SpinregStatus::InvalidInput);
    assert!(last_error().contains("15N"));

    let st = unsafe { spinreg_register_add_spin(h.0, ptr::null(), 1.0, 1.0, 0.01) };
    assert_eq!(st, SpinregStatus::NullPointer);

    let mut reg = ptr::null_mut();
    assert_eq!(unsafe { spinreg_register_new(1.0, 0.5, 3.0, &mut reg) }, SpinregStatus::InvalidInput);
    assert!(reg.is_null());

    let mut r = SpinregResonance::default();
    assert_eq!(unsafe { spinreg_refine_resonance(h.0, 9, 0, 1, &mut r) }, SpinregStatus::InvalidInput);
    assert_eq!(unsafe { spinreg_refine_resonance(ptr::null(), 0, 0, 1, &mut r) }, SpinregStatus::NullPointer);

    let mut out = [0.0; 2];
    let st = unsafe { spinreg_one_tangles(h.0, 0, 10.0, 3, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, SpinregStatus::InvalidInput);

    assert_eq!(unsafe { spinreg_register_len(h.0) }, 3);
    let st = unsafe { spinreg_refine_resonance(h.0, 0, 0, 1, &mut r) };
    assert_eq!(st, SpinregStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn resonance_matches_library() {
    let h = build();
    let reg = native();
    for (udd, kind) in [(0, SequenceKind::Cpmg), (3, SequenceKind::UDD3), (4, SequenceKind::UDD4)] {
        let mut r = SpinregResonance::default();
        assert_eq!(unsafe { spinreg_refine_resonance(h.0, 1, udd, 2, &mut r) }, SpinregStatus::Ok);
        let w = refine_resonance_default(kind, &reg.spins[1], &reg.electron, 2).unwrap();
        assert_eq!((r.tau_star, r.delta, r.dot_at_star), (w.tau_star, w.delta, w.dot_at_star));
    }
}

#[test]
fn search_tangles_and_fidelity_agree() {
    let h = build();
    let targets = [0usize];
    let mut plan = SpinregPlan::default();
    let st = unsafe { spinreg_search(h.0, targets.as_ptr(), targets.len(), 0.85, &mut plan) };
    assert_eq!(st, SpinregStatus::Ok, "{}", last_error());

    let mut tangles = [0.0; 3];
    let st = unsafe { spinreg_one_tangles(h.0, plan.udd_order, plan.tau, plan.n_iter, tangles.as_mut_ptr(), 3) };
    assert_eq!(st, SpinregStatus::Ok);
    assert_eq!(tangles[0], plan.min_target);
    assert_eq!(tangles[1].max(tangles[2]), plan.max_unwanted);
    assert!(plan.min_target >= 0.85 && plan.max_unwanted < 0.85);

    let mut fid = SpinregFidelity::default();
    let st = unsafe {
        spinreg_fidelity(h.0, plan.udd_order, plan.tau, plan.n_iter, targets.as_ptr(), targets.len(), &mut fid)
    };
    assert_eq!(st, SpinregStatus::Ok);
    assert!(fid.f_opt >= fid.f - 1e-12 && fid.f_opt <= 1.0 + 1e-12);
}

#[test]
fn indistinguishable_spins_have_no_plan() {
    let mut reg = ptr::null_mut();
    assert_eq!(unsafe { spinreg_register_new(1.5, 0.5, 1.5, &mut reg) }, SpinregStatus::Ok);
    let h = Handle(reg);
    for _ in 0..2 {
        let st = unsafe { spinreg_register_add_spin(h.0, c"13C".as_ptr(), khz_2pi(60.0), khz_2pi(30.0), gauss(83.0)) };
        assert_eq!(st, SpinregStatus::Ok);
    }
    let targets = [0usize];
    let mut plan = SpinregPlan::default();
    let st = unsafe { spinreg_search(h.0, targets.as_ptr(), 1, 0.85, &mut plan) };
    assert_eq!(st, SpinregStatus::NoFeasiblePlan);
    assert!(!last_error().is_empty());
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/spinreg.h");
    for name in [
        "spinreg_last_error_message",
        "spinreg_register_new",
        "spinreg_register_free",
        "spinreg_register_add_spin",
        "spinreg_register_len",
        "spinreg_refine_resonance",
        "spinreg_one_tangles",
        "spinreg_fidelity",
        "spinreg_search",
        "spinreg_version",
        "typedef struct SpinregRegister SpinregRegister;",
    ] {
        assert!(header.contains(name), "{name}");
    }
    let v = unsafe { CStr::from_ptr(spinreg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(cc.status.success());
    let dir = std::env::temp_dir().join(format!("spinreg-h-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"spinreg.h\"\nint main(void) { SpinregRegister *r = 0; return (int)spinreg_register_new(1.5, 0.5, 1.5, &r); }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .output()
        .unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
