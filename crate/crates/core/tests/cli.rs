use std::path::PathBuf;
use std::process::{Command, Output};

use spinreg::io::{read_records, Format};
use spinreg::montecarlo::SweepCell;
use spinreg::search::PlanEvaluation;

fn spinreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinreg")).args(args).env_remove("SPINREG_THREADS").output().unwrap()
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).to_string_lossy().into_owned()
}

#[test]
fn plan_on_register_file() {
    let reg = data("three_spins.toml");
    let out = spinreg(&["plan", "--register", &reg, "--targets", "2", "--kinds", "CPMG", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plans: Vec<PlanEvaluation> = read_records(Format::Json, &out.stdout[..]).unwrap();
    assert_eq!(plans.len(), 1);
    let p = &plans[0];
    assert!(p.feasible && p.min_target >= 0.85 && p.max_unwanted < 0.85);
    assert!(p.gate_time <= 3000.0);
}

#[test]
fn fixed_plan_csv() {
    let reg = data("three_spins.toml");
    let out = spinreg(&["plan", "--register", &reg, "--kind", "CPMG", "--tau", "26.54", "--n-iter", "28"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("kind,k,tau_us,n_iter"));
    assert!(lines.next().unwrap().starts_with("CPMG,1,26.54,28,"));
    assert!(lines.next().is_none());
}

#[test]
fn fidelity_of_single_target() {
    let reg = data("three_spins.toml");
    let out = spinreg(&[
        "fidelity",
        "--register",
        &reg,
        "--targets",
        "2",
        "--kind",
        "CPMG",
        "--tau",
        "22.268",
        "--n-iter",
        "12",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let f: f64 = row[4].parse().unwrap();
    let f_opt: f64 = row[5].parse().unwrap();
    assert!(f_opt >= f && f_opt >= 0.9, "{f} {f_opt}");
}

#[test]
fn sweep_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let p = path.to_str().unwrap();
    let out = spinreg(&["sweep", "--nr", "1", "--nb", "1..2", "--realizations", "4", "--seed", "3", "--out", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cells: Vec<SweepCell> = read_records(Format::Csv, std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c.successes == 4 && c.mean_log_infid.is_some()));
}

#[test]
fn exit_codes() {
    assert_eq!(spinreg(&["plan"]).status.code(), Some(4));
    assert_eq!(spinreg(&["sweep", "--eps-threshold", "0"]).status.code(), Some(2));
    assert_eq!(spinreg(&["plan", "--register", "/nonexistent/reg.toml"]).status.code(), Some(5));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[electron]\nspin = 1.5\n").unwrap();
    assert_eq!(spinreg(&["plan", "--register", bad.to_str().unwrap()]).status.code(), Some(3));
    let help = spinreg(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("sweep"));
}
