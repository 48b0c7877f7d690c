//! Register description files and result tables (CSV / JSON).

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::montecarlo::{SweepCell, TileStatus};
use crate::resonance::ResonanceWindow;
use crate::search::{PlanEvaluation, TraceRow};
use crate::sequence::PulsePlan;
use crate::spin::units::{gauss, khz_2pi, to_khz_2pi};
use crate::spin::{ElectronQubit, NuclearSpin, Register, Species};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    BadFile { path: PathBuf, msg: String },
    #[error("malformed table: {0}")]
    Parse(String),
}

fn parse_err(msg: impl std::fmt::Display) -> IoError {
    IoError::Parse(msg.to_string())
}

// ---- register files ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectronSection {
    pub spin: f64,
    pub s0: f64,
    pub s1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinEntry {
    /// `13C`, `29Si` or `29Si+`.
    pub species: String,
    #[serde(rename = "A_par_kHz_times_2pi")]
    pub a_par: f64,
    #[serde(rename = "A_perp_kHz_times_2pi")]
    pub a_perp: f64,
    /// Overrides the Larmor frequency computed from the field.
    #[serde(rename = "larmor_kHz_times_2pi", default, skip_serializing_if = "Option::is_none")]
    pub larmor: Option<f64>,
}

/// On-disk register description. Every frequency is in units of 2pi kHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_gauss: Option<f64>,
    pub electron: ElectronSection,
    #[serde(rename = "spin", default)]
    pub spins: Vec<SpinEntry>,
}

impl RegisterFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_register(&self) -> Result<Register, String> {
        let e = &self.electron;
        let electron = ElectronQubit::new(e.spin, e.s0, e.s1).map_err(|e| e.to_string())?;
        let field = self.field_gauss.map(gauss);
        let spins = self
            .spins
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let species =
                    Species::builtin(&s.species).ok_or_else(|| format!("spin {i}: unknown species '{}'", s.species))?;
                let (a_par, a_perp) = (khz_2pi(s.a_par), khz_2pi(s.a_perp));
                let spin = match (s.larmor, field) {
                    (Some(l), _) => NuclearSpin::with_larmor(species, khz_2pi(l), a_par, a_perp),
                    (None, Some(b)) => NuclearSpin::new(species, a_par, a_perp, b),
                    (None, None) => return Err(format!("spin {i}: no Larmor frequency and no field_gauss given")),
                };
                spin.map_err(|e| format!("spin {i}: {e}"))
            })
            .collect::<Result<Vec<_>, String>>()?;
        if spins.is_empty() {
            return Err("register lists no spins".into());
        }
        Ok(Register::new(electron, spins))
    }

    /// File form of `register`, quoting every Larmor frequency explicitly.
    pub fn from_register(register: &Register) -> Self {
        let e = register.electron;
        RegisterFile {
            field_gauss: None,
            electron: ElectronSection { spin: e.total_spin, s0: e.s0, s1: e.s1 },
            spins: register
                .spins
                .iter()
                .map(|s| SpinEntry {
                    species: s.species.name.clone(),
                    a_par: to_khz_2pi(s.a_par),
                    a_perp: to_khz_2pi(s.a_perp),
                    larmor: Some(to_khz_2pi(s.omega_l)),
                })
                .collect(),
        }
    }
}

pub fn load_register(path: &Path) -> Result<Register, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.into(), source })?;
    let bad = |msg: String| IoError::BadFile { path: path.into(), msg };
    RegisterFile::parse(&text).map_err(bad)?.to_register().map_err(bad)
}

// ---- result tables ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

impl Format {
    /// Format implied by a file extension, if any.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension().and_then(|e| e.to_str()).and_then(|e| e.parse().ok())
    }
}

/// A result type that can be written as one table row.
pub trait Record: Serialize + DeserializeOwned + Sized {
    /// Name stored in the JSON envelope.
    const TABLE: &'static str;
    fn header(records: &[Self]) -> Vec<String>;
    fn to_row(&self) -> Vec<String>;
    fn from_row(header: &[String], row: &[String]) -> Result<Self, IoError>;
}

#[derive(Serialize, Deserialize)]
struct Envelope<R> {
    schema: u32,
    table: String,
    records: R,
}

/// Unwraps csv's I/O errors so callers can still see their kind.
fn csv_io(e: csv::Error) -> std::io::Error {
    if !e.is_io_error() {
        return std::io::Error::other(e);
    }
    match e.into_kind() {
        csv::ErrorKind::Io(inner) => inner,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

pub fn write_records<T: Record, W: Write>(records: &[T], format: Format, mut out: W) -> Result<(), std::io::Error> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(T::header(records)).map_err(csv_io)?;
            for r in records {
                w.write_record(r.to_row()).map_err(csv_io)?;
            }
            w.flush()
        }
        Format::Json => {
            let env = Envelope { schema: SCHEMA_VERSION, table: T::TABLE.into(), records };
            serde_json::to_writer_pretty(&mut out, &env)?;
            out.write_all(b"\n")
        }
    }
}

pub fn read_records<T: Record, R: Read>(format: Format, input: R) -> Result<Vec<T>, IoError> {
    match format {
        Format::Csv => {
            let mut rd = csv::Reader::from_reader(input);
            let header: Vec<String> = rd.headers().map_err(parse_err)?.iter().map(String::from).collect();
            rd.records()
                .map(|r| {
                    let r = r.map_err(parse_err)?;
                    let row: Vec<String> = r.iter().map(String::from).collect();
                    T::from_row(&header, &row)
                })
                .collect()
        }
        Format::Json => {
            let env: Envelope<Vec<T>> = serde_json::from_reader(input).map_err(parse_err)?;
            if env.schema != SCHEMA_VERSION {
                return Err(parse_err(format!("unsupported schema version {}", env.schema)));
            }
            if env.table != T::TABLE {
                return Err(parse_err(format!("expected a '{}' table, found '{}'", T::TABLE, env.table)));
            }
            Ok(env.records)
        }
    }
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_results<T: Record>(records: &[T], format: Format, path: Option<&Path>) -> Result<(), IoError> {
    match path {
        Some(p) => {
            let file = fs::File::create(p).map_err(|source| IoError::Io { path: p.into(), source })?;
            let mut buf = std::io::BufWriter::new(file);
            write_records(records, format, &mut buf)
                .and_then(|_| buf.flush())
                .map_err(|source| IoError::Io { path: p.into(), source })
        }
        None => {
            let stdout = std::io::stdout();
            match write_records(records, format, stdout.lock()) {
                // a closed pipe (`| head`) is not an error worth reporting
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|source| IoError::Io { path: "<stdout>".into(), source }),
            }
        }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

/// Column access by name for the row parsers.
struct Row<'a> {
    header: &'a [String],
    row: &'a [String],
}

impl<'a> Row<'a> {
    fn new(header: &'a [String], row: &'a [String]) -> Result<Self, IoError> {
        if header.len() != row.len() {
            return Err(parse_err(format!("row has {} fields, header has {}", row.len(), header.len())));
        }
        Ok(Row { header, row })
    }

    fn raw(&self, name: &str) -> Result<&'a str, IoError> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.row[i].as_str())
            .ok_or_else(|| parse_err(format!("missing column '{name}'")))
    }

    fn get<T: std::str::FromStr>(&self, name: &str) -> Result<T, IoError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(name)?;
        s.parse().map_err(|e| parse_err(format!("column '{name}': '{s}': {e}")))
    }

    fn opt_f64(&self, name: &str) -> Result<Option<f64>, IoError> {
        let s = self.raw(name)?;
        if s.is_empty() {
            Ok(None)
        } else {
            self.get(name).map(Some)
        }
    }

    fn list(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let s = self.raw(name)?;
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(';').map(|x| x.parse().map_err(|e| parse_err(format!("column '{name}': {e}")))).collect()
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Record for ResonanceWindow {
    const TABLE: &'static str = "resonances";

    fn header(_: &[Self]) -> Vec<String> {
        strings(&["spin", "kind", "k", "tau_star_us", "delta_us", "dot_at_star"])
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.spin_index.to_string(),
            self.kind.to_string(),
            self.k.to_string(),
            num(self.tau_star),
            num(self.delta),
            num(self.dot_at_star),
        ]
    }

    fn from_row(header: &[String], row: &[String]) -> Result<Self, IoError> {
        let r = Row::new(header, row)?;
        Ok(ResonanceWindow {
            spin_index: r.get("spin")?,
            kind: r.get("kind")?,
            k: r.get("k")?,
            tau_star: r.get("tau_star_us")?,
            delta: r.get("delta_us")?,
            dot_at_star: r.get("dot_at_star")?,
        })
    }
}

impl Record for TraceRow {
    const TABLE: &'static str = "tangles";

    fn header(records: &[Self]) -> Vec<String> {
        let n = records.first().map_or(0, |r| r.tangles.len());
        let mut h = strings(&["tau_us", "n_iter", "gate_time_us"]);
        h.extend((0..n).map(|i| format!("tangle_{i}")));
        h
    }

    fn to_row(&self) -> Vec<String> {
        let mut row = vec![num(self.tau), self.n_iter.to_string(), num(self.gate_time)];
        row.extend(self.tangles.iter().map(|&t| num(t)));
        row
    }

    fn from_row(header: &[String], row: &[String]) -> Result<Self, IoError> {
        let r = Row::new(header, row)?;
        let n = header.iter().filter(|h| h.starts_with("tangle_")).count();
        Ok(TraceRow {
            tau: r.get("tau_us")?,
            n_iter: r.get("n_iter")?,
            gate_time: r.get("gate_time_us")?,
            tangles: (0..n).map(|i| r.get(&format!("tangle_{i}"))).collect::<Result<_, _>>()?,
        })
    }
}

impl Record for PlanEvaluation {
    const TABLE: &'static str = "plans";

    fn header(_: &[Self]) -> Vec<String> {
        strings(&[
            "kind",
            "k",
            "tau_us",
            "n_iter",
            "gate_time_us",
            "min_target",
            "max_unwanted",
            "feasible",
            "target_tangles",
            "bath_tangles",
        ])
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.plan.kind.to_string(),
            self.plan.k.to_string(),
            num(self.plan.tau),
            self.plan.n_iter.to_string(),
            num(self.gate_time),
            num(self.min_target),
            num(self.max_unwanted),
            self.feasible.to_string(),
            list(&self.target_tangles),
            list(&self.bath_tangles),
        ]
    }

    fn from_row(header: &[String], row: &[String]) -> Result<Self, IoError> {
        let r = Row::new(header, row)?;
        Ok(PlanEvaluation {
            plan: PulsePlan { kind: r.get("kind")?, k: r.get("k")?, tau: r.get("tau_us")?, n_iter: r.get("n_iter")? },
            target_tangles: r.list("target_tangles")?,
            bath_tangles: r.list("bath_tangles")?,
            min_target: r.get("min_target")?,
            max_unwanted: r.get("max_unwanted")?,
            feasible: r.get("feasible")?,
            gate_time: r.get("gate_time_us")?,
        })
    }
}

/// Fidelity of one register under one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub plan: PulsePlan,
    pub f: f64,
    pub f_opt: f64,
    pub theta_star: f64,
    pub nz_sign: f64,
    pub min_target: f64,
    pub max_unwanted: f64,
}

impl Record for FidelityRecord {
    const TABLE: &'static str = "fidelity";

    fn header(_: &[Self]) -> Vec<String> {
        strings(&["kind", "k", "tau_us", "n_iter", "f", "f_opt", "theta_star", "nz_sign", "min_target", "max_unwanted"])
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.plan.kind.to_string(),
            self.plan.k.to_string(),
            num(self.plan.tau),
            self.plan.n_iter.to_string(),
            num(self.f),
            num(self.f_opt),
            num(self.theta_star),
            num(self.nz_sign),
            num(self.min_target),
            num(self.max_unwanted),
        ]
    }

    fn from_row(header: &[String], row: &[String]) -> Result<Self, IoError> {
        let r = Row::new(header, row)?;
        Ok(FidelityRecord {
            plan: PulsePlan { kind: r.get("kind")?, k: r.get("k")?, tau: r.get("tau_us")?, n_iter: r.get("n_iter")? },
            f: r.get("f")?,
            f_opt: r.get("f_opt")?,
            theta_star: r.get("theta_star")?,
            nz_sign: r.get("nz_sign")?,
            min_target: r.get("min_target")?,
            max_unwanted: r.get("max_unwanted")?,
        })
    }
}

fn encode_histogram<K: std::fmt::Display>(h: &BTreeMap<K, usize>) -> String {
    h.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(";")
}

fn decode_histogram<K: std::str::FromStr + Ord>(s: &str) -> Result<BTreeMap<K, usize>, IoError> {
    let mut h = BTreeMap::new();
    for entry in s.split(';').filter(|e| !e.is_empty()) {
        let (k, v) = entry.split_once(':').ok_or_else(|| parse_err(format!("bad histogram entry '{entry}'")))?;
        let k = k.parse().map_err(|_| parse_err(format!("bad histogram key '{k}'")))?;
        h.insert(k, v.parse().map_err(|e| parse_err(format!("bad histogram count '{v}': {e}")))?);
    }
    Ok(h)
}

fn status_name(s: TileStatus) -> &'static str {
    match s {
        TileStatus::Complete => "complete",
        TileStatus::AttemptCapExceeded => "attempt_cap_exceeded",
    }
}

impl Record for SweepCell {
    const TABLE: &'static str = "sweep";

    fn header(_: &[Self]) -> Vec<String> {
        strings(&[
            "n_r",
            "n_b",
            "mean_log_infid",
            "var_log_infid",
            "successes",
            "attempts",
            "status",
            "kind_histogram",
            "order_histogram",
        ])
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.n_r.to_string(),
            self.n_b.to_string(),
            opt_num(self.mean_log_infid),
            opt_num(self.var_log_infid),
            self.successes.to_string(),
            self.attempts.to_string(),
            status_name(self.status).into(),
            encode_histogram(&self.kind_histogram),
            encode_histogram(&self.order_histogram),
        ]
    }

    fn from_row(header: &[String], row: &[String]) -> Result<Self, IoError> {
        let r = Row::new(header, row)?;
        let status = match r.raw("status")? {
            "complete" => TileStatus::Complete,
            "attempt_cap_exceeded" => TileStatus::AttemptCapExceeded,
            other => return Err(parse_err(format!("unknown tile status '{other}'"))),
        };
        Ok(SweepCell {
            n_r: r.get("n_r")?,
            n_b: r.get("n_b")?,
            mean_log_infid: r.opt_f64("mean_log_infid")?,
            var_log_infid: r.opt_f64("var_log_infid")?,
            successes: r.get("successes")?,
            attempts: r.get("attempts")?,
            status,
            kind_histogram: decode_histogram(r.raw("kind_histogram")?)?,
            order_histogram: decode_histogram(r.raw("order_histogram")?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::SequenceKind;

    fn cell() -> SweepCell {
        SweepCell {
            n_r: 2,
            n_b: 3,
            mean_log_infid: Some(-3.123456789012345),
            var_log_infid: None,
            successes: 8,
            attempts: 9,
            status: TileStatus::Complete,
            kind_histogram: [("CPMG".to_string(), 3), ("UDD3".to_string(), 5)].into_iter().collect(),
            order_histogram: [(1, 6), (2, 2)].into_iter().collect(),
        }
    }

    fn round_trip<T: Record + PartialEq + std::fmt::Debug>(records: Vec<T>) {
        for format in [Format::Csv, Format::Json] {
            let mut buf = Vec::new();
            write_records(&records, format, &mut buf).unwrap();
            let back: Vec<T> = read_records(format, buf.as_slice()).unwrap();
            assert_eq!(back, records, "{format:?}");
        }
    }

    #[test]
    fn empty_grid_is_header_only() {
        let mut buf = Vec::new();
        write_records::<SweepCell, _>(&[], Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("n_r,n_b,mean_log_infid"));
    }

    #[test]
    fn sweep_cell_round_trip() {
        round_trip(vec![cell()]);
        let mut json = Vec::new();
        write_records(&[cell()], Format::Json, &mut json).unwrap();
        let text = String::from_utf8(json).unwrap();
        assert!(text.contains("\"schema\": 1"));
        assert!(text.contains("\"var_log_infid\": null"));
    }

    #[test]
    fn other_records_round_trip() {
        let plan = PulsePlan { kind: SequenceKind::UDD3, k: 2, tau: 12.404000000000001, n_iter: 17 };
        round_trip(vec![ResonanceWindow {
            spin_index: 1,
            kind: SequenceKind::Cpmg,
            k: 3,
            tau_star: 20.62065,
            delta: 1.0310325,
            dot_at_star: -0.9999999999987,
        }]);
        round_trip(vec![TraceRow { tau: 26.54, n_iter: 28, gate_time: 743.12, tangles: vec![0.97, 0.1, 1e-300] }]);
        round_trip(vec![PlanEvaluation {
            plan,
            target_tangles: vec![0.9, 0.95],
            bath_tangles: vec![],
            min_target: 0.9,
            max_unwanted: 0.0,
            feasible: true,
            gate_time: plan.gate_time(),
        }]);
        round_trip(vec![FidelityRecord {
            plan,
            f: 0.99,
            f_opt: 0.995,
            theta_star: 0.25,
            nz_sign: -1.0,
            min_target: 0.9,
            max_unwanted: 0.01,
        }]);
    }

    #[test]
    fn register_file_parses() {
        let text = r#"
field_gauss = 83.0

[electron]
spin = 1.5
s0 = 0.5
s1 = 1.5

[[spin]]
species = "13C"
A_par_kHz_times_2pi = 151.3741
A_perp_kHz_times_2pi = 105.0043

[[spin]]
species = "29Si"
A_par_kHz_times_2pi = 96.2445
A_perp_kHz_times_2pi = 180.9921
larmor_kHz_times_2pi = -70.2595
"#;
        let reg = RegisterFile::parse(text).unwrap().to_register().unwrap();
        assert_eq!(reg.len(), 2);
        assert!((to_khz_2pi(reg.spins[0].omega_l) - 88.8797).abs() < 1e-3);
        assert_eq!(to_khz_2pi(reg.spins[1].omega_l), -70.2595);
        let back = RegisterFile::from_register(&reg).to_register().unwrap();
        assert!((back.spins[1].a_perp - reg.spins[1].a_perp).abs() < 1e-12);
    }

    #[test]
    fn register_file_rejects_unknown_keys_and_species() {
        let base = "[electron]\nspin = 1.5\ns0 = 0.5\ns1 = 1.5\n";
        assert!(RegisterFile::parse(&format!("{base}colour = 1\n")).is_err());
        let bad_species = format!("{base}[[spin]]\nspecies = \"14N\"\nA_par_kHz_times_2pi = 1\nA_perp_kHz_times_2pi = 1\nlarmor_kHz_times_2pi = 1\n");
        assert!(RegisterFile::parse(&bad_species).unwrap().to_register().is_err());
        let no_field =
            format!("{base}[[spin]]\nspecies = \"13C\"\nA_par_kHz_times_2pi = 1\nA_perp_kHz_times_2pi = 1\n");
        assert!(RegisterFile::parse(&no_field).unwrap().to_register().is_err());
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let text = "n_r,n_b\n1\n";
        assert!(read_records::<SweepCell, _>(Format::Csv, text.as_bytes()).is_err());
        let json = r#"{"schema": 2, "table": "sweep", "records": []}"#;
        assert!(read_records::<SweepCell, _>(Format::Json, json.as_bytes()).is_err());
    }
}
