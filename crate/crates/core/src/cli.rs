//! Command-line front end. Every flag may also be given in a TOML file passed
//! with `--config`, using the flag's long name as key; flags win over the file.

use std::ffi::OsString;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::fidelity::{fidelity_optimized, RegisterAssignment};
use crate::io::{self, FidelityRecord, Format, IoError};
use crate::montecarlo::{sample_register, sweep, InfidelityStat, SamplingSpec, SweepOptions};
use crate::resonance::{analytic_resonance, refine_resonance_with, RefineOptions, DEFAULT_BRACKET_FRACTION};
use crate::search::{evaluate_plan, rank_alternatives, tangle_trace, SearchConfig, SearchMode};
use crate::sequence::{compile_unit, iterate, PulsePlan, SequenceKind};
use crate::spin::units::{gauss, khz_2pi};
use crate::spin::{ElectronQubit, Register, Species};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Help(String),
    #[error("bad flag: {0}")]
    BadFlag(String),
    #[error("bad file {path}: {msg}")]
    BadFile { path: PathBuf, msg: String },
    #[error("conflicting input: {0}")]
    ConflictingInput(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("computation failed: {0}")]
    Compute(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Compute(_) => 1,
            CliError::BadFlag(_) => 2,
            CliError::BadFile { .. } => 3,
            CliError::ConflictingInput(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::BadFile { path, msg } => CliError::BadFile { path, msg },
            other => CliError::Io(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spinreg",
    version,
    about = "Resonances, one-tangles, pulse plans and gate fidelities of nuclear spin registers"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Refined resonance times of every spin.
    Resonances(Flags),
    /// One-tangles of every spin at fixed N while tau is scanned.
    Tangles(Flags),
    /// Search for the best pulse plan.
    Plan(Flags),
    /// Gate fidelity of a given plan, or of the searched plan when none is given.
    Fidelity(Flags),
    /// Monte Carlo sweep over register and bath sizes.
    Sweep(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectronPreset {
    /// S = 3/2, qubit levels (1/2, 3/2)
    Monovacancy,
    /// S = 1, qubit levels (0, -1)
    Divacancy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    AllTargetsMax,
    UnwantedMinOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatArg {
    Optimized,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Csv,
    Json,
}

/// Every option is optional here so that config-file values can fill gaps.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct Flags {
    /// TOML file with default values for any of these flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,

    /// Register description file
    #[arg(long)]
    register: Option<PathBuf>,
    /// Sample this many random spins instead of reading a register file
    #[arg(long)]
    sample_spins: Option<usize>,
    /// Comma-separated target spin indices [default: all spins]
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,

    /// Electron defect for sampled registers [default: monovacancy]
    #[arg(long, value_enum)]
    electron: Option<ElectronPreset>,
    /// Magnetic field for sampled registers, gauss [default: 83]
    #[arg(long)]
    field_gauss: Option<f64>,
    /// Give sampled 29Si a positive gyromagnetic ratio
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    positive_si: Option<bool>,
    /// Probability that a sampled spin is 29Si [default: 4.27/5.27]
    #[arg(long)]
    p_si: Option<f64>,
    /// Minimum coupling separation between sampled spins, 2pi kHz [default: 10]
    #[arg(long)]
    distinctness_khz: Option<f64>,
    /// Base random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated sequences [default: CPMG,UDD3,UDD4]
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    /// Comma-separated resonance orders [default: 1,2,3,4,5]
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u32>>,
    /// One-tangle threshold, strictly between 0 and 1 [default: 0.85]
    #[arg(long)]
    eps_threshold: Option<f64>,
    /// Gate time cap, us [default: 3000]
    #[arg(long)]
    gate_time_cap_us: Option<f64>,
    /// Unit-time grid points per resonance window [default: 200]
    #[arg(long)]
    tau_points: Option<usize>,
    /// Maximum iteration count [default: 10000]
    #[arg(long)]
    n_max: Option<u32>,
    /// Window half-width relative to the resonance time [default: 0.05]
    #[arg(long)]
    window_fraction: Option<f64>,
    /// Plan ordering mode [default: all-targets-max]
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of ranked plans to report [default: 1]
    #[arg(long)]
    top: Option<usize>,

    /// Sequence of a fixed plan
    #[arg(long)]
    kind: Option<String>,
    /// Unit time of a fixed plan, us
    #[arg(long)]
    tau: Option<f64>,
    /// Iterations of a fixed plan
    #[arg(long)]
    n_iter: Option<u32>,
    /// Resonance order label of a fixed plan [default: 1]
    #[arg(long)]
    k: Option<u32>,

    /// Start of the tau scan, us
    #[arg(long)]
    tau_min: Option<f64>,
    /// End of the tau scan, us
    #[arg(long)]
    tau_max: Option<f64>,
    /// Points of the tau scan [default: 201]
    #[arg(long)]
    points: Option<usize>,

    /// Register sizes, `a..b` inclusive or a single value
    #[arg(long)]
    nr: Option<String>,
    /// Bath sizes, `a..b` inclusive or a single value
    #[arg(long)]
    nb: Option<String>,
    /// Successful realizations per tile [default: 200]
    #[arg(long)]
    realizations: Option<usize>,
    /// Attempts per tile are capped at this multiple of --realizations [default: 100]
    #[arg(long)]
    attempt_cap_factor: Option<usize>,
    /// Infidelity statistic of sweep tiles [default: optimized]
    #[arg(long, value_enum)]
    statistic: Option<StatArg>,

    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format [default: from the --out extension, else csv]
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; 0 picks one per core
    #[arg(long, env = "SPINREG_THREADS")]
    threads: Option<usize>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Flags {
    fn fill_from(&mut self, file: Flags) {
        merge_fields!(self, file;
            register, sample_spins, targets, electron, field_gauss, positive_si, p_si, distinctness_khz, seed,
            kinds, orders, eps_threshold, gate_time_cap_us, tau_points, n_max, window_fraction, mode, top,
            kind, tau, n_iter, k, tau_min, tau_max, points, nr, nb, realizations, attempt_cap_factor, statistic,
            out, format, threads);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Resonances,
    Tangles,
    Plan,
    Fidelity,
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    RegisterFile(PathBuf),
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPlan {
    pub kind: SequenceKind,
    pub k: u32,
    pub tau: f64,
    pub n_iter: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// `None` only for sweeps, which always sample.
    pub input: Option<InputSource>,
    pub targets: Option<Vec<usize>>,
    pub sampling: SamplingSpec,
    pub search: SearchConfig,
    pub top: usize,
    pub plan: Option<FixedPlan>,
    pub scan: Option<(f64, f64, usize)>,
    pub nr: RangeInclusive<usize>,
    pub nb: RangeInclusive<usize>,
    pub sweep: SweepOptions,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::BadFlag(msg.into())
}

fn parse_range(flag: &str, s: &str) -> Result<RangeInclusive<usize>, CliError> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| bad(format!("--{flag} '{s}': {e}")));
    let r = match s.split_once("..") {
        Some((a, b)) => num(a)?..=num(b.trim_start_matches('='))?,
        None => {
            let v = num(s)?;
            v..=v
        }
    };
    if r.is_empty() {
        return Err(bad(format!("--{flag} '{s}' is empty")));
    }
    Ok(r)
}

fn parse_kind(s: &str) -> Result<SequenceKind, CliError> {
    s.parse().map_err(|e: crate::Error| bad(format!("sequence: {e}")))
}

fn load_flag_file(path: &Path) -> Result<Flags, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::BadFile { path: path.into(), msg: e.to_string() })
}

/// Parses the arguments (program name first) and an optional config file.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
        _ => CliError::BadFlag(e.to_string()),
    })?;
    let (command, mut f) = match cli.command {
        CommandArgs::Resonances(f) => (Command::Resonances, f),
        CommandArgs::Tangles(f) => (Command::Tangles, f),
        CommandArgs::Plan(f) => (Command::Plan, f),
        CommandArgs::Fidelity(f) => (Command::Fidelity, f),
        CommandArgs::Sweep(f) => (Command::Sweep, f),
    };
    if let Some(path) = f.config.clone() {
        let file = load_flag_file(&path)?;
        f.fill_from(file);
    }
    resolve(command, f)
}

fn resolve(command: Command, f: Flags) -> Result<RunConfig, CliError> {
    let input = match (&f.register, f.sample_spins) {
        (Some(_), Some(_)) => {
            return Err(CliError::ConflictingInput("give either --register or --sample-spins, not both".into()))
        }
        (Some(p), None) => Some(InputSource::RegisterFile(p.clone())),
        (None, Some(0)) => return Err(bad("--sample-spins must be at least 1")),
        (None, Some(n)) => Some(InputSource::Sampled(n)),
        (None, None) => None,
    };
    match (command, &input) {
        (Command::Sweep, Some(_)) => {
            return Err(CliError::ConflictingInput(
                "sweep samples its own registers; drop --register / --sample-spins and use --nr / --nb".into(),
            ))
        }
        (Command::Sweep, None) => {}
        (_, None) => {
            return Err(CliError::ConflictingInput("no input: give --register FILE or --sample-spins N".into()))
        }
        _ => {}
    }

    let electron = match f.electron.unwrap_or(ElectronPreset::Monovacancy) {
        ElectronPreset::Monovacancy => ElectronQubit::monovacancy(),
        ElectronPreset::Divacancy => ElectronQubit::divacancy(),
    };
    let defaults = SamplingSpec::default();
    let sampling = SamplingSpec {
        electron,
        field: gauss(f.field_gauss.unwrap_or(83.0)),
        silicon: if f.positive_si.unwrap_or(false) { Species::silicon29_positive() } else { Species::silicon29() },
        p_si: f.p_si.unwrap_or(defaults.p_si),
        distinctness: f.distinctness_khz.map(khz_2pi).unwrap_or(defaults.distinctness),
        seed: f.seed.unwrap_or(0),
        ..defaults
    };
    sampling.validate().map_err(|e| bad(e.to_string()))?;

    let sd = SearchConfig::default();
    let kinds = match &f.kinds {
        Some(ks) => ks.iter().map(|s| parse_kind(s)).collect::<Result<Vec<_>, _>>()?,
        None => sd.kinds.clone(),
    };
    let search = SearchConfig {
        kinds,
        orders: f.orders.clone().unwrap_or(sd.orders.clone()),
        eps_threshold: f.eps_threshold.unwrap_or(sd.eps_threshold),
        gate_time_cap: f.gate_time_cap_us.unwrap_or(sd.gate_time_cap),
        tau_grid_points: f.tau_points.unwrap_or(sd.tau_grid_points),
        n_max: f.n_max.unwrap_or(sd.n_max),
        mode: match f.mode {
            Some(ModeArg::UnwantedMinOnly) => SearchMode::UnwantedMinOnly,
            _ => SearchMode::AllTargetsMax,
        },
        window_fraction: f.window_fraction.unwrap_or(sd.window_fraction),
    };
    if let Some(t) = f.eps_threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(bad(format!("--eps-threshold {t} must lie strictly between 0 and 1")));
        }
    }
    search.validate().map_err(|e| bad(e.to_string()))?;

    let top = f.top.unwrap_or(1);
    if top == 0 {
        return Err(bad("--top must be at least 1"));
    }

    // A tau scan stands in for --tau when tracing tangles.
    let tau = f.tau.or(if command == Command::Tangles { f.tau_min } else { None });
    let plan = match (&f.kind, tau, f.n_iter) {
        (Some(kind), Some(tau), Some(n_iter)) => {
            if !(tau > 0.0) {
                return Err(bad(format!("--tau {tau} must be positive")));
            }
            Some(FixedPlan { kind: parse_kind(kind)?, k: f.k.unwrap_or(1), tau, n_iter })
        }
        (None, None, None) => None,
        _ => return Err(bad("a fixed plan needs all of --kind, --tau and --n-iter")),
    };
    if command == Command::Tangles && (f.kind.is_none() || f.n_iter.is_none()) {
        return Err(bad("tangles needs --kind and --n-iter"));
    }

    let scan = match (f.tau_min, f.tau_max) {
        (Some(a), Some(b)) => {
            let points = f.points.unwrap_or(201);
            if !(a > 0.0 && b >= a) || points < 1 {
                return Err(bad("need 0 < --tau-min <= --tau-max and --points >= 1"));
            }
            Some((a, b, points))
        }
        (None, None) => None,
        _ => return Err(bad("give both --tau-min and --tau-max")),
    };
    if command == Command::Tangles && scan.is_none() && f.tau.is_none() {
        return Err(bad("tangles needs --tau-min/--tau-max or --tau"));
    }

    let nr = parse_range("nr", f.nr.as_deref().unwrap_or("1"))?;
    let nb = parse_range("nb", f.nb.as_deref().unwrap_or("1"))?;
    if *nr.start() == 0 {
        return Err(bad("--nr must start at 1"));
    }
    let sd = SweepOptions::default();
    let sweep = SweepOptions {
        realizations: f.realizations.unwrap_or(sd.realizations),
        attempt_cap_factor: f.attempt_cap_factor.unwrap_or(sd.attempt_cap_factor),
        statistic: match f.statistic {
            Some(StatArg::Raw) => InfidelityStat::Raw,
            _ => InfidelityStat::Optimized,
        },
    };
    if sweep.realizations == 0 || sweep.attempt_cap_factor == 0 {
        return Err(bad("--realizations and --attempt-cap-factor must be at least 1"));
    }

    let format = match f.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => f.out.as_deref().and_then(Format::from_path).unwrap_or(Format::Csv),
    };

    Ok(RunConfig {
        command,
        input,
        targets: f.targets,
        sampling,
        search,
        top,
        plan,
        scan,
        nr,
        nb,
        sweep,
        out: f.out,
        format,
        threads: f.threads.unwrap_or(0),
    })
}

fn load_input(cfg: &RunConfig) -> Result<Register, CliError> {
    match &cfg.input {
        Some(InputSource::RegisterFile(p)) => Ok(io::load_register(p)?),
        Some(InputSource::Sampled(n)) => Ok(sample_register(&cfg.sampling, *n)?),
        None => Err(CliError::ConflictingInput("no register input".into())),
    }
}

fn assignment(cfg: &RunConfig, register: &Register) -> Result<RegisterAssignment, CliError> {
    let n = register.len();
    let targets = cfg.targets.clone().unwrap_or_else(|| (0..n).collect());
    if let Some(&bad_index) = targets.iter().find(|&&t| t >= n) {
        return Err(bad(format!("--targets index {bad_index} out of range for {n} spins")));
    }
    let bath = (0..n).filter(|i| !targets.contains(i)).collect();
    RegisterAssignment::new(targets, bath).map_err(|e| bad(e.to_string()))
}

fn fixed_plan(p: &FixedPlan) -> PulsePlan {
    PulsePlan { kind: p.kind, k: p.k, tau: p.tau, n_iter: p.n_iter }
}

fn scan_points(cfg: &RunConfig) -> Vec<f64> {
    match cfg.scan {
        Some((a, b, 1)) => vec![0.5 * (a + b)],
        Some((a, b, n)) => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        None => cfg.plan.as_ref().map(|p| vec![p.tau]).unwrap_or_default(),
    }
}

fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out.as_deref();
    match cfg.command {
        Command::Resonances => {
            let reg = load_input(cfg)?;
            let opts = RefineOptions { window_fraction: cfg.search.window_fraction, ..RefineOptions::default() };
            let mut rows = Vec::new();
            for (i, spin) in reg.spins.iter().enumerate() {
                for &kind in &cfg.search.kinds {
                    for &k in &cfg.search.orders {
                        let seed = match analytic_resonance(spin, &reg.electron, k) {
                            Ok(s) => s,
                            Err(crate::Error::NoPrecession) => continue,
                            Err(e) => return Err(e.into()),
                        };
                        match refine_resonance_with(
                            kind,
                            spin,
                            &reg.electron,
                            k,
                            DEFAULT_BRACKET_FRACTION * seed,
                            &opts,
                        ) {
                            Ok(w) => rows.push(crate::resonance::ResonanceWindow { spin_index: i, ..w }),
                            Err(crate::Error::NoResonanceInBracket { .. }) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
            io::write_results(&rows, cfg.format, out)?;
        }
        Command::Tangles => {
            let reg = load_input(cfg)?;
            let p = cfg.plan.as_ref().ok_or_else(|| bad("tangles needs --kind and --n-iter"))?;
            let rows = tangle_trace(&reg, p.kind, p.n_iter, &scan_points(cfg))?;
            io::write_results(&rows, cfg.format, out)?;
        }
        Command::Plan => {
            let reg = load_input(cfg)?;
            let a = assignment(cfg, &reg)?;
            let rows = match &cfg.plan {
                Some(p) => vec![evaluate_plan(&fixed_plan(p), &reg, &a, &cfg.search)?],
                None => rank_alternatives(&reg, &a, &cfg.search, cfg.top)?,
            };
            io::write_results(&rows, cfg.format, out)?;
        }
        Command::Fidelity => {
            let reg = load_input(cfg)?;
            let a = assignment(cfg, &reg)?;
            let eval = match &cfg.plan {
                Some(p) => Some(evaluate_plan(&fixed_plan(p), &reg, &a, &cfg.search)?),
                None => rank_alternatives(&reg, &a, &cfg.search, 1)?.into_iter().next(),
            };
            let mut rows = Vec::new();
            if let Some(e) = eval {
                let evol = reg
                    .spins
                    .iter()
                    .map(|s| {
                        compile_unit(e.plan.kind, e.plan.tau, s, &reg.electron).map(|u| iterate(&u, e.plan.n_iter))
                    })
                    .collect::<crate::Result<Vec<_>>>()?;
                let fr = fidelity_optimized(&a, &evol)?;
                rows.push(FidelityRecord {
                    plan: e.plan,
                    f: fr.f,
                    f_opt: fr.f_opt,
                    theta_star: fr.theta_star,
                    nz_sign: fr.nz_sign,
                    min_target: e.min_target,
                    max_unwanted: e.max_unwanted,
                });
            }
            io::write_results(&rows, cfg.format, out)?;
        }
        Command::Sweep => {
            let cells = sweep(&cfg.sampling, cfg.nr.clone(), cfg.nb.clone(), &cfg.sweep, &cfg.search)?;
            io::write_results(&cells, cfg.format, out)?;
        }
    }
    Ok(())
}

/// Runs a parsed configuration on a pool of `cfg.threads` workers.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| bad(format!("thread pool: {e}")))?;
    pool.install(|| execute(cfg))
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_config(args).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(CliError::Help(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("spinreg: {e}");
            e.exit_code()
        }
    }
}
