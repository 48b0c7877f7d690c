//! Random registers and sweeps over register / bath sizes.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::{fidelity_optimized, RegisterAssignment};
use crate::search::{search, SearchConfig};
use crate::sequence::{compile_unit, iterate, PulsePlan};
use crate::spin::units::{gauss, khz_2pi};
use crate::spin::{ElectronQubit, NuclearSpin, Register, Species};

pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub electron: ElectronQubit,
    /// Tesla.
    pub field: f64,
    pub carbon: Species,
    pub silicon: Species,
    /// Coupling interval for carbon, rad/us; both A_par and A_perp are drawn from it.
    pub hf_range_c: (f64, f64),
    pub hf_range_si: (f64, f64),
    /// Two spins are distinct when A_par or A_perp differ by at least this, rad/us.
    pub distinctness: f64,
    /// Probability that a sampled spin is silicon.
    pub p_si: f64,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            electron: ElectronQubit::monovacancy(),
            field: gauss(83.0),
            carbon: Species::carbon13(),
            silicon: Species::silicon29(),
            hf_range_c: (khz_2pi(10.0), khz_2pi(200.0)),
            hf_range_si: (khz_2pi(0.5), khz_2pi(200.0)),
            distinctness: khz_2pi(10.0),
            p_si: 4.27 / 5.27,
            seed: 0,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("carbon", self.hf_range_c), ("silicon", self.hf_range_si)] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("{name} coupling interval [{lo}, {hi}] has no width")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_si) {
            return Err(Error::invalid(format!("silicon probability must lie in [0, 1], got {}", self.p_si)));
        }
        if !(self.distinctness >= 0.0) {
            return Err(Error::invalid("distinctness must be >= 0"));
        }
        if !(self.field >= 0.0) || !self.field.is_finite() {
            return Err(Error::invalid(format!("field must be finite and >= 0, got {}", self.field)));
        }
        Ok(())
    }
}

fn distinct(a: &NuclearSpin, b: &NuclearSpin, d: f64) -> bool {
    (a.a_par - b.a_par).abs() >= d || (a.a_perp - b.a_perp).abs() >= d
}

fn draw_spin<R: Rng + ?Sized>(spec: &SamplingSpec, rng: &mut R) -> Result<NuclearSpin> {
    let si = rng.random_bool(spec.p_si);
    let (species, (lo, hi)) = if si { (&spec.silicon, spec.hf_range_si) } else { (&spec.carbon, spec.hf_range_c) };
    let a_par = rng.random_range(lo..hi);
    let a_perp = rng.random_range(lo..hi);
    NuclearSpin::new(species.clone(), a_par, a_perp, spec.field)
}

/// Draws `total` mutually distinct spins from `rng`.
pub fn sample_spins<R: Rng + ?Sized>(spec: &SamplingSpec, total: usize, rng: &mut R) -> Result<Vec<NuclearSpin>> {
    spec.validate()?;
    let mut spins: Vec<NuclearSpin> = Vec::with_capacity(total);
    let mut rejections = 0;
    while spins.len() < total {
        let s = draw_spin(spec, rng)?;
        if spins.iter().all(|o| distinct(&s, o, spec.distinctness)) {
            spins.push(s);
        } else {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::SamplingStuck { rejections });
            }
        }
    }
    Ok(spins)
}

/// Register of `total` spins drawn from the stream seeded by `spec.seed`.
pub fn sample_register(spec: &SamplingSpec, total: usize) -> Result<Register> {
    if total == 0 {
        return Err(Error::invalid("a register needs at least one spin"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(Register::new(spec.electron, sample_spins(spec, total, &mut rng)?))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed of one realization; depends only on the base seed, the tile and the index.
pub fn realization_seed(seed: u64, n_r: usize, n_b: usize, index: u64) -> u64 {
    let tile = splitmix64(((n_r as u64) << 32) ^ n_b as u64);
    seed ^ splitmix64(tile ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationOutcome {
    pub success: bool,
    pub plan: Option<PulsePlan>,
    pub f: Option<f64>,
    pub f_opt: Option<f64>,
}

impl RealizationOutcome {
    const FAILED: RealizationOutcome = RealizationOutcome { success: false, plan: None, f: None, f_opt: None };
}

/// Samples `n_r + n_b` spins, makes the first `n_r` targets, and searches for
/// a plan. Fidelities are only computed for successful searches.
pub fn run_realization<R: Rng + ?Sized>(
    spec: &SamplingSpec,
    n_r: usize,
    n_b: usize,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<RealizationOutcome> {
    if n_r == 0 {
        return Err(Error::invalid("at least one target spin is required"));
    }
    let register = Register::new(spec.electron, sample_spins(spec, n_r + n_b, rng)?);
    let assignment = RegisterAssignment::leading(n_r, n_r + n_b)?;
    let Some(best) = search(&register, &assignment, config)? else {
        return Ok(RealizationOutcome::FAILED);
    };
    let plan = best.plan;
    let evol = register
        .spins
        .iter()
        .map(|s| compile_unit(plan.kind, plan.tau, s, &register.electron).map(|u| iterate(&u, plan.n_iter)))
        .collect::<Result<Vec<_>>>()?;
    let fr = fidelity_optimized(&assignment, &evol)?;
    Ok(RealizationOutcome { success: true, plan: Some(plan), f: Some(fr.f), f_opt: Some(fr.f_opt) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfidelityStat {
    /// `1 - F_opt`.
    Optimized,
    /// `1 - F`.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Successful realizations wanted per tile.
    pub realizations: usize,
    /// A tile gives up after `attempt_cap_factor * realizations` attempts.
    pub attempt_cap_factor: usize,
    pub statistic: InfidelityStat,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { realizations: 200, attempt_cap_factor: 100, statistic: InfidelityStat::Optimized }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileStatus {
    Complete,
    AttemptCapExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n_r: usize,
    pub n_b: usize,
    /// `log10` of the mean infidelity; `None` when the mean is not positive.
    pub mean_log_infid: Option<f64>,
    /// `log10` of the (population) variance of the infidelity.
    pub var_log_infid: Option<f64>,
    pub successes: usize,
    pub attempts: usize,
    pub status: TileStatus,
    pub kind_histogram: BTreeMap<String, usize>,
    pub order_histogram: BTreeMap<u32, usize>,
}

fn log10_positive(x: f64) -> Option<f64> {
    if x > 0.0 && x.is_finite() {
        Some(x.log10())
    } else {
        None
    }
}

fn run_tile(
    spec: &SamplingSpec,
    n_r: usize,
    n_b: usize,
    opts: &SweepOptions,
    config: &SearchConfig,
) -> Result<SweepCell> {
    let cap = opts.realizations.saturating_mul(opts.attempt_cap_factor).max(1);
    let batch = (2 * rayon::current_num_threads()).max(4);
    let mut cell = SweepCell {
        n_r,
        n_b,
        mean_log_infid: None,
        var_log_infid: None,
        successes: 0,
        attempts: 0,
        status: TileStatus::AttemptCapExceeded,
        kind_histogram: BTreeMap::new(),
        order_histogram: BTreeMap::new(),
    };
    let mut infid = Vec::with_capacity(opts.realizations);
    let mut start = 0usize;
    'batches: while start < cap {
        let end = (start + batch).min(cap);
        let outcomes: Vec<Result<RealizationOutcome>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(spec.seed, n_r, n_b, i as u64));
                run_realization(spec, n_r, n_b, config, &mut rng)
            })
            .collect();
        for o in outcomes {
            let o = o?;
            cell.attempts += 1;
            if let (true, Some(plan), Some(f), Some(f_opt)) = (o.success, o.plan, o.f, o.f_opt) {
                cell.successes += 1;
                *cell.kind_histogram.entry(plan.kind.to_string()).or_default() += 1;
                *cell.order_histogram.entry(plan.k).or_default() += 1;
                infid.push(match opts.statistic {
                    InfidelityStat::Optimized => 1.0 - f_opt,
                    InfidelityStat::Raw => 1.0 - f,
                });
                if cell.successes == opts.realizations {
                    cell.status = TileStatus::Complete;
                    break 'batches;
                }
            }
        }
        start = end;
    }
    if !infid.is_empty() {
        let n = infid.len() as f64;
        let mean = infid.iter().sum::<f64>() / n;
        let var = infid.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        cell.mean_log_infid = log10_positive(mean);
        cell.var_log_infid = log10_positive(var);
    }
    Ok(cell)
}

/// One cell per `(n_r, n_b)`, `n_r` outer, `n_b` inner. Each tile keeps
/// drawing realizations until `opts.realizations` succeed or the attempt cap
/// is hit. Results do not depend on the thread count.
pub fn sweep(
    spec: &SamplingSpec,
    nr_range: RangeInclusive<usize>,
    nb_range: RangeInclusive<usize>,
    opts: &SweepOptions,
    config: &SearchConfig,
) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    config.validate()?;
    if nr_range.is_empty() || nb_range.is_empty() {
        return Err(Error::invalid("sweep ranges must be nonempty"));
    }
    if *nr_range.start() == 0 {
        return Err(Error::invalid("register size must start at 1"));
    }
    if opts.realizations == 0 || opts.attempt_cap_factor == 0 {
        return Err(Error::invalid("realizations and attempt cap factor must be >= 1"));
    }
    let mut cells = Vec::new();
    for n_r in nr_range {
        for n_b in nb_range.clone() {
            cells.push(run_tile(spec, n_r, n_b, opts, config)?);
        }
    }
    Ok(cells)
}
