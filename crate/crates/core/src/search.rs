//! Choosing a unit time and iteration count that entangles the target spins
//! with the electron while leaving every bath spin nearly untouched.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::RegisterAssignment;
use crate::metrics::one_tangle;
use crate::resonance::{
    analytic_resonance, refine_resonance_with, RefineOptions, ResonanceWindow, DEFAULT_BRACKET_FRACTION,
};
use crate::sequence::{iterate, ConditionalEvolution, PulsePlan, SequenceKind, UnitSchedule};
use crate::spin::Register;

/// Slack for the fast recurrence pre-screen; candidates are re-checked exactly.
const SCREEN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Among plans with equal worst bath tangle, prefer the largest weakest
    /// target tangle.
    AllTargetsMax,
    /// Only the bath tangles are optimized; targets merely have to clear the
    /// threshold.
    UnwantedMinOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub kinds: Vec<SequenceKind>,
    pub orders: Vec<u32>,
    pub eps_threshold: f64,
    /// Upper bound on `N tau`, us.
    pub gate_time_cap: f64,
    pub tau_grid_points: usize,
    pub n_max: u32,
    pub mode: SearchMode,
    /// Half-width of each unit-time window relative to its resonance.
    pub window_fraction: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            kinds: SequenceKind::defaults(),
            orders: (1..=5).collect(),
            eps_threshold: 0.85,
            gate_time_cap: 3000.0,
            tau_grid_points: 200,
            n_max: 10_000,
            mode: SearchMode::AllTargetsMax,
            window_fraction: 0.05,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_threshold > 0.0 && self.eps_threshold < 1.0) {
            return Err(Error::invalid(format!("eps threshold must lie in (0, 1), got {}", self.eps_threshold)));
        }
        if !(self.gate_time_cap > 0.0) || !self.gate_time_cap.is_finite() {
            return Err(Error::invalid(format!("gate time cap must be positive, got {}", self.gate_time_cap)));
        }
        if self.tau_grid_points < 2 || self.n_max < 1 {
            return Err(Error::invalid("tau grid needs >= 2 points and n_max >= 1"));
        }
        if self.kinds.is_empty() || self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::invalid("need at least one sequence and resonance orders >= 1"));
        }
        for kind in &self.kinds {
            if let SequenceKind::Udd(0) = kind {
                return Err(Error::BadOrder(0));
            }
        }
        if !(self.window_fraction > 0.0 && self.window_fraction < 1.0) {
            return Err(Error::invalid(format!("window fraction must lie in (0, 1), got {}", self.window_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvaluation {
    pub plan: PulsePlan,
    pub target_tangles: Vec<f64>,
    pub bath_tangles: Vec<f64>,
    pub min_target: f64,
    pub max_unwanted: f64,
    pub feasible: bool,
    pub gate_time: f64,
}

fn compile_all(register: &Register, kind: SequenceKind, tau: f64) -> Result<Vec<ConditionalEvolution>> {
    let schedule = UnitSchedule::new(kind, tau)?;
    Ok(register.spins.iter().map(|s| schedule.compile(s, &register.electron)).collect())
}

fn evaluation_from_units(
    plan: PulsePlan,
    units: &[ConditionalEvolution],
    assignment: &RegisterAssignment,
    config: &SearchConfig,
) -> PlanEvaluation {
    let tangle = |i: usize| if plan.n_iter == 0 { 0.0 } else { one_tangle(&iterate(&units[i], plan.n_iter)) };
    let target_tangles: Vec<f64> = assignment.targets().iter().map(|&i| tangle(i)).collect();
    let bath_tangles: Vec<f64> = assignment.bath().iter().map(|&i| tangle(i)).collect();
    let min_target = target_tangles.iter().copied().fold(f64::INFINITY, f64::min);
    let max_unwanted = bath_tangles.iter().copied().fold(0.0, f64::max);
    let gate_time = plan.gate_time();
    let thr = config.eps_threshold;
    let feasible = plan.n_iter >= 1 && min_target >= thr && max_unwanted < thr && gate_time <= config.gate_time_cap;
    PlanEvaluation { plan, target_tangles, bath_tangles, min_target, max_unwanted, feasible, gate_time }
}

fn check_sizes(register: &Register, assignment: &RegisterAssignment) -> Result<()> {
    if assignment.total() != register.len() {
        return Err(Error::invalid(format!(
            "assignment covers {} spins, register has {}",
            assignment.total(),
            register.len()
        )));
    }
    Ok(())
}

/// All one-tangles of `plan` and its feasibility under `config`.
pub fn evaluate_plan(
    plan: &PulsePlan,
    register: &Register,
    assignment: &RegisterAssignment,
    config: &SearchConfig,
) -> Result<PlanEvaluation> {
    check_sizes(register, assignment)?;
    let units = compile_all(register, plan.kind, plan.tau)?;
    Ok(evaluation_from_units(*plan, &units, assignment, config))
}

fn kind_rank(kind: SequenceKind) -> u32 {
    match kind {
        SequenceKind::Cpmg => 0,
        SequenceKind::Udd(n) => n,
    }
}

/// Total preference order; `Less` means better.
pub fn plan_order(a: &PlanEvaluation, b: &PlanEvaluation, mode: SearchMode) -> Ordering {
    let by_targets = match mode {
        SearchMode::AllTargetsMax => b.min_target.total_cmp(&a.min_target),
        SearchMode::UnwantedMinOnly => Ordering::Equal,
    };
    a.max_unwanted
        .total_cmp(&b.max_unwanted)
        .then(by_targets)
        .then(a.gate_time.total_cmp(&b.gate_time))
        .then(a.plan.n_iter.cmp(&b.plan.n_iter))
        .then(a.plan.tau.total_cmp(&b.plan.tau))
        .then(kind_rank(a.plan.kind).cmp(&kind_rank(b.plan.kind)))
        .then(a.plan.k.cmp(&b.plan.k))
}

struct TopM {
    m: usize,
    mode: SearchMode,
    items: Vec<PlanEvaluation>,
}

impl TopM {
    fn new(m: usize, mode: SearchMode) -> Self {
        TopM { m, mode, items: Vec::with_capacity(m + 1) }
    }

    /// Largest bath tangle a newcomer may have and still be admitted.
    fn bath_bound(&self) -> f64 {
        if self.items.len() < self.m {
            f64::INFINITY
        } else {
            self.items.last().map_or(f64::INFINITY, |e| e.max_unwanted)
        }
    }

    fn offer(&mut self, e: PlanEvaluation) {
        let pos = self.items.partition_point(|x| plan_order(x, &e, self.mode) == Ordering::Less);
        if pos < self.m {
            self.items.insert(pos, e);
            self.items.truncate(self.m);
        }
    }
}

/// Refined resonance windows of every target spin for each configured
/// sequence and order. Orders without a resonance dip are skipped.
pub fn target_windows(
    register: &Register,
    assignment: &RegisterAssignment,
    config: &SearchConfig,
) -> Result<Vec<ResonanceWindow>> {
    let opts = RefineOptions { window_fraction: config.window_fraction, ..RefineOptions::default() };
    let mut out = Vec::new();
    for &kind in &config.kinds {
        for &k in &config.orders {
            for &t in assignment.targets() {
                let spin = &register.spins[t];
                let seed = match analytic_resonance(spin, &register.electron, k) {
                    Ok(s) => s,
                    Err(Error::NoPrecession) => continue,
                    Err(e) => return Err(e),
                };
                match refine_resonance_with(kind, spin, &register.electron, k, DEFAULT_BRACKET_FRACTION * seed, &opts) {
                    Ok(w) => out.push(ResonanceWindow { spin_index: t, ..w }),
                    Err(Error::NoResonanceInBracket { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(out)
}

fn scan_window(
    window: &ResonanceWindow,
    register: &Register,
    assignment: &RegisterAssignment,
    config: &SearchConfig,
    m: usize,
) -> Result<Vec<PlanEvaluation>> {
    let thr = config.eps_threshold;
    let mut best = TopM::new(m, config.mode);
    let (lo, hi) = window.range();
    let lo = lo.max(1e-9 * window.tau_star);
    let points = config.tau_grid_points;
    for p in 0..points {
        let tau = lo + (hi - lo) * p as f64 / (points - 1) as f64;
        let n_top = ((config.gate_time_cap / tau).floor() as u64).min(config.n_max as u64) as u32;
        if n_top == 0 {
            continue;
        }
        let units = compile_all(register, window.kind, tau)?;
        // per target: rotation steps of the half angles and the current half-angle state
        let mut state: Vec<[f64; 9]> = assignment
            .targets()
            .iter()
            .map(|&i| {
                let ce = &units[i];
                let (s0, c0) = (0.5 * ce.r0.angle).sin_cos();
                let (s1, c1) = (0.5 * ce.r1.angle).sin_cos();
                let n01 = crate::metrics::AngleSummary::of(ce).n01;
                [c0, s0, c1, s1, 1.0, 0.0, 1.0, 0.0, n01]
            })
            .collect();
        for n in 1..=n_top {
            let mut pass = true;
            for st in state.iter_mut() {
                let (a, b) = (st[4] * st[0] - st[5] * st[1], st[5] * st[0] + st[4] * st[1]);
                let (c, d) = (st[6] * st[2] - st[7] * st[3], st[7] * st[2] + st[6] * st[3]);
                st[4] = a;
                st[5] = b;
                st[6] = c;
                st[7] = d;
                if pass {
                    let g = a * c + st[8] * b * d;
                    pass = 1.0 - g * g >= thr - SCREEN_SLACK;
                }
            }
            if !pass {
                continue;
            }
            let bound = best.bath_bound().min(thr);
            let pruned = assignment.bath().iter().any(|&i| one_tangle(&iterate(&units[i], n)) > bound);
            if pruned {
                continue;
            }
            let plan = PulsePlan { kind: window.kind, k: window.k, tau, n_iter: n };
            let e = evaluation_from_units(plan, &units, assignment, config);
            if e.feasible {
                best.offer(e);
            }
        }
    }
    Ok(best.items)
}

/// Up to `top_m` feasible plans, best first.
pub fn rank_alternatives(
    register: &Register,
    assignment: &RegisterAssignment,
    config: &SearchConfig,
    top_m: usize,
) -> Result<Vec<PlanEvaluation>> {
    config.validate()?;
    check_sizes(register, assignment)?;
    if top_m == 0 {
        return Err(Error::invalid("top_m must be at least 1"));
    }
    let windows = target_windows(register, assignment, config)?;
    let per_window: Vec<Result<Vec<PlanEvaluation>>> =
        windows.par_iter().map(|w| scan_window(w, register, assignment, config, top_m)).collect();
    let mut all = TopM::new(top_m, config.mode);
    for r in per_window {
        for e in r? {
            all.offer(e);
        }
    }
    Ok(all.items)
}

/// The best feasible plan, or `None` when no searched plan is feasible.
pub fn search(
    register: &Register,
    assignment: &RegisterAssignment,
    config: &SearchConfig,
) -> Result<Option<PlanEvaluation>> {
    Ok(rank_alternatives(register, assignment, config, 1)?.into_iter().next())
}

/// One row of a tangle trace: every spin's one-tangle at fixed `n_iter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tau: f64,
    pub n_iter: u32,
    pub gate_time: f64,
    pub tangles: Vec<f64>,
}

/// One-tangles of all spins for `n_iter` repetitions while `tau` is swept.
pub fn tangle_trace(register: &Register, kind: SequenceKind, n_iter: u32, taus: &[f64]) -> Result<Vec<TraceRow>> {
    taus.iter()
        .map(|&tau| {
            let units = compile_all(register, kind, tau)?;
            let tangles = units.iter().map(|u| one_tangle(&iterate(u, n_iter))).collect();
            Ok(TraceRow { tau, n_iter, gate_time: tau * n_iter as f64, tangles })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::optimal_iterations;
    use crate::spin::units::khz_2pi;
    use crate::spin::{ElectronQubit, NuclearSpin, Species};

    fn three_spin_register() -> Register {
        let c = |a: f64, b: f64| {
            NuclearSpin::with_larmor(Species::carbon13(), khz_2pi(88.8797), khz_2pi(a), khz_2pi(b)).unwrap()
        };
        let si = |a: f64, b: f64| {
            NuclearSpin::with_larmor(Species::silicon29(), khz_2pi(-70.2595), khz_2pi(a), khz_2pi(b)).unwrap()
        };
        Register::new(
            ElectronQubit::monovacancy(),
            vec![c(151.3741, 105.0043), si(96.2445, 180.9921), si(122.1684, 123.7244)],
        )
    }

    fn cpmg_only() -> SearchConfig {
        SearchConfig { kinds: vec![SequenceKind::Cpmg], ..SearchConfig::default() }
    }

    #[test]
    fn zero_iterations_are_infeasible() {
        let reg = three_spin_register();
        let a = RegisterAssignment::leading(3, 3).unwrap();
        let plan = PulsePlan { kind: SequenceKind::Cpmg, k: 1, tau: 26.54, n_iter: 0 };
        let e = evaluate_plan(&plan, &reg, &a, &SearchConfig::default()).unwrap();
        assert!(!e.feasible);
        assert!(e.target_tangles.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn search_dominates_hand_plan() {
        let reg = three_spin_register();
        let a = RegisterAssignment::leading(3, 3).unwrap();
        let cfg = cpmg_only();
        let hand = evaluate_plan(&PulsePlan { kind: SequenceKind::Cpmg, k: 1, tau: 26.54, n_iter: 28 }, &reg, &a, &cfg)
            .unwrap();
        assert!(hand.feasible);
        let found = search(&reg, &a, &cfg).unwrap().expect("feasible plan exists");
        assert!(found.feasible);
        assert!(found.max_unwanted <= hand.max_unwanted);
        let again = evaluate_plan(&found.plan, &reg, &a, &cfg).unwrap();
        assert_eq!(again, found);
    }

    #[test]
    fn single_spin_reaches_full_tangle() {
        let spin =
            NuclearSpin::with_larmor(Species::silicon29(), khz_2pi(-300.0), khz_2pi(60.0), khz_2pi(30.0)).unwrap();
        let reg = Register::new(ElectronQubit::monovacancy(), vec![spin.clone()]);
        let a = RegisterAssignment::leading(1, 1).unwrap();
        let cfg = SearchConfig { orders: vec![1], ..cpmg_only() };
        let w = &target_windows(&reg, &a, &cfg).unwrap()[0];
        let unit = crate::sequence::compile_unit(SequenceKind::Cpmg, w.tau_star, &spin, &reg.electron).unwrap();
        let n = optimal_iterations(unit.r0.angle, unit.r1.angle).unwrap();
        let at_opt =
            evaluate_plan(&PulsePlan { kind: SequenceKind::Cpmg, k: 1, tau: w.tau_star, n_iter: n }, &reg, &a, &cfg)
                .unwrap();
        assert!(at_opt.min_target >= 0.99, "{}", at_opt.min_target);
        let found = search(&reg, &a, &cfg).unwrap().unwrap();
        assert!(found.min_target >= at_opt.min_target - 1e-3);
        assert_eq!(found.max_unwanted, 0.0);
    }

    #[test]
    fn identical_spins_cannot_be_separated() {
        let spin =
            NuclearSpin::with_larmor(Species::carbon13(), khz_2pi(88.8797), khz_2pi(60.0), khz_2pi(40.0)).unwrap();
        let reg = Register::new(ElectronQubit::monovacancy(), vec![spin.clone(), spin]);
        let a = RegisterAssignment::leading(1, 2).unwrap();
        assert_eq!(search(&reg, &a, &SearchConfig { orders: vec![1, 2], ..cpmg_only() }).unwrap(), None);
    }

    #[test]
    fn ranking_is_consistent() {
        let reg = three_spin_register();
        let a = RegisterAssignment::new(vec![2], vec![0, 1]).unwrap();
        let cfg = SearchConfig { orders: vec![1, 2], ..cpmg_only() };
        let top = rank_alternatives(&reg, &a, &cfg, 5).unwrap();
        assert!(!top.is_empty() && top.len() <= 5);
        assert_eq!(Some(&top[0]), search(&reg, &a, &cfg).unwrap().as_ref());
        for w in top.windows(2) {
            assert_eq!(plan_order(&w[0], &w[1], cfg.mode), Ordering::Less);
        }
        assert!(rank_alternatives(&reg, &a, &cfg, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        assert!(SearchConfig { eps_threshold: 1.5, ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig { orders: vec![0], ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig { gate_time_cap: -1.0, ..SearchConfig::default() }.validate().is_err());
    }

    #[test]
    fn trace_has_one_column_per_spin() {
        let rows = tangle_trace(&three_spin_register(), SequenceKind::Cpmg, 28, &[26.0, 26.54]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].tangles.len(), 3);
        assert!(rows[1].tangles.iter().all(|&t| t > 0.85));
    }
}
