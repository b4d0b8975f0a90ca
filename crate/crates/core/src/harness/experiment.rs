//! One run of the full pipeline on an instance, with audits.
//!
//! The instance graph is subdivided, fed arrival by arrival to
//! [`GuessDoubling`], and the final state is checked against the per-run
//! inequalities. Each check collects human-readable violations; an empty list
//! means the check passed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instance::{Instance, InstanceError};
use super::oracle::{OracleError, OracleTable};
use crate::fractional::FractionalCover;
use crate::graph::NodeId;
use crate::guess::{GuessConfig, GuessDoubling, GuessError, GuessUpdate, ServedArrival};
use crate::pcsc::{Decision, PcscState, SchemeKind};
use crate::steiner::{log_k, EpochBounds, Rounding};

/// Largest set cover instance solved exactly by the audits.
pub const MAX_AUDIT_SETS: usize = 12;
/// Constant in the fractional solver's guarantee.
pub const KAPPA: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Randomized,
    Deterministic,
    Dual,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Randomized, Variant::Deterministic, Variant::Dual];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Randomized => "randomized",
            Variant::Deterministic => "deterministic",
            Variant::Dual => "dual",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "randomized" => Ok(Variant::Randomized),
            "deterministic" => Ok(Variant::Deterministic),
            "dual" | "dual-greedy" => Ok(Variant::Dual),
            other => Err(ExperimentError::Config(format!("unknown variant {other}"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("arrival {index}: {source}")]
    Arrival { index: usize, source: GuessError },
    #[error(transparent)]
    Guess(#[from] GuessError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    pub seed: u64,
    /// Overrides the instance's `M`.
    pub m: Option<u32>,
    /// Overrides the instance's `k̃`.
    pub k_tilde: Option<u32>,
    /// Terminal set declared in advance; required by the deterministic variant.
    pub declared_terminals: Option<Vec<NodeId>>,
    pub skip_covered: bool,
}

impl RunConfig {
    pub fn new(variant: Variant, seed: u64) -> Self {
        RunConfig { variant, seed, m: None, k_tilde: None, declared_terminals: None, skip_covered: true }
    }

    /// Declares the instance's own terminals (deterministic variant only).
    pub fn for_instance(variant: Variant, seed: u64, inst: &Instance) -> Self {
        let mut cfg = RunConfig::new(variant, seed);
        if variant == Variant::Deterministic {
            cfg.declared_terminals = Some(inst.terminals());
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub guess: f64,
    pub scale: f64,
    pub end: usize,
    pub side_buy: f64,
    pub side_rent: f64,
    pub passed: Vec<usize>,
    pub bounds: EpochBounds,
    pub counter_violations: usize,
    pub pcsc_sets: usize,
    pub pcsc_penalty: f64,
    pub pcsc_set_cost: f64,
    pub dual_objective: f64,
    pub dual_violation: f64,
    pub fractional_cost: f64,
    pub safety_net_purchases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub instance: String,
    pub variant: Variant,
    pub seed: u64,
    pub m: u32,
    pub k_tilde: u32,
    pub served: Vec<ServedArrival>,
    pub updates: Vec<GuessUpdate>,
    pub epochs: Vec<EpochSummary>,
    pub spent_buy: f64,
    pub spent_rent: f64,
}

impl Trace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Violations per audited property.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub feasibility: Vec<String>,
    pub counters: Vec<String>,
    pub else_count: Vec<String>,
    pub else_cost: Vec<String>,
    pub witness: Vec<String>,
    pub if_cost: Vec<String>,
    pub released: Vec<String>,
    pub dual: Vec<String>,
    pub penalty_rule: Vec<String>,
    pub fractional: Vec<String>,
    pub guess_range: Vec<String>,
    pub side_ledger: Vec<String>,
    pub ratio: Vec<String>,
    /// Epochs where the set cover optimum exceeded `64·log₂k̃` times the
    /// scaled Steiner optimum of the passed requests. Reported only.
    pub sc_opt_exceeded: Vec<String>,
    /// Largest `opt_SC / (64·log₂k̃·opt_RoB)` seen.
    pub sc_opt_max: Option<f64>,
    /// Largest measured `cost_frac / ((1 + ln(1+ℓ))·opt_int)`.
    pub kappa_max: Option<f64>,
}

impl Checks {
    /// Gating checks by name.
    pub fn gating(&self) -> [(&'static str, &Vec<String>); 13] {
        [
            ("feasibility", &self.feasibility),
            ("counters", &self.counters),
            ("else_count", &self.else_count),
            ("else_cost", &self.else_cost),
            ("witness", &self.witness),
            ("if_cost", &self.if_cost),
            ("released", &self.released),
            ("dual", &self.dual),
            ("penalty_rule", &self.penalty_rule),
            ("fractional", &self.fractional),
            ("guess_range", &self.guess_range),
            ("side_ledger", &self.side_ledger),
            ("ratio", &self.ratio),
        ]
    }

    pub fn violation_count(&self) -> usize {
        self.gating().iter().map(|(_, v)| v.len()).sum()
    }

    pub fn violations(&self) -> Vec<String> {
        self.gating().iter().flat_map(|(name, v)| v.iter().map(move |m| format!("{name}: {m}"))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub instance: String,
    pub recipe: Option<String>,
    pub variant: Variant,
    pub seed: u64,
    /// Node count after subdivision.
    pub n: usize,
    pub n_bar: usize,
    pub k_tilde: u32,
    pub arrivals: usize,
    pub m: u32,
    pub cost: f64,
    pub oracle_cost: Option<f64>,
    pub ratio: Option<f64>,
    pub trace: Trace,
    pub checks: Checks,
}

fn leq(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs().max(1.0)
}

/// Run with an oracle table built on the spot when the instance admits one.
pub fn run_experiment(inst: &Instance, cfg: &RunConfig) -> Result<Outcome, ExperimentError> {
    let table = match OracleTable::build(inst) {
        Ok(t) => Some(t),
        Err(OracleError::Refused { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    run_with_oracle(inst, cfg, table.as_ref())
}

/// Run with a prebuilt oracle table; without one the oracle-based checks are skipped.
pub fn run_with_oracle(
    inst: &Instance,
    cfg: &RunConfig,
    table: Option<&OracleTable>,
) -> Result<Outcome, ExperimentError> {
    let m = cfg.m.unwrap_or(inst.m);
    if m < 1 {
        return Err(ExperimentError::Config("M must be at least 1".into()));
    }
    let pairs = inst.distinct_pairs().len() as u32;
    let mut k_tilde = cfg.k_tilde.unwrap_or_else(|| inst.k_tilde_or_default());
    if k_tilde < pairs.max(1) {
        return Err(ExperimentError::Config(format!("k_tilde {k_tilde} is below the {pairs} distinct pairs")));
    }
    let rounding = match cfg.variant {
        Variant::Randomized => Rounding::Randomized { seed: cfg.seed },
        Variant::Deterministic => Rounding::Deterministic,
        Variant::Dual => Rounding::DualGreedy { skip_covered: cfg.skip_covered },
    };
    let terminals = if cfg.variant == Variant::Deterministic {
        let declared = cfg
            .declared_terminals
            .clone()
            .ok_or_else(|| ExperimentError::Config("the deterministic variant needs a declared terminal set".into()))?;
        for v in inst.terminals() {
            if !declared.contains(&v) {
                return Err(ExperimentError::Config(format!(
                    "terminal {} is not in the declared set",
                    inst.graph.name(v)
                )));
            }
        }
        let mut distinct = declared.clone();
        distinct.sort_unstable();
        distinct.dedup();
        k_tilde = k_tilde.max(distinct.len() as u32);
        Some(distinct)
    } else {
        None
    };

    let graph = inst.graph.subdivide_edges().map_err(InstanceError::from)?;
    let n = graph.len();
    let mut alg = GuessDoubling::new(graph, GuessConfig { m, k_tilde, rounding, terminals })?;
    for (index, &(s, t)) in inst.requests.iter().enumerate() {
        alg.arrive(s, t).map_err(|source| ExperimentError::Arrival { index, source })?;
    }

    let mut checks = Checks::default();
    let oracle_cost = match table {
        Some(t) => Some(t.opt_requests(&inst.requests)?.cost),
        None => None,
    };
    let cost = alg.total_cost();
    let ratio = oracle_cost.map(|o| if o > 0.0 { cost / o } else if cost > 0.0 { f64::INFINITY } else { 1.0 });
    if let Some(o) = oracle_cost {
        if cost < o * (1.0 - 1e-9) {
            checks.ratio.push(format!("online cost {cost} below the offline optimum {o}"));
        }
    }
    for &i in alg.infeasible_arrivals() {
        checks.feasibility.push(format!("arrival {i} not connected"));
    }

    let k = k_tilde as f64;
    let mut epochs = Vec::new();
    for (ei, epoch) in alg.epochs().iter().enumerate() {
        let core = &epoch.core;
        let bounds = core.bounds();
        let pcsc = core.pcsc();
        if core.counter_violations() > 0 {
            checks.counters.push(format!("epoch {ei}: {} counter increments above M", core.counter_violations()));
        }
        for j in 0..=core.j_max() {
            for w in 0..core.graph().len() {
                if core.counter(w, j) > m {
                    checks.counters.push(format!("epoch {ei}: y[{w},{j}] = {} > M", core.counter(w, j)));
                }
            }
        }
        if !bounds.else_within_bound {
            checks.else_count.push(format!("epoch {ei}: else-branch count above 2|F_j|"));
        }
        if !bounds.else_cost() {
            checks.else_cost.push(format!("epoch {ei}: C_else {} > {}", bounds.c_else, bounds.else_cost_rhs));
        }
        if k_tilde >= 2 && !bounds.witness() {
            checks.witness.push(format!("epoch {ei}: {} > {}", bounds.witness_lhs, bounds.witness_rhs));
        }
        if !bounds.if_cost() {
            checks.if_cost.push(format!("epoch {ei}: C_if {} > {}", bounds.c_if, bounds.if_cost_rhs));
        }
        if !bounds.released_within_bound() {
            checks.released.push(format!(
                "epoch {ei}: {} released elements > {}",
                bounds.released_elements, bounds.released_bound
            ));
        }
        let side_bound = epoch.guess / (k * k);
        if !leq(epoch.side_buy, side_bound) {
            checks.side_ledger.push(format!("epoch {ei}: side buy {} > {side_bound}", epoch.side_buy));
        }
        if !leq(epoch.side_rent, side_bound) {
            checks.side_ledger.push(format!("epoch {ei}: side rent {} > {side_bound}", epoch.side_rent));
        }
        let pc_opt = pcsc.brute_force_opt(MAX_AUDIT_SETS);
        match pcsc.scheme().kind() {
            SchemeKind::DualGreedy => audit_dual(ei, pcsc, pc_opt, &mut checks.dual),
            _ => {
                audit_penalty_rule(ei, pcsc, &mut checks.penalty_rule);
                if let Some(kappa) = audit_fractional(ei, pcsc, pc_opt, &mut checks.fractional) {
                    checks.kappa_max = Some(checks.kappa_max.map_or(kappa, |x: f64| x.max(kappa)));
                }
            }
        }
        if let (Some(t), Some(opt_sc)) = (table, pc_opt) {
            let passed: Vec<(NodeId, NodeId)> = epoch.passed.iter().map(|&i| inst.requests[i]).collect();
            let opt_rob = epoch.scale * t.opt_requests(&passed)?.cost;
            let bound = 64.0 * log_k(k_tilde) * opt_rob;
            if bound > 0.0 {
                let r = opt_sc / bound;
                checks.sc_opt_max = Some(checks.sc_opt_max.map_or(r, |x: f64| x.max(r)));
            }
            if !leq(opt_sc, bound) {
                checks.sc_opt_exceeded.push(format!("epoch {ei}: opt_SC {opt_sc} > {bound}"));
            }
        }
        epochs.push(EpochSummary {
            guess: epoch.guess,
            scale: epoch.scale,
            end: epoch.end,
            side_buy: epoch.side_buy,
            side_rent: epoch.side_rent,
            passed: epoch.passed.clone(),
            bounds,
            counter_violations: core.counter_violations(),
            pcsc_sets: pcsc.bought_order().len(),
            pcsc_penalty: pcsc.penalty_cost(),
            pcsc_set_cost: pcsc.set_cost(),
            dual_objective: pcsc.dual_objective(),
            dual_violation: pcsc.dual_violation(),
            fractional_cost: pcsc.aux().fractional_cost(),
            safety_net_purchases: pcsc.safety_net_purchases(),
        });
    }

    if let Some(t) = table {
        audit_guess_range(inst, &alg, t, k, &mut checks.guess_range)?;
    }

    let trace = Trace {
        instance: inst.name.clone(),
        variant: cfg.variant,
        seed: cfg.seed,
        m,
        k_tilde,
        served: alg.served().to_vec(),
        updates: alg.updates().to_vec(),
        epochs,
        spent_buy: alg.spent_buy(),
        spent_rent: alg.spent_rent(),
    };
    Ok(Outcome {
        instance: inst.name.clone(),
        recipe: inst.recipe.clone(),
        variant: cfg.variant,
        seed: cfg.seed,
        n,
        n_bar: inst.n_bar(),
        k_tilde,
        arrivals: inst.requests.len(),
        m,
        cost,
        oracle_cost,
        ratio,
        trace,
        checks,
    })
}

/// Every variant on every instance, sharing one oracle table per instance.
/// Runs execute in parallel; results come back in instance-major order.
pub fn run_suite(instances: &[Instance], variants: &[Variant], seed: u64) -> Vec<Result<Outcome, ExperimentError>> {
    instances
        .par_iter()
        .flat_map_iter(|inst| {
            let table = OracleTable::build(inst);
            variants.iter().map(move |&v| {
                let table = match &table {
                    Ok(t) => Some(t),
                    Err(OracleError::Refused { .. }) => None,
                    Err(e) => return Err(e.clone().into()),
                };
                run_with_oracle(inst, &RunConfig::for_instance(v, seed, inst), table)
            }).collect::<Vec<_>>()
        })
        .collect()
}

/// `opt ≤ guess ≤ k̃²·opt` at every update and at the end of every epoch.
fn audit_guess_range(
    inst: &Instance,
    alg: &GuessDoubling,
    table: &OracleTable,
    k: f64,
    out: &mut Vec<String>,
) -> Result<(), ExperimentError> {
    let mut points: Vec<(usize, f64)> = alg.updates().iter().map(|u| (u.arrival, u.guess)).collect();
    points.extend(alg.epochs().iter().filter(|e| e.end > 0).map(|e| (e.end - 1, e.guess)));
    for (i, guess) in points {
        let opt = table.opt_requests(&inst.requests[..=i])?.cost;
        if !leq(opt, guess) || !leq(guess, k * k * opt) {
            out.push(format!("arrival {i}: opt {opt}, guess {guess}, k̃²·opt {}", k * k * opt));
        }
    }
    Ok(())
}

/// Penalty paid at an arrival exactly when its singleton value exceeds 1/2.
fn audit_penalty_rule(epoch: usize, pcsc: &PcscState, out: &mut Vec<String>) {
    for (i, a) in pcsc.arrivals().iter().enumerate() {
        let paid = matches!(a.decision, Some(Decision::PayPenalty(_)));
        if paid != (a.singleton_x > 0.5) {
            out.push(format!("epoch {epoch}, set cover arrival {i}: paid {paid} with singleton x {}", a.singleton_x));
        }
    }
}

/// Replay the auxiliary instance into a fresh solver: values must be
/// monotone, each arrival covered, the end state identical, and the cost within
/// `κ(1 + ln(1+ℓ))` of the integral optimum. Returns the measured `κ`.
fn audit_fractional(epoch: usize, pcsc: &PcscState, opt: Option<f64>, out: &mut Vec<String>) -> Option<f64> {
    let aux = pcsc.aux();
    let mut f = FractionalCover::new();
    for s in 0..aux.num_sets() {
        if let Err(e) = f.add_set(aux.cost(s)) {
            out.push(format!("epoch {epoch}: {e}"));
            return None;
        }
    }
    for e in 0..aux.num_elements() {
        if let Err(err) = f.add_element(aux.covering_sets(e)) {
            out.push(format!("epoch {epoch}: {err}"));
            return None;
        }
    }
    for (i, a) in pcsc.arrivals().iter().enumerate() {
        let before = f.values().to_vec();
        if let Err(e) = f.arrive(a.aux_element, |_, _| {}) {
            out.push(format!("epoch {epoch}, set cover arrival {i}: {e}"));
            return None;
        }
        if f.values().iter().zip(&before).any(|(x, y)| x < y) {
            out.push(format!("epoch {epoch}, set cover arrival {i}: a value decreased"));
        }
        if f.values().iter().any(|x| !(0.0..=1.0).contains(x)) {
            out.push(format!("epoch {epoch}, set cover arrival {i}: value outside [0, 1]"));
        }
        if f.coverage(a.aux_element) < 1.0 {
            out.push(format!("epoch {epoch}, set cover arrival {i}: not fractionally covered"));
        }
    }
    if f.values() != aux.values() {
        out.push(format!("epoch {epoch}: replayed fractional state differs from the live one"));
    }
    let opt = opt?;
    let ell = aux.max_frequency() as f64;
    let frac = aux.fractional_cost();
    let scale = 1.0 + (1.0 + ell).ln();
    if !leq(frac, KAPPA * scale * opt) {
        out.push(format!("epoch {epoch}: fractional cost {frac} > {KAPPA}·{scale}·{opt}"));
    }
    if opt > 0.0 {
        Some(frac / (scale * opt))
    } else {
        None
    }
}

/// Dual feasibility, penalties within the optimum, total within `(|S|+1)·Σy`.
fn audit_dual(epoch: usize, pcsc: &PcscState, opt: Option<f64>, out: &mut Vec<String>) {
    if pcsc.arrivals().is_empty() {
        return;
    }
    let viol = pcsc.dual_violation();
    let max_cost = (0..pcsc.aux().num_sets()).map(|s| pcsc.aux().cost(s)).fold(1.0, f64::max);
    if viol > 1e-9 * max_cost {
        out.push(format!("epoch {epoch}: dual constraint exceeded by {viol}"));
    }
    if let Some(opt) = opt {
        if !leq(pcsc.penalty_cost(), opt) {
            out.push(format!("epoch {epoch}: penalties {} > optimum {opt}", pcsc.penalty_cost()));
        }
    }
    let bound = (pcsc.num_sets() as f64 + 1.0) * pcsc.dual_objective();
    if !leq(pcsc.total_cost(), bound) {
        out.push(format!("epoch {epoch}: cost {} > (|S|+1)·Σy = {bound}", pcsc.total_cost()));
    }
}
