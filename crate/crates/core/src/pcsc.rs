//! Online prize-collecting set cover.
//!
//! The sets are fixed when the state is built; elements of the ground set are
//! revealed online and may arrive many times, each time with its own penalty.
//! Every arrival becomes a fresh element of an auxiliary covering instance: it
//! lies in a mirror of each original set containing it, plus a singleton set
//! whose cost is the arrival's penalty. Buying the singleton means paying the
//! penalty.
//!
//! Three schemes decide what to buy:
//!
//! * [`Scheme::RandomizedThreshold`] and [`Scheme::DeterministicPotential`]
//!   run the fractional solver on the auxiliary instance, pay the penalty when
//!   the singleton's value exceeds 1/2, and otherwise round the doubled mirror
//!   values to integral purchases.
//! * [`Scheme::DualGreedy`] raises the arrival's dual variable until some
//!   constraint becomes tight and buys whatever went tight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fractional::{FractionalCover, FractionalError};

pub use crate::fractional::{ElementId, SetId};

/// Index into the auxiliary instance (sets or elements).
pub type AuxId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcscError {
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
    #[error("unknown set {0}")]
    UnknownSet(SetId),
    #[error("element outside the declared universe")]
    UniverseViolation,
    #[error("the deterministic rounder needs the universe declared before the first arrival")]
    UndeclaredUniverse,
    #[error("invalid {what}: {value}")]
    InvalidValue { what: &'static str, value: f64 },
    #[error("operation not available under the {0:?} scheme")]
    WrongScheme(SchemeKind),
    #[error(transparent)]
    Fractional(#[from] FractionalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    RandomizedThreshold,
    DeterministicPotential,
    DualGreedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    /// `arrival_cap` bounds the number of auxiliary arrivals and sizes the
    /// number of thresholds drawn per set.
    RandomizedThreshold { seed: u64, arrival_cap: usize },
    DeterministicPotential,
    /// `skip_covered`: do not raise duals for arrivals already covered.
    DualGreedy { skip_covered: bool },
}

impl Scheme {
    pub fn kind(&self) -> SchemeKind {
        match self {
            Scheme::RandomizedThreshold { .. } => SchemeKind::RandomizedThreshold,
            Scheme::DeterministicPotential => SchemeKind::DeterministicPotential,
            Scheme::DualGreedy { .. } => SchemeKind::DualGreedy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    PayPenalty(f64),
    /// Bought sets containing the element.
    Covered(Vec<SetId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxSet {
    Mirror(SetId),
    /// Singleton of the given arrival index.
    Singleton(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub element: ElementId,
    pub penalty: f64,
    pub aux_element: AuxId,
    pub singleton: AuxId,
    pub decision: Option<Decision>,
    pub newly_bought: Vec<SetId>,
    /// Singleton value when the decision was taken (threshold schemes).
    pub singleton_x: f64,
    pub rounds: u32,
    /// Dual value `y` (dual-greedy scheme).
    pub dual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalOutcome {
    pub decision: Decision,
    pub newly_bought: Vec<SetId>,
    pub singleton_x: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum RounderState {
    Randomized { min_threshold: Vec<f64> },
    Potential,
    Dual { skip_covered: bool, load: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcscState {
    set_costs: Vec<f64>,
    set_members: Vec<Vec<ElementId>>,
    elements: Vec<Vec<SetId>>,
    sealed: bool,
    aux: FractionalCover,
    aux_sets: Vec<AuxSet>,
    arrivals: Vec<ArrivalRecord>,
    bought: Vec<bool>,
    bought_order: Vec<SetId>,
    penalty_cost: f64,
    set_cost: f64,
    safety_net_purchases: usize,
    scheme: Scheme,
    rounder: RounderState,
}

/// Tightness tolerance for the dual raise.
fn tight_tol(c: f64) -> f64 {
    1e-12 * c.abs().max(1.0)
}

impl PcscState {
    /// Sets are given by their costs; membership comes from [`Self::add_element`].
    pub fn new(set_costs: Vec<f64>, scheme: Scheme) -> Result<Self, PcscError> {
        let mut aux = FractionalCover::new();
        for &c in &set_costs {
            if !c.is_finite() || c < 0.0 {
                return Err(PcscError::InvalidValue { what: "set cost", value: c });
            }
            aux.add_set(c)?;
        }
        let n = set_costs.len();
        let rounder = match &scheme {
            Scheme::RandomizedThreshold { seed, arrival_cap } => {
                let k = (2.0 * ((*arrival_cap as f64) + 2.0).ln()).ceil().max(1.0) as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let min_threshold = (0..n)
                    .map(|_| (0..k).map(|_| rng.gen::<f64>()).fold(f64::INFINITY, f64::min))
                    .collect();
                RounderState::Randomized { min_threshold }
            }
            Scheme::DeterministicPotential => RounderState::Potential,
            Scheme::DualGreedy { skip_covered } => RounderState::Dual {
                skip_covered: *skip_covered,
                load: vec![0.0; n],
            },
        };
        let mut state = PcscState {
            set_members: vec![Vec::new(); n],
            elements: Vec::new(),
            sealed: false,
            aux,
            aux_sets: (0..n).map(AuxSet::Mirror).collect(),
            arrivals: Vec::new(),
            bought: vec![false; n],
            bought_order: Vec::new(),
            penalty_cost: 0.0,
            set_cost: 0.0,
            safety_net_purchases: 0,
            scheme,
            rounder,
            set_costs,
        };
        // Free sets are bought on creation.
        for s in 0..n {
            if state.set_costs[s] == 0.0 {
                state.buy(s, &mut Vec::new());
            }
        }
        Ok(state)
    }

    /// Add a ground-set element contained in `sets`.
    pub fn add_element(&mut self, sets: &[SetId]) -> Result<ElementId, PcscError> {
        if self.sealed {
            return Err(PcscError::UniverseViolation);
        }
        let mut sets = sets.to_vec();
        sets.sort_unstable();
        sets.dedup();
        if let Some(&s) = sets.iter().find(|&&s| s >= self.set_costs.len()) {
            return Err(PcscError::UnknownSet(s));
        }
        let e = self.elements.len();
        for &s in &sets {
            self.set_members[s].push(e);
        }
        self.elements.push(sets);
        Ok(e)
    }

    /// Freeze the ground set; later [`Self::add_element`] calls fail.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn num_sets(&self) -> usize {
        self.set_costs.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn set_cost_of(&self, s: SetId) -> f64 {
        self.set_costs[s]
    }

    pub fn covering_sets(&self, e: ElementId) -> &[SetId] {
        &self.elements[e]
    }

    pub fn is_bought(&self, s: SetId) -> bool {
        self.bought[s]
    }

    pub fn bought_order(&self) -> &[SetId] {
        &self.bought_order
    }

    pub fn is_covered(&self, e: ElementId) -> bool {
        self.elements[e].iter().any(|&s| self.bought[s])
    }

    pub fn arrivals(&self) -> &[ArrivalRecord] {
        &self.arrivals
    }

    pub fn aux(&self) -> &FractionalCover {
        &self.aux
    }

    pub fn aux_sets(&self) -> &[AuxSet] {
        &self.aux_sets
    }

    pub fn penalty_cost(&self) -> f64 {
        self.penalty_cost
    }

    pub fn set_cost(&self) -> f64 {
        self.set_cost
    }

    pub fn total_cost(&self) -> f64 {
        self.penalty_cost + self.set_cost
    }

    /// Times the deterministic rounder needed its fallback purchase.
    pub fn safety_net_purchases(&self) -> usize {
        self.safety_net_purchases
    }

    /// `Σ y` over all arrivals.
    pub fn dual_objective(&self) -> f64 {
        self.arrivals.iter().map(|a| a.dual).sum()
    }

    /// Largest `Σ_{aux ∈ Ŝ} y − c_Ŝ` over all auxiliary sets; `≤ 0` when feasible.
    pub fn dual_violation(&self) -> f64 {
        let mut load = vec![0.0; self.aux_sets.len()];
        for a in &self.arrivals {
            for &s in self.aux.covering_sets(a.aux_element) {
                load[s] += a.dual;
            }
        }
        load.iter()
            .enumerate()
            .map(|(s, l)| l - self.aux.cost(s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn buy(&mut self, s: SetId, newly: &mut Vec<SetId>) {
        record_purchase(&mut self.bought, &mut self.bought_order, &mut self.set_cost, &self.set_costs, s, newly);
    }

    /// Create the auxiliary copy of arrival `(e, p)` and its singleton set.
    pub fn register_arrival(&mut self, e: ElementId, penalty: f64) -> Result<AuxId, PcscError> {
        if e >= self.elements.len() {
            return Err(PcscError::UnknownElement(e));
        }
        if !penalty.is_finite() || penalty < 0.0 {
            return Err(PcscError::InvalidValue { what: "penalty", value: penalty });
        }
        let index = self.arrivals.len();
        let singleton = self.aux.add_set(penalty)?;
        self.aux_sets.push(AuxSet::Singleton(index));
        if let RounderState::Dual { load, .. } = &mut self.rounder {
            load.push(0.0);
        }
        let mut covering = self.elements[e].clone();
        covering.push(singleton);
        let aux_element = self.aux.add_element(&covering)?;
        self.arrivals.push(ArrivalRecord {
            element: e,
            penalty,
            aux_element,
            singleton,
            decision: None,
            newly_bought: Vec::new(),
            singleton_x: 0.0,
            rounds: 0,
            dual: 0.0,
        });
        Ok(aux_element)
    }

    /// Process an arrival with whichever scheme the state was built with.
    pub fn arrive(&mut self, e: ElementId, penalty: f64) -> Result<ArrivalOutcome, PcscError> {
        match self.scheme.kind() {
            SchemeKind::DualGreedy => self.arrive_dual_greedy(e, penalty),
            _ => self.arrive_threshold(e, penalty),
        }
    }

    /// Fractional update followed by the `x > 1/2` penalty rule and rounding.
    pub fn arrive_threshold(&mut self, e: ElementId, penalty: f64) -> Result<ArrivalOutcome, PcscError> {
        let kind = self.scheme.kind();
        if kind == SchemeKind::DualGreedy {
            return Err(PcscError::WrongScheme(kind));
        }
        if kind == SchemeKind::DeterministicPotential && !self.sealed {
            return Err(PcscError::UndeclaredUniverse);
        }
        let aux_e = self.register_arrival(e, penalty)?;
        let index = self.arrivals.len() - 1;
        let singleton = self.arrivals[index].singleton;
        let mut newly = Vec::new();

        let rounds = {
            let PcscState {
                aux,
                rounder,
                bought,
                bought_order,
                set_cost,
                set_costs,
                set_members,
                elements,
                ..
            } = self;
            match rounder {
                RounderState::Randomized { min_threshold } => aux.arrive(aux_e, |st, changed| {
                    for &s in changed {
                        if s < min_threshold.len() && 2.0 * st.value(s) >= min_threshold[s] {
                            record_purchase(bought, bought_order, set_cost, set_costs, s, &mut newly);
                        }
                    }
                })?,
                RounderState::Potential => {
                    let base = elements.len() as f64 + 2.0;
                    let mut phi_last = potential(aux, elements, bought, base);
                    aux.arrive(aux_e, |st, _| {
                        let mut phi = potential(st, elements, bought, base);
                        while phi > phi_last {
                            let Some(s) = best_potential_set(st, elements, set_members, set_costs, bought, base)
                            else {
                                break;
                            };
                            record_purchase(bought, bought_order, set_cost, set_costs, s, &mut newly);
                            phi = potential(st, elements, bought, base);
                        }
                        phi_last = phi;
                    })?
                }
                RounderState::Dual { .. } => unreachable!(),
            }
        };

        let singleton_x = self.aux.value(singleton);
        let decision = if singleton_x > 0.5 {
            self.penalty_cost += penalty;
            Decision::PayPenalty(penalty)
        } else {
            if !self.is_covered(e) {
                let s = self.cheapest_covering(e).ok_or(PcscError::UnknownElement(e))?;
                if kind == SchemeKind::DeterministicPotential {
                    self.safety_net_purchases += 1;
                }
                self.buy(s, &mut newly);
            }
            Decision::Covered(self.covering_bought(e))
        };
        let rec = &mut self.arrivals[index];
        rec.decision = Some(decision.clone());
        rec.newly_bought = newly.clone();
        rec.singleton_x = singleton_x;
        rec.rounds = rounds;
        Ok(ArrivalOutcome { decision, newly_bought: newly, singleton_x })
    }

    /// Raise the arrival's dual until a constraint is tight; buy what went tight.
    pub fn arrive_dual_greedy(&mut self, e: ElementId, penalty: f64) -> Result<ArrivalOutcome, PcscError> {
        let kind = self.scheme.kind();
        let skip = match &self.rounder {
            RounderState::Dual { skip_covered, .. } => *skip_covered,
            _ => return Err(PcscError::WrongScheme(kind)),
        };
        let aux_e = self.register_arrival(e, penalty)?;
        let index = self.arrivals.len() - 1;
        let singleton = self.arrivals[index].singleton;
        let mut newly = Vec::new();

        if skip && self.is_covered(e) {
            let decision = Decision::Covered(self.covering_bought(e));
            self.arrivals[index].decision = Some(decision.clone());
            return Ok(ArrivalOutcome { decision, newly_bought: newly, singleton_x: 0.0 });
        }

        let covering = self.aux.covering_sets(aux_e).to_vec();
        let RounderState::Dual { load, .. } = &mut self.rounder else { unreachable!() };
        let slack = |s: AuxId, load: &[f64]| self.aux.cost(s) - load[s];
        let delta = covering
            .iter()
            .map(|&s| slack(s, load))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        for &s in &covering {
            load[s] += delta;
        }
        let tight: Vec<AuxId> = covering
            .iter()
            .copied()
            .filter(|&s| slack(s, load) <= tight_tol(self.aux.cost(s)))
            .collect();
        self.arrivals[index].dual = delta;

        let mut pay = false;
        for s in tight {
            match self.aux_sets[s] {
                AuxSet::Mirror(orig) => self.buy(orig, &mut newly),
                AuxSet::Singleton(_) => pay = pay || s == singleton,
            }
        }
        let decision = if pay {
            self.penalty_cost += penalty;
            Decision::PayPenalty(penalty)
        } else {
            Decision::Covered(self.covering_bought(e))
        };
        let rec = &mut self.arrivals[index];
        rec.decision = Some(decision.clone());
        rec.newly_bought = newly.clone();
        Ok(ArrivalOutcome { decision, newly_bought: newly, singleton_x: 0.0 })
    }

    fn covering_bought(&self, e: ElementId) -> Vec<SetId> {
        self.elements[e].iter().copied().filter(|&s| self.bought[s]).collect()
    }

    fn cheapest_covering(&self, e: ElementId) -> Option<SetId> {
        self.elements[e]
            .iter()
            .copied()
            .min_by(|&a, &b| self.set_costs[a].total_cmp(&self.set_costs[b]).then(a.cmp(&b)))
    }

    /// Exact optimum of the realized instance: sets plus penalties of the
    /// arrivals left uncovered. `None` when there are more than `max_sets` sets.
    pub fn brute_force_opt(&self, max_sets: usize) -> Option<f64> {
        let n = self.set_costs.len();
        if n > max_sets || n >= 32 {
            return None;
        }
        let masks: Vec<u32> = self
            .elements
            .iter()
            .map(|sets| sets.iter().fold(0u32, |m, &s| m | 1 << s))
            .collect();
        let mut best = f64::INFINITY;
        for chosen in 0u32..(1u32 << n) {
            let mut cost: f64 = (0..n).filter(|&s| chosen >> s & 1 == 1).map(|s| self.set_costs[s]).sum();
            if cost >= best {
                continue;
            }
            for a in &self.arrivals {
                if masks[a.element] & chosen == 0 {
                    cost += a.penalty;
                }
            }
            best = best.min(cost);
        }
        Some(best)
    }
}

fn record_purchase(
    bought: &mut [bool],
    order: &mut Vec<SetId>,
    total: &mut f64,
    costs: &[f64],
    s: SetId,
    newly: &mut Vec<SetId>,
) {
    if !bought[s] {
        bought[s] = true;
        order.push(s);
        *total += costs[s];
        newly.push(s);
    }
}

/// `Φ = Σ_{e uncovered} base^{2·min(f_e, 1)}` with `f_e = Σ_{S ∋ e} 2·x_S`.
fn potential(aux: &FractionalCover, elements: &[Vec<SetId>], bought: &[bool], base: f64) -> f64 {
    elements
        .iter()
        .filter(|sets| !sets.is_empty() && !sets.iter().any(|&s| bought[s]))
        .map(|sets| term(aux, sets, base))
        .sum()
}

fn term(aux: &FractionalCover, sets: &[SetId], base: f64) -> f64 {
    let f: f64 = sets.iter().map(|&s| 2.0 * aux.value(s)).sum();
    base.powf(2.0 * f.min(1.0))
}

/// Set with the largest potential drop per unit cost; ties go to the
/// cheapest, then the smallest id.
fn best_potential_set(
    aux: &FractionalCover,
    elements: &[Vec<SetId>],
    set_members: &[Vec<ElementId>],
    set_costs: &[f64],
    bought: &[bool],
    base: f64,
) -> Option<SetId> {
    let mut best: Option<(f64, f64, SetId)> = None;
    for s in 0..set_costs.len() {
        if bought[s] {
            continue;
        }
        let drop: f64 = set_members[s]
            .iter()
            .filter(|&&e| !elements[e].iter().any(|&t| bought[t]))
            .map(|&e| term(aux, &elements[e], base))
            .sum();
        if drop <= 0.0 {
            continue;
        }
        let ratio = drop / set_costs[s];
        let better = match best {
            None => true,
            Some((r, c, _)) => ratio > r || (ratio == r && set_costs[s] < c),
        };
        if better {
            best = Some((ratio, set_costs[s], s));
        }
    }
    best.map(|(_, _, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn randomized(seed: u64) -> Scheme {
        Scheme::RandomizedThreshold { seed, arrival_cap: 64 }
    }

    fn dual() -> Scheme {
        Scheme::DualGreedy { skip_covered: true }
    }

    #[test]
    fn auxiliary_instance_shape() {
        let mut st = PcscState::new(vec![1.0; 4], randomized(0)).unwrap();
        let e: Vec<_> = [vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]]
            .iter()
            .map(|s| st.add_element(s).unwrap())
            .collect();
        for (el, times) in [(e[0], 1), (e[1], 2), (e[2], 1), (e[3], 3)] {
            for _ in 0..times {
                st.register_arrival(el, 1.0).unwrap();
            }
        }
        assert_eq!(st.aux().num_elements(), 7);
        let singles = st.aux_sets().iter().filter(|s| matches!(s, AuxSet::Singleton(_))).count();
        let mirrors = st.aux_sets().iter().filter(|s| matches!(s, AuxSet::Mirror(_))).count();
        assert_eq!((singles, mirrors), (7, 4));
        // Each copy lies in its mirrors plus its own singleton.
        assert!(st.arrivals().iter().all(|a| st.aux().covering_sets(a.aux_element).len() == 3));
    }

    #[test]
    fn element_frequency_bounded_by_sets_plus_one() {
        let mut st = PcscState::new(vec![1.0, 2.0, 3.0], randomized(0)).unwrap();
        let e = st.add_element(&[0, 1, 2]).unwrap();
        let a = st.register_arrival(e, 4.0).unwrap();
        assert_eq!(st.aux().covering_sets(a).len(), 4);
        assert!(st.aux().max_frequency() <= st.num_sets() + 1);
    }

    #[test]
    fn unknown_element_and_bad_penalty() {
        let mut st = PcscState::new(vec![1.0], randomized(0)).unwrap();
        assert_eq!(st.register_arrival(3, 1.0), Err(PcscError::UnknownElement(3)));
        let e = st.add_element(&[0]).unwrap();
        assert!(matches!(st.register_arrival(e, -1.0), Err(PcscError::InvalidValue { .. })));
        assert_eq!(st.add_element(&[5]), Err(PcscError::UnknownSet(5)));
    }

    #[test]
    fn threshold_buys_cheap_set_over_large_penalty() {
        for scheme in [randomized(3), Scheme::DeterministicPotential] {
            let mut st = PcscState::new(vec![10.0], scheme).unwrap();
            let e = st.add_element(&[0]).unwrap();
            st.seal();
            let out = st.arrive(e, 100.0).unwrap();
            assert!(out.singleton_x <= 0.5);
            assert_eq!(out.decision, Decision::Covered(vec![0]));
            assert_eq!(out.newly_bought, vec![0]);
            assert_eq!(st.set_cost(), 10.0);
            assert_eq!(st.penalty_cost(), 0.0);
        }
    }

    #[test]
    fn zero_penalty_is_paid_immediately() {
        for scheme in [randomized(1), dual()] {
            let mut st = PcscState::new(vec![5.0], scheme).unwrap();
            let e = st.add_element(&[0]).unwrap();
            let out = st.arrive(e, 0.0).unwrap();
            assert_eq!(out.decision, Decision::PayPenalty(0.0));
            assert!(out.newly_bought.is_empty());
            assert_eq!(st.total_cost(), 0.0);
        }
    }

    #[test]
    fn free_mirror_set_covers_for_nothing() {
        let mut st = PcscState::new(vec![0.0], randomized(1)).unwrap();
        let e = st.add_element(&[0]).unwrap();
        let out = st.arrive(e, 3.0).unwrap();
        assert_eq!(out.decision, Decision::Covered(vec![0]));
        assert_eq!(st.total_cost(), 0.0);
    }

    #[test]
    fn element_without_sets_pays() {
        for scheme in [randomized(1), dual()] {
            let mut st = PcscState::new(vec![1.0], scheme).unwrap();
            let e = st.add_element(&[]).unwrap();
            assert_eq!(st.arrive(e, 5.0).unwrap().decision, Decision::PayPenalty(5.0));
        }
    }

    #[test]
    fn dual_greedy_accumulates_towards_the_set() {
        let mut st = PcscState::new(vec![10.0], dual()).unwrap();
        let e = st.add_element(&[0]).unwrap();
        for i in 1..=20 {
            let out = st.arrive(e, 1.0).unwrap();
            if i <= 10 {
                assert_eq!(out.decision, Decision::PayPenalty(1.0), "arrival {i}");
            } else {
                assert_eq!(out.decision, Decision::Covered(vec![0]), "arrival {i}");
            }
            if i == 10 {
                assert_eq!(out.newly_bought, vec![0]);
            }
        }
        assert_eq!(st.penalty_cost(), 10.0);
        assert_eq!(st.set_cost(), 10.0);
        assert_eq!(st.dual_objective(), 10.0);
        assert!(st.dual_violation() <= 1e-12);
    }

    #[test]
    fn dual_greedy_without_skip_behaves_the_same_here() {
        let mut st = PcscState::new(vec![2.0], Scheme::DualGreedy { skip_covered: false }).unwrap();
        let e = st.add_element(&[0]).unwrap();
        for _ in 0..5 {
            st.arrive(e, 1.0).unwrap();
        }
        assert_eq!(st.total_cost(), 4.0);
        assert!(st.dual_violation() <= 1e-12);
    }

    #[test]
    fn randomized_all_thresholds_above_one_falls_back() {
        let mut st = PcscState::new(vec![4.0, 1.0], randomized(9)).unwrap();
        if let RounderState::Randomized { min_threshold } = &mut st.rounder {
            min_threshold.iter_mut().for_each(|t| *t = 2.5);
        }
        let e = st.add_element(&[0, 1]).unwrap();
        let out = st.arrive(e, 100.0).unwrap();
        assert_eq!(out.newly_bought, vec![1]);
    }

    #[test]
    fn randomized_threshold_at_or_below_one_buys() {
        let mut st = PcscState::new(vec![1.0], randomized(9)).unwrap();
        if let RounderState::Randomized { min_threshold } = &mut st.rounder {
            min_threshold[0] = 1.0;
        }
        let e = st.add_element(&[0]).unwrap();
        assert_eq!(st.arrive(e, 100.0).unwrap().newly_bought, vec![0]);
    }

    #[test]
    fn randomized_is_reproducible() {
        let run = |seed| {
            let mut st = PcscState::new(vec![3.0, 1.0, 2.0, 5.0], randomized(seed)).unwrap();
            let es: Vec<_> = [vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]]
                .iter()
                .map(|s| st.add_element(s).unwrap())
                .collect();
            for k in 0..12 {
                st.arrive(es[k * 7 % 4], 1.0 + (k % 3) as f64).unwrap();
            }
            serde_json::to_string(&st.arrivals()).unwrap()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn deterministic_needs_sealed_universe() {
        let mut st = PcscState::new(vec![1.0], Scheme::DeterministicPotential).unwrap();
        let e = st.add_element(&[0]).unwrap();
        assert_eq!(st.arrive(e, 1.0), Err(PcscError::UndeclaredUniverse));
        st.seal();
        assert_eq!(st.add_element(&[0]), Err(PcscError::UniverseViolation));
        assert!(st.arrive(e, 10.0).is_ok());
    }

    #[test]
    fn deterministic_forced_buy_with_single_element() {
        let mut st = PcscState::new(vec![1.0], Scheme::DeterministicPotential).unwrap();
        let e = st.add_element(&[0]).unwrap();
        st.seal();
        let out = st.arrive(e, 50.0).unwrap();
        assert_eq!(out.newly_bought, vec![0]);
        assert_eq!(st.safety_net_purchases(), 0);
        // A repeat is already covered and buys nothing.
        let again = st.arrive(e, 50.0).unwrap();
        assert!(again.newly_bought.is_empty());
    }

    /// The potential rounder's choice must maximize the drop of Φ per unit
    /// cost over every single-set purchase, evaluated exhaustively.
    #[test]
    fn potential_choice_matches_exhaustive_scan() {
        let costs = vec![1.0, 2.0, 1.5];
        let membership = [vec![0, 1], vec![1, 2], vec![0, 2]];
        let mut st = PcscState::new(costs.clone(), Scheme::DeterministicPotential).unwrap();
        for s in &membership {
            st.add_element(s).unwrap();
        }
        st.seal();
        let base = st.num_elements() as f64 + 2.0;
        for (k, xs) in [[0.1, 0.2, 0.3], [0.5, 0.0, 0.25], [0.3, 0.3, 0.3], [0.0, 0.45, 0.1]].iter().enumerate() {
            let mut aux = st.aux.clone();
            for (s, &v) in xs.iter().enumerate() {
                aux.force_value(s, v);
            }
            let mut bought = vec![false; 3];
            if k == 3 {
                bought[1] = true;
            }
            let phi = potential(&aux, &st.elements, &bought, base);
            let score = |s: usize| {
                let mut b = bought.clone();
                b[s] = true;
                (phi - potential(&aux, &st.elements, &b, base)) / costs[s]
            };
            let best = (0..3).filter(|&s| !bought[s]).map(score).fold(f64::NEG_INFINITY, f64::max);
            let got = best_potential_set(&aux, &st.elements, &st.set_members, &costs, &bought, base).unwrap();
            assert!((score(got) - best).abs() < 1e-9, "state {k}");
        }
    }

    #[test]
    fn deterministic_covers_small_system() {
        let mut st = PcscState::new(vec![1.0, 2.0, 1.5], Scheme::DeterministicPotential).unwrap();
        let es: Vec<_> = [vec![0, 1], vec![1, 2], vec![0, 2]]
            .iter()
            .map(|s| st.add_element(s).unwrap())
            .collect();
        st.seal();
        for &e in &es {
            let out = st.arrive(e, 100.0).unwrap();
            assert!(matches!(out.decision, Decision::Covered(_)));
            assert!(st.is_covered(e));
        }
        assert_eq!(st.safety_net_purchases(), 0);
    }

    #[test]
    fn brute_force_opt_small() {
        let mut st = PcscState::new(vec![3.0, 1.0], dual()).unwrap();
        let a = st.add_element(&[0]).unwrap();
        let b = st.add_element(&[1]).unwrap();
        st.register_arrival(a, 2.0).unwrap();
        st.register_arrival(a, 2.0).unwrap();
        st.register_arrival(b, 0.5).unwrap();
        // {S0}: 3 + 0.5; {}: 4.5; {S0,S1}: 4; {S1}: 1 + 4.
        assert_eq!(st.brute_force_opt(12), Some(3.5));
        assert_eq!(st.brute_force_opt(1), None);
    }

    /// Set costs, element memberships, and `(element, penalty)` arrivals.
    type Stream = (Vec<f64>, Vec<Vec<usize>>, Vec<(usize, f64)>);

    fn arb_stream() -> impl Strategy<Value = Stream> {
        (1usize..7).prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..20.0, n),
                prop::collection::vec(prop::collection::vec(0..n, 0..=n), 1..6),
                prop::collection::vec((0usize..50, prop_oneof![Just(0.0), 0.1f64..30.0]), 1..25),
            )
        })
    }

    proptest! {
        #[test]
        fn dual_greedy_guarantees((costs, elems, stream) in arb_stream()) {
            let mut st = PcscState::new(costs, dual()).unwrap();
            let ids: Vec<_> = elems.iter().map(|s| st.add_element(s).unwrap()).collect();
            for (k, p) in stream {
                let e = ids[k % ids.len()];
                let out = st.arrive(e, p).unwrap();
                prop_assert!(st.dual_violation() <= 1e-9);
                match out.decision {
                    Decision::PayPenalty(x) => prop_assert_eq!(x, p),
                    Decision::Covered(sets) => prop_assert!(!sets.is_empty() && st.is_covered(e)),
                }
            }
            let opt = st.brute_force_opt(12).unwrap();
            prop_assert!(st.penalty_cost() <= st.dual_objective() + 1e-9);
            prop_assert!(st.dual_objective() <= opt + 1e-9);
            let bound = (st.num_sets() as f64 + 1.0) * st.dual_objective();
            prop_assert!(st.total_cost() <= bound + 1e-9);
        }

        #[test]
        fn threshold_rule_and_coverage((costs, elems, stream) in arb_stream(), seed in any::<u64>(), det in any::<bool>()) {
            let scheme = if det { Scheme::DeterministicPotential } else { randomized(seed) };
            let mut st = PcscState::new(costs, scheme).unwrap();
            let ids: Vec<_> = elems.iter().map(|s| st.add_element(s).unwrap()).collect();
            st.seal();
            let mut bought_before = 0;
            for (k, p) in stream {
                let e = ids[k % ids.len()];
                let out = st.arrive(e, p).unwrap();
                let paid = matches!(out.decision, Decision::PayPenalty(_));
                prop_assert_eq!(paid, out.singleton_x > 0.5);
                if !paid {
                    prop_assert!(st.is_covered(e));
                }
                prop_assert!(st.bought_order().len() >= bought_before);
                bought_before = st.bought_order().len();
                let a = st.arrivals().last().unwrap();
                prop_assert!(st.aux().coverage(a.aux_element) >= 1.0);
                let ledger: f64 = st.bought_order().iter().map(|&s| st.set_cost_of(s)).sum();
                prop_assert!((ledger - st.set_cost()).abs() < 1e-9);
            }
        }
    }
}
