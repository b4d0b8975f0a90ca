//! The layered witness algorithm for online rent-or-buy Steiner forest.
//!
//! Every arriving pair `(s, t)` with `1 ≤ d_{G/A}(s, t) ≤ 2·k̃⁶` falls on layer
//! `j = ⌊log₂ d⌋ + 1`. If one endpoint is *uncovered* on its layer, an element
//! `r_{v,j}` is released to a prize-collecting set cover instance whose sets
//! are the weighted nodes of the graph; purchased sets become bought nodes and
//! witnesses. Otherwise both endpoints have a witness nearby and the path
//! between the two witnesses is bought. In both cases the cheapest `s`–`t`
//! path in `G/A` is rented.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DistanceMap, GraphError, NodeId, NodeWeightedGraph, ZeroedSet};
use crate::pcsc::{Decision, ElementId, PcscError, PcscState, Scheme, SetId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobError {
    #[error("distance {distance} outside the layer range [1, {upper}]")]
    OutOfRange { distance: f64, upper: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Pcsc(#[from] PcscError),
}

/// How the set cover subroutine turns fractional values into purchases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    Randomized { seed: u64 },
    Deterministic,
    DualGreedy { skip_covered: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobConfig {
    pub m: u32,
    pub k_tilde: u32,
    pub rounding: Rounding,
    /// Terminal set known in advance (required by [`Rounding::Deterministic`]).
    pub terminals: Option<Vec<NodeId>>,
}

/// `log₂ max(k̃, 2)`, the logarithm used in set costs and bounds.
pub fn log_k(k_tilde: u32) -> f64 {
    (k_tilde.max(2) as f64).log2()
}

/// Upper end of the accepted distance range, `2·k̃⁶`.
pub fn distance_cap(k_tilde: u32) -> f64 {
    2.0 * (k_tilde.max(1) as f64).powi(6)
}

/// `j = ⌊log₂ d⌋ + 1` for `1 ≤ d ≤ 2·k̃⁶`.
pub fn layer_of(d: f64, k_tilde: u32) -> Result<usize, RobError> {
    let upper = distance_cap(k_tilde);
    if !(1.0..=upper).contains(&d) {
        return Err(RobError::OutOfRange { distance: d, upper });
    }
    Ok(d.log2().floor() as usize + 1)
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoreLedger {
    pub c_if: f64,
    pub c_else: f64,
    pub c_buy: f64,
    pub c_rent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Branch {
    Release {
        terminal: NodeId,
        element: ElementId,
        penalty: f64,
        decision: Decision,
        singleton_x: f64,
    },
    Connect {
        witnesses: (NodeId, NodeId),
        added_witnesses: Vec<NodeId>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalReport {
    pub index: usize,
    pub s: NodeId,
    pub t: NodeId,
    pub distance: f64,
    pub layer: usize,
    pub branch: Branch,
    /// Nodes whose sets were bought by the set cover subroutine.
    pub sets_bought: Vec<NodeId>,
    /// Nodes that joined `A` during this arrival.
    pub nodes_bought: Vec<NodeId>,
    pub rented: Vec<NodeId>,
    pub rent_cost: f64,
    pub buy_cost: f64,
}

#[derive(Clone, Debug)]
pub struct RobCore {
    graph: NodeWeightedGraph,
    m: u32,
    k_tilde: u32,
    j_max: usize,
    set_node: Vec<NodeId>,
    pcsc: PcscState,
    elements: HashMap<(NodeId, usize), ElementId>,
    bought: ZeroedSet,
    witnesses: Vec<Vec<NodeId>>,
    is_witness: Vec<Vec<bool>>,
    counters: Vec<u32>,
    else_count: Vec<usize>,
    balls: HashMap<NodeId, DistanceMap>,
    ledger: CoreLedger,
    reports: Vec<ArrivalReport>,
    counter_violations: usize,
}

impl RobCore {
    /// `graph` must be subdivided (all edge weights zero).
    pub fn new(graph: NodeWeightedGraph, config: &RobConfig) -> Result<Self, RobError> {
        if !graph.is_subdivided() {
            return Err(RobError::InvalidConfig("graph must be subdivided".into()));
        }
        if config.m < 1 {
            return Err(RobError::InvalidConfig("M must be at least 1".into()));
        }
        if config.k_tilde < 1 {
            return Err(RobError::InvalidConfig("k_tilde must be at least 1".into()));
        }
        let k = config.k_tilde;
        let j_max = layer_of(distance_cap(k), k)?;
        let set_node: Vec<NodeId> = graph.weighted_original_nodes();
        let set_costs = set_node
            .iter()
            .map(|&v| log_k(k) * config.m as f64 * graph.weight(v))
            .collect();
        let scheme = match config.rounding {
            Rounding::Randomized { seed } => Scheme::RandomizedThreshold {
                seed,
                arrival_cap: 2 * k as usize * ((6.0 * log_k(k)).floor() as usize + 2),
            },
            Rounding::Deterministic => Scheme::DeterministicPotential,
            Rounding::DualGreedy { skip_covered } => Scheme::DualGreedy { skip_covered },
        };
        let n = graph.len();
        let layers = j_max + 1;
        let mut core = RobCore {
            pcsc: PcscState::new(set_costs, scheme)?,
            m: config.m,
            k_tilde: k,
            j_max,
            set_node,
            elements: HashMap::new(),
            bought: ZeroedSet::empty(n),
            witnesses: vec![Vec::new(); layers],
            is_witness: vec![vec![false; n]; layers],
            counters: vec![0; n * layers],
            else_count: vec![0; layers],
            balls: HashMap::new(),
            ledger: CoreLedger::default(),
            reports: Vec::new(),
            counter_violations: 0,
            graph,
        };
        if config.rounding == Rounding::Deterministic {
            let terminals = config.terminals.as_ref().ok_or_else(|| {
                RobError::InvalidConfig("deterministic rounding needs the terminal set".into())
            })?;
            let mut terminals = terminals.clone();
            terminals.sort_unstable();
            terminals.dedup();
            for &u in &terminals {
                core.graph.check_node(u)?;
                for j in 1..=j_max {
                    core.element(u, j)?;
                }
            }
            core.pcsc.seal();
        }
        Ok(core)
    }

    pub fn graph(&self) -> &NodeWeightedGraph {
        &self.graph
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k_tilde(&self) -> u32 {
        self.k_tilde
    }

    /// Largest layer index.
    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn bought(&self) -> &ZeroedSet {
        &self.bought
    }

    pub fn witnesses(&self, j: usize) -> &[NodeId] {
        &self.witnesses[j]
    }

    pub fn counter(&self, w: NodeId, j: usize) -> u32 {
        self.counters[w * (self.j_max + 1) + j]
    }

    pub fn else_count(&self, j: usize) -> usize {
        self.else_count[j]
    }

    pub fn ledger(&self) -> &CoreLedger {
        &self.ledger
    }

    pub fn pcsc(&self) -> &PcscState {
        &self.pcsc
    }

    pub fn reports(&self) -> &[ArrivalReport] {
        &self.reports
    }

    /// Node behind each set id.
    pub fn set_nodes(&self) -> &[NodeId] {
        &self.set_node
    }

    /// Counter increments that pushed a value above `M`.
    pub fn counter_violations(&self) -> usize {
        self.counter_violations
    }

    /// Number of distinct elements released to the set cover instance.
    pub fn released_elements(&self) -> usize {
        let mut seen: Vec<ElementId> = self.pcsc.arrivals().iter().map(|a| a.element).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// `Σ_j 2^j·|F_j|`.
    pub fn witness_mass(&self) -> f64 {
        self.witnesses
            .iter()
            .enumerate()
            .map(|(j, f)| pow2(j as i32) * f.len() as f64)
            .sum()
    }

    /// `d_{G/A}(u, v)` in the core's (scaled) units.
    pub fn distance(&self, u: NodeId, v: NodeId) -> Result<f64, RobError> {
        Ok(self.graph.node_distance(&self.bought, u, v)?)
    }

    pub fn shortest_path(&self, u: NodeId, v: NodeId) -> Result<Vec<NodeId>, RobError> {
        Ok(self.graph.shortest_path(&self.bought, u, v)?)
    }

    /// Add nodes bought outside the core to `A`; returns the new ones.
    pub fn absorb(&mut self, nodes: &[NodeId]) -> Vec<NodeId> {
        nodes.iter().copied().filter(|&v| self.bought.insert(v)).collect()
    }

    fn ball(&mut self, u: NodeId) -> &DistanceMap {
        let graph = &self.graph;
        self.balls.entry(u).or_insert_with(|| graph.distances_from(None, u))
    }

    fn open_ball(&mut self, u: NodeId, r: f64) -> Vec<NodeId> {
        self.ball(u);
        self.balls[&u].open_ball(&self.graph, r)
    }

    /// Nodes whose sets contain `r_{u,j}`: weighted original nodes in
    /// `bd B(u, 2^{j-5})` of weight at least `2^{j-6}`.
    pub fn covering_nodes(&mut self, u: NodeId, j: usize) -> Vec<NodeId> {
        let r = pow2(j as i32 - 5);
        let floor = pow2(j as i32 - 6);
        let ball = self.ball(u).clone();
        let graph = &self.graph;
        ball.boundary_ball(graph, r)
            .into_iter()
            .filter(|&v| graph.is_original(v) && graph.weight(v) > 0.0 && graph.weight(v) >= floor)
            .collect()
    }

    fn element(&mut self, u: NodeId, j: usize) -> Result<ElementId, RobError> {
        if let Some(&e) = self.elements.get(&(u, j)) {
            return Ok(e);
        }
        let nodes = self.covering_nodes(u, j);
        let sets: Vec<SetId> = nodes
            .iter()
            .map(|v| self.set_node.binary_search(v).expect("weighted original node has a set"))
            .collect();
        let e = self.pcsc.add_element(&sets)?;
        self.elements.insert((u, j), e);
        Ok(e)
    }

    /// `R_{v,j} ∩ F_j = ∅` and every `w ∈ B(v, 2^{j-5})` has `y_{w,j} < M`.
    pub fn is_uncovered(&mut self, v: NodeId, j: usize) -> bool {
        if self.covering_nodes(v, j).iter().any(|&u| self.is_witness[j][u]) {
            return false;
        }
        let r = pow2(j as i32 - 5);
        let ball = self.open_ball(v, r);
        ball.iter().all(|&w| self.counter(w, j) < self.m)
    }

    fn add_witness(&mut self, v: NodeId, j: usize) {
        if !self.is_witness[j][v] {
            self.is_witness[j][v] = true;
            self.witnesses[j].push(v);
        }
    }

    /// Buy `v` at `M·c_v` unless already bought.
    fn buy_node(&mut self, v: NodeId, newly: &mut Vec<NodeId>) -> f64 {
        if self.bought.insert(v) {
            newly.push(v);
            self.m as f64 * self.graph.weight(v)
        } else {
            0.0
        }
    }

    /// Serve one pair.
    pub fn arrive_pair(&mut self, s: NodeId, t: NodeId) -> Result<ArrivalReport, RobError> {
        let d = self.distance(s, t)?;
        let j = layer_of(d, self.k_tilde)?;
        let mut nodes_bought = Vec::new();
        let mut sets_bought = Vec::new();
        let mut buy_cost = 0.0;

        let uncovered = if self.is_uncovered(s, j) {
            Some(s)
        } else if self.is_uncovered(t, j) {
            Some(t)
        } else {
            None
        };

        let branch = if let Some(v) = uncovered {
            let e = self.element(v, j)?;
            let penalty = pow2(j as i32);
            let out = self.pcsc.arrive(e, penalty)?;
            for &set in &out.newly_bought {
                let u = self.set_node[set];
                sets_bought.push(u);
                buy_cost += self.buy_node(u, &mut nodes_bought);
                let c = self.graph.weight(u);
                for jj in 0..=self.j_max {
                    if c >= pow2(jj as i32 - 6) {
                        self.add_witness(u, jj);
                    }
                }
            }
            let r = pow2(j as i32 - 5);
            for w in self.open_ball(v, r) {
                let idx = w * (self.j_max + 1) + j;
                self.counters[idx] += 1;
                if self.counters[idx] > self.m {
                    self.counter_violations += 1;
                }
            }
            Branch::Release {
                terminal: v,
                element: e,
                penalty,
                decision: out.decision,
                singleton_x: out.singleton_x,
            }
        } else {
            let r = pow2(j as i32 - 3);
            let mut added = Vec::new();
            let mut pick = |core: &mut Self, x: NodeId| -> NodeId {
                let near = core.ball(x).clone();
                let found = core.witnesses[j].iter().copied().filter(|&w| near.dist[w] <= r).min();
                found.unwrap_or_else(|| {
                    core.add_witness(x, j);
                    added.push(x);
                    x
                })
            };
            let w_s = pick(self, s);
            let w_t = pick(self, t);
            let path = self.shortest_path(w_s, w_t)?;
            for v in path {
                buy_cost += self.buy_node(v, &mut nodes_bought);
            }
            self.else_count[j] += 1;
            Branch::Connect { witnesses: (w_s, w_t), added_witnesses: added }
        };

        let rented = self.shortest_path(s, t)?;
        let rent_cost = self.graph.path_cost(&self.bought, &rented);
        let total = buy_cost + rent_cost;
        match branch {
            Branch::Release { .. } => self.ledger.c_if += total,
            Branch::Connect { .. } => self.ledger.c_else += total,
        }
        self.ledger.c_buy += buy_cost;
        self.ledger.c_rent += rent_cost;
        let report = ArrivalReport {
            index: self.reports.len(),
            s,
            t,
            distance: d,
            layer: j,
            branch,
            sets_bought,
            nodes_bought,
            rented,
            rent_cost,
            buy_cost,
        };
        self.reports.push(report.clone());
        Ok(report)
    }

    /// Whether arrival `i`'s terminals are connected through `A ∪ R_i`.
    pub fn connectivity_check(&self, i: usize) -> bool {
        let Some(rep) = self.reports.get(i) else {
            return false;
        };
        let mut allowed = self.bought.clone();
        for &v in rep.rented.iter().chain([&rep.s, &rep.t]) {
            allowed.insert(v);
        }
        self.graph.connected_within(&allowed, rep.s, rep.t)
    }

    /// The analysis inequalities evaluated on the current ledgers.
    pub fn bounds(&self) -> EpochBounds {
        let lk = log_k(self.k_tilde);
        let m = self.m as f64;
        let pen = self.pcsc.penalty_cost();
        let sets = self.pcsc.set_cost();
        EpochBounds {
            c_if: self.ledger.c_if,
            c_else: self.ledger.c_else,
            witness_mass: self.witness_mass(),
            else_cost_rhs: 6.0 * m * self.witness_mass(),
            witness_lhs: m * self.witness_mass(),
            witness_rhs: 128.0 * (pen + sets / lk),
            if_cost_rhs: pen + 65.0 * sets / lk,
            else_within_bound: (0..=self.j_max).all(|j| self.else_count[j] <= 2 * self.witnesses[j].len()),
            released_elements: self.released_elements(),
            released_bound: 2.0 * self.k_tilde as f64 * (6.0 * lk + 2.0),
        }
    }

    #[cfg(test)]
    fn set_counter(&mut self, w: NodeId, j: usize, value: u32) {
        let idx = w * (self.j_max + 1) + j;
        self.counters[idx] = value;
    }
}

/// Both sides of the per-run inequalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochBounds {
    pub c_if: f64,
    pub c_else: f64,
    pub witness_mass: f64,
    pub else_cost_rhs: f64,
    pub witness_lhs: f64,
    pub witness_rhs: f64,
    pub if_cost_rhs: f64,
    pub else_within_bound: bool,
    pub released_elements: usize,
    pub released_bound: f64,
}

fn leq(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs().max(1.0)
}

impl EpochBounds {
    pub fn else_cost(&self) -> bool {
        leq(self.c_else, self.else_cost_rhs)
    }

    pub fn witness(&self) -> bool {
        leq(self.witness_lhs, self.witness_rhs)
    }

    pub fn if_cost(&self) -> bool {
        leq(self.c_if, self.if_cost_rhs)
    }

    pub fn released_within_bound(&self) -> bool {
        self.released_elements as f64 <= self.released_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sat(c_a: f64) -> (NodeWeightedGraph, NodeId, NodeId, NodeId) {
        let mut g = NodeWeightedGraph::new();
        let s = g.add_node("s", 0.0).unwrap();
        let a = g.add_node("a", c_a).unwrap();
        let t = g.add_node("t", 0.0).unwrap();
        g.add_edge(s, a, 0.0).unwrap();
        g.add_edge(a, t, 0.0).unwrap();
        (g.subdivide_edges().unwrap(), s, a, t)
    }

    fn config(rounding: Rounding, m: u32, k: u32) -> RobConfig {
        RobConfig { m, k_tilde: k, rounding, terminals: None }
    }

    const DUAL: Rounding = Rounding::DualGreedy { skip_covered: true };

    #[test]
    fn layer_examples() {
        assert_eq!(layer_of(1.0, 2).unwrap(), 1);
        assert_eq!(layer_of(5.0, 2).unwrap(), 3);
        assert_eq!(layer_of(4096.0, 4).unwrap(), 13);
        assert_eq!(layer_of(2.0 * 4096.0, 4).unwrap(), 14);
        assert!(matches!(layer_of(0.5, 4), Err(RobError::OutOfRange { .. })));
        assert!(matches!(layer_of(8193.0, 4), Err(RobError::OutOfRange { .. })));
    }

    #[test]
    fn requires_subdivided_graph_and_valid_parameters() {
        let mut g = NodeWeightedGraph::new();
        g.add_node("x", 0.0).unwrap();
        assert!(matches!(RobCore::new(g.clone(), &config(DUAL, 1, 2)), Err(RobError::InvalidConfig(_))));
        let g = g.subdivide_edges().unwrap();
        assert!(matches!(RobCore::new(g.clone(), &config(DUAL, 0, 2)), Err(RobError::InvalidConfig(_))));
        assert!(matches!(
            RobCore::new(g, &config(Rounding::Deterministic, 1, 2)),
            Err(RobError::InvalidConfig(_))
        ));
    }

    #[test]
    fn fresh_state_is_uncovered_and_counters_block() {
        let (g, s, a, _) = sat(2.0);
        let mut core = RobCore::new(g, &config(DUAL, 1, 2)).unwrap();
        assert!(core.is_uncovered(s, 2));
        core.set_counter(s, 2, 1);
        assert!(!core.is_uncovered(s, 2));
        core.set_counter(s, 2, 0);
        core.add_witness(a, 2);
        assert!(!core.is_uncovered(s, 2));
    }

    #[test]
    fn first_arrival_releases_source_element() {
        let (g, s, a, t) = sat(2.0);
        let mut core = RobCore::new(g, &config(DUAL, 1, 2)).unwrap();
        assert_eq!(core.covering_nodes(s, 2), vec![a]);
        let rep = core.arrive_pair(s, t).unwrap();
        assert_eq!(rep.distance, 2.0);
        assert_eq!(rep.layer, 2);
        match &rep.branch {
            Branch::Release { terminal, penalty, .. } => {
                assert_eq!(*terminal, s);
                assert_eq!(*penalty, 4.0);
            }
            other => panic!("unexpected branch {other:?}"),
        }
        // The dual raise makes S_a (cost 2) tight before the penalty (4).
        assert_eq!(rep.sets_bought, vec![a]);
        assert_eq!(rep.buy_cost, 2.0);
        assert_eq!(rep.rent_cost, 0.0);
        assert!(core.connectivity_check(0));
        // a has weight 2 ≥ 2^{j-6} for j ≤ 7.
        assert!((0..=7).all(|j| core.witnesses(j).contains(&a)));
        assert!(!core.witnesses(8).contains(&a));
        assert_eq!(core.counter(s, 2), 1);
    }

    #[test]
    fn covered_endpoints_take_the_connect_branch() {
        let (g, s, a, t) = sat(2.0);
        let mut core = RobCore::new(g, &config(DUAL, 1, 2)).unwrap();
        core.set_counter(s, 2, 1);
        core.set_counter(t, 2, 1);
        let rep = core.arrive_pair(s, t).unwrap();
        assert_eq!(
            rep.branch,
            Branch::Connect { witnesses: (s, t), added_witnesses: vec![s, t] }
        );
        assert_eq!(rep.nodes_bought, vec![s, a, t]);
        assert_eq!(rep.buy_cost, 2.0);
        assert_eq!(rep.rented, vec![s, a, t]);
        assert_eq!(rep.rent_cost, 0.0);
        assert!(core.connectivity_check(0));
        assert_eq!(core.else_count(2), 1);
        assert_eq!(core.ledger().c_else, 2.0);
    }

    #[test]
    fn connectivity_check_negative_control() {
        let (g, s, _, t) = sat(2.0);
        let mut core = RobCore::new(g, &config(DUAL, 1, 2)).unwrap();
        core.arrive_pair(s, t).unwrap();
        core.reports[0].rented.clear();
        core.bought = ZeroedSet::empty(core.graph.len());
        assert!(!core.connectivity_check(0));
        assert!(!core.connectivity_check(7));
    }

    #[test]
    fn adjacent_terminals_are_connected_without_purchases() {
        let mut g = NodeWeightedGraph::new();
        let s = g.add_node("s", 0.0).unwrap();
        let t = g.add_node("t", 0.0).unwrap();
        g.add_edge(s, t, 0.0).unwrap();
        let mut allowed = ZeroedSet::empty(2);
        allowed.insert(s);
        allowed.insert(t);
        assert!(g.connected_within(&allowed, s, t));
    }

    #[test]
    fn deterministic_declares_terminal_elements() {
        let (g, s, _, t) = sat(2.0);
        let mut cfg = config(Rounding::Deterministic, 2, 2);
        cfg.terminals = Some(vec![s, t]);
        let mut core = RobCore::new(g, &cfg).unwrap();
        assert_eq!(core.pcsc().num_elements(), 2 * core.j_max());
        assert!(core.pcsc().is_sealed());
        core.arrive_pair(s, t).unwrap();
        assert!(core.connectivity_check(0));
    }

    #[test]
    fn out_of_range_pair_is_rejected() {
        let (g, s, _, t) = sat(0.5);
        let mut core = RobCore::new(g, &config(DUAL, 1, 2)).unwrap();
        assert!(matches!(core.arrive_pair(s, t), Err(RobError::OutOfRange { .. })));
    }

    fn arb_case() -> impl Strategy<Value = (NodeWeightedGraph, Vec<(usize, usize)>, u32, u32, u8, u64)> {
        (4usize..9).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![2 => Just(0.0), 3 => 1.0f64..40.0], n),
                prop::collection::vec((0..n, 0..n), n..2 * n),
                prop::collection::vec((0..n, 0..n), 1..20),
                prop_oneof![Just(1u32), Just(2), Just(4), Just(8)],
                2u32..6,
                0u8..3,
                any::<u64>(),
            )
                .prop_map(|(w, edges, pairs, m, k, which, seed)| {
                    let mut g = NodeWeightedGraph::new();
                    for (i, c) in w.iter().enumerate() {
                        g.add_node(format!("v{i}"), *c).unwrap();
                    }
                    for i in 1..w.len() {
                        g.add_edge(i - 1, i, 0.0).unwrap();
                    }
                    for (u, v) in edges {
                        if u != v {
                            g.add_edge(u, v, 0.0).unwrap();
                        }
                    }
                    (g.subdivide_edges().unwrap(), pairs, m, k, which, seed)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn invariants_hold_on_random_runs((g, pairs, m, k, which, seed) in arb_case()) {
            let rounding = match which {
                0 => Rounding::Randomized { seed },
                1 => Rounding::Deterministic,
                _ => DUAL,
            };
            let mut cfg = config(rounding, m, k);
            cfg.terminals = Some(pairs.iter().flat_map(|&(a, b)| [a, b]).collect());
            let mut core = RobCore::new(g.clone(), &cfg).unwrap();
            let mut served = 0;
            for (s, t) in pairs {
                let d = core.distance(s, t).unwrap();
                if !(1.0..=distance_cap(k)).contains(&d) {
                    continue;
                }
                let before: Vec<Vec<NodeId>> = (0..=core.j_max()).map(|j| core.witnesses(j).to_vec()).collect();
                let rep = core.arrive_pair(s, t).unwrap();
                prop_assert!(core.connectivity_check(served));
                if let Branch::Connect { added_witnesses, .. } = &rep.branch {
                    let r = pow2(rep.layer as i32 - 3);
                    for &x in added_witnesses {
                        let dist = g.distances_from(None, x);
                        prop_assert!(before[rep.layer].iter().all(|&w| dist.dist[w] > r));
                    }
                }
                served += 1;
            }
            prop_assert_eq!(core.counter_violations(), 0);
            let c = core.bounds();
            prop_assert!(c.else_cost(), "{:?}", c);
            prop_assert!(c.witness(), "{:?}", c);
            prop_assert!(c.if_cost(), "{:?}", c);
            prop_assert!(c.else_within_bound);
            prop_assert!(c.released_within_bound());
            prop_assert!(core.pcsc().num_sets() <= g.weighted_original_nodes().len());
        }
    }
}
