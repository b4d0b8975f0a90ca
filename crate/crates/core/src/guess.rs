//! Guess doubling: keeps the distances handed to the layered core within
//! `[1, 2·k̃⁶]` after rescaling.
//!
//! A running estimate `guess` of the optimum is kept between `opt` and
//! `k̃²·opt` using a greedy solution that serves every distinct pair on its own
//! shortest path. Whenever the greedy value exceeds the guess, the guess is
//! raised to `k̃·greedy`, so it grows by at least `k̃` each time. A fresh core
//! is then started on a graph scaled by `M·k̃³/guess` and all earlier arrivals
//! are replayed through it. Pairs that are very close are bought outright;
//! pairs that are very far are rented.
//!
//! Costs are tracked twice: per epoch in scaled units for the analysis, and
//! once globally in original units as money actually spent. Nodes bought in an
//! earlier epoch stay owned, so buying them again is free, and replayed
//! arrivals are not rented again.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, NodeWeightedGraph, ZeroedSet};
use crate::steiner::{distance_cap, ArrivalReport, RobConfig, RobCore, RobError, Rounding};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Core(#[from] RobError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessConfig {
    pub m: u32,
    pub k_tilde: u32,
    pub rounding: Rounding,
    pub terminals: Option<Vec<NodeId>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    BuyCheapest,
    RentCheapest,
    PassToCore,
}

/// `Σ min(m_i, M)·d_i` over distinct pairs with multiplicity `m_i` and
/// distance `d_i`.
pub fn greedy_cost(pairs: &[(u32, f64)], m: u32) -> f64 {
    pairs.iter().map(|&(mult, d)| mult.min(m) as f64 * d).sum()
}

/// Unordered pair key.
pub fn pair_key(s: NodeId, t: NodeId) -> (NodeId, NodeId) {
    (s.min(t), s.max(t))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServedArrival {
    pub index: usize,
    pub s: NodeId,
    pub t: NodeId,
    pub replay: bool,
    pub epoch: Option<usize>,
    pub route: Route,
    /// `d_{G/A}(s, t)` in the epoch's scaled units (0 before the first epoch).
    pub scaled_distance: f64,
    pub core: Option<ArrivalReport>,
    /// Path bought or rented outside the core.
    pub side_path: Option<Vec<NodeId>>,
    pub spent_buy: f64,
    pub spent_rent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessUpdate {
    /// Arrival that triggered the update.
    pub arrival: usize,
    pub previous: f64,
    pub guess: f64,
    pub greedy: f64,
}

#[derive(Clone, Debug)]
pub struct Epoch {
    pub guess: f64,
    pub scale: f64,
    /// First arrival index served by a later epoch (or the run length).
    pub end: usize,
    pub side_buy: f64,
    pub side_rent: f64,
    pub core: RobCore,
    /// Arrival indices passed to the core, in order (replays included).
    pub passed: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct GuessDoubling {
    graph: NodeWeightedGraph,
    config: GuessConfig,
    multiplicity: HashMap<(NodeId, NodeId), u32>,
    pair_distance: HashMap<(NodeId, NodeId), f64>,
    greedy: f64,
    guess: f64,
    history: Vec<(NodeId, NodeId)>,
    epochs: Vec<Epoch>,
    updates: Vec<GuessUpdate>,
    served: Vec<ServedArrival>,
    owned: ZeroedSet,
    spent_buy: f64,
    spent_rent: f64,
    infeasible: Vec<usize>,
}

impl GuessDoubling {
    /// `graph` must be subdivided and in original units.
    pub fn new(graph: NodeWeightedGraph, config: GuessConfig) -> Result<Self, GuessError> {
        if config.k_tilde < 1 {
            return Err(GuessError::InvalidConfig("k_tilde must be at least 1".into()));
        }
        if config.m < 1 {
            return Err(GuessError::InvalidConfig("M must be at least 1".into()));
        }
        if !graph.is_subdivided() {
            return Err(GuessError::InvalidConfig("graph must be subdivided".into()));
        }
        if config.rounding == Rounding::Deterministic && config.terminals.is_none() {
            return Err(GuessError::InvalidConfig("deterministic rounding needs the terminal set".into()));
        }
        let n = graph.len();
        Ok(GuessDoubling {
            graph,
            config,
            multiplicity: HashMap::new(),
            pair_distance: HashMap::new(),
            greedy: 0.0,
            guess: 0.0,
            history: Vec::new(),
            epochs: Vec::new(),
            updates: Vec::new(),
            served: Vec::new(),
            owned: ZeroedSet::empty(n),
            spent_buy: 0.0,
            spent_rent: 0.0,
            infeasible: Vec::new(),
        })
    }

    pub fn guess(&self) -> f64 {
        self.guess
    }

    pub fn greedy(&self) -> f64 {
        self.greedy
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn updates(&self) -> &[GuessUpdate] {
        &self.updates
    }

    /// Every arrival served, replays included, in processing order.
    pub fn served(&self) -> &[ServedArrival] {
        &self.served
    }

    pub fn history(&self) -> &[(NodeId, NodeId)] {
        &self.history
    }

    pub fn owned(&self) -> &ZeroedSet {
        &self.owned
    }

    /// Money spent on purchases, original units.
    pub fn spent_buy(&self) -> f64 {
        self.spent_buy
    }

    /// Money spent on rentals, original units.
    pub fn spent_rent(&self) -> f64 {
        self.spent_rent
    }

    pub fn total_cost(&self) -> f64 {
        self.spent_buy + self.spent_rent
    }

    /// Live arrivals whose terminals were not connected by owned plus rented nodes.
    pub fn infeasible_arrivals(&self) -> &[usize] {
        &self.infeasible
    }

    /// Serve the next pair.
    pub fn arrive(&mut self, s: NodeId, t: NodeId) -> Result<(), GuessError> {
        self.graph.check_node(s)?;
        self.graph.check_node(t)?;
        let index = self.history.len();
        self.history.push((s, t));
        let key = pair_key(s, t);
        let d = match self.pair_distance.get(&key) {
            Some(&d) => d,
            None => {
                let d = self.graph.node_distance(&ZeroedSet::empty(self.graph.len()), s, t)?;
                if !d.is_finite() {
                    return Err(GraphError::NoPath(s, t).into());
                }
                self.pair_distance.insert(key, d);
                d
            }
        };
        let mult = self.multiplicity.entry(key).or_insert(0);
        *mult += 1;
        if *mult <= self.config.m {
            self.greedy += d;
        }

        let k = self.config.k_tilde as f64;
        if self.greedy > self.guess {
            let previous = self.guess;
            self.guess = k * self.greedy;
            self.updates.push(GuessUpdate { arrival: index, previous, guess: self.guess, greedy: self.greedy });
            self.start_epoch(index)?;
            for h in 0..index {
                let (hs, ht) = self.history[h];
                self.serve(h, hs, ht, true)?;
            }
        }
        self.serve(index, s, t, false)?;
        if let Some(e) = self.epochs.last_mut() {
            e.end = index + 1;
        }
        Ok(())
    }

    fn start_epoch(&mut self, index: usize) -> Result<(), GuessError> {
        let k = self.config.k_tilde as f64;
        let scale = self.config.m as f64 * k.powi(3) / self.guess;
        let rounding = match self.config.rounding {
            Rounding::Randomized { seed } => Rounding::Randomized {
                seed: seed ^ (self.epochs.len() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            },
            other => other,
        };
        let core = RobCore::new(
            self.graph.scaled(scale),
            &RobConfig {
                m: self.config.m,
                k_tilde: self.config.k_tilde,
                rounding,
                terminals: self.config.terminals.clone(),
            },
        )?;
        self.epochs.push(Epoch {
            guess: self.guess,
            scale,
            end: index,
            side_buy: 0.0,
            side_rent: 0.0,
            core,
            passed: Vec::new(),
        });
        Ok(())
    }

    /// Pay `M·c_v` for every node of `nodes` not owned yet.
    fn spend_buy(&mut self, nodes: &[NodeId]) -> f64 {
        let mut cost = 0.0;
        for &v in nodes {
            if self.owned.insert(v) {
                cost += self.config.m as f64 * self.graph.weight(v);
            }
        }
        self.spent_buy += cost;
        cost
    }

    /// Pay for the interior nodes of `path` that are not owned.
    fn spend_rent(&mut self, path: &[NodeId]) -> f64 {
        let cost = if path.len() > 2 {
            path[1..path.len() - 1]
                .iter()
                .filter(|&&v| !self.owned.contains(v))
                .map(|&v| self.graph.weight(v))
                .sum()
        } else {
            0.0
        };
        self.spent_rent += cost;
        cost
    }

    fn serve(&mut self, index: usize, s: NodeId, t: NodeId, replay: bool) -> Result<(), GuessError> {
        let m = self.config.m as f64;
        let cap = distance_cap(self.config.k_tilde);
        let mut rec = ServedArrival {
            index,
            s,
            t,
            replay,
            epoch: None,
            route: Route::BuyCheapest,
            scaled_distance: 0.0,
            core: None,
            side_path: None,
            spent_buy: 0.0,
            spent_rent: 0.0,
        };
        let mut rented: Vec<NodeId> = Vec::new();

        if self.epochs.is_empty() {
            // Only zero-distance pairs arrive before the first guess.
            let path = self.graph.shortest_path(&self.owned, s, t)?;
            rec.spent_buy = self.spend_buy(&path);
            rec.side_path = Some(path);
        } else {
            let epoch_index = self.epochs.len() - 1;
            rec.epoch = Some(epoch_index);
            let epoch = &mut self.epochs[epoch_index];
            let d = epoch.core.distance(s, t)?;
            rec.scaled_distance = d;
            if d < 1.0 {
                rec.route = Route::BuyCheapest;
                let path = epoch.core.shortest_path(s, t)?;
                epoch.core.absorb(&path);
                epoch.side_buy += m * d / epoch.scale;
                rec.spent_buy = self.spend_buy(&path);
                rec.side_path = Some(path);
            } else if d > cap {
                rec.route = Route::RentCheapest;
                let path = epoch.core.shortest_path(s, t)?;
                epoch.side_rent += d / epoch.scale;
                rented = path.clone();
                rec.side_path = Some(path);
            } else {
                rec.route = Route::PassToCore;
                epoch.passed.push(index);
                let report = epoch.core.arrive_pair(s, t)?;
                rented = report.rented.clone();
                rec.spent_buy = self.spend_buy(&report.nodes_bought);
                rec.core = Some(report);
            }
        }

        if !replay {
            rec.spent_rent = self.spend_rent(&rented);
            let mut allowed = self.owned.clone();
            for &v in rented.iter().chain([&s, &t]) {
                allowed.insert(v);
            }
            if !self.graph.connected_within(&allowed, s, t) {
                self.infeasible.push(index);
            }
        }
        self.served.push(rec);
        Ok(())
    }

    /// Distinct pairs seen so far with multiplicities and distances.
    pub fn pair_table(&self) -> Vec<((NodeId, NodeId), u32, f64)> {
        let mut rows: Vec<_> = self
            .multiplicity
            .iter()
            .map(|(&k, &m)| (k, m, self.pair_distance[&k]))
            .collect();
        rows.sort_by_key(|r| r.0);
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ski() -> (NodeWeightedGraph, NodeId, NodeId) {
        let mut g = NodeWeightedGraph::new();
        let s = g.add_node("s", 0.0).unwrap();
        let a = g.add_node("a", 1.0).unwrap();
        let t = g.add_node("t", 0.0).unwrap();
        g.add_edge(s, a, 0.0).unwrap();
        g.add_edge(a, t, 0.0).unwrap();
        (g.subdivide_edges().unwrap(), s, t)
    }

    fn cfg(rounding: Rounding, m: u32, k: u32) -> GuessConfig {
        GuessConfig { m, k_tilde: k, rounding, terminals: None }
    }

    const DUAL: Rounding = Rounding::DualGreedy { skip_covered: true };

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_cost(&[(5, 3.0)], 2), 6.0);
        assert_eq!(greedy_cost(&[], 2), 0.0);
        assert_eq!(greedy_cost(&[(3, 1.0), (1, 4.0)], 2), 6.0);
    }

    #[test]
    fn invalid_configuration() {
        let (g, _, _) = ski();
        assert!(matches!(GuessDoubling::new(g.clone(), cfg(DUAL, 1, 0)), Err(GuessError::InvalidConfig(_))));
        assert!(matches!(
            GuessDoubling::new(g, cfg(Rounding::Deterministic, 1, 1)),
            Err(GuessError::InvalidConfig(_))
        ));
    }

    #[test]
    fn first_positive_arrival_opens_an_epoch() {
        let (g, s, t) = ski();
        let mut run = GuessDoubling::new(g, cfg(DUAL, 4, 1)).unwrap();
        assert_eq!(run.guess(), 0.0);
        run.arrive(s, t).unwrap();
        assert_eq!(run.guess(), 1.0);
        assert_eq!(run.epochs().len(), 1);
        assert_eq!(run.updates()[0].previous, 0.0);
    }

    #[test]
    fn ski_rental_cost_stays_bounded() {
        for rounding in [Rounding::Randomized { seed: 5 }, DUAL] {
            let (g, s, t) = ski();
            let mut run = GuessDoubling::new(g, cfg(rounding, 4, 1)).unwrap();
            for m in 1..=16 {
                run.arrive(s, t).unwrap();
                assert!(run.total_cost() <= 20.0 * (m.min(4) as f64));
                assert!(run.infeasible_arrivals().is_empty());
            }
        }
    }

    #[test]
    fn guesses_grow_by_at_least_k() {
        // A path of weighted nodes; pairs farther and farther apart.
        let mut g = NodeWeightedGraph::new();
        let ids: Vec<_> = (0..8)
            .map(|i| g.add_node(format!("p{i}"), if i % 2 == 1 { 3.0 } else { 0.0 }).unwrap())
            .collect();
        for w in ids.windows(2) {
            g.add_edge(w[0], w[1], 0.0).unwrap();
        }
        let g = g.subdivide_edges().unwrap();
        let k = 3;
        let mut run = GuessDoubling::new(g, cfg(DUAL, 2, k)).unwrap();
        for &(a, b) in &[(0, 2), (0, 4), (0, 6)] {
            run.arrive(ids[a], ids[b]).unwrap();
        }
        let ups = run.updates();
        assert!(!ups.is_empty());
        for w in ups.windows(2) {
            assert!(w[1].guess >= k as f64 * w[0].guess - 1e-9);
        }
        // Every update replays the full prefix.
        let replays = run.served().iter().filter(|r| r.replay).count();
        let expected: usize = ups.iter().map(|u| u.arrival).sum();
        assert_eq!(replays, expected);
    }

    #[test]
    fn replay_is_deterministic() {
        let run = || {
            let (g, s, t) = ski();
            let mut r = GuessDoubling::new(g, cfg(Rounding::Randomized { seed: 42 }, 4, 1)).unwrap();
            for _ in 0..6 {
                r.arrive(s, t).unwrap();
            }
            serde_json::to_string(r.served()).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_distance_pair_is_bought_for_free() {
        let mut g = NodeWeightedGraph::new();
        let s = g.add_node("s", 0.0).unwrap();
        let t = g.add_node("t", 0.0).unwrap();
        g.add_edge(s, t, 0.0).unwrap();
        let mut run = GuessDoubling::new(g.subdivide_edges().unwrap(), cfg(DUAL, 2, 2)).unwrap();
        run.arrive(s, t).unwrap();
        assert_eq!(run.served()[0].route, Route::BuyCheapest);
        assert_eq!(run.total_cost(), 0.0);
        assert!(run.epochs().is_empty());
    }
}
