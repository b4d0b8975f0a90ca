//! Exact offline optimum by enumeration.
//!
//! The offline solution buys a set `B` once and rents a cheapest path in
//! `G/B` for every request, paying `M·c(B) + Σ_i d_{G/B}(s_i, t_i)`. Candidate
//! purchases are the nonzero-weight nodes and the weighted edges of the
//! unsubdivided graph; a weighted edge stands for its whole chain of light
//! nodes. Buying part of a chain never beats buying all or none of it: the
//! objective is concave in the bought fraction of any one chain.
//!
//! [`OracleTable`] evaluates every candidate once per distinct pair, so the
//! optimum of any multiplicity vector over those pairs is a cheap scan.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instance::Instance;
use crate::graph::{NodeId, NodeWeightedGraph};

/// Most nonzero-weight nodes the oracle accepts.
pub const MAX_N_BAR: usize = 16;
/// Most purchasable units (weighted nodes plus weighted edges).
pub const MAX_UNITS: usize = 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle refused: {n_bar} weighted nodes and {units} units exceed the enumeration guard")]
    Refused { n_bar: usize, units: usize },
    #[error("pair ({0}, {1}) is not in the table")]
    UnknownPair(NodeId, NodeId),
    #[error("graph must not be subdivided")]
    Subdivided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Node(NodeId),
    /// Edge index in the unsubdivided graph.
    Edge(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub cost: f64,
    pub bought_nodes: Vec<NodeId>,
    /// Weighted edges bought, by endpoint pair.
    pub bought_edges: Vec<(NodeId, NodeId)>,
    pub enumerated: usize,
}

#[derive(Clone, Debug)]
pub struct OracleTable {
    m: u32,
    units: Vec<Unit>,
    endpoints: Vec<(NodeId, NodeId)>,
    pairs: Vec<(NodeId, NodeId)>,
    buy: Vec<f64>,
    /// `dist[mask * pairs.len() + p]`.
    dist: Vec<f64>,
}

struct Adjacency {
    adj: Vec<Vec<(NodeId, usize)>>,
}

#[derive(PartialEq)]
struct Entry(f64, NodeId);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Endpoint-excluded distances from `src` with the given node and edge costs.
fn dijkstra(g: &Adjacency, node_cost: &[f64], edge_cost: &[f64], src: NodeId) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Entry(0.0, src));
    while let Some(Entry(d, x)) = heap.pop() {
        if d > dist[x] {
            continue;
        }
        let leave = if x == src { d } else { d + node_cost[x] };
        for &(y, e) in &g.adj[x] {
            let cand = leave + edge_cost[e];
            if cand < dist[y] {
                dist[y] = cand;
                heap.push(Entry(cand, y));
            }
        }
    }
    dist
}

impl OracleTable {
    pub fn build(inst: &Instance) -> Result<Self, OracleError> {
        Self::for_pairs(&inst.graph, &inst.distinct_pairs(), inst.m)
    }

    /// Table over `pairs` on an unsubdivided graph.
    pub fn for_pairs(graph: &NodeWeightedGraph, pairs: &[(NodeId, NodeId)], m: u32) -> Result<Self, OracleError> {
        if graph.is_subdivided() {
            return Err(OracleError::Subdivided);
        }
        let mut units: Vec<Unit> = (0..graph.len()).filter(|&v| graph.weight(v) > 0.0).map(Unit::Node).collect();
        let n_bar = units.len();
        units.extend((0..graph.edges().len()).filter(|&e| graph.edges()[e].weight > 0.0).map(Unit::Edge));
        if n_bar > MAX_N_BAR || units.len() > MAX_UNITS {
            return Err(OracleError::Refused { n_bar, units: units.len() });
        }
        let mut adj = vec![Vec::new(); graph.len()];
        for (i, e) in graph.edges().iter().enumerate() {
            adj[e.u].push((e.v, i));
            adj[e.v].push((e.u, i));
        }
        let g = Adjacency { adj };
        let pairs: Vec<(NodeId, NodeId)> = pairs.iter().map(|&(s, t)| (s.min(t), s.max(t))).collect();
        let mut by_source: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (p, &(s, _)) in pairs.iter().enumerate() {
            by_source.entry(s).or_default().push(p);
        }
        let unit_cost: Vec<f64> = units
            .iter()
            .map(|u| match *u {
                Unit::Node(v) => graph.weight(v),
                Unit::Edge(e) => graph.edges()[e].weight,
            })
            .collect();
        let masks = 1usize << units.len();
        let mut buy = vec![0.0; masks];
        let mut dist = vec![0.0; masks * pairs.len()];
        let mut node_cost = graph.weights().to_vec();
        let mut edge_cost: Vec<f64> = graph.edges().iter().map(|e| e.weight).collect();
        for mask in 0..masks {
            let mut c = 0.0;
            for (i, u) in units.iter().enumerate() {
                let on = mask >> i & 1 == 1;
                if on {
                    c += unit_cost[i];
                }
                let value = if on { 0.0 } else { unit_cost[i] };
                match *u {
                    Unit::Node(v) => node_cost[v] = value,
                    Unit::Edge(e) => edge_cost[e] = value,
                }
            }
            buy[mask] = m as f64 * c;
            for (&s, ps) in &by_source {
                let d = dijkstra(&g, &node_cost, &edge_cost, s);
                for &p in ps {
                    dist[mask * pairs.len() + p] = d[pairs[p].1];
                }
            }
        }
        let endpoints = graph.edges().iter().map(|e| (e.u, e.v)).collect();
        Ok(OracleTable { m, units, endpoints, pairs, buy, dist })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn pair_index(&self, s: NodeId, t: NodeId) -> Option<usize> {
        let key = (s.min(t), s.max(t));
        self.pairs.iter().position(|&p| p == key)
    }

    /// Distance of pair `p` when `mask` is bought.
    pub fn distance(&self, mask: usize, p: usize) -> f64 {
        self.dist[mask * self.pairs.len() + p]
    }

    /// Optimum for `mult[p]` requests of each pair `p`.
    pub fn opt(&self, mult: &[u32]) -> OracleResult {
        assert_eq!(mult.len(), self.pairs.len(), "one multiplicity per pair");
        let np = self.pairs.len();
        let mut best = f64::INFINITY;
        let mut best_mask = 0;
        for (mask, &b) in self.buy.iter().enumerate() {
            let mut cost = b;
            if cost >= best {
                continue;
            }
            let row = &self.dist[mask * np..(mask + 1) * np];
            for (&k, &d) in mult.iter().zip(row) {
                if k > 0 {
                    cost += k as f64 * d;
                }
            }
            if cost < best {
                best = cost;
                best_mask = mask;
            }
        }
        let mut bought_nodes = Vec::new();
        let mut bought_edges = Vec::new();
        for (i, u) in self.units.iter().enumerate() {
            if best_mask >> i & 1 == 1 {
                match *u {
                    Unit::Node(v) => bought_nodes.push(v),
                    Unit::Edge(e) => bought_edges.push(self.endpoints[e]),
                }
            }
        }
        OracleResult { cost: best, bought_nodes, bought_edges, enumerated: self.buy.len() }
    }

    /// Optimum for a request sequence over the table's pairs.
    pub fn opt_requests(&self, requests: &[(NodeId, NodeId)]) -> Result<OracleResult, OracleError> {
        let mut mult = vec![0u32; self.pairs.len()];
        for &(s, t) in requests {
            let p = self.pair_index(s, t).ok_or(OracleError::UnknownPair(s, t))?;
            mult[p] += 1;
        }
        Ok(self.opt(&mult))
    }
}

/// Exact optimum of `M·c(B) + Σ_i d_{G/B}(s_i, t_i)` for the instance.
pub fn offline_opt(inst: &Instance) -> Result<OracleResult, OracleError> {
    OracleTable::build(inst)?.opt_requests(&inst.requests)
}
