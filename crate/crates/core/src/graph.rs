//! Node-weighted undirected graphs and the distance geometry the online
//! algorithm runs on.
//!
//! Distances follow the node-weighted convention: the length of a path is the
//! sum of the weights of its *interior* nodes (plus edge weights, which only
//! exist before [`NodeWeightedGraph::subdivide_edges`]). The endpoint weights
//! are never counted. A [`ZeroedSet`] models the quotient `G/A`: nodes in the
//! set contribute weight zero.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid weight {weight} on {what}")]
    InvalidWeight { what: String, weight: f64 },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("no path between {0} and {1}")]
    NoPath(NodeId, NodeId),
    #[error("graph is already subdivided")]
    AlreadySubdivided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: f64,
}

/// Where a node came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeOrigin {
    Original,
    /// Interior node of the chain that replaced original edge `edge`.
    Subdivision { edge: usize },
}

/// The chain of nodes that replaced one weighted edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub endpoints: (NodeId, NodeId),
    pub weight: f64,
    pub nodes: Vec<NodeId>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeWeightedGraph {
    names: Vec<String>,
    weights: Vec<f64>,
    origin: Vec<NodeOrigin>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(NodeId, usize)>>,
    chains: Vec<Chain>,
    subdivided: bool,
    #[serde(skip)]
    index: HashMap<String, NodeId>,
}

fn check_weight(what: impl FnOnce() -> String, weight: f64) -> Result<(), GraphError> {
    if weight.is_finite() && weight >= 0.0 {
        Ok(())
    } else {
        Err(GraphError::InvalidWeight { what: what(), weight })
    }
}

impl Default for NodeWeightedGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl NodeWeightedGraph {
    pub fn new() -> Self {
        NodeWeightedGraph {
            names: Vec::new(),
            weights: Vec::new(),
            origin: Vec::new(),
            edges: Vec::new(),
            adj: Vec::new(),
            chains: Vec::new(),
            subdivided: false,
            index: HashMap::new(),
        }
    }

    pub fn add_node(&mut self, name: impl Into<String>, weight: f64) -> Result<NodeId, GraphError> {
        let name = name.into();
        check_weight(|| format!("node {name}"), weight)?;
        if self.index.contains_key(&name) {
            return Err(GraphError::DuplicateNode(name));
        }
        Ok(self.push_node(name, weight, NodeOrigin::Original))
    }

    fn push_node(&mut self, name: String, weight: f64, origin: NodeOrigin) -> NodeId {
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.weights.push(weight);
        self.origin.push(origin);
        self.adj.push(Vec::new());
        id
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId, weight: f64) -> Result<(), GraphError> {
        for x in [u, v] {
            if x >= self.len() {
                return Err(GraphError::UnknownNode(x.to_string()));
            }
        }
        check_weight(|| format!("edge ({u}, {v})"), weight)?;
        let idx = self.edges.len();
        self.edges.push(Edge { u, v, weight });
        self.adj[u].push((v, idx));
        if u != v {
            self.adj[v].push((u, idx));
        }
        Ok(())
    }

    pub fn add_edge_by_name(&mut self, u: &str, v: &str, weight: f64) -> Result<(), GraphError> {
        let (u, v) = (self.node(u)?, self.node(v)?);
        self.add_edge(u, v, weight)
    }

    pub fn node(&self, name: &str) -> Result<NodeId, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn weight(&self, v: NodeId) -> f64 {
        self.weights[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[v].iter().map(|&(w, _)| w)
    }

    pub fn origin(&self, v: NodeId) -> NodeOrigin {
        self.origin[v]
    }

    pub fn is_original(&self, v: NodeId) -> bool {
        self.origin[v] == NodeOrigin::Original
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn is_subdivided(&self) -> bool {
        self.subdivided
    }

    /// Original nodes with nonzero weight (the count `n̄`).
    pub fn weighted_original_nodes(&self) -> Vec<NodeId> {
        (0..self.len())
            .filter(|&v| self.is_original(v) && self.weights[v] > 0.0)
            .collect()
    }

    pub fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if v < self.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(v.to_string()))
        }
    }

    /// Replace every weighted edge by a path of light nodes.
    ///
    /// An edge of weight `c > 0` becomes `max(⌈8/c + 1⌉, ⌈8c⌉ + 1)` nodes of
    /// weight `c / count`; the last node absorbs the rounding residue so the
    /// chain sums to `c` exactly. Every new node weighs strictly less than 1/8.
    pub fn subdivide_edges(&self) -> Result<NodeWeightedGraph, GraphError> {
        if self.subdivided {
            return Err(GraphError::AlreadySubdivided);
        }
        let mut out = NodeWeightedGraph::new();
        for v in 0..self.len() {
            check_weight(|| format!("node {}", self.names[v]), self.weights[v])?;
            out.push_node(self.names[v].clone(), self.weights[v], NodeOrigin::Original);
        }
        for (idx, e) in self.edges.iter().enumerate() {
            check_weight(|| format!("edge ({}, {})", e.u, e.v), e.weight)?;
            if e.weight == 0.0 {
                out.add_edge(e.u, e.v, 0.0)?;
                continue;
            }
            let count = subdivision_count(e.weight);
            let share = e.weight / count as f64;
            let mut nodes = Vec::with_capacity(count);
            let mut prev = e.u;
            for k in 0..count {
                let w = if k + 1 == count {
                    e.weight - share * (count - 1) as f64
                } else {
                    share
                };
                let name = format!("{}~{}#{}", self.names[e.u], self.names[e.v], k);
                let id = out.push_node(name, w, NodeOrigin::Subdivision { edge: idx });
                out.add_edge(prev, id, 0.0)?;
                nodes.push(id);
                prev = id;
            }
            out.add_edge(prev, e.v, 0.0)?;
            out.chains.push(Chain { endpoints: (e.u, e.v), weight: e.weight, nodes });
        }
        out.subdivided = true;
        Ok(out)
    }

    /// Copy with every node and edge weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NodeWeightedGraph {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        out.edges.iter_mut().for_each(|e| e.weight *= factor);
        out.chains.iter_mut().for_each(|c| c.weight *= factor);
        out
    }

    /// Rebuild the name index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    }

    fn effective(&self, zeroed: Option<&ZeroedSet>, v: NodeId) -> f64 {
        match zeroed {
            Some(z) if z.contains(v) => 0.0,
            _ => self.weights[v],
        }
    }

    /// Single-source node-weighted Dijkstra.
    ///
    /// `dist[x]` is the cheapest interior weight of a `source`–`x` path;
    /// `hops[x]` is the fewest edges among cheapest paths.
    pub fn distances_from(&self, zeroed: Option<&ZeroedSet>, source: NodeId) -> DistanceMap {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut hops = vec![u32::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        hops[source] = 0;
        heap.push(HeapEntry { key: 0.0, hops: 0, node: source });
        while let Some(HeapEntry { node: x, .. }) = heap.pop() {
            if done[x] {
                continue;
            }
            done[x] = true;
            // Cost of walking through x; the source's own weight is excluded.
            let through = if x == source {
                0.0
            } else {
                dist[x] + self.effective(zeroed, x)
            };
            for &(y, e) in &self.adj[x] {
                if done[y] {
                    continue;
                }
                let cand = through + self.edges[e].weight;
                let h = hops[x] + 1;
                if cand < dist[y] || (cand == dist[y] && h < hops[y]) {
                    dist[y] = cand;
                    hops[y] = h;
                    heap.push(HeapEntry { key: cand + self.effective(zeroed, y), hops: h, node: y });
                }
            }
        }
        DistanceMap { source, dist, hops }
    }

    /// `d_{G/A}(u, v)`; `+∞` when disconnected.
    pub fn node_distance(
        &self,
        zeroed: &ZeroedSet,
        u: NodeId,
        v: NodeId,
    ) -> Result<f64, GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Ok(0.0);
        }
        Ok(self.distances_from(Some(zeroed), v).dist[u])
    }

    /// Cheapest `u`–`v` path in `G/A`, endpoints included.
    ///
    /// Among cheapest paths the fewest-hop ones are preferred, and among those
    /// the lexicographically smallest node sequence.
    pub fn shortest_path(
        &self,
        zeroed: &ZeroedSet,
        u: NodeId,
        v: NodeId,
    ) -> Result<Vec<NodeId>, GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Ok(vec![u]);
        }
        let labels = self.distances_from(Some(zeroed), v);
        if !labels.dist[u].is_finite() {
            return Err(GraphError::NoPath(u, v));
        }
        let mut path = vec![u];
        let mut x = u;
        while x != v {
            let target = labels.dist[x];
            let tol = 1e-9 * target.abs().max(1.0);
            let next = self.adj[x]
                .iter()
                .filter(|&&(y, _)| labels.hops[y] != u32::MAX && labels.hops[y] + 1 == labels.hops[x])
                .filter(|&&(y, e)| {
                    let cost = if y == v {
                        self.edges[e].weight
                    } else {
                        labels.dist[y] + self.effective(Some(zeroed), y) + self.edges[e].weight
                    };
                    (cost - target).abs() <= tol
                })
                .map(|&(y, _)| y)
                .min()
                .expect("distance labels admit a descending neighbour");
            path.push(next);
            x = next;
        }
        Ok(path)
    }

    /// Sum of the weights of a path's interior nodes in `G/A`, plus edge weights.
    pub fn path_cost(&self, zeroed: &ZeroedSet, path: &[NodeId]) -> f64 {
        let interior: f64 = if path.len() > 2 {
            path[1..path.len() - 1]
                .iter()
                .map(|&x| self.effective(Some(zeroed), x))
                .sum()
        } else {
            0.0
        };
        let edges: f64 = path
            .windows(2)
            .map(|w| {
                self.adj[w[0]]
                    .iter()
                    .filter(|&&(y, _)| y == w[1])
                    .map(|&(_, e)| self.edges[e].weight)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        interior + edges
    }

    /// `B(u, r) = { v : d_G(u, v) + c_v ≤ r }`.
    pub fn open_ball(&self, u: NodeId, r: f64) -> Vec<NodeId> {
        self.distances_from(None, u).open_ball(self, r)
    }

    /// `bd B(u, r) = { v : d_G(u, v) ≤ r < d_G(u, v) + c_v }`.
    pub fn boundary_ball(&self, u: NodeId, r: f64) -> Vec<NodeId> {
        self.distances_from(None, u).boundary_ball(self, r)
    }

    /// `B̄(u, r) = B(u, r) ∪ bd B(u, r)`.
    pub fn closed_ball(&self, u: NodeId, r: f64) -> Vec<NodeId> {
        self.distances_from(None, u).closed_ball(r)
    }

    /// Whether `s` and `t` are connected in the subgraph induced by `allowed`.
    pub fn connected_within(&self, allowed: &ZeroedSet, s: NodeId, t: NodeId) -> bool {
        if !allowed.contains(s) || !allowed.contains(t) {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(x) = stack.pop() {
            if x == t {
                return true;
            }
            for y in self.neighbors(x) {
                if !seen[y] && allowed.contains(y) {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        false
    }
}

/// Number of nodes replacing an edge of weight `c > 0`.
pub fn subdivision_count(c: f64) -> usize {
    let paper = (8.0 / c + 1.0).ceil();
    let bound = (8.0 * c).ceil() + 1.0;
    paper.max(bound) as usize
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry {
    key: f64,
    hops: u32,
    node: NodeId,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Result of [`NodeWeightedGraph::distances_from`].
#[derive(Clone, Debug)]
pub struct DistanceMap {
    pub source: NodeId,
    pub dist: Vec<f64>,
    pub hops: Vec<u32>,
}

impl DistanceMap {
    pub fn open_ball(&self, g: &NodeWeightedGraph, r: f64) -> Vec<NodeId> {
        (0..self.dist.len())
            .filter(|&v| self.dist[v] + g.weight(v) <= r)
            .collect()
    }

    pub fn boundary_ball(&self, g: &NodeWeightedGraph, r: f64) -> Vec<NodeId> {
        (0..self.dist.len())
            .filter(|&v| self.dist[v] <= r && r < self.dist[v] + g.weight(v))
            .collect()
    }

    pub fn closed_ball(&self, r: f64) -> Vec<NodeId> {
        (0..self.dist.len()).filter(|&v| self.dist[v] <= r).collect()
    }
}

/// Set of nodes whose weight is treated as zero (the bought set in `G/A`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroedSet {
    members: Vec<bool>,
    count: usize,
}

impl ZeroedSet {
    pub fn empty(n: usize) -> Self {
        ZeroedSet { members: vec![false; n], count: 0 }
    }

    pub fn from_nodes(n: usize, nodes: impl IntoIterator<Item = NodeId>) -> Result<Self, GraphError> {
        let mut z = Self::empty(n);
        for v in nodes {
            if v >= n {
                return Err(GraphError::UnknownNode(v.to_string()));
            }
            z.insert(v);
        }
        Ok(z)
    }

    /// Returns `true` if `v` was newly inserted.
    pub fn insert(&mut self, v: NodeId) -> bool {
        if self.members[v] {
            false
        } else {
            self.members[v] = true;
            self.count += 1;
            true
        }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.get(v).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().enumerate().filter(|(_, &b)| b).map(|(v, _)| v)
    }
}
