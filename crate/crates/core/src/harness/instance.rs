//! Problem instances and their text format.
//!
//! ```text
//! # comments start with '#'
//! NODES
//! s 0
//! a 1.5
//! t 0
//! EDGES
//! s a 0
//! a t 0.75
//! REQUESTS
//! s t
//! s t
//! PARAMS
//! M 4
//! k_tilde 1
//! ```
//!
//! Section headers are case-insensitive. `PARAMS` accepts `M`, `k_tilde`,
//! `name`, `recipe` and `seed`. Node ids are arbitrary tokens without
//! whitespace or `#`; edge weights default to 0 when omitted.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, NodeWeightedGraph, ZeroedSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    /// Graph before edge subdivision.
    pub graph: NodeWeightedGraph,
    pub requests: Vec<(NodeId, NodeId)>,
    pub m: u32,
    pub k_tilde: Option<u32>,
    pub recipe: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Nodes,
    Edges,
    Requests,
    Params,
}

impl Instance {
    pub fn new(name: impl Into<String>, graph: NodeWeightedGraph, requests: Vec<(NodeId, NodeId)>, m: u32) -> Self {
        Instance { name: name.into(), graph, requests, m, k_tilde: None, recipe: None, seed: None }
    }

    pub fn parse(text: &str) -> Result<Instance, InstanceError> {
        let mut graph = NodeWeightedGraph::new();
        let mut requests = Vec::new();
        let mut m = None;
        let mut k_tilde = None;
        let mut name = None;
        let mut recipe = None;
        let mut seed = None;
        let mut section = Section::None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| InstanceError::Parse { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() == 1 {
                let header = match fields[0].to_ascii_uppercase().as_str() {
                    "NODES" => Some(Section::Nodes),
                    "EDGES" => Some(Section::Edges),
                    "REQUESTS" => Some(Section::Requests),
                    "PARAMS" => Some(Section::Params),
                    _ => None,
                };
                if let Some(h) = header {
                    section = h;
                    continue;
                }
            }
            let number = |s: &str| s.parse::<f64>().map_err(|_| err(format!("not a number: {s}")));
            match section {
                Section::None => return Err(err("data before the first section header".into())),
                Section::Nodes => {
                    let [id, w] = fields[..] else {
                        return Err(err("expected `id weight`".into()));
                    };
                    graph.add_node(id, number(w)?).map_err(|e| err(e.to_string()))?;
                }
                Section::Edges => {
                    let (u, v, w) = match fields[..] {
                        [u, v] => (u, v, 0.0),
                        [u, v, w] => (u, v, number(w)?),
                        _ => return Err(err("expected `u v [weight]`".into())),
                    };
                    graph.add_edge_by_name(u, v, w).map_err(|e| err(e.to_string()))?;
                }
                Section::Requests => {
                    let [s, t] = fields[..] else {
                        return Err(err("expected `s t`".into()));
                    };
                    let s = graph.node(s).map_err(|e| err(e.to_string()))?;
                    let t = graph.node(t).map_err(|e| err(e.to_string()))?;
                    requests.push((s, t));
                }
                Section::Params => {
                    let [key, value] = fields[..] else {
                        return Err(err("expected `key value`".into()));
                    };
                    let int = |v: &str| v.parse::<u64>().map_err(|_| err(format!("not an integer: {v}")));
                    match key {
                        "M" | "m" => m = Some(int(value)? as u32),
                        "k_tilde" => k_tilde = Some(int(value)? as u32),
                        "seed" => seed = Some(int(value)?),
                        "name" => name = Some(value.to_string()),
                        "recipe" => recipe = Some(value.to_string()),
                        other => return Err(err(format!("unknown parameter {other}"))),
                    }
                }
            }
        }
        let inst = Instance {
            name: name.unwrap_or_else(|| "instance".into()),
            graph,
            requests,
            m: m.ok_or_else(|| InstanceError::Invalid("missing parameter M".into()))?,
            k_tilde,
            recipe,
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_text(&self) -> String {
        let g = &self.graph;
        let mut out = String::new();
        out.push_str("NODES\n");
        for v in 0..g.len() {
            let _ = writeln!(out, "{} {}", g.name(v), g.weight(v));
        }
        out.push_str("EDGES\n");
        for e in g.edges() {
            let _ = writeln!(out, "{} {} {}", g.name(e.u), g.name(e.v), e.weight);
        }
        out.push_str("REQUESTS\n");
        for &(s, t) in &self.requests {
            let _ = writeln!(out, "{} {}", g.name(s), g.name(t));
        }
        out.push_str("PARAMS\n");
        let _ = writeln!(out, "name {}", self.name);
        let _ = writeln!(out, "M {}", self.m);
        if let Some(k) = self.k_tilde {
            let _ = writeln!(out, "k_tilde {k}");
        }
        if let Some(r) = &self.recipe {
            let _ = writeln!(out, "recipe {r}");
        }
        if let Some(s) = self.seed {
            let _ = writeln!(out, "seed {s}");
        }
        out
    }

    /// Terminals must weigh 0, request pairs must be connected, `M ≥ 1`, and
    /// `k_tilde` (when given) must cover the distinct pairs.
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.m < 1 {
            return Err(InstanceError::Invalid("M must be at least 1".into()));
        }
        if self.graph.is_subdivided() {
            return Err(InstanceError::Invalid("instance graphs are stored before subdivision".into()));
        }
        for v in self.terminals() {
            if self.graph.weight(v) != 0.0 {
                return Err(InstanceError::Invalid(format!(
                    "terminal {} has nonzero weight {}",
                    self.graph.name(v),
                    self.graph.weight(v)
                )));
            }
        }
        let none = ZeroedSet::empty(self.graph.len());
        for (s, t) in self.distinct_pairs() {
            if !self.graph.node_distance(&none, s, t)?.is_finite() {
                return Err(InstanceError::Invalid(format!(
                    "request {} {} is disconnected",
                    self.graph.name(s),
                    self.graph.name(t)
                )));
            }
        }
        if let Some(k) = self.k_tilde {
            let pairs = self.distinct_pairs().len() as u32;
            if k < pairs.max(1) {
                return Err(InstanceError::Invalid(format!("k_tilde {k} is below the {pairs} distinct pairs")));
            }
        }
        Ok(())
    }

    /// Distinct unordered pairs in order of first appearance.
    pub fn distinct_pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &(s, t) in &self.requests {
            let key = (s.min(t), s.max(t));
            if seen.insert(key) {
                out.push(key);
            }
        }
        out
    }

    /// Sorted, deduplicated request endpoints.
    pub fn terminals(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = self.requests.iter().flat_map(|&(s, t)| [s, t]).collect();
        set.into_iter().collect()
    }

    /// Configured `k̃`, or the number of distinct pairs.
    pub fn k_tilde_or_default(&self) -> u32 {
        self.k_tilde.unwrap_or(self.distinct_pairs().len() as u32).max(1)
    }

    /// Original nodes of nonzero weight.
    pub fn n_bar(&self) -> usize {
        self.graph.weighted_original_nodes().len()
    }

    pub fn weighted_edges(&self) -> usize {
        self.graph.edges().iter().filter(|e| e.weight > 0.0).count()
    }

    /// Node ids listed by name in `text` (whitespace separated, `#` comments).
    pub fn parse_node_list(&self, text: &str) -> Result<Vec<NodeId>, InstanceError> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("");
            for tok in content.split_whitespace() {
                let v = self.graph.node(tok).map_err(|e| InstanceError::Parse { line: i + 1, message: e.to_string() })?;
                out.push(v);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SKI: &str = "\
# ski rental
NODES
s 0
a 1
t 0
EDGES
s a
a t 0
REQUESTS
s t   # first
s t
PARAMS
M 4
k_tilde 1
name ski
";

    #[test]
    fn parses_all_sections() {
        let inst = Instance::parse(SKI).unwrap();
        assert_eq!(inst.graph.len(), 3);
        assert_eq!(inst.graph.edges().len(), 2);
        assert_eq!(inst.requests, vec![(0, 2), (0, 2)]);
        assert_eq!((inst.m, inst.k_tilde), (4, Some(1)));
        assert_eq!(inst.name, "ski");
        assert_eq!(inst.distinct_pairs(), vec![(0, 2)]);
        assert_eq!(inst.terminals(), vec![0, 2]);
        assert_eq!(inst.n_bar(), 1);
    }

    #[test]
    fn text_round_trip() {
        let inst = Instance::parse(SKI).unwrap();
        let again = Instance::parse(&inst.to_text()).unwrap();
        assert_eq!(again.to_text(), inst.to_text());
        assert_eq!(again.requests, inst.requests);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = SKI.replace("a 1\n", "a one\n");
        match Instance::parse(&bad) {
            Err(InstanceError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Instance::parse("s 0\n"), Err(InstanceError::Parse { line: 1, .. })));
        let unknown = SKI.replace("s t   # first", "s q");
        assert!(matches!(Instance::parse(&unknown), Err(InstanceError::Parse { line: 10, .. })));
    }

    #[test]
    fn rejects_weighted_terminals_and_missing_m() {
        let heavy = SKI.replace("s 0", "s 2");
        assert!(matches!(Instance::parse(&heavy), Err(InstanceError::Invalid(_))));
        let no_m = SKI.replace("M 4\n", "");
        assert!(matches!(Instance::parse(&no_m), Err(InstanceError::Invalid(_))));
        let small_k = SKI.replace("REQUESTS\n", "REQUESTS\na s\n").replace("a 1\n", "a 0\n");
        assert!(matches!(Instance::parse(&small_k), Err(InstanceError::Invalid(_))));
    }

    #[test]
    fn rejects_disconnected_requests() {
        let text = "NODES\nu 0\nv 0\nREQUESTS\nu v\nPARAMS\nM 1\n";
        assert!(matches!(Instance::parse(text), Err(InstanceError::Invalid(_))));
    }

    #[test]
    fn node_lists() {
        let inst = Instance::parse(SKI).unwrap();
        assert_eq!(inst.parse_node_list("s t # terminals\n").unwrap(), vec![0, 2]);
        assert!(inst.parse_node_list("zz").is_err());
    }
}
