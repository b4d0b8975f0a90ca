//! Seeded instance generators.
//!
//! Recipes:
//!
//! * `random-geometric`: points in the unit square joined when closer than
//!   `radius`, components stitched by their closest pair.
//! * `weighted-grid`: a `rows × cols` grid with random node weights.
//! * `star-cluster`: a weighted hub joined to `leaves` terminals that can only
//!   reach each other through it; requests go round the leaves in a cycle.
//! * `set-cover-gadget`: a root joined to weighted set nodes, each joined to
//!   the element terminals it contains; requests ask for root-element pairs.
//!
//! Terminals always weigh 0.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instance::{Instance, InstanceError};
use crate::graph::{NodeId, NodeWeightedGraph, ZeroedSet};

pub const RECIPES: [&str; 4] = ["random-geometric", "weighted-grid", "star-cluster", "set-cover-gadget"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("unknown recipe {0}")]
    UnknownRecipe(String),
    #[error("bad parameter {key}={value}")]
    BadParam { key: String, value: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Recipe knobs; unset fields take per-recipe defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub m: Option<u32>,
    pub k_tilde: Option<u32>,
    pub nodes: Option<usize>,
    pub radius: Option<f64>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub terminals: Option<usize>,
    pub pairs: Option<usize>,
    pub arrivals: Option<usize>,
    pub weighted_edges: Option<usize>,
    pub hub_weight: Option<f64>,
    pub leaves: Option<usize>,
    pub repeats: Option<usize>,
    pub sets: Option<usize>,
    pub elements: Option<usize>,
}

impl GenParams {
    /// Set a knob from `key=value` text.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), GenError> {
        let bad = || GenError::BadParam { key: key.into(), value: value.into() };
        let int = || value.parse::<usize>().map_err(|_| bad());
        let real = || value.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(bad);
        match key {
            "M" | "m" => self.m = Some(value.parse().map_err(|_| bad())?),
            "k_tilde" => self.k_tilde = Some(value.parse().map_err(|_| bad())?),
            "nodes" => self.nodes = Some(int()?),
            "radius" => self.radius = Some(real()?),
            "rows" => self.rows = Some(int()?),
            "cols" => self.cols = Some(int()?),
            "terminals" => self.terminals = Some(int()?),
            "pairs" => self.pairs = Some(int()?),
            "arrivals" => self.arrivals = Some(int()?),
            "weighted_edges" => self.weighted_edges = Some(int()?),
            "hub_weight" => self.hub_weight = Some(real()?),
            "leaves" => self.leaves = Some(int()?),
            "repeats" => self.repeats = Some(int()?),
            "sets" => self.sets = Some(int()?),
            "elements" => self.elements = Some(int()?),
            _ => return Err(bad()),
        }
        Ok(())
    }

    /// Parse a list of `key=value` strings.
    pub fn parse<'a>(items: impl IntoIterator<Item = &'a str>) -> Result<Self, GenError> {
        let mut p = GenParams::default();
        for item in items {
            let (k, v) = item.split_once('=').ok_or_else(|| GenError::BadParam { key: item.into(), value: String::new() })?;
            p.set(k.trim(), v.trim())?;
        }
        Ok(p)
    }
}

/// Build an instance of `recipe`.
pub fn gen_instance(recipe: &str, params: &GenParams, seed: u64) -> Result<Instance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (graph, requests) = match recipe {
        "random-geometric" => random_geometric(params, &mut rng)?,
        "weighted-grid" => weighted_grid(params, &mut rng)?,
        "star-cluster" => star_cluster(params)?,
        "set-cover-gadget" => set_cover_gadget(params, &mut rng)?,
        other => return Err(GenError::UnknownRecipe(other.into())),
    };
    let mut inst = Instance::new(format!("{recipe}-{seed}"), graph, requests, params.m.unwrap_or(2));
    inst.k_tilde = params.k_tilde;
    inst.recipe = Some(recipe.into());
    inst.seed = Some(seed);
    inst.validate()?;
    Ok(inst)
}

fn bad(key: &str, value: impl ToString) -> GenError {
    GenError::BadParam { key: key.into(), value: value.to_string() }
}

/// Weight in `{0.5, 0.75, …, 4}`, or 0 with probability 1/5.
fn node_weight(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.2) {
        0.0
    } else {
        rng.gen_range(2..=16) as f64 * 0.25
    }
}

/// Weights of weighted edges; each keeps its chain at 12 nodes or fewer.
fn edge_weight(rng: &mut ChaCha8Rng) -> f64 {
    [0.75, 1.0, 1.25][rng.gen_range(0..3)]
}

/// Pick `pairs` distinct pairs from `pool`, then a shuffled sequence of
/// `arrivals` requests containing each pair at least once with skewed repeats.
fn requests(
    pool: &[NodeId],
    pairs: usize,
    arrivals: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(NodeId, NodeId)>, GenError> {
    let mut all = Vec::new();
    for (i, &a) in pool.iter().enumerate() {
        for &b in &pool[i + 1..] {
            all.push((a, b));
        }
    }
    if pairs == 0 || pairs > all.len() {
        return Err(bad("pairs", pairs));
    }
    if arrivals < pairs {
        return Err(bad("arrivals", arrivals));
    }
    all.shuffle(rng);
    all.truncate(pairs);
    let mut seq = all.clone();
    for _ in pairs..arrivals {
        // Pair i is drawn with weight 1/(i+1).
        let total: f64 = (1..=pairs).map(|i| 1.0 / i as f64).sum();
        let mut x = rng.gen::<f64>() * total;
        let mut pick = pairs - 1;
        for i in 0..pairs {
            x -= 1.0 / (i + 1) as f64;
            if x <= 0.0 {
                pick = i;
                break;
            }
        }
        seq.push(all[pick]);
    }
    seq.shuffle(rng);
    Ok(seq)
}

fn pick_terminals(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<NodeId>, GenError> {
    if count < 2 || count > n {
        return Err(bad("terminals", count));
    }
    let mut ids: Vec<NodeId> = (0..n).collect();
    ids.shuffle(rng);
    ids.truncate(count);
    ids.sort_unstable();
    Ok(ids)
}

/// Give every non-terminal a random weight and mark `weighted_edges` edges.
fn finish_graph(
    n: usize,
    edges: &BTreeSet<(NodeId, NodeId)>,
    terminals: &[NodeId],
    weighted_edges: usize,
    rng: &mut ChaCha8Rng,
) -> Result<NodeWeightedGraph, GenError> {
    let mut g = NodeWeightedGraph::new();
    for v in 0..n {
        let w = if terminals.contains(&v) { 0.0 } else { node_weight(rng) };
        g.add_node(format!("v{v}"), w).map_err(InstanceError::from)?;
    }
    let mut list: Vec<_> = edges.iter().copied().collect();
    if weighted_edges > list.len() {
        return Err(bad("weighted_edges", weighted_edges));
    }
    let mut chosen: Vec<usize> = (0..list.len()).collect();
    chosen.shuffle(rng);
    chosen.truncate(weighted_edges);
    chosen.sort_unstable();
    for (i, (u, v)) in list.drain(..).enumerate() {
        let w = if chosen.binary_search(&i).is_ok() { edge_weight(rng) } else { 0.0 };
        g.add_edge(u, v, w).map_err(InstanceError::from)?;
    }
    Ok(g)
}

type Built = (NodeWeightedGraph, Vec<(NodeId, NodeId)>);

fn random_geometric(p: &GenParams, rng: &mut ChaCha8Rng) -> Result<Built, GenError> {
    let n = p.nodes.unwrap_or(10);
    let radius = p.radius.unwrap_or(0.45);
    if n < 2 {
        return Err(bad("nodes", n));
    }
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let d2 = |a: usize, b: usize| (pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2);
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            if d2(a, b) < radius * radius {
                edges.insert((a, b));
            }
        }
    }
    // Stitch components together through their closest pair of points.
    loop {
        let comp = components(n, &edges);
        if comp.iter().all(|&c| c == 0) {
            break;
        }
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..n {
            for b in 0..n {
                if comp[a] == 0 && comp[b] != 0 && d2(a, b) < best.0 {
                    best = (d2(a, b), a.min(b), a.max(b));
                }
            }
        }
        edges.insert((best.1, best.2));
    }
    let terminals = pick_terminals(n, p.terminals.unwrap_or((n / 2).min(5)), rng)?;
    let g = finish_graph(n, &edges, &terminals, p.weighted_edges.unwrap_or(1), rng)?;
    let pairs = p.pairs.unwrap_or(4);
    let req = requests(&terminals, pairs, p.arrivals.unwrap_or(4 * pairs), rng)?;
    Ok((g, req))
}

fn components(n: usize, edges: &BTreeSet<(NodeId, NodeId)>) -> Vec<usize> {
    let mut comp: Vec<usize> = (0..n).collect();
    fn root(c: &mut [usize], mut x: usize) -> usize {
        while c[x] != x {
            c[x] = c[c[x]];
            x = c[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (root(&mut comp, a), root(&mut comp, b));
        comp[ra.max(rb)] = ra.min(rb);
    }
    (0..n).map(|x| root(&mut comp, x)).collect()
}

fn weighted_grid(p: &GenParams, rng: &mut ChaCha8Rng) -> Result<Built, GenError> {
    let rows = p.rows.unwrap_or(3);
    let cols = p.cols.unwrap_or(3);
    let n = rows * cols;
    if n < 2 {
        return Err(bad("rows", rows));
    }
    let mut edges = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.insert((v, v + 1));
            }
            if r + 1 < rows {
                edges.insert((v, v + cols));
            }
        }
    }
    let terminals = pick_terminals(n, p.terminals.unwrap_or(n.min(4)), rng)?;
    let g = finish_graph(n, &edges, &terminals, p.weighted_edges.unwrap_or(0), rng)?;
    let max_pairs = terminals.len() * (terminals.len() - 1) / 2;
    let pairs = p.pairs.unwrap_or(max_pairs.min(4));
    let req = requests(&terminals, pairs, p.arrivals.unwrap_or(4 * pairs), rng)?;
    Ok((g, req))
}

fn star_cluster(p: &GenParams) -> Result<Built, GenError> {
    let leaves = p.leaves.unwrap_or(6);
    let hub_weight = p.hub_weight.unwrap_or(8.0);
    let repeats = p.repeats.unwrap_or(1);
    if leaves < 2 {
        return Err(bad("leaves", leaves));
    }
    if repeats < 1 {
        return Err(bad("repeats", repeats));
    }
    let mut g = NodeWeightedGraph::new();
    let hub = g.add_node("hub", hub_weight).map_err(InstanceError::from)?;
    let ids: Vec<NodeId> = (0..leaves)
        .map(|i| g.add_node(format!("leaf{i}"), 0.0).map_err(InstanceError::from))
        .collect::<Result<_, _>>()?;
    for &l in &ids {
        g.add_edge(hub, l, 0.0).map_err(InstanceError::from)?;
    }
    let cycle: Vec<(NodeId, NodeId)> = if leaves == 2 {
        vec![(ids[0], ids[1])]
    } else {
        (0..leaves).map(|i| (ids[i], ids[(i + 1) % leaves])).collect()
    };
    let mut req = Vec::new();
    for _ in 0..repeats {
        req.extend(&cycle);
    }
    Ok((g, req))
}

fn set_cover_gadget(p: &GenParams, rng: &mut ChaCha8Rng) -> Result<Built, GenError> {
    let sets = p.sets.unwrap_or(5);
    let elements = p.elements.unwrap_or(4);
    if sets < 1 {
        return Err(bad("sets", sets));
    }
    if elements < 1 {
        return Err(bad("elements", elements));
    }
    let mut g = NodeWeightedGraph::new();
    let root = g.add_node("root", 0.0).map_err(InstanceError::from)?;
    let set_ids: Vec<NodeId> = (0..sets)
        .map(|i| g.add_node(format!("set{i}"), rng.gen_range(2..=16) as f64 * 0.25).map_err(InstanceError::from))
        .collect::<Result<_, _>>()?;
    let elem_ids: Vec<NodeId> = (0..elements)
        .map(|i| g.add_node(format!("elem{i}"), 0.0).map_err(InstanceError::from))
        .collect::<Result<_, _>>()?;
    for &s in &set_ids {
        g.add_edge(root, s, 0.0).map_err(InstanceError::from)?;
    }
    for &e in &elem_ids {
        let mut members: Vec<NodeId> = set_ids.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        if members.is_empty() {
            members.push(set_ids[rng.gen_range(0..sets)]);
        }
        for s in members {
            g.add_edge(s, e, 0.0).map_err(InstanceError::from)?;
        }
    }
    let pool: Vec<(NodeId, NodeId)> = elem_ids.iter().map(|&e| (root, e)).collect();
    let arrivals = p.arrivals.unwrap_or(3 * elements);
    if arrivals < elements {
        return Err(bad("arrivals", arrivals));
    }
    let mut req = pool.clone();
    for _ in elements..arrivals {
        // Low-index elements recur more often.
        let i = rng.gen_range(0..elements);
        let j = rng.gen_range(0..=i);
        req.push(pool[j]);
    }
    req.shuffle(rng);
    Ok((g, req))
}

/// Limits every corpus instance satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLimits {
    pub max_nodes_subdivided: usize,
    pub max_n_bar: usize,
    pub max_units: usize,
    pub max_pairs: usize,
    pub max_arrivals: usize,
}

pub const CORPUS_LIMITS: CorpusLimits =
    CorpusLimits { max_nodes_subdivided: 60, max_n_bar: 12, max_units: 12, max_pairs: 8, max_arrivals: 64 };

impl CorpusLimits {
    pub fn admits(&self, inst: &Instance) -> bool {
        let Ok(sub) = inst.graph.subdivide_edges() else {
            return false;
        };
        sub.len() <= self.max_nodes_subdivided
            && inst.n_bar() <= self.max_n_bar
            && inst.n_bar() + inst.weighted_edges() <= self.max_units
            && inst.distinct_pairs().len() <= self.max_pairs
            && inst.requests.len() <= self.max_arrivals
    }
}

/// `count` instances cycling through the recipes, with `M` cycling through
/// 1, 2, 4, 8 and sizes drawn within [`CORPUS_LIMITS`]. Every request pair is
/// at positive distance.
pub fn acceptance_corpus(count: usize, seed: u64) -> Vec<Instance> {
    let ms = [1, 2, 4, 8];
    (0..count)
        .map(|i| {
            let recipe = RECIPES[i % RECIPES.len()];
            let m = ms[(i / RECIPES.len()) % ms.len()];
            let mut attempt = 0u64;
            loop {
                let s = seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add((i as u64) << 16 | attempt);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let params = corpus_params(recipe, m, &mut rng);
                if let Ok(mut inst) = gen_instance(recipe, &params, s) {
                    if CORPUS_LIMITS.admits(&inst) && all_pairs_cost_something(&inst) {
                        inst.name = format!("corpus-{i:03}-{recipe}");
                        return inst;
                    }
                }
                attempt += 1;
            }
        })
        .collect()
}

/// Pairs at distance 0 are served for free by everyone, so the corpus skips them.
fn all_pairs_cost_something(inst: &Instance) -> bool {
    let none = ZeroedSet::empty(inst.graph.len());
    inst.distinct_pairs()
        .iter()
        .all(|&(s, t)| inst.graph.node_distance(&none, s, t).is_ok_and(|d| d > 0.0))
}

fn corpus_params(recipe: &str, m: u32, rng: &mut ChaCha8Rng) -> GenParams {
    let mut p = GenParams { m: Some(m), ..GenParams::default() };
    match recipe {
        "random-geometric" => {
            let n = rng.gen_range(6..=12);
            let t = rng.gen_range(3..=(n / 2).clamp(3, 6));
            p.nodes = Some(n);
            p.radius = Some(rng.gen_range(0.3..0.55));
            p.terminals = Some(t);
            p.pairs = Some(rng.gen_range(1..=(t * (t - 1) / 2).min(8)));
            p.arrivals = Some(rng.gen_range(p.pairs.unwrap()..=40));
            p.weighted_edges = Some(rng.gen_range(0..=2));
        }
        "weighted-grid" => {
            let rows = rng.gen_range(2..=3);
            let cols = rng.gen_range(2..=4);
            let t = rng.gen_range(3..=5.min(rows * cols));
            p.rows = Some(rows);
            p.cols = Some(cols);
            p.terminals = Some(t);
            p.pairs = Some(rng.gen_range(1..=(t * (t - 1) / 2).min(8)));
            p.arrivals = Some(rng.gen_range(p.pairs.unwrap()..=40));
            p.weighted_edges = Some(rng.gen_range(0..=2));
        }
        "star-cluster" => {
            p.leaves = Some(rng.gen_range(3..=8));
            p.hub_weight = Some([2.0, 4.0, 8.0][rng.gen_range(0..3)]);
            p.repeats = Some(rng.gen_range(1..=3));
        }
        _ => {
            p.sets = Some(rng.gen_range(3..=8));
            p.elements = Some(rng.gen_range(2..=6));
            p.arrivals = Some(rng.gen_range(p.elements.unwrap()..=30));
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::oracle::offline_opt;

    #[test]
    fn same_seed_same_instance() {
        for recipe in RECIPES {
            let a = gen_instance(recipe, &GenParams::default(), 7).unwrap();
            let b = gen_instance(recipe, &GenParams::default(), 7).unwrap();
            assert_eq!(a.to_text(), b.to_text(), "{recipe}");
        }
        let a = gen_instance("random-geometric", &GenParams::default(), 1).unwrap();
        let b = gen_instance("random-geometric", &GenParams::default(), 2).unwrap();
        assert_ne!(a.to_text(), b.to_text());
    }

    #[test]
    fn grid_two_by_two_has_four_nodes() {
        let p = GenParams::parse(["rows=2", "cols=2"]).unwrap();
        let inst = gen_instance("weighted-grid", &p, 3).unwrap();
        assert_eq!(inst.graph.len(), 4);
        assert_eq!(inst.graph.edges().len(), 4);
    }

    #[test]
    fn star_cluster_hub_beats_rents_for_small_m() {
        for m in 1..=10u32 {
            let p = GenParams { m: Some(m), ..GenParams::default() };
            let inst = gen_instance("star-cluster", &p, 0).unwrap();
            assert_eq!(inst.n_bar(), 1);
            let opt = offline_opt(&inst).unwrap();
            assert_eq!(opt.cost, 8.0 * m.min(6) as f64);
            assert_eq!(opt.bought_nodes.len() == 1, m < 6);
        }
    }

    #[test]
    fn unknown_recipe_and_params() {
        assert_eq!(
            gen_instance("nope", &GenParams::default(), 0).unwrap_err(),
            GenError::UnknownRecipe("nope".into())
        );
        assert!(GenParams::parse(["colour=red"]).is_err());
        assert!(GenParams::parse(["rows"]).is_err());
        let p = GenParams::parse(["pairs=99"]).unwrap();
        assert!(gen_instance("weighted-grid", &p, 0).is_err());
    }

    #[test]
    fn terminals_weigh_nothing() {
        for recipe in RECIPES {
            for seed in 0..20 {
                let inst = gen_instance(recipe, &GenParams::default(), seed).unwrap();
                for v in inst.terminals() {
                    assert_eq!(inst.graph.weight(v), 0.0);
                }
            }
        }
    }

    #[test]
    fn corpus_respects_limits() {
        let corpus = acceptance_corpus(40, 11);
        assert_eq!(corpus.len(), 40);
        for (i, inst) in corpus.iter().enumerate() {
            assert!(CORPUS_LIMITS.admits(inst), "{}", inst.name);
            assert_eq!(inst.m, [1, 2, 4, 8][(i / 4) % 4]);
            assert_eq!(inst.recipe.as_deref(), Some(RECIPES[i % 4]));
        }
        let again = acceptance_corpus(40, 11);
        assert!(corpus.iter().zip(&again).all(|(a, b)| a.to_text() == b.to_text()));
    }
}
