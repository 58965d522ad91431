//! Tree decompositions of hypergraphs via bucket elimination.
//!
//! A tree decomposition assigns every vertex and every hyperedge to at least
//! one bag, keeps the bags containing any fixed vertex connected, and
//! arranges the bags in a tree. Width is the largest bag size minus one.
//!
//! Decompositions come from bucket elimination over the primal graph under
//! one of two ordering heuristics, with a seed-selected choice among tied
//! vertices so different seeds explore different orderings. Bags that are
//! subsets of a neighboring bag are merged away afterwards.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::hypergraph::Hypergraph;

/// Vertex ordering heuristic for bucket elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    /// Eliminate the vertex whose neighborhood needs the fewest fill edges.
    MinFill,
    /// Eliminate the vertex of smallest current degree.
    MinDegree,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<String>>,
    /// Undirected tree edges between bag indices.
    pub edges: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    /// Largest bag size minus one; zero for a decomposition of single bags.
    pub fn width(&self) -> usize {
        self.bags
            .iter()
            .map(BTreeSet::len)
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    pub fn total_bag_size(&self) -> usize {
        self.bags.iter().map(BTreeSet::len).sum()
    }

    pub fn neighbors(&self, bag: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == bag {
                    Some(b)
                } else if b == bag {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Graphviz rendering with one box per bag.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph tree_decomposition {\n");
        for (i, bag) in self.bags.iter().enumerate() {
            let label: Vec<&str> = bag.iter().map(String::as_str).collect();
            let _ = writeln!(
                out,
                "  \"b{i}\" [shape=box, label=\"{{{}}}\"];",
                label.join(",")
            );
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  \"b{a}\" -- \"b{b}\";");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("hypergraph has no vertices, nothing to decompose")]
pub struct EmptyHypergraphError;

/// A violated tree-decomposition property, with a witness.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("vertex {vertex} appears in no bag")]
    UncoveredVertex { vertex: String },
    #[error("hyperedge {label} is contained in no bag")]
    UncoveredEdge { label: String },
    #[error("bags containing {vertex} do not form a connected subtree: {bags:?}")]
    DisconnectedVertex { vertex: String, bags: Vec<usize> },
    #[error("bag graph is not a tree: {detail}")]
    NotATree { detail: String },
}

/// Decomposes a hypergraph by bucket elimination.
///
/// The seed breaks score ties: at every elimination step the tied vertices
/// are sorted and the one at `seed % count` is taken. The same hypergraph,
/// heuristic and seed always give the same decomposition.
pub fn decompose(
    hg: &Hypergraph,
    heuristic: Heuristic,
    seed: u64,
) -> Result<TreeDecomposition, EmptyHypergraphError> {
    if hg.is_empty() {
        return Err(EmptyHypergraphError);
    }
    let vertices: Vec<&String> = hg.vertices.iter().collect();
    let index: BTreeMap<&str, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    let n = vertices.len();

    // Primal graph: vertices adjacent iff they share a hyperedge.
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for edge in &hg.edges {
        let ids: Vec<usize> = edge
            .vars
            .iter()
            .filter_map(|v| index.get(v.as_str()).copied())
            .collect();
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                if a != b {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
    }

    let mut remaining: BTreeSet<usize> = (0..n).collect();
    // One bag per eliminated vertex, in elimination order.
    let mut bags: Vec<BTreeSet<usize>> = Vec::with_capacity(n);
    let mut position: Vec<usize> = vec![usize::MAX; n];

    while !remaining.is_empty() {
        let score = |v: usize| -> usize {
            let neigh: Vec<usize> = adj[v].iter().copied().collect();
            match heuristic {
                Heuristic::MinDegree => neigh.len(),
                Heuristic::MinFill => {
                    let mut fill = 0;
                    for (k, &a) in neigh.iter().enumerate() {
                        for &b in &neigh[k + 1..] {
                            if !adj[a].contains(&b) {
                                fill += 1;
                            }
                        }
                    }
                    fill
                }
            }
        };
        let best = remaining.iter().map(|&v| score(v)).min().expect("nonempty");
        // `remaining` iterates in index order, which is lexicographic vertex
        // order, so the tied list is already sorted.
        let tied: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&v| score(v) == best)
            .collect();
        let chosen = tied[(seed as usize) % tied.len()];

        let neigh: Vec<usize> = adj[chosen].iter().copied().collect();
        let mut bag: BTreeSet<usize> = neigh.iter().copied().collect();
        bag.insert(chosen);
        for (k, &a) in neigh.iter().enumerate() {
            for &b in &neigh[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &a in &neigh {
            adj[a].remove(&chosen);
        }
        adj[chosen].clear();
        position[chosen] = bags.len();
        bags.push(bag);
        remaining.remove(&chosen);
    }

    // Connect each bag to the bag of its earliest-eliminated other member;
    // bags with no other member are component roots and get chained so the
    // result is one tree even for a disconnected hypergraph.
    let mut edges = Vec::new();
    let mut roots = Vec::new();
    for (i, bag) in bags.iter().enumerate() {
        let parent = bag
            .iter()
            .filter(|&&v| position[v] != i)
            .map(|&v| position[v])
            .min();
        match parent {
            Some(p) => edges.push((i, p)),
            None => roots.push(i),
        }
    }
    for pair in roots.windows(2) {
        edges.push((pair[0], pair[1]));
    }

    let named: Vec<BTreeSet<String>> = bags
        .into_iter()
        .map(|bag| bag.into_iter().map(|v| vertices[v].clone()).collect())
        .collect();
    Ok(reduce_redundant_bags(named, edges))
}

/// Merges every bag that is a subset of a neighboring bag into that
/// neighbor, repeating to fixpoint.
fn reduce_redundant_bags(
    bags: Vec<BTreeSet<String>>,
    edges: Vec<(usize, usize)>,
) -> TreeDecomposition {
    let n = bags.len();
    let mut alive = vec![true; n];
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in &edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }

    loop {
        let mut merged = None;
        'scan: for i in 0..n {
            if !alive[i] {
                continue;
            }
            for &j in &adj[i] {
                if bags[i].is_subset(&bags[j]) {
                    merged = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((i, j)) = merged else { break };
        let others: Vec<usize> = adj[i].iter().copied().filter(|&k| k != j).collect();
        for k in others {
            adj[k].remove(&i);
            adj[k].insert(j);
            adj[j].insert(k);
        }
        adj[j].remove(&i);
        adj[i].clear();
        alive[i] = false;
    }

    let mut renumber = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for (i, bag) in bags.into_iter().enumerate() {
        if alive[i] {
            renumber[i] = kept.len();
            kept.push(bag);
        }
    }
    let mut new_edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        if alive[i] {
            for &j in &adj[i] {
                if i < j {
                    new_edges.push((renumber[i], renumber[j]));
                }
            }
        }
    }
    new_edges.sort_unstable();
    TreeDecomposition {
        bags: kept,
        edges: new_edges,
    }
}

/// Checks all four decomposition properties, returning the first violation.
///
/// Order of checks: tree shape, vertex coverage, edge coverage, vertex
/// connectedness.
pub fn validate_decomposition(hg: &Hypergraph, td: &TreeDecomposition) -> Result<(), Violation> {
    let nbags = td.bags.len();
    if nbags == 0 {
        if hg.is_empty() {
            return Ok(());
        }
        return Err(Violation::NotATree {
            detail: "no bags".into(),
        });
    }
    for &(a, b) in &td.edges {
        if a >= nbags || b >= nbags {
            return Err(Violation::NotATree {
                detail: format!("edge ({a},{b}) references a missing bag"),
            });
        }
        if a == b {
            return Err(Violation::NotATree {
                detail: format!("self-loop at bag {a}"),
            });
        }
    }
    if td.edges.len() != nbags - 1 {
        return Err(Violation::NotATree {
            detail: format!("{nbags} bags need {} edges, found {}", nbags - 1, td.edges.len()),
        });
    }
    let reached = reachable_from(0, nbags, &td.edges, |_| true);
    if let Some(missing) = (0..nbags).find(|b| !reached[*b]) {
        return Err(Violation::NotATree {
            detail: format!("bag {missing} is unreachable from bag 0"),
        });
    }

    for v in &hg.vertices {
        if !td.bags.iter().any(|bag| bag.contains(v)) {
            return Err(Violation::UncoveredVertex { vertex: v.clone() });
        }
    }
    for edge in &hg.edges {
        if !td.bags.iter().any(|bag| edge.vars.is_subset(bag)) {
            return Err(Violation::UncoveredEdge {
                label: edge.label.clone(),
            });
        }
    }

    for v in &hg.vertices {
        let holders: Vec<usize> = (0..nbags).filter(|&b| td.bags[b].contains(v)).collect();
        let reached = reachable_from(holders[0], nbags, &td.edges, |b| td.bags[b].contains(v));
        if holders.iter().any(|&b| !reached[b]) {
            return Err(Violation::DisconnectedVertex {
                vertex: v.clone(),
                bags: holders,
            });
        }
    }
    Ok(())
}

/// BFS over bag edges restricted to bags passing `keep`.
fn reachable_from(
    start: usize,
    nbags: usize,
    edges: &[(usize, usize)],
    keep: impl Fn(usize) -> bool,
) -> Vec<bool> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nbags];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; nbags];
    let mut queue = VecDeque::new();
    if keep(start) {
        seen[start] = true;
        queue.push_back(start);
    }
    while let Some(b) = queue.pop_front() {
        for &next in &adj[b] {
            if !seen[next] && keep(next) {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    seen
}

/// How decomposition candidates are generated and ranked.
#[derive(Debug, Clone)]
pub struct SelectionConfig {
    pub seed: u64,
    /// Candidates drawn per heuristic with seeds `seed`, `seed+1`, ...
    pub candidates_per_heuristic: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            seed: 0,
            candidates_per_heuristic: 4,
        }
    }
}

/// Generates candidates under both heuristics and keeps the best one:
/// smallest width, then smallest total bag size, then earliest candidate
/// (min-fill candidates before min-degree ones).
pub fn select_decomposition(
    hg: &Hypergraph,
    cfg: &SelectionConfig,
) -> Result<TreeDecomposition, EmptyHypergraphError> {
    let mut best: Option<(usize, usize, TreeDecomposition)> = None;
    for heuristic in [Heuristic::MinFill, Heuristic::MinDegree] {
        for i in 0..cfg.candidates_per_heuristic {
            let td = decompose(hg, heuristic, cfg.seed.wrapping_add(i as u64))?;
            let key = (td.width(), td.total_bag_size());
            if best.as_ref().is_none_or(|(w, t, _)| key < (*w, *t)) {
                best = Some((key.0, key.1, td));
            }
        }
    }
    Ok(best.expect("at least one candidate").2)
}
