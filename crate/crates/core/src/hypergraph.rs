//! Rule hypergraphs.
//!
//! The hypergraph of a rule has one vertex per rule variable and one
//! hyperedge per head atom and per body literal, spanning the variables of
//! that literal. Literals without variables contribute no hyperedge.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::ast::{Literal, Rule};

/// Which literal of the rule a hyperedge stems from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeOrigin {
    /// Index into the rule head.
    Head(usize),
    /// Index into the rule body.
    Body(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    pub origin: EdgeOrigin,
    /// Printable form of the originating literal, for diagnostics and dumps.
    pub label: String,
    pub vars: BTreeSet<String>,
}

/// A hypergraph over named vertices.
///
/// Built from rules by [`build_hypergraph`] or synthesized directly (the
/// decomposition machinery only looks at `vertices` and `edges`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Hypergraph {
    pub vertices: BTreeSet<String>,
    pub edges: Vec<Hyperedge>,
}

impl Hypergraph {
    /// True when there is nothing to decompose (no vertices).
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Graphviz rendering: variables as circles, hyperedges as boxes joined
    /// to the variables they span.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph hypergraph {\n");
        for v in &self.vertices {
            let _ = writeln!(out, "  \"{v}\" [shape=circle];");
        }
        for (i, e) in self.edges.iter().enumerate() {
            let _ = writeln!(out, "  \"e{i}\" [shape=box, label=\"{}\"];", e.label);
            for v in &e.vars {
                let _ = writeln!(out, "  \"e{i}\" -- \"{v}\";");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the hypergraph of a rule.
pub fn build_hypergraph(rule: &Rule) -> Hypergraph {
    let mut edges = Vec::new();
    for (i, atom) in rule.head.iter().enumerate() {
        let vars: BTreeSet<String> = atom.vars().into_iter().map(str::to_string).collect();
        if !vars.is_empty() {
            edges.push(Hyperedge {
                origin: EdgeOrigin::Head(i),
                label: atom.to_string(),
                vars,
            });
        }
    }
    for (i, lit) in rule.body.iter().enumerate() {
        let vars: BTreeSet<String> = lit.vars().into_iter().map(str::to_string).collect();
        if !vars.is_empty() {
            edges.push(Hyperedge {
                origin: EdgeOrigin::Body(i),
                label: match lit {
                    Literal::Atom { atom, naf: false } => atom.to_string(),
                    _ => lit.to_string(),
                },
                vars,
            });
        }
    }
    let vertices = rule.vars().into_iter().map(str::to_string).collect();
    Hypergraph { vertices, edges }
}
