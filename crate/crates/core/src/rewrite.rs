//! Rewriting a long rule into an equivalent set of shorter rules.
//!
//! Given a tree decomposition of the rule's hypergraph, the rule is split
//! along the tree: every node yields one rule. The node covering the head
//! becomes the root and keeps the original head; every other node derives a
//! fresh linking predicate over the variables its bag shares with its
//! parent's bag. Body literals move to the deepest node whose bag covers
//! their variables. Rules left unsafe by the split (a head or comparison
//! variable without a binding occurrence) are repaired with binding literals
//! taken from the original body, either through an auxiliary rule or by
//! inlining them.

use std::collections::BTreeSet;

use crate::ast::{Atom, Literal, Program, Rule, Term};
use crate::decomp::{select_decomposition, SelectionConfig, TreeDecomposition};
use crate::hypergraph::build_hypergraph;
use crate::parser::RESERVED_PREDICATE_PREFIX;

/// How rules left unsafe by the split are repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SafetyRepair {
    /// Derive the unsafe variables through a fresh auxiliary predicate whose
    /// rule carries the binding literals (singleton variables anonymized).
    #[default]
    Auxiliary,
    /// Append the binding literals directly to the unsafe rule.
    Inline,
}

/// Allocator for reserved predicate names, `fresh_pred_1`, `fresh_pred_2`, ...
///
/// One allocator spans a whole program rewrite so names never collide.
#[derive(Debug)]
pub struct FreshNames {
    next: u64,
}

impl FreshNames {
    #[allow(clippy::new_without_default)]
    pub fn new() -> FreshNames {
        FreshNames { next: 1 }
    }

    fn next_name(&mut self) -> String {
        let n = self.next;
        self.next += 1;
        format!("{RESERVED_PREDICATE_PREFIX}{n}")
    }
}

/// The rewrite of one rule: the replacement rules in emission order (root
/// rule first) and the decomposition they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleDecomposition {
    pub rules: Vec<Rule>,
    pub decomposition: TreeDecomposition,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("no bag covers the head variables of: {rule}")]
    HeadNotCovered { rule: String },
    #[error("variable {variable} has no binding literal to repair safety in: {rule}")]
    Unrepairable { variable: String, rule: String },
}

/// Splits one rule along a tree decomposition of its hypergraph.
pub fn decompose_rule(
    rule: &Rule,
    td: &TreeDecomposition,
    repair: SafetyRepair,
    fresh: &mut FreshNames,
) -> Result<RuleDecomposition, RewriteError> {
    let head_vars: BTreeSet<&str> = rule.head.iter().flat_map(Atom::vars).collect();
    let root = td
        .bags
        .iter()
        .position(|bag| head_vars.iter().all(|v| bag.contains(*v)))
        .ok_or_else(|| RewriteError::HeadNotCovered {
            rule: rule.to_string(),
        })?;

    // Breadth-first traversal from the root; children in bag-index order.
    let mut order = vec![root];
    let mut parent = vec![usize::MAX; td.bags.len()];
    let mut depth = vec![0usize; td.bags.len()];
    let mut seen = vec![false; td.bags.len()];
    seen[root] = true;
    let mut cursor = 0;
    while cursor < order.len() {
        let node = order[cursor];
        cursor += 1;
        for next in td.neighbors(node) {
            if !seen[next] {
                seen[next] = true;
                parent[next] = node;
                depth[next] = depth[node] + 1;
                order.push(next);
            }
        }
    }

    // Assign every body literal to the deepest covering node (ties to the
    // smallest bag index); literals without variables stay at the root.
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); td.bags.len()];
    for (i, lit) in rule.body.iter().enumerate() {
        let vars = lit.vars();
        if vars.is_empty() {
            assigned[root].push(i);
            continue;
        }
        let node = (0..td.bags.len())
            .filter(|&b| vars.iter().all(|v| td.bags[b].contains(*v)))
            .max_by_key(|&b| (depth[b], std::cmp::Reverse(b)))
            .expect("a valid decomposition covers every literal's variables");
        assigned[node].push(i);
    }

    // Linking predicates, allocated in traversal order: the head carries the
    // variables shared between the node's bag and its parent's bag.
    let mut link: Vec<Option<Atom>> = vec![None; td.bags.len()];
    for &node in order.iter().skip(1) {
        let args: Vec<Term> = td.bags[node]
            .intersection(&td.bags[parent[node]])
            .map(Term::var)
            .collect();
        link[node] = Some(Atom::new(fresh.next_name(), args));
    }

    let mut rules = Vec::new();
    for &node in &order {
        let head = match &link[node] {
            Some(atom) => vec![atom.clone()],
            None => rule.head.clone(),
        };
        let mut body: Vec<Literal> = assigned[node]
            .iter()
            .map(|&i| rule.body[i].clone())
            .collect();
        for &child in order.iter().skip(1) {
            if parent[child] == node {
                body.push(Literal::pos(link[child].clone().expect("non-root")));
            }
        }
        let mut emitted = Rule::new(head, body).at_line(rule.line);
        let aux = repair_safety(&mut emitted, &rule.body, repair, fresh)?;
        rules.push(emitted);
        rules.extend(aux);
    }
    Ok(RuleDecomposition {
        rules,
        decomposition: td.clone(),
    })
}

/// Makes an emitted rule safe again, if the split left variables without a
/// binding occurrence.
///
/// The binding closure is the smallest prefix-greedy set of original body
/// literals that binds all unsafe variables and every variable those
/// literals mention: for each variable in need, the earliest original
/// literal with a binding occurrence is taken, transitively. The closure is
/// emitted as an auxiliary rule (variables occurring once anonymized) or
/// appended inline, per `repair`.
fn repair_safety(
    rule: &mut Rule,
    original_body: &[Literal],
    repair: SafetyRepair,
    fresh: &mut FreshNames,
) -> Result<Option<Rule>, RewriteError> {
    let unsafe_vars: Vec<String> = {
        let bound = rule.bound_vars();
        rule.vars()
            .into_iter()
            .filter(|v| !bound.contains(v))
            .map(str::to_string)
            .collect()
    };
    if unsafe_vars.is_empty() {
        return Ok(None);
    }

    let mut need: BTreeSet<String> = unsafe_vars.iter().cloned().collect();
    let mut bound: BTreeSet<String> = BTreeSet::new();
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    while let Some(var) = need.iter().find(|v| !bound.contains(*v)).cloned() {
        let idx = original_body
            .iter()
            .position(|lit| lit.binding_vars().contains(var.as_str()))
            .ok_or_else(|| RewriteError::Unrepairable {
                variable: var.clone(),
                rule: rule.to_string(),
            })?;
        chosen.insert(idx);
        for v in original_body[idx].binding_vars() {
            bound.insert(v.to_string());
        }
        for v in original_body[idx].vars() {
            need.insert(v.to_string());
        }
    }
    let closure: Vec<Literal> = chosen.iter().map(|&i| original_body[i].clone()).collect();

    match repair {
        SafetyRepair::Inline => {
            rule.body.extend(closure);
            Ok(None)
        }
        SafetyRepair::Auxiliary => {
            let head = Atom::new(
                fresh.next_name(),
                unsafe_vars.iter().map(Term::var).collect(),
            );
            let mut aux = Rule::new(vec![head.clone()], closure).at_line(rule.line);
            anonymize_singletons(&mut aux);
            rule.body.push(Literal::pos(head));
            Ok(Some(aux))
        }
    }
}

/// Replaces variables occurring exactly once in the rule with `_`.
fn anonymize_singletons(rule: &mut Rule) {
    fn count(term: &Term, into: &mut std::collections::BTreeMap<String, usize>) {
        match term {
            Term::Variable(v) => *into.entry(v.clone()).or_insert(0) += 1,
            Term::Constant(_) | Term::Anonymous => {}
            Term::Arith { left, right, .. } => {
                count(left, into);
                count(right, into);
            }
        }
    }
    let mut occurrences = std::collections::BTreeMap::new();
    for atom in &rule.head {
        for arg in &atom.args {
            count(arg, &mut occurrences);
        }
    }
    for lit in &rule.body {
        match lit {
            Literal::Atom { atom, .. } => {
                for arg in &atom.args {
                    count(arg, &mut occurrences);
                }
            }
            Literal::Builtin { left, right, .. } => {
                count(left, &mut occurrences);
                count(right, &mut occurrences);
            }
        }
    }
    // Singletons can only sit in plain body-atom argument positions: head
    // and builtin variables are bound elsewhere and arithmetic arguments
    // are rejected, so replacing plain arguments is enough.
    for lit in &mut rule.body {
        if let Literal::Atom { atom, .. } = lit {
            for arg in &mut atom.args {
                if let Term::Variable(v) = arg {
                    if occurrences.get(v.as_str()) == Some(&1) {
                        *arg = Term::Anonymous;
                    }
                }
            }
        }
    }
}

/// Why a statement passed through `rewrite_program` unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleOutcome {
    Fact,
    /// The per-rule decision said to keep it.
    KeptByPolicy,
    /// The rule cannot be decomposed (no variables, or no bag covers the
    /// head variables of a disjunctive head).
    NotDecomposable { reason: String },
    /// Replaced by `rules` emitted rules (1 when the decomposition is a
    /// single bag, in which case the replacement equals the original).
    Rewritten { rules: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewriteOutcome {
    pub program: Program,
    /// One entry per input statement, in input order.
    pub outcomes: Vec<RuleOutcome>,
}

#[derive(Debug, Clone)]
pub struct RewriteConfig {
    pub safety: SafetyRepair,
    pub selection: SelectionConfig,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        RewriteConfig {
            safety: SafetyRepair::Auxiliary,
            selection: SelectionConfig::default(),
        }
    }
}

/// Rewrites every non-fact rule the `decide` callback approves, leaving the
/// rest untouched. Statement order is preserved; a rewritten rule is
/// replaced in place by its emitted rules.
pub fn rewrite_program(
    program: &Program,
    mut decide: impl FnMut(&Rule) -> bool,
    cfg: &RewriteConfig,
) -> Result<RewriteOutcome, RewriteError> {
    let mut fresh = FreshNames::new();
    let mut statements = Vec::new();
    let mut outcomes = Vec::new();
    for rule in &program.statements {
        if rule.is_fact() {
            statements.push(rule.clone());
            outcomes.push(RuleOutcome::Fact);
            continue;
        }
        if !decide(rule) {
            statements.push(rule.clone());
            outcomes.push(RuleOutcome::KeptByPolicy);
            continue;
        }
        let hg = build_hypergraph(rule);
        if hg.is_empty() {
            statements.push(rule.clone());
            outcomes.push(RuleOutcome::NotDecomposable {
                reason: "rule has no variables".into(),
            });
            continue;
        }
        let td = select_decomposition(&hg, &cfg.selection).expect("hypergraph checked nonempty");
        match decompose_rule(rule, &td, cfg.safety, &mut fresh) {
            Ok(rd) => {
                outcomes.push(RuleOutcome::Rewritten {
                    rules: rd.rules.len(),
                });
                statements.extend(rd.rules);
            }
            Err(RewriteError::HeadNotCovered { .. }) => {
                statements.push(rule.clone());
                outcomes.push(RuleOutcome::NotDecomposable {
                    reason: "no bag covers all head variables".into(),
                });
            }
            Err(err) => return Err(err),
        }
    }
    Ok(RewriteOutcome {
        program: Program::new(statements),
        outcomes,
    })
}

/// Builds the rule decomposition the default pipeline would produce for one
/// rule: selected decomposition, fresh names starting at 1.
pub fn decompose_rule_default(
    rule: &Rule,
    safety: SafetyRepair,
    selection: &SelectionConfig,
) -> Result<Option<RuleDecomposition>, RewriteError> {
    let hg = build_hypergraph(rule);
    if hg.is_empty() {
        return Ok(None);
    }
    let td = select_decomposition(&hg, selection).expect("hypergraph checked nonempty");
    let mut fresh = FreshNames::new();
    match decompose_rule(rule, &td, safety, &mut fresh) {
        Ok(rd) => Ok(Some(rd)),
        Err(RewriteError::HeadNotCovered { .. }) => Ok(None),
        Err(err) => Err(err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{decompose, Heuristic};
    use crate::parser::{parse_program_with, parse_rule, ParseOptions};

    fn worked_rule() -> Rule {
        parse_rule("p(X,Y,Z,S) :- s(S), a(X,Y,S-1), c(D,Y,Z), f(X,P,S-1), P >= D.").unwrap()
    }

    fn parse_expected(src: &str) -> Vec<Rule> {
        let opts = ParseOptions {
            allow_reserved_predicates: true,
        };
        parse_program_with(src, &opts).unwrap().statements
    }

    #[test]
    fn reproduces_first_worked_decomposition() {
        let rule = worked_rule();
        let td = decompose(&build_hypergraph(&rule), Heuristic::MinFill, 0).unwrap();
        let rd = decompose_rule(&rule, &td, SafetyRepair::Auxiliary, &mut FreshNames::new())
            .unwrap();
        let expected = parse_expected(
            "p(X,Y,Z,S) :- s(S), a(X,Y,S-1), f(X,P,S-1), fresh_pred_1(P,Y,Z).\n\
             fresh_pred_1(P,Y,Z) :- c(D,Y,Z), P >= D, fresh_pred_2(P).\n\
             fresh_pred_2(P) :- s(S), f(_,P,S-1).",
        );
        assert_eq!(rd.rules, expected);
    }

    #[test]
    fn reproduces_second_worked_decomposition() {
        let rule = worked_rule();
        let td = decompose(&build_hypergraph(&rule), Heuristic::MinDegree, 1).unwrap();
        let rd = decompose_rule(&rule, &td, SafetyRepair::Auxiliary, &mut FreshNames::new())
            .unwrap();
        let expected = parse_expected(
            "p(X,Y,Z,S) :- a(X,Y,S-1), c(D,Y,Z), fresh_pred_1(D,S,X).\n\
             fresh_pred_1(D,S,X) :- s(S), f(X,P,S-1), P >= D, fresh_pred_2(D).\n\
             fresh_pred_2(D) :- c(D,_,_).",
        );
        assert_eq!(rd.rules, expected);
    }

    #[test]
    fn inline_repair_appends_binding_literals() {
        let rule = worked_rule();
        let td = decompose(&build_hypergraph(&rule), Heuristic::MinFill, 0).unwrap();
        let rd =
            decompose_rule(&rule, &td, SafetyRepair::Inline, &mut FreshNames::new()).unwrap();
        let expected = parse_expected(
            "p(X,Y,Z,S) :- s(S), a(X,Y,S-1), f(X,P,S-1), fresh_pred_1(P,Y,Z).\n\
             fresh_pred_1(P,Y,Z) :- c(D,Y,Z), P >= D, s(S), f(X,P,S-1).",
        );
        assert_eq!(rd.rules, expected);
    }

    #[test]
    fn emitted_rules_are_safe() {
        let rule = worked_rule();
        let hg = build_hypergraph(&rule);
        for heuristic in [Heuristic::MinFill, Heuristic::MinDegree] {
            for seed in 0..6 {
                for repair in [SafetyRepair::Auxiliary, SafetyRepair::Inline] {
                    let td = decompose(&hg, heuristic, seed).unwrap();
                    let rd =
                        decompose_rule(&rule, &td, repair, &mut FreshNames::new()).unwrap();
                    for r in &rd.rules {
                        r.validate().unwrap_or_else(|e| panic!("{e} (from {r})"));
                    }
                }
            }
        }
    }

    #[test]
    fn single_bag_reproduces_the_rule() {
        let rule = parse_rule("p(X,Y) :- q(X,Y), r(Y,X).").unwrap();
        let td = decompose(&build_hypergraph(&rule), Heuristic::MinFill, 0).unwrap();
        assert_eq!(td.bags.len(), 1);
        let rd = decompose_rule(&rule, &td, SafetyRepair::Auxiliary, &mut FreshNames::new())
            .unwrap();
        assert_eq!(rd.rules, vec![rule]);
    }

    #[test]
    fn constraints_decompose_from_the_first_bag() {
        let rule = parse_rule(":- q(X,Y), r(Y,Z), s(Z,W).").unwrap();
        let td = decompose(&build_hypergraph(&rule), Heuristic::MinFill, 0).unwrap();
        let rd = decompose_rule(&rule, &td, SafetyRepair::Auxiliary, &mut FreshNames::new())
            .unwrap();
        assert!(rd.rules.len() > 1);
        assert!(rd.rules[0].is_constraint());
        for r in &rd.rules {
            r.validate().unwrap();
        }
    }

    #[test]
    fn fresh_names_continue_across_rules() {
        let program = crate::parser::parse_program(
            "p(W) :- q(W,X), r(X,Y), s(Y,Z), t(Z).\n\
             u(A) :- q(A,B), r(B,C), s(C,D), t(D).",
        )
        .unwrap();
        let out = rewrite_program(&program, |_| true, &RewriteConfig::default()).unwrap();
        let names: Vec<String> = out
            .program
            .statements
            .iter()
            .flat_map(|r| r.head.iter())
            .map(|a| a.predicate.clone())
            .filter(|p| p.starts_with(RESERVED_PREDICATE_PREFIX))
            .collect();
        let unique: BTreeSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len(), "link names must not repeat: {names:?}");
        assert!(names.len() >= 2);
    }

    #[test]
    fn facts_and_vetoed_rules_pass_through() {
        let program = crate::parser::parse_program(
            "q(1,2).\n\
             p(W) :- q(W,X), q(X,Y), q(Y,Z).",
        )
        .unwrap();
        let out = rewrite_program(&program, |_| false, &RewriteConfig::default()).unwrap();
        assert_eq!(out.program, program);
        assert_eq!(
            out.outcomes,
            vec![RuleOutcome::Fact, RuleOutcome::KeptByPolicy]
        );
    }

    #[test]
    fn ground_rules_are_not_decomposable() {
        let program = crate::parser::parse_program("p(1) :- q(2).").unwrap();
        let out = rewrite_program(&program, |_| true, &RewriteConfig::default()).unwrap();
        assert_eq!(out.program, program);
        assert!(matches!(
            out.outcomes[0],
            RuleOutcome::NotDecomposable { .. }
        ));
    }

    #[test]
    fn uncoverable_disjunctive_head_is_kept() {
        // Head variables {W,X,Y,Z} only ever co-occur pairwise in the body,
        // so no bag of width < 3 covers them all; with the head split into
        // two hyperedges the decomposition never has to build such a bag.
        let program =
            crate::parser::parse_program("a(W,X) | b(Y,Z) :- q(W,X), r(X,Y), s(Y,Z).").unwrap();
        let out = rewrite_program(&program, |_| true, &RewriteConfig::default()).unwrap();
        match &out.outcomes[0] {
            RuleOutcome::NotDecomposable { reason } => {
                assert!(reason.contains("head"), "unexpected reason {reason:?}");
            }
            RuleOutcome::Rewritten { .. } => {
                // Acceptable when selection happens to produce a covering
                // bag; the emitted rules must then still be safe.
                for r in out.program.rules() {
                    r.validate().unwrap();
                }
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn rewrite_is_deterministic() {
        let program = crate::parser::parse_program(
            "p(W) :- q(W,X), r(X,Y), s(Y,Z), t(Z), W > Y.",
        )
        .unwrap();
        let a = rewrite_program(&program, |_| true, &RewriteConfig::default()).unwrap();
        let b = rewrite_program(&program, |_| true, &RewriteConfig::default()).unwrap();
        assert_eq!(a.program.to_string(), b.program.to_string());
    }
}
