//! Seeded generators for synthetic test inputs: random hypergraphs, random
//! safe decomposable rules with fact sets, a three-family corpus for
//! labeling experiments, and a linearly separable feature dataset.
//!
//! Every generator draws from a caller-supplied ChaCha8 generator, so a
//! fixed seed reproduces the exact same graphs, programs, and datasets.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::ast::{ArithOp, Atom, Literal, Program, Rel, Rule, Term};
use crate::decomp::SelectionConfig;
use crate::hypergraph::{EdgeOrigin, Hyperedge, Hypergraph};
use crate::learn::{Class, Dataset, Example};
use crate::rewrite::{SafetyRepair, decompose_rule_default};

/// Random hypergraph with up to `max_vertices` vertices and `max_edges`
/// nonempty hyperedges. Edges may repeat, overlap arbitrarily, or leave the
/// graph disconnected; isolated vertices are possible.
pub fn random_hypergraph(
    rng: &mut ChaCha8Rng,
    max_vertices: usize,
    max_edges: usize,
) -> Hypergraph {
    let nv = rng.gen_range(1..=max_vertices.max(1));
    let names: Vec<String> = (0..nv).map(|i| format!("V{i}")).collect();
    let ne = rng.gen_range(1..=max_edges.max(1));
    let mut edges = Vec::with_capacity(ne);
    for i in 0..ne {
        let mut vars = BTreeSet::new();
        vars.insert(names[rng.gen_range(0..nv)].clone());
        for name in &names {
            if rng.gen_bool(0.3) {
                vars.insert(name.clone());
            }
        }
        let label = format!(
            "e{i}({})",
            vars.iter().cloned().collect::<Vec<_>>().join(",")
        );
        edges.push(Hyperedge {
            origin: EdgeOrigin::Body(i),
            label,
            vars,
        });
    }
    Hypergraph {
        vertices: names.into_iter().collect(),
        edges,
    }
}

/// The fixed constant pool for equivalence-test fact sets: six values.
pub const EQUIV_CONSTANTS: [i64; 6] = [0, 1, 2, 3, 4, 5];

const EQUIV_FACT_CAP: usize = 50;

/// A random program made of one safe, decomposable rule plus a random fact
/// set over at most six constants and at most fifty facts. Rules mix plain
/// joins with repeated variables, embedded constants, comparisons, negated
/// extensional atoms, and occasional arithmetic arguments.
pub fn random_equivalence_case(rng: &mut ChaCha8Rng) -> Program {
    for _ in 0..500 {
        if let Some(program) = try_equivalence_case(rng) {
            return program;
        }
    }
    panic!("no decomposable rule found in 500 attempts; generator odds are off");
}

fn try_equivalence_case(rng: &mut ChaCha8Rng) -> Option<Program> {
    let n_preds = rng.gen_range(2..=4);
    let sigs: Vec<(String, usize)> = (0..n_preds)
        .map(|i| (format!("e{i}"), rng.gen_range(1..=3)))
        .collect();
    let n_vars = rng.gen_range(3..=6);
    let pool: Vec<String> = (0..n_vars).map(|i| format!("X{i}")).collect();

    // Positive joins over plain variables with a sprinkle of constants.
    let n_atoms = rng.gen_range(2..=5);
    let mut body: Vec<Literal> = (0..n_atoms)
        .map(|_| {
            let (name, arity) = sigs[rng.gen_range(0..sigs.len())].clone();
            let args = (0..arity)
                .map(|_| {
                    if rng.gen_bool(0.12) {
                        Term::int(EQUIV_CONSTANTS[rng.gen_range(0..EQUIV_CONSTANTS.len())])
                    } else {
                        Term::var(pool[rng.gen_range(0..n_vars)].clone())
                    }
                })
                .collect();
            Literal::pos(Atom::new(name, args))
        })
        .collect();

    // Occasionally turn one argument into V±1. The replaced position and
    // the embedded variable must both stay bound by plain occurrences
    // elsewhere, which the final validate() call double-checks.
    if rng.gen_bool(0.25) {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for lit in &body {
            if let Some(atom) = lit.as_positive_atom() {
                for arg in &atom.args {
                    if let Term::Variable(v) = arg {
                        *counts.entry(v.clone()).or_insert(0) += 1;
                    }
                }
            }
        }
        let rich: Vec<&String> = counts
            .iter()
            .filter(|(_, c)| **c >= 2)
            .map(|(v, _)| v)
            .collect();
        if !rich.is_empty() {
            let inner = rich[rng.gen_range(0..rich.len())].clone();
            let op = if rng.gen_bool(0.5) {
                ArithOp::Add
            } else {
                ArithOp::Sub
            };
            let expr = Term::Arith {
                op,
                left: Box::new(Term::var(inner)),
                right: Box::new(Term::int(1)),
            };
            let ai = rng.gen_range(0..body.len());
            if let Literal::Atom { atom, naf: false } = &mut body[ai] {
                let ki = rng.gen_range(0..atom.args.len());
                let replaceable = match &atom.args[ki] {
                    Term::Variable(v) => counts.get(v).copied().unwrap_or(0) >= 2,
                    Term::Constant(_) => true,
                    _ => false,
                };
                if replaceable {
                    atom.args[ki] = expr;
                }
            }
        }
    }

    let bound: Vec<String> = {
        let mut set = BTreeSet::new();
        for lit in &body {
            if let Some(atom) = lit.as_positive_atom() {
                set.extend(atom.binding_vars().into_iter().map(str::to_string));
            }
        }
        set.into_iter().collect()
    };
    if bound.is_empty() {
        return None;
    }
    let pick_bound = |rng: &mut ChaCha8Rng| Term::var(bound[rng.gen_range(0..bound.len())].clone());

    // Optional comparison between bound variables (or against a constant).
    if rng.gen_bool(0.5) {
        let rels = [Rel::Lt, Rel::Le, Rel::Gt, Rel::Ge, Rel::Eq, Rel::Ne];
        let rel = rels[rng.gen_range(0..rels.len())];
        let left = pick_bound(rng);
        let right = if rng.gen_bool(0.5) {
            Term::int(EQUIV_CONSTANTS[rng.gen_range(0..EQUIV_CONSTANTS.len())])
        } else {
            pick_bound(rng)
        };
        body.push(Literal::builtin(rel, left, right));
    }

    // Optional negated extensional atom; its arguments come from bound
    // variables, so safety is untouched and stratification is trivial.
    if rng.gen_bool(0.35) {
        let (name, arity) = sigs[rng.gen_range(0..sigs.len())].clone();
        let args = (0..arity).map(|_| pick_bound(rng)).collect();
        body.push(Literal::naf(Atom::new(name, args)));
    }

    // Head over a distinct subset of bound variables, rarely with an
    // arithmetic output term.
    let n_head = rng.gen_range(1..=bound.len().min(4));
    let mut idxs: Vec<usize> = (0..bound.len()).collect();
    idxs.shuffle(rng);
    let mut head_args: Vec<Term> = idxs[..n_head]
        .iter()
        .map(|&i| Term::var(bound[i].clone()))
        .collect();
    if rng.gen_bool(0.1) {
        head_args[0] = Term::Arith {
            op: ArithOp::Add,
            left: Box::new(pick_bound(rng)),
            right: Box::new(Term::int(1)),
        };
    }
    let rule = Rule::new(vec![Atom::new("h", head_args)], body);
    rule.validate().ok()?;

    let rd = decompose_rule_default(&rule, SafetyRepair::Auxiliary, &SelectionConfig::default())
        .ok()??;
    if rd.rules.len() < 2 {
        return None;
    }

    let budget = rng.gen_range(8..=EQUIV_FACT_CAP);
    let mut facts: BTreeSet<Atom> = BTreeSet::new();
    for _ in 0..budget {
        let (name, arity) = sigs[rng.gen_range(0..sigs.len())].clone();
        let args = (0..arity)
            .map(|_| Term::int(EQUIV_CONSTANTS[rng.gen_range(0..EQUIV_CONSTANTS.len())]))
            .collect();
        facts.insert(Atom::new(name, args));
    }
    let mut statements: Vec<Rule> = facts.into_iter().map(Rule::fact).collect();
    statements.push(rule);
    Some(Program::new(statements))
}

/// A labeling-corpus example: one decomposable rule with its input facts.
/// Three families with contrasting grounding economics are mixed — star
/// joins whose cross product decomposition avoids, sparse chains where the
/// extra link rules are pure overhead, and small rules buried under a bulk
/// relation so either choice disappears in the noise.
pub fn corpus_program(rng: &mut ChaCha8Rng) -> Program {
    match rng.gen_range(0..100) {
        0..=24 => star_program(rng),
        25..=49 => chain_program(rng),
        _ => bulk_program(rng),
    }
}

/// `count` independent corpus examples.
pub fn corpus_programs(count: usize, rng: &mut ChaCha8Rng) -> Vec<Program> {
    (0..count).map(|_| corpus_program(rng)).collect()
}

/// h(X) :- e0(X,Y0), ..., ek(X,Yk) with several tuples per X in every leg:
/// grounding the original enumerates the per-X cross product of the legs,
/// while the decomposition projects each leg first.
fn star_program(rng: &mut ChaCha8Rng) -> Program {
    let legs = rng.gen_range(3..=4);
    let centers = rng.gen_range(3..=5);
    let fanout = rng.gen_range(5..=8);
    let mut statements = Vec::new();
    for leg in 0..legs {
        for x in 0..centers {
            for y in 0..fanout {
                statements.push(Rule::fact(Atom::new(
                    format!("e{leg}"),
                    vec![Term::int(x), Term::int(y)],
                )));
            }
        }
    }
    let body = (0..legs)
        .map(|leg| {
            Literal::pos(Atom::new(
                format!("e{leg}"),
                vec![Term::var("X"), Term::var(format!("Y{leg}"))],
            ))
        })
        .collect();
    statements.push(Rule::new(vec![Atom::new("h", vec![Term::var("X")])], body));
    Program::new(statements)
}

/// h(X0) :- e0(X0,X1), e1(X1,X2), ... over functional relations (fan-out 1):
/// the original grounds in one cheap pass, so the decomposition's link
/// relations are pure overhead.
fn chain_program(rng: &mut ChaCha8Rng) -> Program {
    let len = rng.gen_range(2..=3);
    let m = rng.gen_range(5..=10);
    let mut statements = Vec::new();
    for i in 0..len {
        for v in 0..m {
            statements.push(Rule::fact(Atom::new(
                format!("e{i}"),
                vec![Term::int(v), Term::int(v + 1)],
            )));
        }
    }
    statements.push(chain_rule(len));
    Program::new(statements)
}

/// A two-step chain rule next to a bulk relation hundreds of facts wide:
/// loading the facts dwarfs either way of grounding the rule, so the two
/// variants measure within the indifference band.
fn bulk_program(rng: &mut ChaCha8Rng) -> Program {
    let m = rng.gen_range(4..=6);
    let bulk = rng.gen_range(260..=380);
    let mut statements = Vec::new();
    for i in 0..2 {
        for v in 0..m {
            statements.push(Rule::fact(Atom::new(
                format!("e{i}"),
                vec![Term::int(v), Term::int(v + 1)],
            )));
        }
    }
    for v in 0..bulk {
        statements.push(Rule::fact(Atom::new("bulk", vec![Term::int(v)])));
    }
    statements.push(chain_rule(2));
    Program::new(statements)
}

fn chain_rule(len: i64) -> Rule {
    let body = (0..len)
        .map(|i| {
            Literal::pos(Atom::new(
                format!("e{i}"),
                vec![Term::var(format!("X{i}")), Term::var(format!("X{}", i + 1))],
            ))
        })
        .collect();
    Rule::new(vec![Atom::new("h", vec![Term::var("X0")])], body)
}

/// Three well-separated clusters in feature space, `per_class` points each:
/// centers differ by far more than the ±1 jitter in at least one coordinate,
/// so a nearest-centroid rule already classifies perfectly.
pub fn blob_dataset(per_class: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let centers: [[f64; 6]; 3] = [
        [12.0, 3.0, 2.0, 1.5, 4.0, 2.0],
        [40.0, 6.0, 5.0, 3.0, 12.0, 2.5],
        [150.0, 2.0, 8.0, 6.0, 2.0, 3.5],
    ];
    let mut examples = Vec::new();
    for class in Class::ALL {
        let center = centers[class.index()];
        for _ in 0..per_class {
            let mut features = [0.0; 6];
            for (f, c) in features.iter_mut().zip(center) {
                *f = c + rng.gen_range(-1.0..1.0);
            }
            examples.push(Example {
                features,
                label: class,
            });
        }
    }
    Dataset { examples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Constant;
    use crate::decomp::{Heuristic, decompose, validate_decomposition};
    use crate::ground::{InternalCost, TimingConfig, TimingMode};
    use crate::learn::{LabelConfig, label_rule};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn random_hypergraphs_respect_bounds_and_decompose() {
        let mut rng = rng(1);
        for _ in 0..100 {
            let hg = random_hypergraph(&mut rng, 8, 8);
            assert!(!hg.vertices.is_empty() && hg.vertices.len() <= 8);
            assert!(!hg.edges.is_empty() && hg.edges.len() <= 8);
            for edge in &hg.edges {
                assert!(!edge.vars.is_empty());
                assert!(edge.vars.is_subset(&hg.vertices));
            }
            for heuristic in [Heuristic::MinFill, Heuristic::MinDegree] {
                let td = decompose(&hg, heuristic, 3).expect("nonempty");
                validate_decomposition(&hg, &td).expect("valid decomposition");
            }
        }
    }

    #[test]
    fn equivalence_cases_are_safe_small_and_decomposable() {
        let mut rng = rng(2);
        for _ in 0..25 {
            let program = random_equivalence_case(&mut rng);
            let rules: Vec<&Rule> = program.rules().collect();
            assert_eq!(rules.len(), 1);
            rules[0].validate().expect("safe rule");
            let rd = decompose_rule_default(
                rules[0],
                SafetyRepair::Auxiliary,
                &SelectionConfig::default(),
            )
            .expect("no rewrite error")
            .expect("decomposable");
            assert!(rd.rules.len() >= 2);
            let facts = program.distinct_facts();
            assert!(facts.len() <= EQUIV_FACT_CAP);
            let constants: BTreeSet<&Constant> = facts
                .iter()
                .flat_map(|a| a.args.iter())
                .filter_map(|t| match t {
                    Term::Constant(c) => Some(c),
                    _ => None,
                })
                .collect();
            assert!(constants.len() <= EQUIV_CONSTANTS.len());
        }
    }

    #[test]
    fn equivalence_cases_exercise_negation_and_builtins() {
        let mut rng = rng(3);
        let mut saw_naf = false;
        let mut saw_builtin = false;
        for _ in 0..50 {
            let program = random_equivalence_case(&mut rng);
            let rule = program.rules().next().expect("one rule");
            for lit in rule.body_literals() {
                match lit {
                    Literal::Atom { naf: true, .. } => saw_naf = true,
                    Literal::Builtin { .. } => saw_builtin = true,
                    _ => {}
                }
            }
        }
        assert!(saw_naf, "no sample used negation");
        assert!(saw_builtin, "no sample used a comparison");
    }

    #[test]
    fn corpus_labels_cover_all_three_classes() {
        let mut rng = rng(4);
        let oracle = InternalCost {
            config: TimingConfig {
                mode: TimingMode::Work,
                ..TimingConfig::default()
            },
        };
        let cfg = LabelConfig::default();
        let mut seen = BTreeSet::new();
        for program in corpus_programs(40, &mut rng) {
            let rule = program.rules().next().expect("one rule").clone();
            let facts: Vec<Rule> = program.facts().cloned().collect();
            let example = label_rule(&rule, &facts, &cfg, &oracle)
                .expect("labeling succeeds")
                .expect("no timeouts in work mode");
            seen.insert(example.label);
        }
        assert_eq!(
            seen.into_iter().collect::<Vec<_>>(),
            vec![Class::Decomp, Class::DoNotDecomp, Class::Indifferent]
        );
    }

    #[test]
    fn blob_dataset_is_balanced_and_centroid_separable() {
        let mut rng = rng(5);
        let ds = blob_dataset(200, &mut rng);
        assert_eq!(ds.len(), 600);
        assert_eq!(ds.class_counts(), [200, 200, 200]);

        // Nearest centroid (fit on the data itself) classifies perfectly.
        let mut centroids = [[0.0f64; 6]; 3];
        for e in &ds.examples {
            for (c, f) in centroids[e.label.index()].iter_mut().zip(e.features) {
                *c += f / 200.0;
            }
        }
        for e in &ds.examples {
            let dist = |c: &[f64; 6]| -> f64 {
                c.iter()
                    .zip(e.features)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            };
            let best = (0..3)
                .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                .expect("three classes");
            assert_eq!(best, e.label.index());
        }
    }
}
