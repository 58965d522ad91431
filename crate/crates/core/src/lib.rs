//! Preprocessing library for answer set programs: rewrite long rules into
//! equivalent sets of shorter rules via hypergraph tree decomposition, and
//! decide per rule whether rewriting pays off using a trained classifier.
//!
//! The pipeline, end to end:
//!
//! 1. [`parser`] / [`ast`] — parse and print the supported ASP fragment
//!    (facts, normal and disjunctive rules, negation as failure, comparison
//!    builtins, integer arithmetic).
//! 2. [`hypergraph`] / [`decomp`] — build the rule hypergraph and compute
//!    validated tree decompositions of it.
//! 3. [`rewrite`] — turn a rule plus a decomposition into an equivalent set
//!    of shorter rules linked by fresh predicates, repairing safety.
//! 4. [`features`] — structural/domain features of a rule in program context.
//! 5. [`ground`] — a semi-naive bottom-up grounder, used as the timing and
//!    equivalence oracle.
//! 6. [`learn`] — dataset labeling, MLP training with alpha-balanced focal
//!    loss, and evaluation metrics.
//! 7. [`synth`] — generators for synthetic rules and fact sets, used to build
//!    training corpora and test fixtures.

pub mod ast;
pub mod decomp;
pub mod features;
pub mod ground;
pub mod hypergraph;
pub mod learn;
pub mod parser;
pub mod rewrite;
pub mod synth;

pub use ast::{Atom, Constant, Literal, PredSig, Program, Rel, Rule, Term};
pub use parser::{parse_program, parse_program_with, ParseError, ParseOptions};
