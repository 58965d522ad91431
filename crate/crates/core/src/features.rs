//! The per-rule feature vector the classifier consumes.
//!
//! Six numbers describe a rule in the context of its program and its
//! candidate decomposition: the instance size, the rule's body length, and
//! the shape of the rule set the rewrite would produce. The two averages are
//! kept as exact rationals; they are only collapsed to floating point at the
//! learner boundary.

use std::collections::BTreeSet;

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::ast::{Atom, PredSig, Program, Rule};
use crate::rewrite::RuleDecomposition;

/// Which predicates the average IDB arity ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdbScope {
    /// The IDB of the input program. The classifier runs before any
    /// rewriting happens, so this is the default.
    #[default]
    Original,
    /// Additionally count the linking and safety predicates this rule's
    /// decomposition would introduce.
    AfterRewrite,
}

/// The program defines no predicate by a rule, so the average IDB arity has
/// an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("program has no IDB predicate, so the average IDB arity is undefined")]
pub struct NoIdbError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    /// Distinct input facts of the program.
    pub f1_num_input_facts: u64,
    /// Body literals of the rule itself.
    pub f2_body_len: u64,
    /// Rules in the candidate decomposition, safety rules included.
    pub f3_num_decomp_rules: u64,
    /// Mean body length over the decomposition's rules.
    pub f4_avg_decomp_body_len: Ratio<u64>,
    /// Total join count over the decomposition's rules, where a rule's join
    /// count sums the shared variables of each unordered body-literal pair.
    pub f5_total_decomp_joins: u64,
    /// Mean arity over the IDB predicates in scope.
    pub f6_avg_idb_arity: Ratio<u64>,
}

impl FeatureVector {
    /// The vector as floating point, in feature order.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.f1_num_input_facts as f64,
            self.f2_body_len as f64,
            self.f3_num_decomp_rules as f64,
            ratio_to_f64(self.f4_avg_decomp_body_len),
            self.f5_total_decomp_joins as f64,
            ratio_to_f64(self.f6_avg_idb_arity),
        ]
    }

    fn csv_cells(&self) -> String {
        format!(
            "{},{},{},{:?},{},{:?}",
            self.f1_num_input_facts,
            self.f2_body_len,
            self.f3_num_decomp_rules,
            ratio_to_f64(self.f4_avg_decomp_body_len),
            self.f5_total_decomp_joins,
            ratio_to_f64(self.f6_avg_idb_arity),
        )
    }
}

fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    r.to_f64().expect("u64 ratios convert")
}

/// Computes the features of `rule` over the original program's IDB.
pub fn extract_features(
    rule: &Rule,
    program: &Program,
    rd: &RuleDecomposition,
) -> Result<FeatureVector, NoIdbError> {
    extract_features_with(rule, program, rd, IdbScope::Original)
}

/// Computes the features of `rule`, with the IDB scope chosen explicitly.
pub fn extract_features_with(
    rule: &Rule,
    program: &Program,
    rd: &RuleDecomposition,
    scope: IdbScope,
) -> Result<FeatureVector, NoIdbError> {
    let mut idb: BTreeSet<PredSig> = program.idb();
    if scope == IdbScope::AfterRewrite {
        idb.extend(rd.rules.iter().flat_map(|r| r.head.iter().map(Atom::sig)));
    }
    if idb.is_empty() {
        return Err(NoIdbError);
    }
    let f3 = rd.rules.len() as u64;
    let total_body_len: u64 = rd.rules.iter().map(|r| r.body.len() as u64).sum();
    let arity_sum: u64 = idb.iter().map(|sig| sig.arity as u64).sum();
    Ok(FeatureVector {
        f1_num_input_facts: program.distinct_facts().len() as u64,
        f2_body_len: rule.body.len() as u64,
        f3_num_decomp_rules: f3,
        f4_avg_decomp_body_len: if f3 == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(total_body_len, f3)
        },
        f5_total_decomp_joins: rd.rules.iter().map(|r| r.count_joins() as u64).sum(),
        f6_avg_idb_arity: Ratio::new(arity_sum, idb.len() as u64),
    })
}

pub const CSV_HEADER: &str = "f1,f2,f3,f4,f5,f6";
pub const LABELED_CSV_HEADER: &str = "f1,f2,f3,f4,f5,f6,label";

/// Renders feature vectors as a CSV table, one row per vector.
pub fn features_csv(rows: &[FeatureVector]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_cells());
        out.push('\n');
    }
    out
}

/// Renders feature vectors with a trailing label column; the label cell is
/// the paired string as-is.
pub fn labeled_features_csv<S: AsRef<str>>(rows: &[(FeatureVector, S)]) -> String {
    let mut out = String::from(LABELED_CSV_HEADER);
    out.push('\n');
    for (row, label) in rows {
        out.push_str(&row.csv_cells());
        out.push(',');
        out.push_str(label.as_ref());
        out.push('\n');
    }
    out
}
