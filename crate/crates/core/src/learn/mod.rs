//! Labeling, training, and evaluation of the per-rule classifier.
//!
//! A rule is labeled by grounding its example program twice — once as
//! written, once decomposed — and comparing the two costs: within a 10%
//! relative gap the rule is `indifferent`, otherwise the cheaper side wins.
//! A timeout counts as the slower side; when both sides time out the
//! example carries no information and is dropped.
//!
//! The classifier itself is a small multilayer perceptron trained with the
//! α-balanced focal loss (submodule [`loss`]), Adam, and a stratified
//! train/test split; [`metrics`] covers the evaluation side and
//! [`model_io`] the on-disk model format.

pub mod loss;
pub mod metrics;
pub mod mlp;
pub mod model_io;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::ast::{Program, Rule};
use crate::decomp::SelectionConfig;
use crate::features::{extract_features, FeatureVector, NoIdbError};
use crate::ground::{CostOracle, OracleError, Timing};
use crate::rewrite::{decompose_rule_default, RewriteError, SafetyRepair};

/// Relative cost gaps below this are indifferent.
pub const INDIFFERENCE_THRESHOLD: f64 = 0.10;

/// The three answer classes, in their fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    /// Grounding is cheaper after decomposition.
    Decomp,
    /// Grounding is cheaper as written.
    DoNotDecomp,
    /// The gap is within the indifference threshold.
    Indifferent,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Decomp, Class::DoNotDecomp, Class::Indifferent];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Class> {
        Class::ALL.get(index).copied()
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Decomp => "decomp",
            Class::DoNotDecomp => "do-not-decomp",
            Class::Indifferent => "indifferent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label: {0}")]
pub struct UnknownClassError(String);

impl FromStr for Class {
    type Err = UnknownClassError;

    fn from_str(s: &str) -> Result<Class, UnknownClassError> {
        match s {
            "decomp" => Ok(Class::Decomp),
            "do-not-decomp" => Ok(Class::DoNotDecomp),
            "indifferent" => Ok(Class::Indifferent),
            other => Err(UnknownClassError(other.to_string())),
        }
    }
}

/// One labeled rule, with the measurements that justify the label.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: Class,
    pub t_never: Timing,
    pub t_always: Timing,
}

/// Applies the indifference rule to two cost magnitudes (`never` = rule as
/// written, `always` = decomposed). Scale-free: only the relative gap
/// matters.
pub fn label_from_costs(t_never: f64, t_always: f64) -> Class {
    let max = t_never.max(t_always);
    if max <= 0.0 {
        return Class::Indifferent;
    }
    if (t_never - t_always).abs() / max < INDIFFERENCE_THRESHOLD {
        Class::Indifferent
    } else if t_always < t_never {
        Class::Decomp
    } else {
        Class::DoNotDecomp
    }
}

/// Labels a pair of measurements. A timeout counts as the slower side;
/// `None` means both sides timed out and the example is to be dropped.
pub fn label_from_timings(t_never: Timing, t_always: Timing) -> Option<Class> {
    match (t_never.magnitude(), t_always.magnitude()) {
        (None, None) => None,
        (None, Some(_)) => Some(Class::Decomp),
        (Some(_), None) => Some(Class::DoNotDecomp),
        (Some(never), Some(always)) => Some(label_from_costs(never, always)),
    }
}

#[derive(Debug, Clone, Default)]
pub struct LabelConfig {
    pub safety: SafetyRepair,
    pub selection: SelectionConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("rule does not decompose into multiple rules: {rule}")]
    NotDecomposable { rule: String },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    NoIdb(#[from] NoIdbError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Labels one rule against a fact set: measures the grounding cost of
/// `facts + rule` and of `facts + RD(rule)`, and applies the indifference
/// rule. `Ok(None)` means both measurements timed out.
pub fn label_rule(
    rule: &Rule,
    facts: &[Rule],
    cfg: &LabelConfig,
    oracle: &dyn CostOracle,
) -> Result<Option<LabeledExample>, LabelError> {
    let rd = decompose_rule_default(rule, cfg.safety, &cfg.selection)?.ok_or_else(|| {
        LabelError::NotDecomposable {
            rule: rule.to_string(),
        }
    })?;
    if rd.rules.len() < 2 {
        return Err(LabelError::NotDecomposable {
            rule: rule.to_string(),
        });
    }

    let mut never_statements: Vec<Rule> = facts.to_vec();
    never_statements.push(rule.clone());
    let never = Program::new(never_statements);

    let mut always_statements: Vec<Rule> = facts.to_vec();
    always_statements.extend(rd.rules.iter().cloned());
    let always = Program::new(always_statements);

    let features = extract_features(rule, &never, &rd)?;
    let t_never = oracle.measure(&never)?;
    let t_always = oracle.measure(&always)?;
    Ok(label_from_timings(t_never, t_always).map(|label| LabeledExample {
        features,
        label,
        t_never,
        t_always,
    }))
}

/// One training/evaluation row: the feature vector collapsed to floating
/// point, plus its class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example {
    pub features: [f64; 6],
    pub label: Class,
}

/// The in-memory view of a labeled dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn from_examples(examples: &[LabeledExample]) -> Dataset {
        Dataset {
            examples: examples
                .iter()
                .map(|e| Example {
                    features: e.features.as_array(),
                    label: e.label,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Examples per class, in class index order.
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for example in &self.examples {
            counts[example.label.index()] += 1;
        }
        counts
    }

    /// Class shares in percent, in class index order; sums to 100 up to
    /// rounding. All zeros for an empty dataset.
    pub fn class_percentages(&self) -> [f64; 3] {
        let counts = self.class_counts();
        let total: usize = counts.iter().sum();
        if total == 0 {
            return [0.0; 3];
        }
        counts.map(|c| 100.0 * c as f64 / total as f64)
    }

    /// One-line class-distribution bookkeeping: total example count, then
    /// per-class counts with percentages.
    pub fn distribution_summary(&self) -> String {
        let counts = self.class_counts();
        let percentages = self.class_percentages();
        let parts: Vec<String> = Class::ALL
            .into_iter()
            .map(|class| {
                format!(
                    "{class} {} ({:.2}%)",
                    counts[class.index()],
                    percentages[class.index()]
                )
            })
            .collect();
        format!("{} examples: {}", self.len(), parts.join(", "))
    }

    /// Parses the labeled CSV written by [`crate::features::labeled_features_csv`].
    pub fn from_csv(text: &str) -> Result<Dataset, DatasetError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(DatasetError::Empty)?;
        if header.trim_end() != crate::features::LABELED_CSV_HEADER {
            return Err(DatasetError::Header {
                found: header.to_string(),
            });
        }
        let mut examples = Vec::new();
        for (i, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(DatasetError::Row {
                    line: i + 1,
                    detail: format!("expected 7 cells, found {}", cells.len()),
                });
            }
            let mut features = [0.0f64; 6];
            for (slot, cell) in features.iter_mut().zip(&cells) {
                *slot = cell.parse().map_err(|_| DatasetError::Row {
                    line: i + 1,
                    detail: format!("not a number: {cell}"),
                })?;
            }
            let label = cells[6].parse().map_err(|_| DatasetError::Row {
                line: i + 1,
                detail: format!("not a class label: {}", cells[6]),
            })?;
            examples.push(Example { features, label });
        }
        Ok(Dataset { examples })
    }
}

/// Parses the unlabeled CSV written by [`crate::features::features_csv`].
pub fn read_features_csv(text: &str) -> Result<Vec<[f64; 6]>, DatasetError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DatasetError::Empty)?;
    if header.trim_end() != crate::features::CSV_HEADER {
        return Err(DatasetError::Header {
            found: header.to_string(),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(DatasetError::Row {
                line: i + 1,
                detail: format!("expected 6 cells, found {}", cells.len()),
            });
        }
        let mut row = [0.0f64; 6];
        for (slot, cell) in row.iter_mut().zip(&cells) {
            *slot = cell.parse().map_err(|_| DatasetError::Row {
                line: i + 1,
                detail: format!("not a number: {cell}"),
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset file is empty")]
    Empty,
    #[error("unexpected CSV header: {found}")]
    Header { found: String },
    #[error("line {line}: {detail}")]
    Row { line: usize, detail: String },
}

/// A class is absent where all three are required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("dataset has no {missing} examples")]
pub struct DegenerateDatasetError {
    pub missing: Class,
}

/// Checks that every class occurs at least once.
pub fn require_all_classes(ds: &Dataset) -> Result<(), DegenerateDatasetError> {
    let counts = ds.class_counts();
    for class in Class::ALL {
        if counts[class.index()] == 0 {
            return Err(DegenerateDatasetError { missing: class });
        }
    }
    Ok(())
}

/// Splits into train/test preserving the class distribution: per class, a
/// seeded shuffle then the first `round(ratio · n)` examples to train. Class
/// proportions in both halves match the input within one example per class.
pub fn stratified_split(ds: &Dataset, ratio: f64, rng: &mut ChaCha8Rng) -> (Dataset, Dataset) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, example) in ds.examples.iter().enumerate() {
        by_class.entry(example.label.index()).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, mut indices) in by_class {
        indices.shuffle(rng);
        let take = (ratio * indices.len() as f64).round() as usize;
        for (k, i) in indices.into_iter().enumerate() {
            if k < take {
                train.push(ds.examples[i]);
            } else {
                test.push(ds.examples[i]);
            }
        }
    }
    (Dataset { examples: train }, Dataset { examples: test })
}
