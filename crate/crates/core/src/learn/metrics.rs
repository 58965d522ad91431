//! Evaluation metrics: confusion matrix, precision/recall/F1, and
//! one-vs-rest AUC, with macro and support-weighted aggregates.
//!
//! Conventions: confusion rows are true classes and columns predictions;
//! empty denominators yield 0 for precision, recall, and F1; AUC is the
//! Mann-Whitney rank statistic with average ranks on ties, and 0.5 when one
//! side of the one-vs-rest split is empty.

use super::mlp::MlpModel;
use super::{Class, Dataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    /// True examples of this class.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// confusion[t][p] = examples of true class t predicted as p.
    pub confusion: [[u64; 3]; 3],
    pub per_class: [ClassMetrics; 3],
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_auc: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub weighted_auc: f64,
}

/// Counts (true, predicted) pairs into a 3×3 matrix.
pub fn confusion_matrix(pairs: &[(Class, Class)]) -> [[u64; 3]; 3] {
    let mut confusion = [[0u64; 3]; 3];
    for &(truth, predicted) in pairs {
        confusion[truth.index()][predicted.index()] += 1;
    }
    confusion
}

/// Per-class (precision, recall, F1) from a confusion matrix.
pub fn prf_from_confusion(confusion: &[[u64; 3]; 3]) -> [(f64, f64, f64); 3] {
    let mut out = [(0.0, 0.0, 0.0); 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let tp = confusion[c][c] as f64;
        let fp: f64 = (0..3).filter(|&t| t != c).map(|t| confusion[t][c] as f64).sum();
        let fn_: f64 = (0..3).filter(|&p| p != c).map(|p| confusion[c][p] as f64).sum();
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        *slot = (precision, recall, f1);
    }
    out
}

/// AUC of scores against binary truth via the rank statistic, tie-corrected
/// with average ranks. Degenerate inputs (one side empty) score 0.5.
pub fn one_vs_rest_auc(samples: &[(bool, f64)]) -> f64 {
    let n_pos = samples.iter().filter(|(pos, _)| *pos).count();
    let n_neg = samples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].1.total_cmp(&samples[b].1));
    // Walk runs of equal scores, assigning each member the run's mean rank.
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && samples[order[end]].1 == samples[order[start]].1 {
            end += 1;
        }
        // 1-based ranks start+1 ..= end average to this.
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            if samples[i].0 {
                rank_sum_pos += mean_rank;
            }
        }
        start = end;
    }
    let n_pos = n_pos as f64;
    (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64)
}

fn argmax_lowest(probs: &[f64; 3]) -> Class {
    let mut best = 0;
    for k in 1..3 {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    Class::from_index(best).expect("index in range")
}

/// Builds the full report from (true class, class probabilities) rows.
/// Predictions are the argmax, ties broken toward the lowest class index.
pub fn report_from_predictions(rows: &[(Class, [f64; 3])]) -> EvalReport {
    let pairs: Vec<(Class, Class)> = rows
        .iter()
        .map(|(truth, probs)| (*truth, argmax_lowest(probs)))
        .collect();
    let confusion = confusion_matrix(&pairs);
    let prf = prf_from_confusion(&confusion);

    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        auc: 0.0,
        support: 0,
    }; 3];
    for class in Class::ALL {
        let c = class.index();
        let samples: Vec<(bool, f64)> = rows
            .iter()
            .map(|(truth, probs)| (*truth == class, probs[c]))
            .collect();
        let (precision, recall, f1) = prf[c];
        per_class[c] = ClassMetrics {
            precision,
            recall,
            f1,
            auc: one_vs_rest_auc(&samples),
            support: confusion[c].iter().sum(),
        };
    }

    let total: u64 = per_class.iter().map(|m| m.support).sum();
    let correct: u64 = (0..3).map(|c| confusion[c][c]).sum();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class
                .iter()
                .map(|m| f(m) * m.support as f64)
                .sum::<f64>()
                / total as f64
        }
    };

    EvalReport {
        confusion,
        per_class,
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        macro_auc: mean(|m| m.auc),
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        weighted_f1: weighted(|m| m.f1),
        weighted_auc: weighted(|m| m.auc),
    }
}

/// Runs the model over the dataset and scores the predictions.
pub fn evaluate(model: &MlpModel, test: &Dataset) -> EvalReport {
    let rows: Vec<(Class, [f64; 3])> = test
        .examples
        .iter()
        .map(|e| (e.label, model.probabilities(&e.features)))
        .collect();
    report_from_predictions(&rows)
}

impl EvalReport {
    /// Human-oriented aligned table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "class", "precision", "recall", "f1", "auc", "support"
        ));
        for class in Class::ALL {
            let m = &self.per_class[class.index()];
            out.push_str(&format!(
                "{:<14} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9}\n",
                class.to_string(),
                m.precision,
                m.recall,
                m.f1,
                m.auc,
                m.support
            ));
        }
        out.push_str(&format!(
            "{:<14} {:>9.4} {:>9.4} {:>9.4} {:>9.4}\n",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1, self.macro_auc
        ));
        out.push_str(&format!(
            "{:<14} {:>9.4} {:>9.4} {:>9.4} {:>9.4}\n",
            "weighted",
            self.weighted_precision,
            self.weighted_recall,
            self.weighted_f1,
            self.weighted_auc
        ));
        out.push_str(&format!("accuracy {:.4}\n", self.accuracy));
        out.push_str("confusion (rows = true):\n");
        out.push_str(&format!(
            "{:<14} {:>9} {:>13} {:>11}\n",
            "", "decomp", "do-not-decomp", "indifferent"
        ));
        for class in Class::ALL {
            let row = self.confusion[class.index()];
            out.push_str(&format!(
                "{:<14} {:>9} {:>13} {:>11}\n",
                class.to_string(),
                row[0],
                row[1],
                row[2]
            ));
        }
        out
    }

    /// Machine-oriented `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for class in Class::ALL {
            let m = &self.per_class[class.index()];
            out.push_str(&format!("precision.{class}={:.6}\n", m.precision));
            out.push_str(&format!("recall.{class}={:.6}\n", m.recall));
            out.push_str(&format!("f1.{class}={:.6}\n", m.f1));
            out.push_str(&format!("auc.{class}={:.6}\n", m.auc));
            out.push_str(&format!("support.{class}={}\n", m.support));
        }
        out.push_str(&format!("precision.macro={:.6}\n", self.macro_precision));
        out.push_str(&format!("recall.macro={:.6}\n", self.macro_recall));
        out.push_str(&format!("f1.macro={:.6}\n", self.macro_f1));
        out.push_str(&format!("auc.macro={:.6}\n", self.macro_auc));
        out.push_str(&format!("precision.weighted={:.6}\n", self.weighted_precision));
        out.push_str(&format!("recall.weighted={:.6}\n", self.weighted_recall));
        out.push_str(&format!("f1.weighted={:.6}\n", self.weighted_f1));
        out.push_str(&format!("auc.weighted={:.6}\n", self.weighted_auc));
        out.push_str(&format!("accuracy={:.6}\n", self.accuracy));
        for t in Class::ALL {
            for p in Class::ALL {
                out.push_str(&format!(
                    "confusion.{t}.{p}={}\n",
                    self.confusion[t.index()][p.index()]
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_matrix_precision_recall_f1() {
        // A binary case embedded in the 3×3 layout: 8 true positives, 2
        // false negatives, 1 false positive.
        let confusion = [[8, 2, 0], [1, 9, 0], [0, 0, 0]];
        let prf = prf_from_confusion(&confusion);
        let (precision, recall, f1) = prf[0];
        assert!((precision - 8.0 / 9.0).abs() < 1e-12);
        assert!((recall - 0.8).abs() < 1e-12);
        assert!((f1 - 0.8421052631578948).abs() < 1e-12);
    }

    #[test]
    fn empty_denominators_score_zero() {
        // Class 2 never occurs and is never predicted.
        let confusion = [[5, 0, 0], [0, 5, 0], [0, 0, 0]];
        let prf = prf_from_confusion(&confusion);
        assert_eq!(prf[2], (0.0, 0.0, 0.0));
    }

    #[test]
    fn confusion_counts_pairs_with_row_supports() {
        let pairs = [
            (Class::Decomp, Class::Decomp),
            (Class::Decomp, Class::Indifferent),
            (Class::DoNotDecomp, Class::DoNotDecomp),
            (Class::Indifferent, Class::Indifferent),
            (Class::Indifferent, Class::Indifferent),
        ];
        let confusion = confusion_matrix(&pairs);
        assert_eq!(confusion, [[1, 0, 1], [0, 1, 0], [0, 0, 2]]);
        let row_sums: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums, [2, 1, 2]);
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let rows: Vec<(Class, [f64; 3])> = Class::ALL
            .into_iter()
            .cycle()
            .take(30)
            .map(|class| {
                let mut probs = [0.05, 0.05, 0.05];
                probs[class.index()] = 0.9;
                (class, probs)
            })
            .collect();
        let report = report_from_predictions(&rows);
        assert_eq!(report.accuracy, 1.0);
        for m in &report.per_class {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
            assert_eq!(m.auc, 1.0);
        }
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.weighted_f1, 1.0);
        assert_eq!(report.macro_auc, 1.0);
    }

    #[test]
    fn constant_scorer_has_chance_auc() {
        let rows: Vec<(Class, [f64; 3])> = Class::ALL
            .into_iter()
            .cycle()
            .take(12)
            .map(|class| (class, [1.0 / 3.0; 3]))
            .collect();
        let report = report_from_predictions(&rows);
        for m in &report.per_class {
            assert!((m.auc - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_counts_concordant_pairs() {
        // Positives 0.8 and 0.3 against negatives 0.5 and 0.1: three of the
        // four cross pairs rank the positive higher.
        let samples = [(true, 0.8), (true, 0.3), (false, 0.5), (false, 0.1)];
        assert!((one_vs_rest_auc(&samples) - 0.75).abs() < 1e-12);
        // A tie between a positive and a negative counts half.
        let tied = [(true, 0.5), (false, 0.5)];
        assert!((one_vs_rest_auc(&tied) - 0.5).abs() < 1e-12);
        // One-sided inputs are undefined; report chance level.
        assert_eq!(one_vs_rest_auc(&[(true, 0.9)]), 0.5);
    }

    #[test]
    fn weighted_aggregates_follow_support() {
        // 9 decomp examples all correct, 1 do-not-decomp misclassified.
        let mut rows: Vec<(Class, [f64; 3])> =
            (0..9).map(|_| (Class::Decomp, [0.8, 0.1, 0.1])).collect();
        rows.push((Class::DoNotDecomp, [0.8, 0.1, 0.1]));
        let report = report_from_predictions(&rows);
        // decomp: P = 9/10, R = 1; do-not-decomp and indifferent all zero.
        assert!((report.macro_recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((report.weighted_recall - 0.9).abs() < 1e-12);
        assert!((report.accuracy - 0.9).abs() < 1e-12);
        assert!((report.weighted_precision - 0.9 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn renderings_carry_the_headline_numbers() {
        let rows = vec![
            (Class::Decomp, [0.7, 0.2, 0.1]),
            (Class::DoNotDecomp, [0.1, 0.8, 0.1]),
            (Class::Indifferent, [0.2, 0.2, 0.6]),
        ];
        let report = report_from_predictions(&rows);
        let table = report.to_table();
        assert!(table.contains("accuracy 1.0000"));
        assert!(table.contains("confusion (rows = true):"));
        let kv = report.to_kv();
        assert!(kv.contains("f1.macro=1.000000"));
        assert!(kv.contains("confusion.decomp.decomp=1"));
    }
}
