//! Span matching and per-class precision/recall/F1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{AnnotatedDocument, Annotation};

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Same label and at least one shared character.
    #[default]
    Relaxed,
    /// Same label and identical offsets.
    Strict,
}

/// A one-to-one pairing of predicted and gold annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    /// `(predicted, gold)` pairs.
    pub pairs: Vec<(Annotation, Annotation)>,
    pub unmatched_predicted: Vec<Annotation>,
    pub unmatched_gold: Vec<Annotation>,
}

/// Pairs same-label overlapping annotations, each used at most once, with as
/// many pairs as possible.
///
/// Predictions are visited by increasing end offset and each takes the
/// still-free overlapping gold span that ends first. Any optimal matching can
/// be rewritten to agree with that choice, so the result is maximum.
pub fn relaxed_match(predicted: &BTreeSet<Annotation>, gold: &BTreeSet<Annotation>) -> Matching {
    let mut preds: Vec<&Annotation> = predicted.iter().collect();
    preds.sort_by_key(|a| (a.end, a.start, a.label.as_str()));
    let mut golds: Vec<&Annotation> = gold.iter().collect();
    golds.sort_by_key(|a| (a.end, a.start, a.label.as_str()));
    let mut taken = vec![false; golds.len()];

    let mut matching = Matching::default();
    for p in preds {
        let choice = golds
            .iter()
            .enumerate()
            .find(|(i, g)| !taken[*i] && g.label == p.label && g.overlaps(p));
        match choice {
            Some((i, g)) => {
                taken[i] = true;
                matching.pairs.push((p.clone(), (*g).clone()));
            }
            None => matching.unmatched_predicted.push(p.clone()),
        }
    }
    matching.unmatched_gold = golds
        .into_iter()
        .zip(taken)
        .filter(|(_, t)| !t)
        .map(|(g, _)| g.clone())
        .collect();
    matching.pairs.sort();
    matching.unmatched_predicted.sort();
    matching.unmatched_gold.sort();
    matching
}

/// Pairs annotations that are exactly equal.
pub fn strict_match(predicted: &BTreeSet<Annotation>, gold: &BTreeSet<Annotation>) -> Matching {
    Matching {
        pairs: predicted
            .intersection(gold)
            .map(|a| (a.clone(), a.clone()))
            .collect(),
        unmatched_predicted: predicted.difference(gold).cloned().collect(),
        unmatched_gold: gold.difference(predicted).cloned().collect(),
    }
}

pub fn match_annotations(
    predicted: &BTreeSet<Annotation>,
    gold: &BTreeSet<Annotation>,
    mode: MatchMode,
) -> Matching {
    match mode {
        MatchMode::Relaxed => relaxed_match(predicted, gold),
        MatchMode::Strict => strict_match(predicted, gold),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    pub fn from_counts(label: impl Into<String>, tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            label: label.into(),
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: MatchMode,
    /// Sorted by label.
    pub per_label: Vec<ClassMetrics>,
    pub micro: ClassMetrics,
}

impl EvalReport {
    pub fn label(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_label.iter().find(|m| m.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// An aligned table with one row per label and the micro average last;
    /// scores are percentages.
    pub fn to_table(&self) -> String {
        let width = self
            .per_label
            .iter()
            .map(|m| m.label.chars().count())
            .chain(["label".len(), "micro".len()])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>6}  {:>6}  {:>5}  {:>5}  {:>5}",
            "label", "precision", "recall", "f1", "tp", "fp", "fn"
        );
        let rows = self
            .per_label
            .iter()
            .map(|m| (m.label.as_str(), m))
            .chain([("micro", &self.micro)]);
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.1}  {:>6.1}  {:>6.1}  {:>5}  {:>5}  {:>5}",
                name,
                m.precision * 100.0,
                m.recall * 100.0,
                m.f1 * 100.0,
                m.true_positives,
                m.false_positives,
                m.false_negatives,
            );
        }
        out
    }
}

/// Relaxed evaluation of `predictions` against `gold`, aligned by index.
pub fn evaluate(
    predictions: &[AnnotatedDocument],
    gold: &[AnnotatedDocument],
) -> Result<EvalReport, EvalError> {
    evaluate_with(predictions, gold, MatchMode::Relaxed)
}

pub fn evaluate_with(
    predictions: &[AnnotatedDocument],
    gold: &[AnnotatedDocument],
    mode: MatchMode,
) -> Result<EvalReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::CountMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    // label -> (tp, fp, fn)
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (index, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.text != g.text {
            return Err(EvalError::TextMismatch { index });
        }
        let labels: BTreeSet<&str> = p.labels().into_iter().chain(g.labels()).collect();
        for label in labels {
            let m = match_annotations(
                &p.filter_label(label).annotations,
                &g.filter_label(label).annotations,
                mode,
            );
            let entry = counts.entry(label.to_string()).or_default();
            entry.0 += m.pairs.len();
            entry.1 += m.unmatched_predicted.len();
            entry.2 += m.unmatched_gold.len();
        }
    }
    let per_label: Vec<ClassMetrics> = counts
        .iter()
        .map(|(l, &(tp, fp, fn_))| ClassMetrics::from_counts(l.clone(), tp, fp, fn_))
        .collect();
    let (tp, fp, fn_) = counts
        .values()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    Ok(EvalReport {
        mode,
        per_label,
        micro: ClassMetrics::from_counts("micro", tp, fp, fn_),
    })
}
