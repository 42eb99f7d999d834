//! Answer normalisation and the token-overlap F1 / exact-match metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{QADataset, QAExample};
use crate::probes::{BiasFlagSet, BiasTag};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction for unknown qid {0}")]
    UnknownQid(String),
    #[error("invalid predictions file: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// qid -> predicted answer string.
pub type Predictions = BTreeMap<String, String>;

pub fn read_predictions(json: &str) -> Result<Predictions> {
    serde_json::from_str(json).map_err(|e| MetricsError::Json(e.to_string()))
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                | '\u{2019}'
                | '\u{201C}'
                | '\u{201D}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{2026}'
                | '\u{00AB}'
                | '\u{00BB}'
        )
}

/// Lowercase, drop punctuation, drop the articles a/an/the, split on whitespace.
pub fn normalize(s: &str) -> Vec<String> {
    let cleaned: String = s.to_lowercase().chars().filter(|&c| !is_punct(c)).collect();
    cleaned
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_string)
        .collect()
}

fn f1_tokens(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Max over golds of the bag-of-tokens F1, in `[0, 1]`.
pub fn token_f1<S: AsRef<str>>(pred: &str, golds: &[S]) -> f64 {
    let p = normalize(pred);
    golds
        .iter()
        .map(|g| f1_tokens(&p, &normalize(g.as_ref())))
        .fold(0.0, f64::max)
}

/// Normalised string equality against any gold.
pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S]) -> bool {
    let p = normalize(pred);
    golds.iter().any(|g| normalize(g.as_ref()) == p)
}

/// Gold strings an example is scored against: each answer span, plus the
/// space-joined spans (in context order) when there are several.
pub fn gold_strings(ex: &QAExample) -> Vec<String> {
    let mut golds: Vec<String> = ex.answers.iter().map(|a| a.text.clone()).collect();
    if ex.answers.len() > 1 {
        let mut ordered: Vec<_> = ex.answers.iter().collect();
        ordered.sort_by_key(|a| a.answer_start);
        golds.push(ordered.iter().map(|a| a.text.as_str()).collect::<Vec<_>>().join(" "));
    }
    golds
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub f1: f64,
    pub em: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Mean F1 over examples, scaled to `[0, 100]`.
    pub f1: f64,
    pub em: f64,
    pub n: usize,
    pub per_example: BTreeMap<String, ExampleScore>,
    /// Examples without a prediction; they score 0.
    pub missing: Vec<String>,
}

pub fn score_example(ex: &QAExample, prediction: &str) -> ExampleScore {
    let golds = gold_strings(ex);
    ExampleScore {
        f1: token_f1(prediction, &golds),
        em: if exact_match(prediction, &golds) { 1.0 } else { 0.0 },
    }
}

fn mean_percent<'a>(scores: impl Iterator<Item = &'a ExampleScore>, pick: fn(&ExampleScore) -> f64) -> (f64, usize) {
    let (sum, n) = scores.fold((0.0, 0usize), |(s, n), e| (s + pick(e), n + 1));
    if n == 0 {
        (0.0, 0)
    } else {
        (100.0 * sum / n as f64, n)
    }
}

/// Score predictions against a dataset.
///
/// Means are accumulated in qid order so the result does not depend on
/// example or map order.
pub fn evaluate(ds: &QADataset, predictions: &Predictions) -> Result<ScoreReport> {
    let known = ds.qids();
    if let Some(q) = predictions.keys().find(|q| !known.contains(q.as_str())) {
        return Err(MetricsError::UnknownQid(q.clone()));
    }
    let mut per_example = BTreeMap::new();
    let mut missing = Vec::new();
    for ex in &ds.examples {
        let score = match predictions.get(&ex.qid) {
            Some(p) => score_example(ex, p),
            None => {
                missing.push(ex.qid.clone());
                ExampleScore { f1: 0.0, em: 0.0 }
            }
        };
        per_example.insert(ex.qid.clone(), score);
    }
    missing.sort();
    let (f1, n) = mean_percent(per_example.values(), |s| s.f1);
    let (em, _) = mean_percent(per_example.values(), |s| s.em);
    Ok(ScoreReport {
        f1,
        em,
        n,
        per_example,
        missing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetDelta {
    pub subset_name: String,
    pub n: usize,
    pub baseline_f1: f64,
    pub variant_f1: f64,
    /// `variant_f1 - baseline_f1`.
    pub delta: f64,
}

/// Baseline vs variant F1 on the flagged and unflagged subsets of each tag.
pub fn subset_analysis(
    ds: &QADataset,
    flags: &BiasFlagSet,
    tags: &[BiasTag],
    baseline: &Predictions,
    variant: &Predictions,
) -> Result<Vec<SubsetDelta>> {
    let base = evaluate(ds, baseline)?;
    let var = evaluate(ds, variant)?;
    let mut out = Vec::with_capacity(tags.len() * 2);
    for &tag in tags {
        let flagged: BTreeSet<&str> = ds
            .iter()
            .map(|e| e.qid.as_str())
            .filter(|q| flags.has(q, tag))
            .collect();
        for (name, inside) in [
            (tag.as_str().to_string(), true),
            (format!("not_{}", tag.as_str()), false),
        ] {
            let select = |r: &ScoreReport| {
                mean_percent(
                    r.per_example
                        .iter()
                        .filter(|(q, _)| flagged.contains(q.as_str()) == inside)
                        .map(|(_, s)| s),
                    |s| s.f1,
                )
            };
            let (baseline_f1, n) = select(&base);
            let (variant_f1, _) = select(&var);
            if n == 0 {
                warn!("subset {name} is empty");
            }
            out.push(SubsetDelta {
                subset_name: name,
                n,
                baseline_f1,
                variant_f1,
                delta: variant_f1 - baseline_f1,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Answer;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("the Canadian Hot 100"), ["canadian", "hot", "100"]);
        assert!(normalize("").is_empty());
        assert_eq!(normalize("A.B."), ["ab"]);
        assert_eq!(normalize("“Diamonds”"), ["diamonds"]);
        assert_eq!(normalize("An apple, a day"), ["apple", "day"]);
    }

    #[test]
    fn token_f1_examples() {
        assert_eq!(token_f1("Canadian Hot 100", &["Canadian Hot 100"]), 1.0);
        assert!((token_f1("John", &["John Frusciante"]) - 2.0 / 3.0).abs() < 1e-12);
        assert!((token_f1("the chain", &["a large chain"]) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_f1("", &["x"]), 0.0);
        assert_eq!(token_f1("the", &["a"]), 1.0);
        assert_eq!(token_f1("Paris", &["Rome", "paris!"]), 1.0);
    }

    #[test]
    fn multiset_overlap_counts_repeats() {
        // pred [new, new, york], gold [new, york]: overlap 2, P=2/3, R=1
        assert!((token_f1("new new york", &["new york"]) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn discontinuous_answers_also_score_joined() {
        let ex = QAExample::new(
            "q",
            "who?",
            "Ann and Bo left.",
            vec![Answer::new("Bo", 8), Answer::new("Ann", 0)],
        );
        assert_eq!(gold_strings(&ex), ["Bo", "Ann", "Ann Bo"]);
        assert_eq!(score_example(&ex, "Ann Bo").f1, 1.0);
    }

    fn two() -> QADataset {
        QADataset::new(
            "t",
            vec![
                QAExample::new(
                    "a",
                    "?",
                    "John Frusciante played.",
                    vec![Answer::new("John Frusciante", 0)],
                ),
                QAExample::new(
                    "b",
                    "?",
                    "Canadian Hot 100 chart",
                    vec![Answer::new("Canadian Hot 100", 0)],
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_hand_scored() {
        let preds: Predictions = [
            ("a".to_string(), "John".to_string()),
            ("b".to_string(), "Canadian Hot 100".to_string()),
        ]
        .into_iter()
        .collect();
        let r = evaluate(&two(), &preds).unwrap();
        assert_eq!(r.n, 2);
        assert!((r.f1 - 100.0 * (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-9);
        assert_eq!(r.em, 50.0);
        assert!(r.missing.is_empty());
    }

    #[test]
    fn evaluate_empty_and_unknown() {
        let r = evaluate(&two(), &Predictions::new()).unwrap();
        assert_eq!((r.f1, r.em), (0.0, 0.0));
        assert_eq!(r.missing, ["a", "b"]);
        let bad: Predictions = [("zzz".to_string(), "x".to_string())].into_iter().collect();
        assert_eq!(evaluate(&two(), &bad), Err(MetricsError::UnknownQid("zzz".into())));
    }
}
