//! Bias probes: dataset transforms, heuristic solvers, prediction scorers
//! and ratio reports.

mod entities;
mod report;
mod sentences;
mod similarity;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Answer, DatasetError, QADataset, QAExample};
use crate::http::ServiceError;
use crate::lexicon::{strip_punct, DEFAULT_WH_WORDS};
use crate::metrics::{exact_match, gold_strings, token_f1, Predictions};
use crate::text::{char_slice, find_char};

pub use entities::{
    capitalized_runs, AttachedEntities, CapitalizationHeuristic, ConllEntities, EntityChain, EntitySource, NameSpan,
};
pub use report::{bias_report, BiasReport, Bootstrap, BootstrapBounds, ProbeRatio};
pub use sentences::{sentence_of, split_sentences, Sentence};
pub use similarity::{
    cosine_vectors, most_similar_sentence, EmbeddingClient, SentenceMatch, SimilarityScorer, TfIdfScorer,
};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("context has no sentences")]
    EmptyContext,
    #[error("question is empty")]
    EmptyQuestion,
    #[error("bootstrap subset size {s} exceeds dataset size {n}")]
    SubsetTooLarge { s: usize, n: usize },
    #[error("invalid bootstrap spec: {0}")]
    InvalidBootstrap(String),
    #[error("unknown qid {0}")]
    UnknownQid(String),
    #[error("unknown bias tag {0:?}")]
    UnknownTag(String),
    #[error("invalid json: {0}")]
    Json(String),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub type Result<T> = std::result::Result<T, ProbeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasTag {
    RandomNe,
    WhWord,
    EmptyQuestion,
    SemanticOverlap,
    ShortDistance,
}

impl BiasTag {
    pub const ALL: [BiasTag; 5] = [
        BiasTag::RandomNe,
        BiasTag::WhWord,
        BiasTag::EmptyQuestion,
        BiasTag::SemanticOverlap,
        BiasTag::ShortDistance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BiasTag::RandomNe => "random_ne",
            BiasTag::WhWord => "wh_word",
            BiasTag::EmptyQuestion => "empty_question",
            BiasTag::SemanticOverlap => "semantic_overlap",
            BiasTag::ShortDistance => "short_distance",
        }
    }
}

impl fmt::Display for BiasTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasTag {
    type Err = ProbeError;

    fn from_str(s: &str) -> Result<Self> {
        BiasTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ProbeError::UnknownTag(s.to_string()))
    }
}

/// qid -> bias tags. Serialised as a JSON object of qid -> [tag, ...].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiasFlagSet(BTreeMap<String, BTreeSet<BiasTag>>);

impl BiasFlagSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: impl Into<String>, tag: BiasTag) {
        self.0.entry(qid.into()).or_default().insert(tag);
    }

    pub fn has(&self, qid: &str, tag: BiasTag) -> bool {
        self.0.get(qid).is_some_and(|t| t.contains(&tag))
    }

    pub fn tags(&self, qid: &str) -> impl Iterator<Item = BiasTag> + '_ {
        self.0.get(qid).into_iter().flatten().copied()
    }

    pub fn count(&self, tag: BiasTag) -> usize {
        self.0.values().filter(|t| t.contains(&tag)).count()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(BTreeSet::is_empty)
    }

    pub fn merge(&mut self, other: BiasFlagSet) {
        for (qid, tags) in other.0 {
            self.0.entry(qid).or_default().extend(tags);
        }
    }

    /// Every flagged qid must exist in `ds`.
    pub fn validate_against(&self, ds: &QADataset) -> Result<()> {
        let known = ds.qids();
        match self.0.keys().find(|q| !known.contains(q.as_str())) {
            Some(q) => Err(ProbeError::UnknownQid(q.clone())),
            None => Ok(()),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| ProbeError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("flag sets always serialise")
    }
}

/// When a prediction counts as solving an example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "threshold")]
pub enum Solved {
    /// Token F1 against the golds at or above the threshold.
    F1(f64),
    Exact,
}

impl Default for Solved {
    fn default() -> Self {
        Solved::F1(0.8)
    }
}

impl Solved {
    pub fn check(self, prediction: &str, ex: &QAExample) -> bool {
        let golds = gold_strings(ex);
        match self {
            Solved::F1(t) => token_f1(prediction, &golds) >= t,
            Solved::Exact => exact_match(prediction, &golds),
        }
    }
}

/// Flag examples whose gold answer lies entirely inside the sentence most
/// similar to the question.
pub fn probe_semantic_overlap<S: SimilarityScorer + ?Sized>(ds: &QADataset, scorer: &S) -> Result<BiasFlagSet> {
    let hits: Vec<Option<&str>> = ds
        .examples
        .par_iter()
        .map(|ex| {
            let sentences = split_sentences(&ex.context);
            if sentences.is_empty() {
                return Ok(None);
            }
            let best = similarity::best_sentence(&ex.question, sentences, scorer)?;
            let inside = ex
                .answers
                .iter()
                .any(|a| best.sentence.contains_span(a.answer_start, a.end()));
            Ok(inside.then_some(ex.qid.as_str()))
        })
        .collect::<Result<_>>()?;
    let mut flags = BiasFlagSet::new();
    for q in hits.into_iter().flatten() {
        flags.insert(q, BiasTag::SemanticOverlap);
    }
    Ok(flags)
}

/// Distinct entity strings in first-seen order.
fn distinct(entities: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    entities
        .into_iter()
        .filter(|e| !e.is_empty() && seen.insert(e.clone()))
        .collect()
}

/// One uniformly drawn PERSON entity per example, as a prediction.
///
/// A single generator seeded with `seed` walks the examples in order and
/// draws only for examples that have at least one entity, so the choice for
/// an example depends on the seed and on the entity counts before it.
pub fn random_ne_predictions<E: EntitySource + ?Sized>(ds: &QADataset, source: &E, seed: u64) -> Predictions {
    let candidates: Vec<Vec<String>> = ds
        .examples
        .par_iter()
        .map(|ex| distinct(source.person_entities(ex).unwrap_or_default()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Predictions::new();
    for (ex, cands) in ds.iter().zip(candidates) {
        if cands.is_empty() {
            continue;
        }
        let pick = rng.random_range(0..cands.len());
        out.insert(ex.qid.clone(), cands[pick].clone());
    }
    out
}

/// Flag examples a randomly drawn PERSON entity answers correctly.
pub fn probe_random_ne<E: EntitySource + ?Sized>(ds: &QADataset, source: &E, seed: u64, solved: Solved) -> BiasFlagSet {
    let preds = random_ne_predictions(ds, source, seed);
    score_probe_predictions(ds, &preds, solved, BiasTag::RandomNe).expect("predictions are drawn from ds")
}

fn retitled(ds: &QADataset, suffix: &str, examples: Vec<QAExample>) -> QADataset {
    QADataset {
        name: format!("{}.{suffix}", ds.name),
        examples,
    }
}

/// Keep only the interrogative words of each question, in order.
pub fn transform_wh_only(ds: &QADataset, wh_words: &[&str]) -> QADataset {
    let examples = ds
        .iter()
        .map(|ex| {
            let wh: Vec<String> = ex
                .question
                .split_whitespace()
                .map(|t| strip_punct(t).to_lowercase())
                .filter(|t| wh_words.iter().any(|w| w.eq_ignore_ascii_case(t)))
                .collect();
            QAExample {
                question: wh.join(" "),
                ..ex.clone()
            }
        })
        .collect();
    retitled(ds, "whword", examples)
}

pub fn transform_wh_only_default(ds: &QADataset) -> QADataset {
    transform_wh_only(ds, DEFAULT_WH_WORDS)
}

pub fn transform_empty_question(ds: &QADataset) -> QADataset {
    let examples = ds
        .iter()
        .map(|ex| QAExample {
            question: String::new(),
            ..ex.clone()
        })
        .collect();
    retitled(ds, "empty", examples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortContext {
    pub dataset: QADataset,
    /// qids removed because the chosen sentence holds no gold answer.
    pub dropped: Vec<String>,
}

fn answers_in_sentence(ex: &QAExample, sent: &Sentence) -> Vec<Answer> {
    let mut kept: Vec<Answer> = Vec::new();
    for a in &ex.answers {
        let local = if sent.contains_span(a.answer_start, a.end()) {
            Some(a.answer_start - sent.start)
        } else {
            find_char(&sent.text, &a.text)
        };
        if let Some(start) = local {
            let answer = Answer::new(a.text.clone(), start);
            if !kept.contains(&answer) {
                kept.push(answer);
            }
        }
    }
    kept
}

/// Replace each context by its sentence most similar to the question.
/// Answers the sentence contains are re-offset into it; examples left with
/// none are dropped.
pub fn transform_short_context<S: SimilarityScorer + ?Sized>(ds: &QADataset, scorer: &S) -> Result<ShortContext> {
    let outcomes: Vec<Option<QAExample>> = ds
        .examples
        .par_iter()
        .map(|ex| {
            let sentences = split_sentences(&ex.context);
            if sentences.is_empty() {
                return Ok(None);
            }
            let best = similarity::best_sentence(&ex.question, sentences, scorer)?;
            let answers = answers_in_sentence(ex, &best.sentence);
            Ok((!answers.is_empty()).then(|| QAExample {
                context: best.sentence.text.clone(),
                answers,
                ..ex.clone()
            }))
        })
        .collect::<Result<_>>()?;
    let mut examples = Vec::new();
    let mut dropped = Vec::new();
    for (ex, out) in ds.iter().zip(outcomes) {
        match out {
            Some(e) => examples.push(e),
            None => dropped.push(ex.qid.clone()),
        }
    }
    let dataset = retitled(ds, "shortctx", examples);
    dataset.validate()?;
    Ok(ShortContext { dataset, dropped })
}

/// Flag the examples an external model's predictions solve.
pub fn score_probe_predictions(
    ds: &QADataset,
    predictions: &Predictions,
    solved: Solved,
    tag: BiasTag,
) -> Result<BiasFlagSet> {
    let known = ds.qids();
    if let Some(q) = predictions.keys().find(|q| !known.contains(q.as_str())) {
        return Err(ProbeError::UnknownQid(q.clone()));
    }
    let mut flags = BiasFlagSet::new();
    for ex in ds.iter() {
        if let Some(p) = predictions.get(&ex.qid) {
            if solved.check(p, ex) {
                flags.insert(ex.qid.clone(), tag);
            }
        }
    }
    Ok(flags)
}

/// Whether char span `[start, end)` of `context` lies in one sentence.
pub fn span_sentence(context: &str, start: usize, end: usize) -> Option<usize> {
    char_slice(context, start, end)?;
    split_sentences(context)
        .iter()
        .position(|s| s.contains_span(start, end))
}
