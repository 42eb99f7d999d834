//! Question/sentence similarity: a built-in TF-IDF cosine and an HTTP
//! embedding client, both behind [`SimilarityScorer`].

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::sentences::{split_sentences, Sentence};
use super::{ProbeError, Result};
use crate::dataset::QADataset;
use crate::http::{EndpointConfig, JsonEndpoint};
use crate::metrics::normalize;

pub trait SimilarityScorer: Sync {
    /// Similarity of `question` to each sentence, in order.
    fn score_all(&self, question: &str, sentences: &[&str]) -> Result<Vec<f64>>;

    fn score(&self, question: &str, sentence: &str) -> Result<f64> {
        Ok(self.score_all(question, &[sentence])?[0])
    }
}

impl<T: SimilarityScorer + ?Sized> SimilarityScorer for &T {
    fn score_all(&self, question: &str, sentences: &[&str]) -> Result<Vec<f64>> {
        (**self).score_all(question, sentences)
    }
}

impl<T: SimilarityScorer + ?Sized + Send> SimilarityScorer for Box<T> {
    fn score_all(&self, question: &str, sentences: &[&str]) -> Result<Vec<f64>> {
        (**self).score_all(question, sentences)
    }
}

/// TF-IDF cosine over normalised tokens. IDF is smoothed,
/// `ln((1 + N) / (1 + df)) + 1`, with sentences as documents.
#[derive(Debug, Clone, Default)]
pub struct TfIdfScorer {
    doc_freq: HashMap<String, usize>,
    n_docs: usize,
}

impl TfIdfScorer {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut n_docs = 0;
        for d in docs {
            n_docs += 1;
            let mut terms = normalize(d);
            terms.sort();
            terms.dedup();
            for t in terms {
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }
        Self { doc_freq, n_docs }
    }

    /// Fit on every sentence of every distinct context in `ds`.
    pub fn fit_dataset(ds: &QADataset) -> Self {
        let mut seen = std::collections::HashSet::new();
        let sentences: Vec<String> = ds
            .iter()
            .filter(|e| seen.insert(e.context.as_str()))
            .flat_map(|e| split_sentences(&e.context).into_iter().map(|s| s.text))
            .collect();
        Self::fit(sentences.iter().map(String::as_str))
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0);
        ((1.0 + self.n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    // BTreeMap keeps the dot-product summation order fixed.
    fn vector(&self, text: &str) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in normalize(text) {
            *tf.entry(t).or_insert(0.0) += 1.0;
        }
        for (t, w) in tf.iter_mut() {
            *w *= self.idf(t);
        }
        tf
    }

    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        let va = self.vector(a);
        let vb = self.vector(b);
        let dot: f64 = va.iter().filter_map(|(t, w)| vb.get(t).map(|x| w * x)).sum();
        let na = va.values().map(|w| w * w).sum::<f64>().sqrt();
        let nb = vb.values().map(|w| w * w).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

impl SimilarityScorer for TfIdfScorer {
    fn score_all(&self, question: &str, sentences: &[&str]) -> Result<Vec<f64>> {
        Ok(sentences.iter().map(|s| self.cosine(question, s)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Remote sentence encoder: POST `{"texts": [q, s1, ...]}` and get back
/// `{"vectors": [[...], ...]}`; cosine is computed here.
#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    endpoint: JsonEndpoint,
}

impl EmbeddingClient {
    pub fn new(config: EndpointConfig) -> Self {
        Self {
            endpoint: JsonEndpoint::new(config),
        }
    }
}

pub fn cosine_vectors(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

impl SimilarityScorer for EmbeddingClient {
    fn score_all(&self, question: &str, sentences: &[&str]) -> Result<Vec<f64>> {
        let mut texts = vec![question];
        texts.extend_from_slice(sentences);
        let resp: EmbedResponse = self.endpoint.post(&EmbedRequest { texts })?;
        if resp.vectors.len() != sentences.len() + 1 {
            return Err(ProbeError::Service(crate::http::ServiceError::MalformedResponse(
                format!("expected {} vectors, got {}", sentences.len() + 1, resp.vectors.len()),
            )));
        }
        let dim = resp.vectors[0].len();
        if resp.vectors.iter().any(|v| v.len() != dim) {
            return Err(ProbeError::Service(crate::http::ServiceError::MalformedResponse(
                "vectors differ in dimension".into(),
            )));
        }
        Ok(resp.vectors[1..]
            .iter()
            .map(|v| cosine_vectors(&resp.vectors[0], v))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceMatch {
    pub index: usize,
    pub sentence: Sentence,
    pub score: f64,
}

/// The context sentence most similar to `question`; ties go to the earliest.
pub fn most_similar_sentence<S: SimilarityScorer + ?Sized>(
    question: &str,
    context: &str,
    scorer: &S,
) -> Result<SentenceMatch> {
    let sentences = split_sentences(context);
    best_sentence(question, sentences, scorer)
}

pub(crate) fn best_sentence<S: SimilarityScorer + ?Sized>(
    question: &str,
    mut sentences: Vec<Sentence>,
    scorer: &S,
) -> Result<SentenceMatch> {
    if sentences.is_empty() {
        return Err(ProbeError::EmptyContext);
    }
    let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
    let scores = scorer.score_all(question, &texts)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(SentenceMatch {
        index: best,
        score: scores[best],
        sentence: sentences.swap_remove(best),
    })
}
