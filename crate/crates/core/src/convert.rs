//! Coreference clusters to extractive QA examples.
//!
//! Every non-first mention of a cluster (the anaphor) is paired with a
//! non-pronominal earlier mention of the same cluster (the antecedent). The
//! anaphor's sentence becomes the query, either as a marked declarative
//! sentence, a rule-generated question, or whatever an external generator
//! returns. The antecedent is the answer and the whole document the context.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conll::{ConllError, Document, MentionSpan};
use crate::dataset::{Answer, DatasetError, QADataset, QAExample, DOC_TAG};
use crate::http::{EndpointConfig, JsonEndpoint, ServiceError};
use crate::lexicon::Lexicon;
use crate::metrics::normalize;
use crate::text::fold_whitespace_lower;

pub const REF_OPEN: &str = "<ref>";
pub const REF_CLOSE: &str = "</ref>";
/// Tag prefix recording the conversion mode of an example.
pub const MODE_TAG: &str = "mode:";

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error(transparent)]
    Conll(#[from] ConllError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("external mode needs a question generator")]
    MissingGenerator,
    #[error("unknown conversion mode {0:?}")]
    UnknownMode(String),
}

pub type Result<T> = std::result::Result<T, ConvertError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dec,
    Rule,
    External,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Dec => "dec",
            Mode::Rule => "rule",
            Mode::External => "external",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConvertError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dec" => Ok(Mode::Dec),
            "rule" => Ok(Mode::Rule),
            "external" => Ok(Mode::External),
            other => Err(ConvertError::UnknownMode(other.to_string())),
        }
    }
}

/// Which earlier non-pronominal mention answers an anaphor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntecedentPolicy {
    /// First non-pronominal mention of the cluster before the anaphor.
    #[default]
    Earliest,
    /// Nearest non-pronominal mention before the anaphor.
    Closest,
}

/// Rendered document text plus the char start of every token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedContext {
    pub text: String,
    /// `offsets[sentence][token]`.
    pub offsets: Vec<Vec<usize>>,
}

impl RenderedContext {
    pub fn mention_start(&self, m: &MentionSpan) -> Option<usize> {
        self.offsets.get(m.sentence_index)?.get(m.start_token).copied()
    }
}

/// Tokens and sentences joined by single spaces.
pub fn render_context(doc: &Document) -> RenderedContext {
    let mut text = String::new();
    let mut pos = 0usize;
    let mut offsets = Vec::with_capacity(doc.sentences.len());
    for sent in &doc.sentences {
        let mut row = Vec::with_capacity(sent.len());
        for tok in sent {
            if !text.is_empty() {
                text.push(' ');
                pos += 1;
            }
            row.push(pos);
            text.push_str(&tok.text);
            pos += tok.text.chars().count();
        }
        offsets.push(row);
    }
    RenderedContext { text, offsets }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnaphorPair {
    pub anaphor: MentionSpan,
    pub antecedent: MentionSpan,
}

fn same_surface(a: &str, b: &str) -> bool {
    fold_whitespace_lower(a) == fold_whitespace_lower(b) || normalize(a) == normalize(b)
}

/// (anaphor, antecedent) pairs in document order of the anaphor.
pub fn select_anaphors(
    doc: &Document,
    lexicon: &Lexicon,
    policy: AntecedentPolicy,
) -> std::result::Result<Vec<AnaphorPair>, ConllError> {
    let mut pairs = Vec::new();
    for cluster in &doc.clusters {
        let texts: Vec<String> = cluster
            .mentions
            .iter()
            .map(|m| doc.mention_text(m))
            .collect::<std::result::Result<_, _>>()?;
        let proper: Vec<bool> = texts.iter().map(|t| !lexicon.is_pronominal(t)).collect();
        for i in 1..cluster.mentions.len() {
            let found = match policy {
                AntecedentPolicy::Earliest => (0..i).find(|&j| proper[j]),
                AntecedentPolicy::Closest => (0..i).rev().find(|&j| proper[j]),
            };
            let Some(j) = found else { continue };
            if same_surface(&texts[i], &texts[j]) {
                continue;
            }
            pairs.push(AnaphorPair {
                anaphor: cluster.mentions[i],
                antecedent: cluster.mentions[j],
            });
        }
    }
    pairs.sort_by_key(|p| (p.anaphor.position(), p.anaphor.cluster_id));
    Ok(pairs)
}

/// A declarative query and the char span of the marked anaphor inside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecQuery {
    pub query: String,
    pub mention_start: usize,
    /// Exclusive.
    pub mention_end: usize,
}

/// The anaphor's sentence with `<ref> ` and ` </ref>` around the anaphor.
pub fn build_dec_query(doc: &Document, anaphor: &MentionSpan) -> std::result::Result<DecQuery, ConllError> {
    doc.tokens(anaphor.sentence_index, anaphor.start_token, anaphor.end_token)?;
    let sent = &doc.sentences[anaphor.sentence_index];
    let mut query = String::new();
    let mut len = 0usize;
    let mut mention_start = 0;
    let mut mention_end = 0;
    let mut push = |query: &mut String, word: &str| {
        if !query.is_empty() {
            query.push(' ');
            len += 1;
        }
        query.push_str(word);
        len += word.chars().count();
        len
    };
    for (i, tok) in sent.iter().enumerate() {
        if i == anaphor.start_token {
            mention_start = push(&mut query, REF_OPEN) + 1;
        }
        let end = push(&mut query, &tok.text);
        if i == anaphor.end_token {
            mention_end = end;
            push(&mut query, REF_CLOSE);
        }
    }
    Ok(DecQuery {
        query,
        mention_start,
        mention_end,
    })
}

fn is_person_cluster(doc: &Document, cluster_id: u32, lexicon: &Lexicon) -> bool {
    let Some(cluster) = doc.cluster(cluster_id) else {
        return false;
    };
    cluster.mentions.iter().any(|m| {
        doc.mention_text(m).is_ok_and(|t| lexicon.is_person_pronoun(&t))
            || doc
                .entities
                .iter()
                .any(|e| e.label == "PERSON" && m.overlaps(e.sentence_index, e.start_token, e.end_token))
    })
}

const CLOSING_QUOTES: &[char] = &['\'', '"', '\u{2019}', '\u{201D}'];

fn strip_terminal_period(s: &str) -> String {
    let s = s.trim_end();
    if let Some(rest) = s.strip_suffix('.') {
        return rest.trim_end().to_string();
    }
    if let Some(q) = s.chars().last().filter(|c| CLOSING_QUOTES.contains(c)) {
        let inner = &s[..s.len() - q.len_utf8()];
        if let Some(rest) = inner.strip_suffix('.') {
            return format!("{rest}{q}");
        }
    }
    s.to_string()
}

/// Subject-position wh-question for the anaphor's sentence, or `None` when
/// no cluster-mate starts the sentence.
pub fn rule_generate_question(
    doc: &Document,
    anaphor: &MentionSpan,
    lexicon: &Lexicon,
) -> std::result::Result<Option<String>, ConllError> {
    doc.tokens(anaphor.sentence_index, anaphor.start_token, anaphor.end_token)?;
    let Some(cluster) = doc.cluster(anaphor.cluster_id) else {
        return Ok(None);
    };
    let subject = cluster
        .mentions
        .iter()
        .filter(|m| m.sentence_index == anaphor.sentence_index && m.start_token == 0)
        .max_by_key(|m| m.end_token);
    let Some(subject) = subject else {
        return Ok(None);
    };
    let wh = if is_person_cluster(doc, anaphor.cluster_id, lexicon) {
        "who"
    } else {
        "what"
    };
    let sent = &doc.sentences[anaphor.sentence_index];
    let mut words = vec![wh];
    words.extend(sent[subject.end_token + 1..].iter().map(|t| t.text.as_str()));
    let lowered = words.join(" ").to_lowercase();
    let body = strip_terminal_period(&lowered);
    if body.ends_with('?') {
        Ok(Some(body))
    } else {
        Ok(Some(format!("{body}?")))
    }
}

/// External question generation from a marked declarative query.
pub trait QuestionGenerator: Sync {
    /// `None` means the generator produced nothing for this query.
    fn generate(&self, query: &DecQuery) -> std::result::Result<Option<String>, ServiceError>;
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    query: &'a str,
    mention_start: usize,
    mention_end: usize,
}

#[derive(Deserialize)]
struct GenerateResponse {
    question: String,
}

/// POST `{"query", "mention_start", "mention_end"}`, expect `{"question"}`.
/// Mention offsets are char offsets of the anaphor inside the query.
#[derive(Debug, Clone)]
pub struct HttpQuestionGenerator {
    endpoint: JsonEndpoint,
}

impl HttpQuestionGenerator {
    pub fn new(config: EndpointConfig) -> Self {
        Self {
            endpoint: JsonEndpoint::new(config),
        }
    }
}

impl QuestionGenerator for HttpQuestionGenerator {
    fn generate(&self, query: &DecQuery) -> std::result::Result<Option<String>, ServiceError> {
        let resp: GenerateResponse = self.endpoint.post(&GenerateRequest {
            query: &query.query,
            mention_start: query.mention_start,
            mention_end: query.mention_end,
        })?;
        Ok((!resp.question.trim().is_empty()).then_some(resp.question))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionTuple {
    pub qid: String,
    pub doc_id: String,
    pub part: u32,
    pub query_or_question: String,
    pub answer: Answer,
    pub context: String,
    pub anaphor: MentionSpan,
    pub antecedent: MentionSpan,
    pub mode: Mode,
}

impl ConversionTuple {
    pub fn to_example(&self) -> QAExample {
        QAExample::new(
            self.qid.clone(),
            self.query_or_question.clone(),
            self.context.clone(),
            vec![self.answer.clone()],
        )
        .with_tag(format!("{DOC_TAG}{}#{}", self.doc_id, self.part))
        .with_tag(format!("{MODE_TAG}{}", self.mode))
    }
}

pub struct ConvertOptions<'a> {
    pub lexicon: Lexicon,
    pub policy: AntecedentPolicy,
    pub generator: Option<&'a dyn QuestionGenerator>,
}

impl Default for ConvertOptions<'_> {
    fn default() -> Self {
        Self {
            lexicon: Lexicon::default(),
            policy: AntecedentPolicy::default(),
            generator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    /// Sorted by qid.
    pub tuples: Vec<ConversionTuple>,
    /// Anaphor pairs that produced no question.
    pub skipped: usize,
}

impl Conversion {
    pub fn dataset(&self, name: impl Into<String>) -> Result<QADataset> {
        Ok(QADataset::new(
            name,
            self.tuples.iter().map(ConversionTuple::to_example).collect(),
        )?)
    }
}

fn convert_document(doc: &Document, mode: Mode, opts: &ConvertOptions<'_>) -> Result<(Vec<ConversionTuple>, usize)> {
    let rendered = render_context(doc);
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut used = HashSet::new();
    for pair in select_anaphors(doc, &opts.lexicon, opts.policy)? {
        let question = match mode {
            Mode::Dec => Some(build_dec_query(doc, &pair.anaphor)?.query),
            Mode::Rule => rule_generate_question(doc, &pair.anaphor, &opts.lexicon)?,
            Mode::External => {
                let generator = opts.generator.ok_or(ConvertError::MissingGenerator)?;
                generator.generate(&build_dec_query(doc, &pair.anaphor)?)?
            }
        };
        let Some(question) = question else {
            skipped += 1;
            continue;
        };
        let a = pair.anaphor;
        let mut qid = format!(
            "{}.{}.{}.{}-{}.{}",
            doc.doc_id, doc.part, a.sentence_index, a.start_token, a.end_token, mode
        );
        if !used.insert(qid.clone()) {
            qid = format!("{qid}.c{}", a.cluster_id);
            used.insert(qid.clone());
        }
        let answer_start = rendered
            .mention_start(&pair.antecedent)
            .expect("select_anaphors checked the span");
        out.push(ConversionTuple {
            qid,
            doc_id: doc.doc_id.clone(),
            part: doc.part,
            query_or_question: question,
            answer: Answer::new(doc.mention_text(&pair.antecedent)?, answer_start),
            context: rendered.text.clone(),
            anaphor: pair.anaphor,
            antecedent: pair.antecedent,
            mode,
        });
    }
    Ok((out, skipped))
}

/// Convert every document, in parallel, into conversion tuples.
pub fn convert(docs: &[Document], mode: Mode, opts: &ConvertOptions<'_>) -> Result<Conversion> {
    if mode == Mode::External && opts.generator.is_none() {
        return Err(ConvertError::MissingGenerator);
    }
    let per_doc: Vec<(Vec<ConversionTuple>, usize)> = docs
        .par_iter()
        .map(|d| convert_document(d, mode, opts))
        .collect::<Result<_>>()?;
    let mut tuples = Vec::new();
    let mut skipped = 0;
    for (t, s) in per_doc {
        tuples.extend(t);
        skipped += s;
    }
    tuples.sort_by(|a, b| a.qid.cmp(&b.qid));
    Ok(Conversion { tuples, skipped })
}
