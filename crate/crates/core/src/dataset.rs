//! Extractive QA datasets in the SQuAD JSON schema.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::{classify_mention, MentionEvidence};
use crate::lexicon::Lexicon;
use crate::text::{char_len, char_slice};

mod multirc;

pub use multirc::{convert_multirc, MultircOptions, MultircSummary};

/// Tag prefix naming the source document of an example.
pub const DOC_TAG: &str = "doc:";
/// Tag prefix naming the dataset an example came from in a merge.
pub const SOURCE_TAG: &str = "source:";

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("{qid}: answer {text:?} not found at offset {answer_start} (found {found:?})")]
    OffsetMismatch {
        qid: String,
        text: String,
        answer_start: usize,
        found: Option<String>,
    },
    #[error("duplicate qid {0}")]
    DuplicateQid(String),
    #[error("{0}: example has no answers")]
    NoAnswers(String),
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invalid json: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Char offset into the context.
    pub answer_start: usize,
}

impl Answer {
    pub fn new(text: impl Into<String>, answer_start: usize) -> Self {
        Self {
            text: text.into(),
            answer_start,
        }
    }

    /// Exclusive char end.
    pub fn end(&self) -> usize {
        self.answer_start + char_len(&self.text)
    }

    pub fn matches(&self, context: &str) -> bool {
        char_slice(context, self.answer_start, self.end()) == Some(self.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub qid: String,
    pub question: String,
    pub context: String,
    pub answers: Vec<Answer>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub tags: BTreeSet<String>,
}

impl QAExample {
    pub fn new(
        qid: impl Into<String>,
        question: impl Into<String>,
        context: impl Into<String>,
        answers: Vec<Answer>,
    ) -> Self {
        Self {
            qid: qid.into(),
            question: question.into(),
            context: context.into(),
            answers,
            tags: BTreeSet::new(),
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    /// The source document id, when tagged with one.
    pub fn doc_id(&self) -> Option<&str> {
        self.tags.iter().find_map(|t| t.strip_prefix(DOC_TAG))
    }

    pub fn answer_texts(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.text.as_str()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.answers.is_empty() {
            return Err(DatasetError::NoAnswers(self.qid.clone()));
        }
        for a in &self.answers {
            if !a.matches(&self.context) {
                return Err(DatasetError::OffsetMismatch {
                    qid: self.qid.clone(),
                    text: a.text.clone(),
                    answer_start: a.answer_start,
                    found: char_slice(&self.context, a.answer_start, a.end()).map(str::to_string),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QADataset {
    pub name: String,
    pub examples: Vec<QAExample>,
}

impl QADataset {
    /// Build a dataset, checking qid uniqueness and every answer offset.
    pub fn new(name: impl Into<String>, examples: Vec<QAExample>) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            examples,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            examples: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for ex in &self.examples {
            if !seen.insert(ex.qid.as_str()) {
                return Err(DatasetError::DuplicateQid(ex.qid.clone()));
            }
            ex.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, QAExample> {
        self.examples.iter()
    }

    pub fn get(&self, qid: &str) -> Option<&QAExample> {
        self.examples.iter().find(|e| e.qid == qid)
    }

    pub fn qids(&self) -> BTreeSet<&str> {
        self.examples.iter().map(|e| e.qid.as_str()).collect()
    }

    /// Keep a subset of examples under a new name.
    pub fn filtered(&self, name: impl Into<String>, keep: impl Fn(&QAExample) -> bool) -> Self {
        Self {
            name: name.into(),
            examples: self.examples.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }
}

// --- SQuAD wire format ------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SquadFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    data: Vec<SquadArticle>,
}

#[derive(Serialize, Deserialize)]
struct SquadArticle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Serialize, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Serialize, Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    answers: Vec<Answer>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    tags: BTreeSet<String>,
}

/// Parse SQuAD-schema JSON. `fallback_name` is used when the file carries no `name`.
pub fn read_squad_json(input: &str, fallback_name: &str) -> Result<QADataset> {
    let file: SquadFile = serde_json::from_str(input).map_err(|e| DatasetError::Json(e.to_string()))?;
    let mut examples = Vec::new();
    for article in file.data {
        for para in article.paragraphs {
            for qa in para.qas {
                examples.push(QAExample {
                    qid: qa.id,
                    question: qa.question,
                    context: para.context.clone(),
                    answers: qa.answers,
                    tags: qa.tags,
                });
            }
        }
    }
    QADataset::new(file.name.unwrap_or_else(|| fallback_name.to_string()), examples)
}

/// Serialize to SQuAD-schema JSON. Consecutive examples sharing a context
/// become one paragraph.
pub fn write_squad_json(ds: &QADataset) -> String {
    let mut paragraphs: Vec<SquadParagraph> = Vec::new();
    for ex in &ds.examples {
        let qa = SquadQa {
            id: ex.qid.clone(),
            question: ex.question.clone(),
            answers: ex.answers.clone(),
            tags: ex.tags.clone(),
        };
        match paragraphs.last_mut() {
            Some(p) if p.context == ex.context => p.qas.push(qa),
            _ => paragraphs.push(SquadParagraph {
                context: ex.context.clone(),
                qas: vec![qa],
            }),
        }
    }
    let file = SquadFile {
        version: Some("1.1".into()),
        name: Some(ds.name.clone()),
        data: if paragraphs.is_empty() {
            Vec::new()
        } else {
            vec![SquadArticle {
                title: Some(ds.name.clone()),
                paragraphs,
            }]
        },
    };
    serde_json::to_string_pretty(&file).expect("dataset serializes")
}

pub fn read_squad_file(path: &Path) -> Result<QADataset> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    read_squad_json(&text, stem)
}

pub fn write_squad_file(ds: &QADataset, path: &Path) -> Result<()> {
    std::fs::write(path, write_squad_json(ds) + "\n").map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

// --- dataset algebra --------------------------------------------------------

/// Concatenate datasets in order, tagging each example with its source.
pub fn merge(datasets: &[QADataset], name: impl Into<String>) -> Result<QADataset> {
    let mut seen = HashSet::new();
    let mut examples = Vec::with_capacity(datasets.iter().map(QADataset::len).sum());
    for ds in datasets {
        for ex in &ds.examples {
            if !seen.insert(ex.qid.clone()) {
                return Err(DatasetError::DuplicateQid(ex.qid.clone()));
            }
            examples.push(ex.clone().with_tag(format!("{SOURCE_TAG}{}", ds.name)));
        }
    }
    Ok(QADataset {
        name: name.into(),
        examples,
    })
}

/// Deterministic train/test split.
///
/// Examples tagged with a source document are grouped so that a document
/// never straddles the split; untagged examples are their own group. The
/// test side receives `round(test_fraction * groups)` groups.
pub fn split(ds: &QADataset, test_fraction: f64, seed: u64) -> Result<(QADataset, QADataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    let mut groups: Vec<String> = Vec::new();
    let mut group_of: Vec<usize> = Vec::with_capacity(ds.len());
    let mut index: HashMap<String, usize> = HashMap::new();
    for ex in &ds.examples {
        let key = match ex.doc_id() {
            Some(d) => format!("d\u{0}{d}"),
            None => format!("q\u{0}{}", ex.qid),
        };
        let g = *index.entry(key.clone()).or_insert_with(|| {
            groups.push(key);
            groups.len() - 1
        });
        group_of.push(g);
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (test_fraction * groups.len() as f64).round() as usize;
    let test_groups: HashSet<usize> = order.into_iter().take(n_test).collect();

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (ex, g) in ds.examples.iter().zip(group_of) {
        if test_groups.contains(&g) {
            test.push(ex.clone());
        } else {
            train.push(ex.clone());
        }
    }
    Ok((
        QADataset {
            name: format!("{}.train", ds.name),
            examples: train,
        },
        QADataset {
            name: format!("{}.test", ds.name),
            examples: test,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub example_count: usize,
    pub unique_contexts: usize,
    /// Mean context length in chars over examples.
    pub mean_context_length: f64,
    pub mean_question_tokens: f64,
    pub mean_answers_per_example: f64,
    /// Keyed by `numeric`, `proper`, `nominal`, `pronoun`, using the first answer.
    pub answer_types: BTreeMap<String, usize>,
}

fn answer_type(text: &str, lexicon: &Lexicon) -> &'static str {
    let has_digit = text.chars().any(|c| c.is_ascii_digit());
    let has_alpha = text.chars().any(char::is_alphabetic);
    if has_digit && !has_alpha {
        return "numeric";
    }
    if text.trim().is_empty() {
        return "nominal";
    }
    classify_mention(text, &MentionEvidence::default(), lexicon).as_str()
}

pub fn stats(ds: &QADataset) -> DatasetStats {
    let n = ds.len();
    let mean = |total: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    let lexicon = Lexicon::default();
    let mut answer_types = BTreeMap::new();
    for ex in &ds.examples {
        if let Some(a) = ex.answers.first() {
            *answer_types
                .entry(answer_type(&a.text, &lexicon).to_string())
                .or_insert(0) += 1;
        }
    }
    DatasetStats {
        name: ds.name.clone(),
        example_count: n,
        unique_contexts: ds.iter().map(|e| e.context.as_str()).collect::<HashSet<_>>().len(),
        mean_context_length: mean(ds.iter().map(|e| char_len(&e.context)).sum()),
        mean_question_tokens: mean(ds.iter().map(|e| e.question.split_whitespace().count()).sum()),
        mean_answers_per_example: mean(ds.iter().map(|e| e.answers.len()).sum()),
        answer_types,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(qid: &str, doc: Option<&str>) -> QAExample {
        let e = QAExample::new(qid, "Who ran?", "Ann ran home.", vec![Answer::new("Ann", 0)]);
        match doc {
            Some(d) => e.with_tag(format!("{DOC_TAG}{d}")),
            None => e,
        }
    }

    fn ds(name: &str, qids: &[&str]) -> QADataset {
        QADataset::new(name, qids.iter().map(|q| ex(q, None)).collect()).unwrap()
    }

    const ONE: &str = r#"{"data":[{"title":"t","paragraphs":[{"context":"Ann ran home.","qas":[{"id":"q1","question":"Who ran?","answers":[{"text":"Ann","answer_start":0}]}]}]}]}"#;

    #[test]
    fn reads_single_qa() {
        let d = read_squad_json(ONE, "one").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.name, "one");
        assert_eq!(d.examples[0].answers[0], Answer::new("Ann", 0));
    }

    #[test]
    fn wrong_offset_is_rejected() {
        let bad = ONE.replace("\"answer_start\":0", "\"answer_start\":4");
        assert!(matches!(
            read_squad_json(&bad, "x"),
            Err(DatasetError::OffsetMismatch { answer_start: 4, .. })
        ));
    }

    #[test]
    fn duplicate_qid_on_read() {
        let dup = ONE.replace(
            r#""answer_start":0}]}"#,
            r#""answer_start":0}]},{"id":"q1","question":"?","answers":[{"text":"ran","answer_start":4}]}"#,
        );
        assert_eq!(read_squad_json(&dup, "x"), Err(DatasetError::DuplicateQid("q1".into())));
    }

    #[test]
    fn write_then_read_is_identity() {
        let mut d = ds("rt", &["a", "b"]);
        d.examples.push(
            QAExample::new(
                "c",
                "",
                "Zoë met Bo.",
                vec![Answer::new("Bo", 8), Answer::new("Zoë", 0)],
            )
            .with_tag("doc:z"),
        );
        let back = read_squad_json(&write_squad_json(&d), "other").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn merge_concatenates_and_tags() {
        let m = merge(&[ds("A", &["a1", "a2", "a3"]), ds("B", &["b1", "b2"])], "AB").unwrap();
        assert_eq!(m.len(), 5);
        let ids: Vec<&str> = m.iter().map(|e| e.qid.as_str()).collect();
        assert_eq!(ids, ["a1", "a2", "a3", "b1", "b2"]);
        assert!(m.examples[0].tags.contains("source:A"));
        assert!(m.examples[4].tags.contains("source:B"));
        assert_eq!(
            merge(&[ds("A", &["x"]), ds("B", &["x"])], "AB"),
            Err(DatasetError::DuplicateQid("x".into()))
        );
    }

    #[test]
    fn split_by_example() {
        let qids: Vec<String> = (0..10).map(|i| format!("q{i}")).collect();
        let d = QADataset::new("s", qids.iter().map(|q| ex(q, Some(q))).collect()).unwrap();
        let (train, test) = split(&d, 0.2, 13).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert_eq!(split(&d, 0.2, 13).unwrap(), (train.clone(), test.clone()));
        let mut all: Vec<&str> = train.iter().chain(test.iter()).map(|e| e.qid.as_str()).collect();
        all.sort();
        let mut expected: Vec<&str> = qids.iter().map(String::as_str).collect();
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn split_keeps_documents_whole() {
        let examples = (0..4)
            .flat_map(|d| (0..25).map(move |i| ex(&format!("d{d}-{i}"), Some(&format!("doc{d}")))))
            .collect();
        let d = QADataset::new("docs", examples).unwrap();
        let (train, test) = split(&d, 0.25, 99).unwrap();
        assert_eq!(test.len(), 25);
        assert_eq!(train.len(), 75);
        let test_docs: BTreeSet<&str> = test.iter().filter_map(QAExample::doc_id).collect();
        assert_eq!(test_docs.len(), 1);
        let train_docs: BTreeSet<&str> = train.iter().filter_map(QAExample::doc_id).collect();
        assert!(train_docs.is_disjoint(&test_docs));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = ds("s", &["a"]);
        assert!(split(&d, 0.0, 1).is_err());
        assert!(split(&d, 1.0, 1).is_err());
        assert!(split(&d, f64::NAN, 1).is_err());
    }

    #[test]
    fn stats_counts() {
        assert_eq!(stats(&QADataset::empty("e")).example_count, 0);
        let s = stats(&ds("s", &["a", "b", "c"]));
        assert_eq!(s.example_count, 3);
        assert_eq!(s.unique_contexts, 1);
        assert_eq!(s.mean_context_length, 13.0);
        assert_eq!(s.answer_types.get("proper"), Some(&3));
    }
}
