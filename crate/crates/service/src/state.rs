use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use corefqa::curation::{validate_pair, CharSpan, Passage, RankOrder};
use corefqa::probes::{split_sentences, EmbeddingClient, SimilarityScorer, TfIdfScorer};
use corefqa::{Answer, Lexicon, QADataset, QAExample};
use thiserror::Error;

use crate::config::{ScorerConfig, ServiceConfig};
use crate::store::{PairRecord, PairStore, Status};
use crate::ServeError;

/// Immutable passage corpus indexed by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    passages: Vec<Passage>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(passages: Vec<Passage>) -> Result<Self, ServeError> {
        let mut by_id = HashMap::new();
        for (i, p) in passages.iter().enumerate() {
            if by_id.insert(p.id.clone(), i).is_some() {
                return Err(ServeError::Corpus(format!("duplicate passage id {:?}", p.id)));
            }
        }
        Ok(Self { passages, by_id })
    }

    /// A JSON array of passages, or one passage object per line.
    pub fn parse(text: &str) -> Result<Self, ServeError> {
        let passages: Vec<Passage> = if text.trim_start().starts_with('[') {
            serde_json::from_str(text).map_err(|e| ServeError::Corpus(e.to_string()))?
        } else {
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| serde_json::from_str(l).map_err(|e| ServeError::Corpus(format!("line {}: {e}", i + 1))))
                .collect::<Result<_, _>>()?
        };
        Self::new(passages)
    }

    pub fn load(path: &Path) -> Result<Self, ServeError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServeError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.by_id.get(id).map(|&i| &self.passages[i])
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }
}

pub struct AppState {
    pub corpus: Corpus,
    pub store: PairStore,
    pub lexicon: Lexicon,
    pub scorer: Box<dyn SimilarityScorer + Send>,
    pub rank_order: RankOrder,
    /// Held across check-then-write so duplicate detection sees every earlier write.
    pub write_lock: Mutex<()>,
}

impl AppState {
    pub fn new(corpus: Corpus, store: PairStore, scorer: &ScorerConfig, rank_order: RankOrder) -> Self {
        let scorer: Box<dyn SimilarityScorer + Send> = match scorer {
            ScorerConfig::Tfidf => {
                let sentences: Vec<String> = corpus
                    .passages()
                    .iter()
                    .flat_map(|p| split_sentences(&p.text).into_iter().map(|s| s.text))
                    .collect();
                Box::new(TfIdfScorer::fit(sentences.iter().map(String::as_str)))
            }
            ScorerConfig::Embedding(c) => Box::new(EmbeddingClient::new(c.clone())),
        };
        Self {
            corpus,
            store,
            lexicon: Lexicon::default(),
            scorer,
            rank_order,
            write_lock: Mutex::new(()),
        }
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServeError> {
        let corpus = Corpus::load(&config.corpus)?;
        let store = PairStore::open(&config.store)?;
        log::info!("loaded {} passages and {} stored pairs", corpus.len(), store.len());
        Ok(Self::new(corpus, store, &config.scorer, config.rank_order))
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("record {id}: answer {text:?} is not at offset {start} of passage {passage_id}")]
    OffsetMismatch {
        id: String,
        passage_id: String,
        text: String,
        start: usize,
    },
    #[error("record {id} refers to unknown passage {passage_id}")]
    UnknownPassage { id: String, passage_id: String },
    #[error("record {0} no longer passes validation")]
    NotAllPass(String),
    #[error("record {id}: {message}")]
    Invalid { id: String, message: String },
}

fn answer_matches(passage: &str, answer: &Answer, m2: CharSpan) -> bool {
    answer.matches(passage) && answer.answer_start == m2.start
}

/// Accepted records as a SQuAD-schema dataset, each re-checked against its
/// passage and against the other accepted records.
pub fn export_pairs(records: &[PairRecord], corpus: &Corpus, lexicon: &Lexicon) -> Result<QADataset, ExportError> {
    let accepted: Vec<&PairRecord> = records.iter().filter(|r| r.status == Status::Accepted).collect();
    let mut examples = Vec::with_capacity(accepted.len());
    for r in &accepted {
        let passage = corpus.get(&r.passage_id).ok_or_else(|| ExportError::UnknownPassage {
            id: r.id.clone(),
            passage_id: r.passage_id.clone(),
        })?;
        if !answer_matches(&passage.text, &r.answer, r.m2) {
            return Err(ExportError::OffsetMismatch {
                id: r.id.clone(),
                passage_id: r.passage_id.clone(),
                text: r.answer.text.clone(),
                start: r.answer.answer_start,
            });
        }
        let others: Vec<_> = accepted.iter().filter(|o| o.id != r.id).map(|o| o.draft()).collect();
        let report = validate_pair(&r.draft(), &passage.text, &others, lexicon).map_err(|e| ExportError::Invalid {
            id: r.id.clone(),
            message: e.to_string(),
        })?;
        if !report.passed {
            return Err(ExportError::NotAllPass(r.id.clone()));
        }
        examples.push(
            QAExample::new(
                r.id.clone(),
                r.question.clone(),
                passage.text.clone(),
                vec![r.answer.clone()],
            )
            .with_tag(format!("doc:{}", r.passage_id)),
        );
    }
    QADataset::new("curated", examples).map_err(|e| ExportError::Invalid {
        id: "-".into(),
        message: e.to_string(),
    })
}
