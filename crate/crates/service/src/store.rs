//! Append-only JSONL log of pair records. The latest line for an id wins.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use corefqa::curation::{CharSpan, DraftPair, ValidationReport};
use corefqa::Answer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("store {path} is corrupt at line {line}: {message}")]
    StoreCorrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("accepted record {0} does not pass validation")]
    NotAllPass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Draft,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub passage_id: String,
    pub question: String,
    pub answer: Answer,
    pub m1: CharSpan,
    pub m2: CharSpan,
    pub status: Status,
    pub created_at: DateTime<Utc>,
    pub validation: ValidationReport,
}

impl PairRecord {
    pub fn draft(&self) -> DraftPair {
        DraftPair {
            passage_id: self.passage_id.clone(),
            question: self.question.clone(),
            answer: self.answer.clone(),
            m1: self.m1,
            m2: self.m2,
        }
    }
}

struct Inner {
    file: File,
    records: BTreeMap<String, PairRecord>,
    /// Ids in order of first appearance.
    order: Vec<String>,
}

impl Inner {
    fn apply(&mut self, record: PairRecord) {
        if !self.records.contains_key(&record.id) {
            self.order.push(record.id.clone());
        }
        self.records.insert(record.id.clone(), record);
    }
}

/// The single writer for one log file.
pub struct PairStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for PairStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PairStore").field("path", &self.path).finish()
    }
}

impl PairStore {
    /// Open or create the log and replay it. An unterminated last line that
    /// does not parse is cut off with a warning; any other bad line is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;

        let mut inner = Inner {
            file,
            records: BTreeMap::new(),
            order: Vec::new(),
        };
        let mut offset = 0usize;
        let total = text.len();
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let terminated = line.ends_with('\n');
            let body = line.trim_end_matches(['\n', '\r']);
            if body.trim().is_empty() {
                offset += line.len();
                continue;
            }
            match serde_json::from_str::<PairRecord>(body) {
                Ok(r) => {
                    inner.apply(r);
                    if !terminated {
                        inner.file.write_all(b"\n").map_err(io)?;
                    }
                }
                Err(e) if !terminated => {
                    log::warn!(
                        "{}: dropping partial trailing line {} ({} bytes): {e}",
                        path.display(),
                        i + 1,
                        total - offset
                    );
                    inner.file.set_len(offset as u64).map_err(io)?;
                    inner.file.seek(SeekFrom::End(0)).map_err(io)?;
                }
                Err(e) => {
                    return Err(StoreError::StoreCorrupt {
                        path: path.clone(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
            offset += line.len();
        }
        Ok(Self {
            path,
            inner: Mutex::new(inner),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn commit(&self, inner: &mut Inner, record: PairRecord) -> Result<PairRecord, StoreError> {
        if record.status == Status::Accepted && !record.validation.passed {
            return Err(StoreError::NotAllPass(record.id));
        }
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        inner
            .file
            .write_all(line.as_bytes())
            .and_then(|_| inner.file.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })?;
        inner.apply(record.clone());
        Ok(record)
    }

    /// Write one record as a full line and fold it into the state.
    pub fn append(&self, record: PairRecord) -> Result<PairRecord, StoreError> {
        let mut inner = self.lock();
        self.commit(&mut inner, record)
    }

    /// Build and append a record under a fresh id. The id and the write
    /// happen under one lock so concurrent callers never collide.
    pub fn insert(
        &self,
        draft: DraftPair,
        status: Status,
        validation: ValidationReport,
    ) -> Result<PairRecord, StoreError> {
        let mut inner = self.lock();
        let id = format!("pair-{:05}", inner.order.len() + 1);
        let record = PairRecord {
            id,
            passage_id: draft.passage_id,
            question: draft.question,
            answer: draft.answer,
            m1: draft.m1,
            m2: draft.m2,
            status,
            created_at: Utc::now(),
            validation,
        };
        self.commit(&mut inner, record)
    }

    pub fn get(&self, id: &str) -> Option<PairRecord> {
        self.lock().records.get(id).cloned()
    }

    /// Current state, in order of first appearance.
    pub fn records(&self) -> Vec<PairRecord> {
        let inner = self.lock();
        inner.order.iter().map(|id| inner.records[id].clone()).collect()
    }

    pub fn accepted(&self) -> Vec<PairRecord> {
        self.records()
            .into_iter()
            .filter(|r| r.status == Status::Accepted)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.lock().order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sync(&self) -> Result<(), StoreError> {
        let inner = self.lock();
        inner.file.sync_all().map_err(|source| StoreError::Io {
            path: self.path.clone(),
            source,
        })
    }
}
