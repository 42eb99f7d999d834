//! CoNLL-2012 column files.
//!
//! A file is a sequence of `#begin document (<id>); part <n>` ... `#end document`
//! blocks. Inside a block each non-blank line is one token with
//! whitespace-separated columns, and a blank line ends a sentence. Coreference
//! uses bracket notation (`(12`, `12)`, `(12)`, joined with `|`), named
//! entities use starred brackets (`(PERSON*`, `*`, `*)`).
//!
//! Columns that are not modeled (parse bits, lemmas, speakers, predicate
//! arguments, ...) are kept verbatim on each [`Token`] so that a parsed
//! document serializes back to the same rows.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ConllError {
    #[error("line {line}: unbalanced bracket: {detail}")]
    UnbalancedBracket { line: usize, detail: String },
    #[error("line {line}: malformed row: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("duplicate document ({doc_id}, part {part})")]
    DuplicateDocId { doc_id: String, part: u32 },
    #[error("document {doc_id} is missing `#end document`")]
    Unterminated { doc_id: String },
    #[error("span out of range: sentence {sentence}, tokens {start}..={end}")]
    OutOfRange { sentence: usize, start: usize, end: usize },
    #[error("invalid document {doc_id}: {detail}")]
    Invalid { doc_id: String, detail: String },
}

pub type Result<T> = std::result::Result<T, ConllError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub text: String,
    #[serde(default)]
    pub pos: String,
    /// Unmodeled columns in file order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

impl Token {
    pub fn new(index: usize, text: impl Into<String>, pos: impl Into<String>) -> Self {
        Self {
            index,
            text: text.into(),
            pos: pos.into(),
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MentionSpan {
    pub sentence_index: usize,
    pub start_token: usize,
    /// Inclusive.
    pub end_token: usize,
    pub cluster_id: u32,
}

impl MentionSpan {
    pub fn new(sentence_index: usize, start_token: usize, end_token: usize, cluster_id: u32) -> Self {
        Self {
            sentence_index,
            start_token,
            end_token,
            cluster_id,
        }
    }

    /// Document-order key.
    pub fn position(&self) -> (usize, usize, usize) {
        (self.sentence_index, self.start_token, self.end_token)
    }

    pub fn overlaps(&self, sentence: usize, start: usize, end: usize) -> bool {
        self.sentence_index == sentence && self.start_token <= end && start <= self.end_token
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntitySpan {
    pub sentence_index: usize,
    pub start_token: usize,
    pub end_token: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefCluster {
    pub cluster_id: u32,
    /// Sorted by `(sentence_index, start_token, end_token)`.
    pub mentions: Vec<MentionSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub part: u32,
    pub sentences: Vec<Vec<Token>>,
    /// Sorted by cluster id.
    pub clusters: Vec<CorefCluster>,
    /// Sorted by position.
    pub entities: Vec<NamedEntitySpan>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, part: u32) -> Self {
        Self {
            doc_id: doc_id.into(),
            part,
            sentences: Vec::new(),
            clusters: Vec::new(),
            entities: Vec::new(),
        }
    }

    /// `doc_id#part`, the unit examples are tagged and split by.
    pub fn key(&self) -> String {
        format!("{}#{}", self.doc_id, self.part)
    }

    /// Build a document from sentences and raw mention/entity lists,
    /// grouping and sorting them into canonical order.
    pub fn from_parts(
        doc_id: impl Into<String>,
        part: u32,
        sentences: Vec<Vec<Token>>,
        mentions: impl IntoIterator<Item = MentionSpan>,
        mut entities: Vec<NamedEntitySpan>,
    ) -> Self {
        let mut grouped: BTreeMap<u32, Vec<MentionSpan>> = BTreeMap::new();
        for m in mentions {
            grouped.entry(m.cluster_id).or_default().push(m);
        }
        let clusters = grouped
            .into_iter()
            .map(|(cluster_id, mut mentions)| {
                mentions.sort_by_key(MentionSpan::position);
                CorefCluster { cluster_id, mentions }
            })
            .collect();
        entities.sort_by(|a, b| {
            (a.sentence_index, a.start_token, a.end_token, &a.label).cmp(&(
                b.sentence_index,
                b.start_token,
                b.end_token,
                &b.label,
            ))
        });
        Self {
            doc_id: doc_id.into(),
            part,
            sentences,
            clusters,
            entities,
        }
    }

    pub fn cluster(&self, cluster_id: u32) -> Option<&CorefCluster> {
        self.clusters
            .binary_search_by_key(&cluster_id, |c| c.cluster_id)
            .ok()
            .map(|i| &self.clusters[i])
    }

    pub fn mentions(&self) -> impl Iterator<Item = &MentionSpan> {
        self.clusters.iter().flat_map(|c| c.mentions.iter())
    }

    pub fn tokens(&self, sentence: usize, start: usize, end: usize) -> Result<&[Token]> {
        let oor = ConllError::OutOfRange { sentence, start, end };
        let sent = self.sentences.get(sentence).ok_or_else(|| oor.clone())?;
        if start > end || end >= sent.len() {
            return Err(oor);
        }
        Ok(&sent[start..=end])
    }

    /// Space-joined token texts of a mention.
    pub fn mention_text(&self, m: &MentionSpan) -> Result<String> {
        Ok(join_tokens(self.tokens(
            m.sentence_index,
            m.start_token,
            m.end_token,
        )?))
    }

    pub fn entity_text(&self, e: &NamedEntitySpan) -> Result<String> {
        Ok(join_tokens(self.tokens(
            e.sentence_index,
            e.start_token,
            e.end_token,
        )?))
    }

    /// Check the structural invariants documented on the types.
    pub fn validate(&self) -> Result<()> {
        let invalid = |detail: String| ConllError::Invalid {
            doc_id: self.doc_id.clone(),
            detail,
        };
        for (si, sent) in self.sentences.iter().enumerate() {
            for (ti, tok) in sent.iter().enumerate() {
                if tok.index != ti {
                    return Err(invalid(format!("token {si}:{ti} has index {}", tok.index)));
                }
                if tok.text.is_empty() || tok.text.chars().any(char::is_whitespace) {
                    return Err(invalid(format!("token {si}:{ti} has empty or spaced text")));
                }
            }
        }
        let mut seen = HashSet::new();
        for c in &self.clusters {
            if !seen.insert(c.cluster_id) {
                return Err(invalid(format!("cluster {} appears twice", c.cluster_id)));
            }
            if c.mentions.is_empty() {
                return Err(invalid(format!("cluster {} is empty", c.cluster_id)));
            }
            if c.mentions.windows(2).any(|w| w[0].position() > w[1].position()) {
                return Err(invalid(format!("cluster {} is not sorted", c.cluster_id)));
            }
            for m in &c.mentions {
                if m.cluster_id != c.cluster_id {
                    return Err(invalid(format!(
                        "mention in cluster {} carries id {}",
                        c.cluster_id, m.cluster_id
                    )));
                }
                self.tokens(m.sentence_index, m.start_token, m.end_token)?;
            }
        }
        if self.clusters.windows(2).any(|w| w[0].cluster_id > w[1].cluster_id) {
            return Err(invalid("clusters are not sorted by id".into()));
        }
        for e in &self.entities {
            self.tokens(e.sentence_index, e.start_token, e.end_token)?;
        }
        Ok(())
    }
}

pub fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorefColumn {
    Last,
    At(usize),
}

/// Which columns hold the modeled fields. Every other column is opaque.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    /// Regenerated from the document header on output.
    pub doc_id: Option<usize>,
    pub part: Option<usize>,
    pub token_index: Option<usize>,
    pub word: usize,
    pub pos: Option<usize>,
    pub ne: Option<usize>,
    pub coref: CorefColumn,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self::conll2012()
    }
}

impl ColumnMap {
    /// CoNLL-2012 v4 layout: id, part, word number, word, POS, ..., NE at 10, coref last.
    pub fn conll2012() -> Self {
        Self {
            doc_id: Some(0),
            part: Some(1),
            token_index: Some(2),
            word: 3,
            pos: Some(4),
            ne: Some(10),
            coref: CorefColumn::Last,
        }
    }

    /// `word POS NE coref`, nothing else.
    pub fn compact() -> Self {
        Self {
            doc_id: None,
            part: None,
            token_index: None,
            word: 0,
            pos: Some(1),
            ne: Some(2),
            coref: CorefColumn::Last,
        }
    }

    fn fixed_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = [
            self.doc_id,
            self.part,
            self.token_index,
            Some(self.word),
            self.pos,
            self.ne,
        ]
        .into_iter()
        .flatten()
        .collect();
        if let CorefColumn::At(i) = self.coref {
            v.push(i);
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    fn fixed_count(&self) -> usize {
        self.fixed_indices().len() + usize::from(self.coref == CorefColumn::Last)
    }

    /// Fewest columns a row may have.
    pub fn min_columns(&self) -> usize {
        let max = self.fixed_indices().last().map_or(0, |m| m + 1);
        match self.coref {
            CorefColumn::Last => max + 1,
            CorefColumn::At(_) => max,
        }
    }

    fn coref_index(&self, width: usize) -> usize {
        match self.coref {
            CorefColumn::Last => width - 1,
            CorefColumn::At(i) => i,
        }
    }
}

#[derive(Clone, Copy)]
enum Slot {
    DocId,
    Part,
    TokenIndex,
    Word,
    Pos,
    Ne,
    Coref,
    Opaque,
}

fn slot_of(map: &ColumnMap, idx: usize, width: usize) -> Slot {
    if idx == map.coref_index(width) {
        Slot::Coref
    } else if Some(idx) == map.doc_id {
        Slot::DocId
    } else if Some(idx) == map.part {
        Slot::Part
    } else if Some(idx) == map.token_index {
        Slot::TokenIndex
    } else if idx == map.word {
        Slot::Word
    } else if Some(idx) == map.pos {
        Slot::Pos
    } else if Some(idx) == map.ne {
        Slot::Ne
    } else {
        Slot::Opaque
    }
}

struct OpenDoc {
    doc: Document,
    sentence: Vec<Token>,
    mentions: Vec<MentionSpan>,
    entities: Vec<NamedEntitySpan>,
    // Bracket stacks for the sentence being read: cluster id -> (start token, line).
    open_mentions: BTreeMap<u32, Vec<(usize, usize)>>,
    open_entity: Option<(String, usize, usize)>,
}

impl OpenDoc {
    fn sentence_index(&self) -> usize {
        self.doc.sentences.len()
    }

    fn finish_sentence(&mut self) -> Result<()> {
        if let Some((id, &(_, line))) = self
            .open_mentions
            .iter()
            .find_map(|(id, stack)| stack.first().map(|e| (id, e)))
        {
            return Err(ConllError::UnbalancedBracket {
                line,
                detail: format!("cluster {id} opened but not closed before sentence end"),
            });
        }
        if let Some((label, _, line)) = self.open_entity.take() {
            return Err(ConllError::UnbalancedBracket {
                line,
                detail: format!("entity {label} opened but not closed before sentence end"),
            });
        }
        if !self.sentence.is_empty() {
            let s = std::mem::take(&mut self.sentence);
            self.doc.sentences.push(s);
        }
        self.open_mentions.clear();
        Ok(())
    }

    fn read_coref(&mut self, cell: &str, token: usize, line: usize) -> Result<()> {
        if cell == "-" || cell == "_" {
            return Ok(());
        }
        let sentence = self.sentence_index();
        let mut closes = Vec::new();
        let mut singles = Vec::new();
        let mut opens = Vec::new();
        for part in cell.split('|') {
            let opened = part.starts_with('(');
            let closed = part.ends_with(')');
            let digits = part.trim_start_matches('(').trim_end_matches(')');
            let id: u32 = digits.parse().map_err(|_| ConllError::MalformedRow {
                line,
                detail: format!("bad coreference cell {cell:?}"),
            })?;
            match (opened, closed) {
                (true, true) => singles.push(id),
                (true, false) => opens.push(id),
                (false, true) => closes.push(id),
                (false, false) => {
                    return Err(ConllError::MalformedRow {
                        line,
                        detail: format!("bad coreference cell {cell:?}"),
                    })
                }
            }
        }
        // Closes are applied before opens so `0)|(0` on one token ends one
        // mention and starts another.
        for id in closes {
            let start = self
                .open_mentions
                .get_mut(&id)
                .and_then(Vec::pop)
                .ok_or_else(|| ConllError::UnbalancedBracket {
                    line,
                    detail: format!("cluster {id} closed without an open bracket"),
                })?
                .0;
            if self.open_mentions.get(&id).is_some_and(Vec::is_empty) {
                self.open_mentions.remove(&id);
            }
            self.mentions.push(MentionSpan::new(sentence, start, token, id));
        }
        for id in singles {
            self.mentions.push(MentionSpan::new(sentence, token, token, id));
        }
        for id in opens {
            self.open_mentions.entry(id).or_default().push((token, line));
        }
        Ok(())
    }

    fn read_ne(&mut self, cell: &str, token: usize, line: usize) -> Result<()> {
        if cell == "*" || cell == "-" || cell == "_" {
            return Ok(());
        }
        let bad = || ConllError::MalformedRow {
            line,
            detail: format!("bad named-entity cell {cell:?}"),
        };
        let closes = cell.ends_with(')');
        if let Some(rest) = cell.strip_prefix('(') {
            let label: String = rest.chars().take_while(|&c| c != '*' && c != ')').collect();
            if label.is_empty() {
                return Err(bad());
            }
            if let Some((open, _, open_line)) = &self.open_entity {
                return Err(ConllError::UnbalancedBracket {
                    line: *open_line,
                    detail: format!("entity {open} still open when {label} starts"),
                });
            }
            self.open_entity = Some((label, token, line));
        } else if cell != "*)" {
            return Err(bad());
        }
        if closes {
            let (label, start, _) = self.open_entity.take().ok_or_else(|| ConllError::UnbalancedBracket {
                line,
                detail: "entity closed without an open bracket".into(),
            })?;
            self.entities.push(NamedEntitySpan {
                sentence_index: self.sentence_index(),
                start_token: start,
                end_token: token,
                label,
            });
        }
        Ok(())
    }

    fn into_document(mut self) -> Result<Document> {
        self.finish_sentence()?;
        let OpenDoc {
            doc,
            mentions,
            entities,
            ..
        } = self;
        Ok(Document::from_parts(
            doc.doc_id,
            doc.part,
            doc.sentences,
            mentions,
            entities,
        ))
    }
}

fn parse_begin(line: &str, lineno: usize) -> Result<(String, u32)> {
    let bad = || ConllError::MalformedRow {
        line: lineno,
        detail: format!("bad document header {line:?}"),
    };
    let open = line.find('(').ok_or_else(bad)?;
    let close = line.rfind(')').filter(|&c| c > open).ok_or_else(bad)?;
    let id = line[open + 1..close].to_string();
    let rest = &line[close + 1..];
    let part = match rest.find("part") {
        Some(p) => rest[p + 4..].trim().parse().map_err(|_| bad())?,
        None => 0,
    };
    Ok((id, part))
}

/// Parse every `#begin document` block in `input`.
pub fn parse_conll(input: &str, map: &ColumnMap) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen: HashSet<(String, u32)> = HashSet::new();
    let mut current: Option<OpenDoc> = None;
    let min_cols = map.min_columns();

    for (i, raw) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end();
        if line.starts_with("#begin document") {
            if let Some(open) = &current {
                return Err(ConllError::MalformedRow {
                    line: lineno,
                    detail: format!("document {} not ended before next begin", open.doc.doc_id),
                });
            }
            let (doc_id, part) = parse_begin(line, lineno)?;
            if !seen.insert((doc_id.clone(), part)) {
                return Err(ConllError::DuplicateDocId { doc_id, part });
            }
            current = Some(OpenDoc {
                doc: Document::new(doc_id, part),
                sentence: Vec::new(),
                mentions: Vec::new(),
                entities: Vec::new(),
                open_mentions: BTreeMap::new(),
                open_entity: None,
            });
            continue;
        }
        if line.starts_with("#end document") {
            let open = current.take().ok_or_else(|| ConllError::MalformedRow {
                line: lineno,
                detail: "#end document without #begin".into(),
            })?;
            docs.push(open.into_document()?);
            continue;
        }
        if line.trim().is_empty() {
            if let Some(open) = current.as_mut() {
                open.finish_sentence()?;
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let open = current.as_mut().ok_or_else(|| ConllError::MalformedRow {
            line: lineno,
            detail: "token row outside of a document".into(),
        })?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < min_cols {
            return Err(ConllError::MalformedRow {
                line: lineno,
                detail: format!("{} columns, need at least {min_cols}", cols.len()),
            });
        }
        let token = open.sentence.len();
        let mut tok = Token::new(token, cols[map.word], "");
        let width = cols.len();
        for (idx, cell) in cols.iter().enumerate() {
            match slot_of(map, idx, width) {
                Slot::Pos => tok.pos = (*cell).to_string(),
                Slot::Opaque => tok.extra.push((*cell).to_string()),
                Slot::Ne => open.read_ne(cell, token, lineno)?,
                Slot::Coref => open.read_coref(cell, token, lineno)?,
                Slot::DocId | Slot::Part | Slot::TokenIndex | Slot::Word => {}
            }
        }
        open.sentence.push(tok);
    }
    if let Some(open) = current {
        return Err(ConllError::Unterminated {
            doc_id: open.doc.doc_id,
        });
    }
    Ok(docs)
}

fn coref_cell(mentions: &[&MentionSpan], token: usize) -> String {
    let mut closes: Vec<&MentionSpan> = mentions
        .iter()
        .copied()
        .filter(|m| m.end_token == token && m.start_token < token)
        .collect();
    closes.sort_by_key(|m| (std::cmp::Reverse(m.start_token), m.cluster_id));
    let mut singles: Vec<&MentionSpan> = mentions
        .iter()
        .copied()
        .filter(|m| m.start_token == token && m.end_token == token)
        .collect();
    singles.sort_by_key(|m| m.cluster_id);
    let mut opens: Vec<&MentionSpan> = mentions
        .iter()
        .copied()
        .filter(|m| m.start_token == token && m.end_token > token)
        .collect();
    opens.sort_by_key(|m| (std::cmp::Reverse(m.end_token), m.cluster_id));

    let parts: Vec<String> = closes
        .iter()
        .map(|m| format!("{})", m.cluster_id))
        .chain(singles.iter().map(|m| format!("({})", m.cluster_id)))
        .chain(opens.iter().map(|m| format!("({}", m.cluster_id)))
        .collect();
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join("|")
    }
}

fn ne_cell(entities: &[&NamedEntitySpan], token: usize) -> String {
    // Entities never overlap here; serialize_conll rejects documents where they do.
    match entities.iter().find(|e| e.start_token == token) {
        Some(e) if e.end_token == token => format!("({})", e.label),
        Some(e) => format!("({}*", e.label),
        None if entities.iter().any(|e| e.end_token == token) => "*)".to_string(),
        None => "*".to_string(),
    }
}

/// Serialize documents to column text using `map`.
///
/// Tokens without stored opaque columns get `-` fillers.
pub fn serialize_conll(docs: &[Document], map: &ColumnMap) -> Result<String> {
    let fixed = map.fixed_count();
    let min_cols = map.min_columns();
    let mut out = String::new();
    for doc in docs {
        doc.validate()?;
        for (a, b) in doc.entities.iter().zip(doc.entities.iter().skip(1)) {
            if a.sentence_index == b.sentence_index && b.start_token <= a.end_token {
                return Err(ConllError::Invalid {
                    doc_id: doc.doc_id.clone(),
                    detail: "overlapping named entities cannot be written".into(),
                });
            }
        }
        let _ = writeln!(out, "#begin document ({}); part {:03}", doc.doc_id, doc.part);
        for (si, sent) in doc.sentences.iter().enumerate() {
            let mentions: Vec<&MentionSpan> = doc.mentions().filter(|m| m.sentence_index == si).collect();
            let entities: Vec<&NamedEntitySpan> = doc.entities.iter().filter(|e| e.sentence_index == si).collect();
            for tok in sent {
                let width = (fixed + tok.extra.len()).max(min_cols);
                let mut extra = tok.extra.iter();
                let cells: Vec<String> = (0..width)
                    .map(|idx| match slot_of(map, idx, width) {
                        Slot::DocId => doc.doc_id.clone(),
                        Slot::Part => doc.part.to_string(),
                        Slot::TokenIndex => tok.index.to_string(),
                        Slot::Word => tok.text.clone(),
                        Slot::Pos if tok.pos.is_empty() => "-".to_string(),
                        Slot::Pos => tok.pos.clone(),
                        Slot::Ne => ne_cell(&entities, tok.index),
                        Slot::Coref => coref_cell(&mentions, tok.index),
                        Slot::Opaque => extra.next().cloned().unwrap_or_else(|| "-".to_string()),
                    })
                    .collect();
                out.push_str(&cells.join("\t"));
                out.push('\n');
            }
            out.push('\n');
        }
        out.push_str("#end document\n");
    }
    Ok(out)
}
