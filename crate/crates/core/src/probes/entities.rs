//! Where PERSON entities for the random-entity probe come from.

use std::collections::{BTreeMap, HashMap};

use crate::conll::Document;
use crate::dataset::QAExample;
use crate::lexicon::{strip_punct, Lexicon};

pub trait EntitySource: Sync {
    /// PERSON entity strings for the example's context, `None` when this
    /// source has no annotation for it.
    fn person_entities(&self, example: &QAExample) -> Option<Vec<String>>;
}

/// Entities supplied alongside a dataset, keyed by qid.
#[derive(Debug, Clone, Default)]
pub struct AttachedEntities(pub BTreeMap<String, Vec<String>>);

impl EntitySource for AttachedEntities {
    fn person_entities(&self, example: &QAExample) -> Option<Vec<String>> {
        self.0.get(&example.qid).cloned()
    }
}

/// Gold NE layer of parsed CoNLL documents, matched through the example's
/// document tag.
#[derive(Debug, Clone, Default)]
pub struct ConllEntities {
    by_doc: HashMap<String, Vec<String>>,
}

impl ConllEntities {
    pub fn from_documents(docs: &[Document], label: &str) -> Self {
        let by_doc = docs
            .iter()
            .map(|d| {
                let names = d
                    .entities
                    .iter()
                    .filter(|e| e.label == label)
                    .filter_map(|e| d.entity_text(e).ok())
                    .collect();
                (d.key(), names)
            })
            .collect();
        Self { by_doc }
    }
}

impl EntitySource for ConllEntities {
    fn person_entities(&self, example: &QAExample) -> Option<Vec<String>> {
        example.doc_id().and_then(|d| self.by_doc.get(d).cloned())
    }
}

/// A capitalised token run found in running text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

fn ends_sentence(tok: &str) -> bool {
    let t = tok.trim_end_matches(['"', '\'', '\u{2019}', '\u{201D}', ')']);
    if let Some(word) = t.strip_suffix('.') {
        // Honorifics and initials: "Mr.", "Dr.", "W.".
        let short_cap = word.chars().count() <= 3 && word.chars().next().is_some_and(char::is_uppercase);
        return !short_cap;
    }
    t.ends_with(['!', '?'])
}

/// Maximal runs of capitalised tokens, skipping function words and
/// single-token runs at a sentence start.
pub fn capitalized_runs(text: &str, lexicon: &Lexicon) -> Vec<NameSpan> {
    // (char start, char end) of each whitespace token, plus the token.
    let mut toks: Vec<(usize, usize, &str)> = Vec::new();
    let mut char_pos = 0;
    let mut tok_start: Option<(usize, usize)> = None;
    for (b, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some((cs, bs)) = tok_start.take() {
                toks.push((cs, char_pos, &text[bs..b]));
            }
        } else if tok_start.is_none() {
            tok_start = Some((char_pos, b));
        }
        char_pos += 1;
    }
    if let Some((cs, bs)) = tok_start {
        toks.push((cs, char_pos, &text[bs..]));
    }

    let core = |tok: &str| -> (usize, String) {
        // Leading punctuation offset and the token without it or a possessive.
        let lead = tok.chars().take_while(|c| !c.is_alphanumeric()).count();
        let mut c = strip_punct(tok).to_string();
        for suffix in ["'s", "\u{2019}s"] {
            if let Some(s) = c.strip_suffix(suffix) {
                c = s.to_string();
            }
        }
        (lead, c)
    };
    let is_cap = |c: &str| c.chars().next().is_some_and(char::is_uppercase) && !lexicon.is_function_word(c);

    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let (_, c) = core(toks[i].2);
        if !is_cap(&c) {
            i += 1;
            continue;
        }
        let run_start = i;
        let mut j = i;
        while j + 1 < toks.len() && !ends_sentence(toks[j].2) && !toks[j].2.ends_with([',', ';', ':']) {
            let (_, next) = core(toks[j + 1].2);
            if !(is_cap(&next) || next.ends_with('.') && next.len() <= 3) {
                break;
            }
            j += 1;
        }
        let sentence_initial = run_start == 0 || ends_sentence(toks[run_start - 1].2);
        if !(sentence_initial && j == run_start) {
            let (lead, first) = core(toks[run_start].2);
            let (last_lead, last) = core(toks[j].2);
            let start = toks[run_start].0 + lead;
            let end = toks[j].0 + last_lead + last.chars().count();
            let text_span: String = text.chars().skip(start).take(end - start).collect();
            if !first.is_empty() {
                out.push(NameSpan {
                    start,
                    end,
                    text: text_span,
                });
            }
        }
        i = j + 1;
    }
    out
}

/// Capitalisation heuristic used when no annotation is available.
#[derive(Debug, Clone, Default)]
pub struct CapitalizationHeuristic {
    lexicon: Lexicon,
}

impl EntitySource for CapitalizationHeuristic {
    fn person_entities(&self, example: &QAExample) -> Option<Vec<String>> {
        Some(
            capitalized_runs(&example.context, &self.lexicon)
                .into_iter()
                .map(|s| s.text)
                .collect(),
        )
    }
}

/// Sources consulted in order; the first with an annotation wins.
#[derive(Default)]
pub struct EntityChain {
    sources: Vec<Box<dyn EntitySource + Send>>,
}

impl EntityChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn then(mut self, source: impl EntitySource + Send + 'static) -> Self {
        self.sources.push(Box::new(source));
        self
    }
}

impl EntitySource for EntityChain {
    fn person_entities(&self, example: &QAExample) -> Option<Vec<String>> {
        self.sources.iter().find_map(|s| s.person_entities(example))
    }
}
