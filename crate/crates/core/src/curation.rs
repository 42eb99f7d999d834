//! Passage ranking, mention informativeness and the QA-pair guideline
//! validator used while curating coreference-demanding questions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Answer;
use crate::lexicon::{strip_punct, Lexicon};
use crate::metrics::normalize;
use crate::probes::{capitalized_runs, most_similar_sentence, split_sentences, ProbeError, Sentence, SimilarityScorer};
use crate::text::{char_len, char_slice};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("{name} span {start}..{end} is outside the passage (length {len})")]
    SpanOutOfRange {
        name: &'static str,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("question is empty")]
    EmptyQuestion,
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

pub type Result<T> = std::result::Result<T, CurationError>;

/// Ordered by informativeness: pronoun < nominal < proper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionClass {
    Pronoun,
    Nominal,
    Proper,
}

impl MentionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MentionClass::Pronoun => "pronoun",
            MentionClass::Nominal => "nominal",
            MentionClass::Proper => "proper",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MentionEvidence {
    /// The mention starts its sentence, so a capital first letter proves nothing.
    pub sentence_initial: bool,
    /// Per-token POS tags, when known.
    pub pos_tags: Option<Vec<String>>,
}

pub fn classify_mention(text: &str, evidence: &MentionEvidence, lexicon: &Lexicon) -> MentionClass {
    if lexicon.is_pronominal(text) {
        return MentionClass::Pronoun;
    }
    if let Some(tags) = &evidence.pos_tags {
        if tags.iter().any(|t| t == "NNP" || t == "NNPS") {
            return MentionClass::Proper;
        }
        return MentionClass::Nominal;
    }
    let capitalised: Vec<usize> = text
        .split_whitespace()
        .enumerate()
        .filter(|(_, t)| {
            let core = strip_punct(t);
            core.chars().next().is_some_and(char::is_uppercase) && !lexicon.is_function_word(core)
        })
        .map(|(i, _)| i)
        .collect();
    let only_initial = evidence.sentence_initial && capitalised == [0];
    if capitalised.is_empty() || only_initial {
        MentionClass::Nominal
    } else {
        MentionClass::Proper
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    /// Named entities annotated for this passage; found heuristically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<String>>,
}

impl Passage {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            entities: None,
        }
    }

    pub fn entity_strings(&self, lexicon: &Lexicon) -> Vec<String> {
        match &self.entities {
            Some(e) => e.clone(),
            None => capitalized_runs(&self.text, lexicon)
                .into_iter()
                .map(|s| s.text)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    /// Distinct entities, then pronouns.
    #[default]
    EntitiesFirst,
    PronounsFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageScore {
    pub passage_id: String,
    pub distinct_entity_count: usize,
    pub pronoun_count: usize,
    pub rank_key: (usize, usize),
}

pub fn score_passage(p: &Passage, lexicon: &Lexicon, order: RankOrder) -> PassageScore {
    let distinct: BTreeSet<String> = p
        .entity_strings(lexicon)
        .iter()
        .map(|e| normalize(e).join(" "))
        .filter(|e| !e.is_empty())
        .collect();
    let pronoun_count = p
        .text
        .split_whitespace()
        .filter(|t| lexicon.is_pronoun(&strip_punct(t).to_lowercase()))
        .count();
    let distinct_entity_count = distinct.len();
    let rank_key = match order {
        RankOrder::EntitiesFirst => (distinct_entity_count, pronoun_count),
        RankOrder::PronounsFirst => (pronoun_count, distinct_entity_count),
    };
    PassageScore {
        passage_id: p.id.clone(),
        distinct_entity_count,
        pronoun_count,
        rank_key,
    }
}

/// Scores sorted by rank key descending, ties by passage id.
pub fn rank_passages(passages: &[Passage], lexicon: &Lexicon, order: RankOrder) -> Vec<PassageScore> {
    let mut scores: Vec<PassageScore> = passages.iter().map(|p| score_passage(p, lexicon, order)).collect();
    scores.sort_by(|a, b| {
        b.rank_key
            .cmp(&a.rank_key)
            .then_with(|| a.passage_id.cmp(&b.passage_id))
    });
    scores
}

/// Char span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
}

/// An annotator's question linking anaphor `m1` to antecedent `m2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftPair {
    pub passage_id: String,
    pub question: String,
    pub answer: Answer,
    pub m1: CharSpan,
    pub m2: CharSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DifferentSentence,
    Informativeness,
    AnswerInPassage,
    AnswerEqualsM2,
    NonDuplicate,
}

impl Rule {
    pub const ALL: [Rule; 5] = [
        Rule::DifferentSentence,
        Rule::Informativeness,
        Rule::AnswerInPassage,
        Rule::AnswerEqualsM2,
        Rule::NonDuplicate,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleResult {
    pub passed: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// True iff every rule passed.
    pub passed: bool,
    pub rules: BTreeMap<Rule, RuleResult>,
}

impl ValidationReport {
    fn from_rules(rules: BTreeMap<Rule, RuleResult>) -> Self {
        Self {
            passed: rules.values().all(|r| r.passed),
            rules,
        }
    }

    pub fn rule(&self, rule: Rule) -> Option<&RuleResult> {
        self.rules.get(&rule)
    }

    pub fn failed(&self) -> impl Iterator<Item = Rule> + '_ {
        self.rules.iter().filter(|(_, r)| !r.passed).map(|(k, _)| *k)
    }
}

fn check_span(name: &'static str, span: CharSpan, len: usize) -> Result<()> {
    if span.start >= span.end || span.end > len {
        return Err(CurationError::SpanOutOfRange {
            name,
            start: span.start,
            end: span.end,
            len,
        });
    }
    Ok(())
}

fn outcome(passed: bool, message: impl Into<String>) -> RuleResult {
    RuleResult {
        passed,
        message: message.into(),
    }
}

fn same_qa(a: &DraftPair, b: &DraftPair) -> bool {
    normalize(&a.question) == normalize(&b.question) && normalize(&a.answer.text) == normalize(&b.answer.text)
}

/// Check a draft against the annotation guideline.
pub fn validate_pair(
    draft: &DraftPair,
    passage: &str,
    existing: &[DraftPair],
    lexicon: &Lexicon,
) -> Result<ValidationReport> {
    let len = char_len(passage);
    check_span("m1", draft.m1, len)?;
    check_span("m2", draft.m2, len)?;
    let sentences = split_sentences(passage);
    let locate = |span: CharSpan| sentences.iter().position(|s| s.contains_span(span.start, span.end));
    let mention = |span: CharSpan| char_slice(passage, span.start, span.end).unwrap_or_default();
    let mut rules = BTreeMap::new();

    let (s1, s2) = (locate(draft.m1), locate(draft.m2));
    rules.insert(
        Rule::DifferentSentence,
        match (s1, s2) {
            (Some(a), Some(b)) if a != b => outcome(true, format!("m1 in sentence {a}, m2 in sentence {b}")),
            (Some(a), Some(_)) => outcome(false, format!("m1 and m2 are both in sentence {a}")),
            _ => outcome(false, "a mention crosses a sentence boundary"),
        },
    );

    let evidence = |span: CharSpan, si: Option<usize>| MentionEvidence {
        sentence_initial: si.is_some_and(|i| sentences[i].start == span.start),
        pos_tags: None,
    };
    let c1 = classify_mention(mention(draft.m1), &evidence(draft.m1, s1), lexicon);
    let c2 = classify_mention(mention(draft.m2), &evidence(draft.m2, s2), lexicon);
    rules.insert(
        Rule::Informativeness,
        outcome(
            c2 > c1,
            format!(
                "m1 {:?} is {}, m2 {:?} is {}",
                mention(draft.m1),
                c1.as_str(),
                mention(draft.m2),
                c2.as_str()
            ),
        ),
    );

    let in_passage = draft.answer.matches(passage);
    rules.insert(
        Rule::AnswerInPassage,
        if in_passage {
            outcome(true, format!("answer found at {}", draft.answer.answer_start))
        } else {
            outcome(
                false,
                format!(
                    "passage has no {:?} at {}",
                    draft.answer.text, draft.answer.answer_start
                ),
            )
        },
    );

    let equals = CharSpan::new(draft.answer.answer_start, draft.answer.end()) == draft.m2;
    rules.insert(
        Rule::AnswerEqualsM2,
        outcome(
            equals,
            if equals {
                "answer span is m2".to_string()
            } else {
                format!(
                    "answer span {}..{} differs from m2 {}..{}",
                    draft.answer.answer_start,
                    draft.answer.end(),
                    draft.m2.start,
                    draft.m2.end
                )
            },
        ),
    );

    let dup = existing.iter().any(|e| same_qa(e, draft));
    rules.insert(
        Rule::NonDuplicate,
        outcome(
            !dup,
            if dup {
                "same question and answer already stored"
            } else {
                "new pair"
            },
        ),
    );
    Ok(ValidationReport::from_rules(rules))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPreview {
    pub sentence_index: usize,
    pub sentence: Sentence,
    pub score: f64,
    pub answer_in_sentence: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Where the question's most similar sentence is, and whether the drafted
/// answer sits inside it.
pub fn bias_preview<S: SimilarityScorer + ?Sized>(draft: &DraftPair, passage: &str, scorer: &S) -> Result<BiasPreview> {
    if draft.question.trim().is_empty() {
        return Err(CurationError::EmptyQuestion);
    }
    let m = most_similar_sentence(&draft.question, passage, scorer)?;
    let inside = m.sentence.contains_span(draft.answer.answer_start, draft.answer.end());
    Ok(BiasPreview {
        sentence_index: m.index,
        warning: inside.then(|| {
            "the answer lies in the sentence most similar to the question; the pair may be solvable without coreference"
                .to_string()
        }),
        sentence: m.sentence,
        score: m.score,
        answer_in_sentence: inside,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HighlightKind {
    Entity,
    Pronoun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub kind: HighlightKind,
    pub class: MentionClass,
}

/// Entity and pronoun spans of a passage, sorted by start.
pub fn highlights(p: &Passage, lexicon: &Lexicon) -> Vec<Highlight> {
    let mut out = Vec::new();
    match &p.entities {
        None => {
            for s in capitalized_runs(&p.text, lexicon) {
                out.push(Highlight {
                    start: s.start,
                    end: s.end,
                    text: s.text,
                    kind: HighlightKind::Entity,
                    class: MentionClass::Proper,
                });
            }
        }
        Some(names) => {
            let chars: Vec<char> = p.text.chars().collect();
            let mut seen = BTreeSet::new();
            for name in names.iter().filter(|n| !n.is_empty() && seen.insert(n.as_str())) {
                let needle: Vec<char> = name.chars().collect();
                let mut i = 0;
                while i + needle.len() <= chars.len() {
                    if chars[i..i + needle.len()] == needle[..] {
                        out.push(Highlight {
                            start: i,
                            end: i + needle.len(),
                            text: name.clone(),
                            kind: HighlightKind::Entity,
                            class: MentionClass::Proper,
                        });
                        i += needle.len();
                    } else {
                        i += 1;
                    }
                }
            }
        }
    }
    let mut pos = 0usize;
    let mut chars = p.text.chars().peekable();
    while chars.peek().is_some() {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
            pos += 1;
        }
        let word: String = std::iter::from_fn(|| chars.next_if(|c| !c.is_whitespace())).collect();
        if word.is_empty() {
            break;
        }
        let lead = word.chars().take_while(|c| !c.is_alphanumeric()).count();
        let core = strip_punct(&word);
        if lexicon.is_pronoun(&core.to_lowercase()) {
            let start = pos + lead;
            out.push(Highlight {
                start,
                end: start + core.chars().count(),
                text: core.to_string(),
                kind: HighlightKind::Pronoun,
                class: MentionClass::Pronoun,
            });
        }
        pos += word.chars().count();
    }
    out.sort_by_key(|h| (h.start, h.end));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::TfIdfScorer;
    use crate::text::find_char;

    fn lex() -> Lexicon {
        Lexicon::default()
    }

    #[test]
    fn classify_examples() {
        let ev = MentionEvidence::default();
        assert_eq!(classify_mention("she", &ev, &lex()), MentionClass::Pronoun);
        assert_eq!(classify_mention("John Frusciante", &ev, &lex()), MentionClass::Proper);
        assert_eq!(classify_mention("the chain", &ev, &lex()), MentionClass::Nominal);
        assert_eq!(
            classify_mention(
                "The chain",
                &MentionEvidence {
                    sentence_initial: true,
                    pos_tags: None
                },
                &lex()
            ),
            MentionClass::Nominal
        );
        assert_eq!(
            classify_mention(
                "Diamonds",
                &MentionEvidence {
                    sentence_initial: true,
                    pos_tags: None
                },
                &lex()
            ),
            MentionClass::Nominal
        );
        assert_eq!(classify_mention("Diamonds", &ev, &lex()), MentionClass::Proper);
        let tagged = MentionEvidence {
            sentence_initial: true,
            pos_tags: Some(vec!["NNP".into()]),
        };
        assert_eq!(classify_mention("Rihanna", &tagged, &lex()), MentionClass::Proper);
        assert!(MentionClass::Proper > MentionClass::Nominal && MentionClass::Nominal > MentionClass::Pronoun);
    }

    #[test]
    fn ranking_by_hand_count() {
        let passages = vec![
            Passage::new("b", "the rain fell and it stopped."),
            Passage::new("a", "Then Ann Lee met Bo Cole. She smiled at him and he left with her."),
            Passage::new("c", "Then Ann Lee left. She came back."),
        ];
        let r = rank_passages(&passages, &lex(), RankOrder::EntitiesFirst);
        let ids: Vec<&str> = r.iter().map(|s| s.passage_id.as_str()).collect();
        assert_eq!(ids, ["a", "c", "b"]);
        assert_eq!(r[0].rank_key, (2, 4));
        assert_eq!(r[1].rank_key, (1, 1));
        assert_eq!(r[2].rank_key, (0, 1));
    }

    fn draft(passage: &str, q: &str, m1: &str, m2: &str) -> DraftPair {
        let s1 = find_char(passage, m1).unwrap();
        let s2 = find_char(passage, m2).unwrap();
        DraftPair {
            passage_id: "p".into(),
            question: q.into(),
            answer: Answer::new(m2, s2),
            m1: CharSpan::new(s1, s1 + char_len(m1)),
            m2: CharSpan::new(s2, s2 + char_len(m2)),
        }
    }

    const MOTTEUX: &str = "The estate was bought by John Motteux in 1800. Later his nephew inherited it.";

    #[test]
    fn valid_pair_passes() {
        let d = draft(MOTTEUX, "Whose nephew inherited the estate?", "his", "John Motteux");
        let r = validate_pair(&d, MOTTEUX, &[], &lex()).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.rules.len(), 5);
        let again = validate_pair(&d, MOTTEUX, std::slice::from_ref(&d), &lex()).unwrap();
        assert!(!again.passed);
        assert_eq!(again.failed().collect::<Vec<_>>(), [Rule::NonDuplicate]);
    }

    #[test]
    fn same_sentence_fails() {
        let p = "John Motteux sold his estate.";
        let d = draft(p, "Whose estate was sold?", "his", "John Motteux");
        let r = validate_pair(&d, p, &[], &lex()).unwrap();
        assert_eq!(r.failed().collect::<Vec<_>>(), [Rule::DifferentSentence]);
    }

    #[test]
    fn reversed_informativeness_fails() {
        let p = "John Motteux left. Then he returned.";
        let mut d = draft(p, "Who returned?", "John Motteux", "he");
        d.answer = Answer::new("he", find_char(p, "he r").unwrap());
        d.m2 = CharSpan::new(d.answer.answer_start, d.answer.end());
        let r = validate_pair(&d, p, &[], &lex()).unwrap();
        assert_eq!(r.failed().collect::<Vec<_>>(), [Rule::Informativeness]);
    }

    #[test]
    fn bad_spans_and_answers() {
        let mut d = draft(MOTTEUX, "q?", "his", "John Motteux");
        d.m1 = CharSpan::new(70, 500);
        assert!(matches!(
            validate_pair(&d, MOTTEUX, &[], &lex()),
            Err(CurationError::SpanOutOfRange { name: "m1", .. })
        ));
        let mut d = draft(MOTTEUX, "q?", "his", "John Motteux");
        d.answer.answer_start += 1;
        let r = validate_pair(&d, MOTTEUX, &[], &lex()).unwrap();
        assert_eq!(
            r.failed().collect::<Vec<_>>(),
            [Rule::AnswerInPassage, Rule::AnswerEqualsM2]
        );
    }

    #[test]
    fn preview_warns_on_overlap() {
        let scorer = TfIdfScorer::fit(
            split_sentences(MOTTEUX)
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>(),
        );
        let d = draft(MOTTEUX, "Who bought the estate in 1800?", "his", "John Motteux");
        let p = bias_preview(&d, MOTTEUX, &scorer).unwrap();
        assert!(p.answer_in_sentence && p.warning.is_some());
        let d = draft(MOTTEUX, "Whose nephew inherited it later?", "his", "John Motteux");
        let p = bias_preview(&d, MOTTEUX, &scorer).unwrap();
        assert_eq!(p.sentence_index, 1);
        assert!(!p.answer_in_sentence && p.warning.is_none());
        let d = draft(MOTTEUX, "  ", "his", "John Motteux");
        assert!(matches!(
            bias_preview(&d, MOTTEUX, &scorer),
            Err(CurationError::EmptyQuestion)
        ));
    }

    #[test]
    fn highlight_spans() {
        let p = Passage::new("p", "Then Ann Lee met him.");
        let h = highlights(&p, &lex());
        assert_eq!(h.len(), 2);
        assert_eq!((h[0].start, h[0].end, h[0].kind), (5, 12, HighlightKind::Entity));
        assert_eq!((h[1].start, h[1].end, h[1].text.as_str()), (17, 20, "him"));
        let mut q = Passage::new("q", "Bo saw Bo.");
        q.entities = Some(vec!["Bo".into()]);
        assert_eq!(
            highlights(&q, &lex()).iter().map(|h| h.start).collect::<Vec<_>>(),
            [0, 7]
        );
    }
}
