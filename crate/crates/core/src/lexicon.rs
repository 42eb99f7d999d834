//! Closed word lists used across conversion, probing and curation.

use std::collections::BTreeSet;

/// Personal, possessive, reflexive and demonstrative pronouns.
pub const DEFAULT_PRONOUNS: &[&str] = &[
    "he",
    "she",
    "it",
    "they",
    "him",
    "her",
    "them",
    "his",
    "hers",
    "its",
    "their",
    "theirs",
    "himself",
    "herself",
    "itself",
    "themselves",
    "this",
    "that",
    "these",
    "those",
    "i",
    "you",
    "we",
    "me",
    "us",
    "my",
    "your",
    "our",
    "mine",
    "yours",
    "ours",
];

/// Pronouns that only refer to people; used for the who/what decision.
pub const PERSON_PRONOUNS: &[&str] = &[
    "he",
    "she",
    "him",
    "her",
    "his",
    "hers",
    "himself",
    "herself",
    "i",
    "me",
    "my",
    "mine",
    "myself",
    "we",
    "us",
    "our",
    "ours",
    "ourselves",
    "you",
    "your",
    "yours",
    "yourself",
];

/// Interrogative words kept by the wh-only transform.
pub const DEFAULT_WH_WORDS: &[&str] = &["who", "whom", "whose", "what", "which", "when", "where", "why", "how"];

/// Words that carry capitalisation for grammatical reasons only.
pub const FUNCTION_WORDS: &[&str] = &[
    "a",
    "an",
    "the",
    "and",
    "or",
    "but",
    "of",
    "in",
    "on",
    "at",
    "to",
    "for",
    "with",
    "by",
    "from",
    "as",
    "so",
    "if",
    "then",
    "when",
    "while",
    "after",
    "before",
    "meanwhile",
    "however",
    "also",
    "there",
    "here",
    "what",
    "who",
    "which",
    "where",
    "why",
    "how",
    "some",
    "many",
    "no",
    "not",
    "all",
    "each",
    "every",
    "one",
    "two",
];

/// Strip leading/trailing punctuation from a token.
pub fn strip_punct(tok: &str) -> &str {
    tok.trim_matches(|c: char| !c.is_alphanumeric())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pronouns: BTreeSet<String>,
    person_pronouns: BTreeSet<String>,
    function_words: BTreeSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::with_pronouns(DEFAULT_PRONOUNS.iter().copied())
    }
}

impl Lexicon {
    pub fn with_pronouns<I, S>(pronouns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let lower = |it: &[&str]| it.iter().map(|s| s.to_string()).collect();
        Self {
            pronouns: pronouns.into_iter().map(|s| s.as_ref().to_lowercase()).collect(),
            person_pronouns: lower(PERSON_PRONOUNS),
            function_words: lower(FUNCTION_WORDS),
        }
    }

    pub fn is_pronoun(&self, token: &str) -> bool {
        self.pronouns.contains(&strip_punct(token).to_lowercase())
    }

    pub fn is_person_pronoun(&self, token: &str) -> bool {
        self.person_pronouns.contains(&strip_punct(token).to_lowercase())
    }

    pub fn is_function_word(&self, token: &str) -> bool {
        let t = strip_punct(token).to_lowercase();
        self.function_words.contains(&t) || self.pronouns.contains(&t)
    }

    /// A mention is pronominal when every one of its tokens is a pronoun.
    pub fn is_pronominal(&self, text: &str) -> bool {
        let mut toks = text.split_whitespace().peekable();
        toks.peek().is_some() && toks.all(|t| self.is_pronoun(t))
    }

    pub fn pronouns(&self) -> impl Iterator<Item = &str> {
        self.pronouns.iter().map(String::as_str)
    }
}
