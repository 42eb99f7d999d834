//! Rule-based sentence segmentation with exact char offsets.

use serde::{Deserialize, Serialize};

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e", "inc", "ltd", "co", "corp", "gen",
    "col", "lt", "sgt", "capt", "rev", "hon", "no", "fig", "mt", "ft", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
    "sep", "sept", "oct", "nov", "dec", "approx", "dept", "u.s", "u.k",
];

const CLOSERS: &[char] = &['"', '\'', '\u{2019}', '\u{201D}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{2018}', '\u{201C}', '(', '['];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// Char offset of the first char.
    pub start: usize,
    /// Exclusive char end.
    pub end: usize,
    pub text: String,
}

impl Sentence {
    pub fn contains_span(&self, start: usize, end: usize) -> bool {
        self.start <= start && end <= self.end
    }

    pub fn contains_offset(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

fn is_abbreviation(chars: &[char], dot: usize) -> bool {
    let mut begin = dot;
    while begin > 0 && !chars[begin - 1].is_whitespace() {
        begin -= 1;
    }
    let word: String = chars[begin..dot]
        .iter()
        .skip_while(|c| OPENERS.contains(c))
        .collect::<String>()
        .to_lowercase();
    if word.is_empty() {
        return false;
    }
    // Initials ("A.") and dotted acronyms ("U.S.").
    if word
        .split('.')
        .all(|seg| seg.chars().count() == 1 && seg.chars().all(char::is_alphabetic))
    {
        return true;
    }
    ABBREVIATIONS.contains(&word.as_str())
}

/// Split after `.`, `!` or `?` (plus closing quotes/brackets) when followed by
/// whitespace and an uppercase letter, digit or opening quote. Periods ending
/// a known abbreviation or an initial do not split.
pub fn split_sentences(context: &str) -> Vec<Sentence> {
    let chars: Vec<char> = context.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start = match chars.iter().position(|c| !c.is_whitespace()) {
        Some(s) => s,
        None => return out,
    };
    let mut i = start;
    let push = |out: &mut Vec<Sentence>, s: usize, e: usize| {
        out.push(Sentence {
            start: s,
            end: e,
            text: chars[s..e].iter().collect(),
        })
    };
    while i < n {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') && !(c == '.' && is_abbreviation(&chars, i)) {
            let mut end = i + 1;
            while end < n && (CLOSERS.contains(&chars[end]) || matches!(chars[end], '.' | '!' | '?')) {
                end += 1;
            }
            let mut next = end;
            while next < n && chars[next].is_whitespace() {
                next += 1;
            }
            if next > end && next < n {
                let nc = chars[next];
                if nc.is_uppercase() || nc.is_ascii_digit() || OPENERS.contains(&nc) {
                    push(&mut out, start, end);
                    start = next;
                    i = next;
                    continue;
                }
            }
            i = end;
            continue;
        }
        i += 1;
    }
    let mut end = n;
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    push(&mut out, start, end);
    out
}

/// Index of the sentence containing char `offset`.
pub fn sentence_of(sentences: &[Sentence], offset: usize) -> Option<usize> {
    sentences.iter().position(|s| s.contains_offset(offset))
}
