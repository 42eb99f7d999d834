//! Character-offset helpers.
//!
//! All offsets in this crate count Unicode scalar values, the same unit the
//! SQuAD tooling uses for `answer_start`.

/// Number of chars in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte index of the char at `char_idx`, or `s.len()` when it is one past the end.
pub fn byte_index(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut seen = 0;
    for (b, _) in s.char_indices() {
        if seen == char_idx {
            return Some(b);
        }
        seen += 1;
    }
    (seen == char_idx).then_some(s.len())
}

/// The substring covering chars `[start, end)`.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_index(s, start)?;
    let b1 = byte_index(s, end)?;
    Some(&s[b0..b1])
}

/// Char offset of the first occurrence of `needle` in `haystack`.
pub fn find_char(haystack: &str, needle: &str) -> Option<usize> {
    haystack.find(needle).map(|b| haystack[..b].chars().count())
}

/// Case-insensitive variant of [`find_char`], comparing chars after simple lowercasing.
pub fn find_char_caseless(haystack: &str, needle: &str) -> Option<usize> {
    let hay: Vec<char> = haystack.chars().collect();
    let pat: Vec<char> = needle.chars().collect();
    if pat.is_empty() {
        return Some(0);
    }
    let eq = |a: char, b: char| a == b || a.to_lowercase().eq(b.to_lowercase());
    (0..hay.len().checked_sub(pat.len()).map_or(0, |n| n + 1))
        .find(|&i| pat.iter().zip(&hay[i..]).all(|(&p, &h)| eq(p, h)))
}

/// Lowercase and collapse runs of whitespace to a single space.
pub fn fold_whitespace_lower(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
