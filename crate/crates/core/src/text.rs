//! Shared text utilities: whitespace tokenization, span search, and the
//! surface normalization used when matching mention strings across clusters.

use alloc::string::String;
use alloc::vec::Vec;

/// Split on ASCII/Unicode whitespace. This is the tokenization applied to
/// model-generated text (summaries, paraphrases); corpus documents arrive
/// pre-tokenized and are never re-split.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

/// Number of whitespace-delimited tokens, used for prompt budget accounting.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercase, strip punctuation, collapse internal whitespace. Two mention
/// surfaces that normalize to the same string are treated as the same event
/// "type" word by the error taxonomy.
pub fn normalize_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else if ch.is_alphanumeric() {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
        }
        // punctuation and symbols are dropped entirely
    }
    out
}

fn eq_token_ci(a: &str, b: &str) -> bool {
    a.chars().flat_map(char::to_lowercase).eq(b.chars().flat_map(char::to_lowercase))
}

/// Find the first occurrence of `needle` (a token sequence) inside
/// `haystack`, comparing tokens case-insensitively. Returns the half-open
/// token span `[start, end)`.
pub fn find_token_span(haystack: &[String], needle: &[String]) -> Option<(usize, usize)> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    'outer: for start in 0..=haystack.len() - needle.len() {
        for (i, n) in needle.iter().enumerate() {
            if !eq_token_ci(&haystack[start + i], n) {
                continue 'outer;
            }
        }
        return Some((start, start + needle.len()));
    }
    None
}
