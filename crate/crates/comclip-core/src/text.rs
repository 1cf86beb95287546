//! Small text helpers shared by the parser and the lexical aligner.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Lowercase alphanumeric tokens; apostrophes are kept inside words so
/// contractions like "don't" survive as one token.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            for lc in ch.to_lowercase() {
                cur.push(lc);
            }
        } else if !cur.is_empty() {
            tokens.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Lowercase, trim, collapse internal whitespace to single spaces.
pub fn normalize_phrase(s: &str) -> String {
    let mut out = String::new();
    for tok in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for ch in tok.chars() {
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
        }
    }
    out
}

/// Strip leading articles from a normalized phrase ("the red car" -> "red car").
pub fn strip_articles(phrase: &str) -> String {
    let mut words: Vec<&str> = phrase.split(' ').filter(|w| !w.is_empty()).collect();
    while let Some(first) = words.first() {
        if matches!(*first, "a" | "an" | "the") && words.len() > 1 {
            words.remove(0);
        } else {
            break;
        }
    }
    words.join(" ")
}

/// Singular/plural spelling variants of a noun token, used for lexical
/// caption matching. Always includes the word itself.
pub fn number_variants(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    out.push(word.to_string());
    // plural forms
    if word.ends_with('y') && word.len() > 2 {
        out.push(alloc::format!("{}ies", &word[..word.len() - 1]));
    }
    if word.ends_with('s') || word.ends_with('x') || word.ends_with("ch") || word.ends_with("sh") {
        out.push(alloc::format!("{word}es"));
    } else {
        out.push(alloc::format!("{word}s"));
    }
    // singular forms
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            out.push(alloc::format!("{stem}y"));
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        if stem.len() >= 2 {
            out.push(stem.to_string());
        }
    }
    if let Some(stem) = word.strip_suffix('s') {
        if stem.len() >= 2 {
            out.push(stem.to_string());
        }
    }
    out.dedup();
    out
}
