//! Shared text analysis: tokenization, stopword removal and Porter stemming.
//!
//! Documents, column values, metadata and ad-hoc queries all go through
//! [`analyze`] so that their terms live in one vocabulary.

use std::collections::HashSet;
use std::sync::OnceLock;

static STOPWORDS_RAW: &str = include_str!("../data/stopwords_en.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_RAW.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

pub fn stopword_count() -> usize {
    stopwords().len()
}

/// Lowercased alphanumeric runs, in order of appearance.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn stem(word: &str) -> String {
    if word.chars().all(|c| c.is_ascii_alphabetic()) {
        porter_stemmer::stem(word)
    } else {
        word.to_string()
    }
}

/// Tokenize, drop stopwords and one-character tokens, stem.
pub fn analyze(text: &str) -> Vec<String> {
    tokenize(text)
        .filter(|t| t.chars().count() > 1 && !is_stopword(t))
        .map(|t| stem(&t))
        .collect()
}

/// Cell normalization for value-level sets.
pub fn normalize_value(cell: &str) -> String {
    cell.trim().to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_merge_inflections() {
        assert_eq!(analyze("The enzyme inhibits the enzymes."), vec!["enzym", "inhibit", "enzym"]);
    }

    #[test]
    fn all_stopwords_yield_nothing() {
        assert!(analyze("the of and").is_empty());
        assert!(analyze("don't").is_empty());
    }

    #[test]
    fn stopword_list_size() {
        let n = stopword_count();
        assert!((170..=190).contains(&n), "{n}");
    }

    #[test]
    fn numbers_pass_through() {
        assert_eq!(analyze("Batch 2024-05"), vec!["batch", "2024", "05"]);
    }
}
