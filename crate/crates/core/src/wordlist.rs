//! Profanity term lists: loading, normalization, and whole-word matching.
//!
//! File format: one lowercase term per line, UTF-8, `#` comment lines and
//! blank lines ignored. Matching is case-insensitive with unicode
//! alphanumeric word boundaries, so a term never matches inside a longer
//! word ("Scunthorpe" does not contain a four-letter entry).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WordListError {
    #[error("cannot read wordlist {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wordlist {path} is empty after dropping comments and blanks")]
    Empty { path: PathBuf },
}

/// A set of lowercase terms loaded from a wordlist file.
///
/// Invariants: nonempty; no term contains whitespace. Lines with internal
/// whitespace (multi-word entries) are dropped and counted in
/// `skipped_multiword`, since whole-word matching is defined per word.
#[derive(Debug, Clone)]
pub struct WordList {
    terms: BTreeSet<String>,
    pub source: PathBuf,
    pub skipped_multiword: usize,
}

impl WordList {
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(&term.to_lowercase())
    }

    /// Builds a list from in-memory terms; used by tests and by callers that
    /// assemble lists programmatically.
    pub fn from_terms<I: IntoIterator<Item = S>, S: Into<String>>(
        terms: I,
        source: PathBuf,
    ) -> Result<Self, WordListError> {
        let mut set = BTreeSet::new();
        let mut skipped = 0usize;
        for term in terms {
            let term: String = term.into();
            let term = term.trim().to_lowercase();
            if term.is_empty() || term.starts_with('#') {
                continue;
            }
            if term.chars().any(char::is_whitespace) {
                skipped += 1;
                continue;
            }
            set.insert(term);
        }
        if set.is_empty() {
            return Err(WordListError::Empty { path: source });
        }
        Ok(WordList {
            terms: set,
            source,
            skipped_multiword: skipped,
        })
    }
}

/// Loads a wordlist file: lowercased, deduplicated, comments and blanks
/// dropped. Errors when nothing remains.
pub fn load_wordlist(path: &Path) -> Result<WordList, WordListError> {
    let raw = fs::read_to_string(path).map_err(|source| WordListError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    WordList::from_terms(raw.lines().map(str::to_owned), path.to_path_buf())
}

/// Whole-word, case-insensitive containment test.
///
/// A term matches when it occurs in `text` with non-alphanumeric characters
/// (or string boundaries) on both sides. Hyphenated compounds therefore
/// count as separate words.
pub fn contains_term(text: &str, wordlist: &WordList) -> bool {
    if text.is_empty() {
        return false;
    }
    let lower = text.to_lowercase();
    wordlist
        .terms()
        .any(|term| matches_whole_word(&lower, term))
}

fn matches_whole_word(lower_text: &str, term: &str) -> bool {
    for (start, _) in lower_text.match_indices(term) {
        let before_ok = !lower_text[..start]
            .chars()
            .next_back()
            .is_some_and(char::is_alphanumeric);
        let after_ok = !lower_text[start + term.len()..]
            .chars()
            .next()
            .is_some_and(char::is_alphanumeric);
        if before_ok && after_ok {
            return true;
        }
    }
    false
}
