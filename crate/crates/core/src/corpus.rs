//! Corpus loading, sentence segmentation, passage windowing, and
//! deterministic sampling.
//!
//! Two input formats are supported: UTF-8 plain text with documents
//! separated by blank lines, and UTF-8 record-lines (one JSON object per
//! line with a configurable text field, default `"text"`). Loading is
//! streaming, so corpora larger than memory can be iterated.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::util::stable_hash64;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at {path}:{line}: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("passage window must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("cannot sample from an empty unit list")]
    EmptyUnits,
    #[error("sample size must be at least 1")]
    ZeroSample,
}

/// One raw document from a corpus.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Document {
    /// Stable id derived from (source file, record index).
    pub id: String,
    /// NFC-normalized, trimmed text. Non-empty.
    pub text: String,
    /// Origin label (the source path as given).
    pub source: String,
}

/// One sentence of a document, indexed densely from 0.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
}

impl Sentence {
    /// Stable unit id, usable as a sampling and pairing key.
    pub fn unit_id(&self) -> String {
        format!("{}:s{}", self.doc_id, self.index)
    }
}

/// A window of `w >= 2` consecutive sentences from one document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Passage {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

impl Passage {
    pub fn unit_id(&self) -> String {
        let first = self.sentences.first().map(|s| s.index).unwrap_or(0);
        let last = self.sentences.last().map(|s| s.index).unwrap_or(0);
        format!("{}:p{}-{}", self.doc_id, first, last)
    }

    /// Full passage text, sentences joined with single spaces.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.sentences.iter().map(|s| s.text.as_str()).collect();
        parts.join(" ")
    }

    /// Text of everything before the final sentence, joined with spaces.
    pub fn context_text(&self) -> String {
        let parts: Vec<&str> = self.sentences[..self.sentences.len() - 1]
            .iter()
            .map(|s| s.text.as_str())
            .collect();
        parts.join(" ")
    }

    pub fn final_sentence(&self) -> &Sentence {
        self.sentences.last().expect("passages are non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// Blank-line-separated documents.
    Text,
    /// One JSON object per line with a text field.
    JsonLines,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(CorpusFormat::Text),
            "jsonl" => Ok(CorpusFormat::JsonLines),
            other => Err(format!(
                "unknown corpus format {other:?} (expected text|jsonl)"
            )),
        }
    }
}

/// Streaming document reader. Documents shorter than one sentence after
/// trimming are skipped and counted in `dropped_empty`, not errored.
pub struct DocumentReader {
    lines: std::io::Lines<BufReader<File>>,
    path: PathBuf,
    source: String,
    format: CorpusFormat,
    text_field: String,
    next_index: usize,
    line_no: usize,
    pub dropped_empty: usize,
    done: bool,
}

impl DocumentReader {
    fn make_document(&mut self, raw: &str) -> Option<Document> {
        // NFC keeps ids and cache keys stable across visually identical inputs.
        let text: String = raw.nfc().collect::<String>().trim().to_string();
        let index = self.next_index;
        self.next_index += 1;
        if text.is_empty() {
            self.dropped_empty += 1;
            return None;
        }
        Some(Document {
            id: format!("{}:{}", self.source, index),
            text,
            source: self.source.clone(),
        })
    }

    fn next_text_block(&mut self) -> Result<Option<String>, CorpusError> {
        let mut block = String::new();
        loop {
            self.line_no += 1;
            match self.lines.next() {
                Some(Ok(line)) => {
                    if line.trim().is_empty() {
                        if !block.trim().is_empty() {
                            return Ok(Some(block));
                        }
                        block.clear();
                    } else {
                        if !block.is_empty() {
                            block.push('\n');
                        }
                        block.push_str(&line);
                    }
                }
                Some(Err(source)) => {
                    return Err(CorpusError::Io {
                        path: self.path.clone(),
                        source,
                    })
                }
                None => {
                    self.done = true;
                    if block.trim().is_empty() {
                        return Ok(None);
                    }
                    return Ok(Some(block));
                }
            }
        }
    }

    fn next_record(&mut self) -> Result<Option<String>, CorpusError> {
        loop {
            self.line_no += 1;
            match self.lines.next() {
                Some(Ok(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let value: serde_json::Value =
                        serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                            path: self.path.clone(),
                            line: self.line_no,
                            reason: format!("invalid JSON: {e}"),
                        })?;
                    let text = value.get(&self.text_field).and_then(|v| v.as_str()).ok_or(
                        CorpusError::MalformedRecord {
                            path: self.path.clone(),
                            line: self.line_no,
                            reason: format!("missing string field {:?}", self.text_field),
                        },
                    )?;
                    return Ok(Some(text.to_string()));
                }
                Some(Err(source)) => {
                    return Err(CorpusError::Io {
                        path: self.path.clone(),
                        source,
                    })
                }
                None => {
                    self.done = true;
                    return Ok(None);
                }
            }
        }
    }
}

impl Iterator for DocumentReader {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            let raw = match self.format {
                CorpusFormat::Text => self.next_text_block(),
                CorpusFormat::JsonLines => self.next_record(),
            };
            match raw {
                Ok(Some(text)) => {
                    if let Some(doc) = self.make_document(&text) {
                        return Some(Ok(doc));
                    }
                    // dropped empty document: keep scanning
                }
                Ok(None) => return None,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Opens a corpus file for streaming. `text_field` names the record-lines
/// text field and is ignored for plain text.
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    text_field: &str,
) -> Result<DocumentReader, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(DocumentReader {
        lines: BufReader::new(file).lines(),
        path: path.to_path_buf(),
        source,
        format,
        text_field: text_field.to_string(),
        next_index: 0,
        line_no: 0,
        dropped_empty: 0,
        done: false,
    })
}

/// Words whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &["dr.", "mr.", "mrs.", "st.", "vs.", "e.g.", "i.e.", "etc."];

fn is_sentence_opener(c: char) -> bool {
    c.is_uppercase() || c.is_numeric() || matches!(c, '"' | '\'' | '\u{201C}' | '\u{2018}')
}

/// Rule-based sentence segmentation.
///
/// A boundary is a run of `.`, `!`, `?` followed by whitespace and then an
/// uppercase letter, a quote, or a digit. A lone period does not split when
/// the word it terminates is a known abbreviation. A document with no
/// boundary yields a single sentence. Deterministic; no model involved.
pub fn split_sentences(doc: &Document) -> Vec<Sentence> {
    let text = doc.text.as_str();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut boundaries: Vec<usize> = Vec::new(); // byte offsets where a sentence ends (exclusive)

    let mut i = 0;
    while i < n {
        if !matches!(chars[i].1, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        // extend over the full terminal-punctuation run
        let run_start = i;
        while i < n && matches!(chars[i].1, '.' | '!' | '?') {
            i += 1;
        }
        let run_end_byte = if i < n { chars[i].0 } else { text.len() };
        // require whitespace, then a sentence opener
        if i >= n || !chars[i].1.is_whitespace() {
            continue;
        }
        let mut j = i;
        while j < n && chars[j].1.is_whitespace() {
            j += 1;
        }
        if j >= n || !is_sentence_opener(chars[j].1) {
            continue;
        }
        // abbreviation exception applies to a single '.' ending a known token
        if i - run_start == 1 && chars[run_start].1 == '.' {
            let word_start = chars[..run_start]
                .iter()
                .rposition(|(_, c)| c.is_whitespace())
                .map(|p| chars[p + 1].0)
                .unwrap_or(0);
            let word = text[word_start..run_end_byte].to_lowercase();
            if ABBREVIATIONS.contains(&word.as_str()) {
                continue;
            }
        }
        boundaries.push(run_end_byte);
    }

    let mut sentences = Vec::new();
    let mut start = 0usize;
    for &end in &boundaries {
        push_sentence(doc, text, start, end, &mut sentences);
        start = end;
    }
    push_sentence(doc, text, start, text.len(), &mut sentences);
    sentences
}

fn push_sentence(doc: &Document, text: &str, start: usize, end: usize, out: &mut Vec<Sentence>) {
    let trimmed = text[start..end].trim();
    if trimmed.is_empty() {
        return;
    }
    out.push(Sentence {
        doc_id: doc.id.clone(),
        index: out.len(),
        text: trimmed.to_string(),
    });
}

/// All maximal non-overlapping windows of `window` consecutive sentences,
/// never spanning document boundaries. Documents shorter than the window
/// yield nothing.
pub fn make_passages(sentences: &[Sentence], window: usize) -> Result<Vec<Passage>, CorpusError> {
    if window < 2 {
        return Err(CorpusError::WindowTooSmall(window));
    }
    let mut passages = Vec::new();
    let mut i = 0;
    while i < sentences.len() {
        let doc_id = &sentences[i].doc_id;
        let mut j = i;
        while j < sentences.len() && &sentences[j].doc_id == doc_id {
            j += 1;
        }
        let doc_slice = &sentences[i..j];
        let mut k = 0;
        while k + window <= doc_slice.len() {
            passages.push(Passage {
                doc_id: doc_id.clone(),
                sentences: doc_slice[k..k + window].to_vec(),
            });
            k += window;
        }
        i = j;
    }
    Ok(passages)
}

/// Deterministic sample of `n` units without replacement.
///
/// A pure function of (unit ids, n, seed): each unit is ranked by a stable
/// hash of (seed, id) and the `n` smallest are kept, returned in their
/// original order. When `n >= units.len()` the input is returned untouched.
pub fn sample_units<T>(
    units: Vec<T>,
    n: usize,
    seed: u64,
    id_of: impl Fn(&T) -> String,
) -> Result<Vec<T>, CorpusError> {
    if units.is_empty() {
        return Err(CorpusError::EmptyUnits);
    }
    if n == 0 {
        return Err(CorpusError::ZeroSample);
    }
    if n >= units.len() {
        return Ok(units);
    }
    let mut keyed: Vec<(u64, String, usize)> = units
        .iter()
        .enumerate()
        .map(|(pos, u)| {
            let id = id_of(u);
            (
                stable_hash64(&[&seed.to_le_bytes(), id.as_bytes()]),
                id,
                pos,
            )
        })
        .collect();
    keyed.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    let mut selected: Vec<usize> = keyed.into_iter().take(n).map(|(_, _, pos)| pos).collect();
    selected.sort_unstable();
    let mut picked: Vec<Option<T>> = units.into_iter().map(Some).collect();
    Ok(selected
        .into_iter()
        .map(|pos| picked[pos].take().expect("positions are unique"))
        .collect())
}
