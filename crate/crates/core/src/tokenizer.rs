//! Byte-level BPE tokenization (GPT-2 file format) plus the chopped
//! re-tokenization used by the tokenization-sensitivity transform.
//!
//! The vocab file is a JSON object mapping token string to id; the merges
//! file holds one space-separated symbol pair per line, ordered by rank,
//! with an optional leading `#` header line. Token strings live in the
//! byte-to-unicode remapped space, so any byte sequence round-trips.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("vocab file {path} is not a JSON object of token to id: {reason}")]
    VocabFormat { path: PathBuf, reason: String },
    #[error("vocab id {id} for token {token:?} is out of range for size {size}")]
    NonDenseVocab { token: String, id: u32, size: usize },
    #[error("vocab id {id} appears more than once")]
    DuplicateVocabId { id: u32 },
    #[error("merges line {line}: expected two space-separated symbols")]
    MergeSyntax { line: usize },
    #[error("merges line {line}: duplicate pair {left:?} {right:?}")]
    DuplicateMerge {
        line: usize,
        left: String,
        right: String,
    },
    #[error("merges line {line}: symbol {symbol:?} not in vocab")]
    UnknownMergeSymbol { line: usize, symbol: String },
    #[error("merges line {line}: merge result {merged:?} not in vocab")]
    MergeResultMissing { line: usize, merged: String },
    #[error("symbol {symbol:?} not in vocab (vocab does not cover all bytes)")]
    UnknownSymbol { symbol: String },
    #[error("token id {id} out of vocab (size {size})")]
    OutOfVocab { id: u32, size: usize },
    #[error("vocab token {token:?} contains {ch:?}, which is not a byte-level symbol")]
    InvalidByteSymbol { token: String, ch: char },
    #[error("chop stride must be at least 1")]
    ZeroStride,
}

/// Index into a token vocabulary. Valid ids are below the vocab size of
/// whichever codec produced them.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A token space with text encode/decode. Implemented by the byte-level BPE
/// spec here and by backend-internal codecs (the reference model's word
/// vocabulary), so token-space transforms can target either.
pub trait TokenCodec: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError>;
    fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError>;
    /// Decoded surface form of one token, if the id is valid.
    fn token_text(&self, id: TokenId) -> Option<String>;

    /// Splits `text` into consecutive `stride`-character chunks, encodes each
    /// chunk independently, and concatenates the result.
    fn chop_encode(&self, text: &str, stride: usize) -> Result<Vec<TokenId>, TokenizerError> {
        if stride == 0 {
            return Err(TokenizerError::ZeroStride);
        }
        let mut out = Vec::new();
        for chunk in char_chunks(text, stride) {
            out.extend(self.encode(chunk)?);
        }
        Ok(out)
    }
}

/// Byte-to-unicode remapping table shared by all GPT-2-family tokenizers.
/// Printable latin bytes map to themselves; the rest map to 256 + n in
/// first-seen order, so every byte has a distinct, visible stand-in.
pub fn byte_unicode_table() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut printable = HashSet::new();
        for b in b'!'..=b'~' {
            printable.insert(b);
        }
        for b in 0xA1u8..=0xAC {
            printable.insert(b);
        }
        for b in 0xAEu8..=0xFF {
            printable.insert(b);
        }
        let mut table = ['\0'; 256];
        let mut next = 0u32;
        for (b, slot) in table.iter_mut().enumerate() {
            *slot = if printable.contains(&(b as u8)) {
                char::from_u32(b as u32).expect("latin-1 scalar")
            } else {
                let c = char::from_u32(256 + next).expect("BMP scalar");
                next += 1;
                c
            };
        }
        table
    })
}

fn byte_decoder() -> &'static HashMap<char, u8> {
    static DECODER: OnceLock<HashMap<char, u8>> = OnceLock::new();
    DECODER.get_or_init(|| {
        byte_unicode_table()
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect()
    })
}

/// A loaded byte-level BPE tokenizer: vocab, ranked merges, byte table.
/// Immutable after load; encode/decode are pure.
pub struct TokenizerSpec {
    vocab: HashMap<String, u32>,
    tokens: Vec<String>,
    merge_ranks: HashMap<(String, String), usize>,
}

impl fmt::Debug for TokenizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TokenizerSpec")
            .field("vocab_size", &self.tokens.len())
            .field("merges", &self.merge_ranks.len())
            .finish()
    }
}

impl TokenizerSpec {
    /// Builds a spec from an id map and rank-ordered merge pairs, validating
    /// the same invariants as file loading.
    pub fn from_parts(
        vocab: HashMap<String, u32>,
        merges: Vec<(String, String)>,
    ) -> Result<Self, TokenizerError> {
        let size = vocab.len();
        let mut tokens = vec![String::new(); size];
        let mut seen = vec![false; size];
        for (token, &id) in &vocab {
            if id as usize >= size {
                return Err(TokenizerError::NonDenseVocab {
                    token: token.clone(),
                    id,
                    size,
                });
            }
            if seen[id as usize] {
                return Err(TokenizerError::DuplicateVocabId { id });
            }
            seen[id as usize] = true;
            tokens[id as usize] = token.clone();
        }
        for token in &tokens {
            for ch in token.chars() {
                if !byte_decoder().contains_key(&ch) {
                    return Err(TokenizerError::InvalidByteSymbol {
                        token: token.clone(),
                        ch,
                    });
                }
            }
        }
        let mut merge_ranks = HashMap::new();
        for (rank, (left, right)) in merges.into_iter().enumerate() {
            let line = rank + 1;
            for symbol in [&left, &right] {
                if !vocab.contains_key(symbol) {
                    return Err(TokenizerError::UnknownMergeSymbol {
                        line,
                        symbol: symbol.clone(),
                    });
                }
            }
            let merged = format!("{left}{right}");
            if !vocab.contains_key(&merged) {
                return Err(TokenizerError::MergeResultMissing { line, merged });
            }
            if merge_ranks
                .insert((left.clone(), right.clone()), rank)
                .is_some()
            {
                return Err(TokenizerError::DuplicateMerge { line, left, right });
            }
        }
        Ok(TokenizerSpec {
            vocab,
            tokens,
            merge_ranks,
        })
    }

    pub fn merge_count(&self) -> usize {
        self.merge_ranks.len()
    }

    /// Applies ranked merges to one pre-token's symbol sequence.
    fn bpe(&self, mut symbols: Vec<String>) -> Vec<String> {
        if symbols.len() < 2 {
            return symbols;
        }
        loop {
            let mut best: Option<(usize, (String, String))> = None;
            for window in symbols.windows(2) {
                let pair = (window[0].clone(), window[1].clone());
                if let Some(&rank) = self.merge_ranks.get(&pair) {
                    if best.as_ref().is_none_or(|(r, _)| rank < *r) {
                        best = Some((rank, pair));
                    }
                }
            }
            let Some((_, (left, right))) = best else {
                break;
            };
            let merged = format!("{left}{right}");
            let mut next = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    next.push(merged.clone());
                    i += 2;
                } else {
                    next.push(symbols[i].clone());
                    i += 1;
                }
            }
            symbols = next;
            if symbols.len() < 2 {
                break;
            }
        }
        symbols
    }
}

impl TokenCodec for TokenizerSpec {
    fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        let table = byte_unicode_table();
        let mut ids = Vec::new();
        for pretoken in pretokenize(text) {
            let symbols: Vec<String> = pretoken
                .bytes()
                .map(|b| table[b as usize].to_string())
                .collect();
            for symbol in self.bpe(symbols) {
                match self.vocab.get(&symbol) {
                    Some(&id) => ids.push(TokenId(id)),
                    None => return Err(TokenizerError::UnknownSymbol { symbol }),
                }
            }
        }
        Ok(ids)
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let decoder = byte_decoder();
        let mut bytes = Vec::new();
        for &TokenId(id) in ids {
            let token = self
                .tokens
                .get(id as usize)
                .ok_or(TokenizerError::OutOfVocab {
                    id,
                    size: self.tokens.len(),
                })?;
            for ch in token.chars() {
                // from_parts validated every vocab char against the byte table
                bytes.push(*decoder.get(&ch).expect("validated byte symbol"));
            }
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    fn token_text(&self, id: TokenId) -> Option<String> {
        let token = self.tokens.get(id.0 as usize)?;
        let decoder = byte_decoder();
        let bytes: Vec<u8> = token
            .chars()
            .map(|ch| *decoder.get(&ch).expect("validated byte symbol"))
            .collect();
        Some(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Loads a GPT-2-format tokenizer from a vocab JSON file and a merges file.
pub fn load_tokenizer(
    vocab_path: &Path,
    merges_path: &Path,
) -> Result<TokenizerSpec, TokenizerError> {
    let vocab_raw = std::fs::read_to_string(vocab_path).map_err(|source| TokenizerError::Io {
        path: vocab_path.to_path_buf(),
        source,
    })?;
    let vocab: HashMap<String, u32> =
        serde_json::from_str(&vocab_raw).map_err(|e| TokenizerError::VocabFormat {
            path: vocab_path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let merges_raw = std::fs::read_to_string(merges_path).map_err(|source| TokenizerError::Io {
        path: merges_path.to_path_buf(),
        source,
    })?;
    let mut merges = Vec::new();
    for (line_no, line) in merges_raw.lines().enumerate() {
        if line.trim().is_empty() || (line_no == 0 && line.starts_with('#')) {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => merges.push((a.to_string(), b.to_string())),
            _ => return Err(TokenizerError::MergeSyntax { line: line_no + 1 }),
        }
    }
    TokenizerSpec::from_parts(vocab, merges)
}

/// Wraps a codec so every encoding starts with a begin-of-sequence token,
/// for backends that require one. Decoding strips a single leading BOS.
pub struct BosCodec<C: TokenCodec> {
    inner: C,
    bos: TokenId,
}

impl<C: TokenCodec> BosCodec<C> {
    pub fn new(inner: C, bos: TokenId) -> Result<Self, TokenizerError> {
        if bos.0 as usize >= inner.vocab_size() {
            return Err(TokenizerError::OutOfVocab {
                id: bos.0,
                size: inner.vocab_size(),
            });
        }
        Ok(BosCodec { inner, bos })
    }
}

impl<C: TokenCodec> TokenCodec for BosCodec<C> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        let mut ids = vec![self.bos];
        ids.extend(self.inner.encode(text)?);
        Ok(ids)
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let body = ids.strip_prefix(&[self.bos]).unwrap_or(ids);
        self.inner.decode(body)
    }

    fn token_text(&self, id: TokenId) -> Option<String> {
        self.inner.token_text(id)
    }

    fn chop_encode(&self, text: &str, stride: usize) -> Result<Vec<TokenId>, TokenizerError> {
        // one BOS for the whole input, not one per chunk
        let mut ids = vec![self.bos];
        ids.extend(self.inner.chop_encode(text, stride)?);
        Ok(ids)
    }
}

/// Splits text into consecutive chunks of `stride` unicode scalar values.
/// Chunks never split a multi-byte character. The final chunk may be short.
pub fn char_chunks(text: &str, stride: usize) -> Vec<&str> {
    assert!(stride >= 1, "stride must be at least 1");
    if text.is_empty() {
        return Vec::new();
    }
    let mut chunks = Vec::new();
    let mut start = 0usize;
    let mut count = 0usize;
    for (offset, _) in text.char_indices() {
        if count == stride {
            chunks.push(&text[start..offset]);
            start = offset;
            count = 0;
        }
        count += 1;
    }
    chunks.push(&text[start..]);
    chunks
}

/// GPT-2 pre-tokenization: contraction suffixes, optionally-space-prefixed
/// letter/number/other runs, and whitespace runs that leave their final
/// space to the following word. Hand-rolled equivalent of the published
/// pattern, so no lookahead regex engine is needed.
pub fn pretokenize(text: &str) -> Vec<&str> {
    const CONTRACTIONS: &[&str] = &["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |idx: usize| -> usize {
        if idx < n {
            chars[idx].0
        } else {
            text.len()
        }
    };
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < n {
        let c = chars[i].1;
        if c == '\'' {
            let rest = &text[chars[i].0..];
            if let Some(suffix) = CONTRACTIONS.iter().find(|s| rest.starts_with(**s)) {
                let char_len = suffix.chars().count();
                out.push(&text[byte_at(i)..byte_at(i + char_len)]);
                i += char_len;
                continue;
            }
        }
        let start = i;
        let mut j = i;
        let mut lead = c;
        if lead == ' ' && j + 1 < n && !chars[j + 1].1.is_whitespace() {
            j += 1;
            lead = chars[j].1;
        }
        if lead.is_alphabetic() {
            while j < n && chars[j].1.is_alphabetic() {
                j += 1;
            }
            out.push(&text[byte_at(start)..byte_at(j)]);
            i = j;
            continue;
        }
        if lead.is_numeric() {
            while j < n && chars[j].1.is_numeric() {
                j += 1;
            }
            out.push(&text[byte_at(start)..byte_at(j)]);
            i = j;
            continue;
        }
        if !lead.is_whitespace() {
            while j < n && {
                let ch = chars[j].1;
                !ch.is_whitespace() && !ch.is_alphabetic() && !ch.is_numeric()
            } {
                j += 1;
            }
            out.push(&text[byte_at(start)..byte_at(j)]);
            i = j;
            continue;
        }
        // whitespace run: if followed by non-whitespace, the final whitespace
        // character belongs to the next token
        let mut k = i;
        while k < n && chars[k].1.is_whitespace() {
            k += 1;
        }
        if k < n && k - i >= 2 {
            out.push(&text[byte_at(i)..byte_at(k - 1)]);
            i = k - 1;
        } else {
            out.push(&text[byte_at(i)..byte_at(k)]);
            i = k;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_spec() -> TokenizerSpec {
        // 10 symbols, 2 merges: enough to hand-execute the merge sequence.
        let entries = ["a", "b", "c", "d", "e", "f", "g", "h", "ab", "abab"];
        let vocab: HashMap<String, u32> = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i as u32))
            .collect();
        let merges = vec![
            ("a".to_string(), "b".to_string()),
            ("ab".to_string(), "ab".to_string()),
        ];
        TokenizerSpec::from_parts(vocab, merges).unwrap()
    }

    /// Full 256-symbol byte vocab plus the given merge chain.
    fn byte_spec(merges: &[(&str, &str)]) -> TokenizerSpec {
        let table = byte_unicode_table();
        let mut vocab: HashMap<String, u32> =
            (0..256).map(|b| (table[b].to_string(), b as u32)).collect();
        let mut next = 256u32;
        let owned: Vec<(String, String)> = merges
            .iter()
            .map(|(a, b)| {
                let merged = format!("{a}{b}");
                vocab.entry(merged).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                });
                (a.to_string(), b.to_string())
            })
            .collect();
        TokenizerSpec::from_parts(vocab, owned).unwrap()
    }

    #[test]
    fn byte_table_matches_reference_points() {
        let t = byte_unicode_table();
        assert_eq!(t[b'!' as usize], '!');
        assert_eq!(t[b'a' as usize], 'a');
        assert_eq!(t[b' ' as usize], '\u{120}'); // the leading-space marker
        assert_eq!(t[0], '\u{100}');
        assert_eq!(t[b'\n' as usize], '\u{10A}');
    }

    #[test]
    fn toy_vocab_merge_sequence() {
        // hand execution: a,b,a,b -> ab,ab -> abab
        let spec = toy_spec();
        assert_eq!(spec.encode("abab").unwrap(), vec![TokenId(9)]);
        // only the first merge applies here: a,b,c -> ab,c
        assert_eq!(spec.encode("abc").unwrap(), vec![TokenId(8), TokenId(2)]);
        assert_eq!(spec.decode(&[TokenId(9)]).unwrap(), "abab");
    }

    #[test]
    fn empty_text_encodes_to_nothing() {
        assert!(toy_spec().encode("").unwrap().is_empty());
    }

    #[test]
    fn unknown_symbol_is_reported() {
        let err = toy_spec().encode("xyz").unwrap_err();
        assert!(matches!(err, TokenizerError::UnknownSymbol { .. }));
    }

    #[test]
    fn out_of_vocab_id_errors_on_decode() {
        let err = toy_spec().decode(&[TokenId(10)]).unwrap_err();
        assert!(matches!(err, TokenizerError::OutOfVocab { id: 10, .. }));
    }

    #[test]
    fn duplicate_merge_is_rejected() {
        let entries = ["a", "b", "ab"];
        let vocab: HashMap<String, u32> = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i as u32))
            .collect();
        let merges = vec![
            ("a".to_string(), "b".to_string()),
            ("a".to_string(), "b".to_string()),
        ];
        let err = TokenizerSpec::from_parts(vocab, merges).unwrap_err();
        assert!(matches!(
            err,
            TokenizerError::DuplicateMerge { line: 2, .. }
        ));
    }

    #[test]
    fn merge_result_must_be_in_vocab() {
        let entries = ["a", "b"];
        let vocab: HashMap<String, u32> = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i as u32))
            .collect();
        let merges = vec![("a".to_string(), "b".to_string())];
        let err = TokenizerSpec::from_parts(vocab, merges).unwrap_err();
        assert!(matches!(err, TokenizerError::MergeResultMissing { .. }));
    }

    #[test]
    fn char_level_vocab_encodes_per_byte() {
        let spec = byte_spec(&[]);
        let ids = spec.encode("hi there").unwrap();
        assert_eq!(ids.len(), "hi there".len());
        assert_eq!(spec.decode(&ids).unwrap(), "hi there");
    }

    #[test]
    fn multibyte_text_round_trips() {
        let spec = byte_spec(&[]);
        for s in ["héllo wörld", "な るほど", "emoji 🎉 end", "mixed née 42"] {
            let ids = spec.encode(s).unwrap();
            assert_eq!(spec.decode(&ids).unwrap(), s, "round trip of {s:?}");
        }
    }

    #[test]
    fn pretokenize_matches_reference_pattern() {
        let cases: Vec<(&str, Vec<&str>)> = vec![
            ("Hello world", vec!["Hello", " world"]),
            ("Media.Vision would", vec!["Media", ".", "Vision", " would"]),
            ("don't stop", vec!["don", "'t", " stop"]),
            ("it's 42 items", vec!["it", "'s", " 42", " items"]),
            ("a  b", vec!["a", " ", " b"]),
            ("a   b", vec!["a", "  ", " b"]),
            ("tab\there", vec!["tab", "\t", "here"]),
            ("trailing  ", vec!["trailing", "  "]),
            ("x 'sand", vec!["x", " '", "sand"]),
            ("O'Neill", vec!["O", "'", "Neill"]),
            ("!!?. done", vec!["!!?.", " done"]),
            (" lead", vec![" lead"]),
            ("", vec![]),
        ];
        for (input, expected) in cases {
            assert_eq!(pretokenize(input), expected, "pretokenize({input:?})");
        }
    }

    #[test]
    fn contraction_only_fires_at_apostrophe() {
        assert_eq!(pretokenize("'sand"), vec!["'s", "and"]);
        assert_eq!(pretokenize("he'll go"), vec!["he", "'ll", " go"]);
    }

    #[test]
    fn chunks_count_scalars_not_bytes() {
        let chunks = char_chunks("naïve café", 4);
        assert_eq!(chunks, vec!["naïv", "e ca", "fé"]);
        for chunk in chunks {
            assert!(chunk.chars().count() <= 4);
        }
    }

    #[test]
    fn chop_with_large_stride_equals_encode() {
        let spec = byte_spec(&[("t", "h"), ("th", "e")]);
        let text = "the theme";
        assert_eq!(
            spec.chop_encode(text, text.chars().count()).unwrap(),
            spec.encode(text).unwrap()
        );
        assert_eq!(
            spec.chop_encode(text, 100).unwrap(),
            spec.encode(text).unwrap()
        );
    }

    #[test]
    fn chop_decodes_to_original_text() {
        let spec = byte_spec(&[("t", "h"), ("th", "e")]);
        let text = "the weather thesis";
        for stride in [1usize, 2, 3, 5, 7, 50] {
            let ids = spec.chop_encode(text, stride).unwrap();
            assert_eq!(spec.decode(&ids).unwrap(), text, "stride {stride}");
        }
    }

    #[test]
    fn chop_never_shortens_tokenization() {
        let spec = byte_spec(&[("t", "h"), ("th", "e"), ("i", "s"), ("the", "m")]);
        for text in ["the them theme", "this is the thesis", "mathematics"] {
            let base = spec.encode(text).unwrap().len();
            for stride in 1..=10usize {
                let chopped = spec.chop_encode(text, stride).unwrap().len();
                assert!(
                    chopped >= base,
                    "stride {stride} on {text:?}: {chopped} < {base}"
                );
            }
        }
    }

    #[test]
    fn zero_stride_is_rejected() {
        let spec = byte_spec(&[]);
        assert!(matches!(
            spec.chop_encode("abc", 0),
            Err(TokenizerError::ZeroStride)
        ));
    }

    #[test]
    fn loaded_vocab_size_equals_independent_entry_count() {
        // count the vocab file's entries without going through the loader
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tokenizer");
        let raw = std::fs::read_to_string(dir.join("vocab.json")).unwrap();
        let entries: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&raw).unwrap();
        let spec = load_tokenizer(&dir.join("vocab.json"), &dir.join("merges.txt")).unwrap();
        assert_eq!(spec.vocab_size(), entries.len());
        assert!(spec.merge_count() > 100);
    }

    #[test]
    fn bos_codec_prepends_once_and_round_trips() {
        let spec = byte_spec(&[("t", "h")]);
        let bos = TokenId(0);
        let wrapped = BosCodec::new(spec, bos).unwrap();
        let ids = wrapped.encode("the").unwrap();
        assert_eq!(ids[0], bos);
        assert_eq!(wrapped.decode(&ids).unwrap(), "the");
        let chopped = wrapped.chop_encode("the thing", 4).unwrap();
        assert_eq!(chopped[0], bos);
        assert_eq!(chopped.iter().filter(|t| **t == bos).count(), 1);
        assert_eq!(wrapped.decode(&chopped).unwrap(), "the thing");
    }
}
