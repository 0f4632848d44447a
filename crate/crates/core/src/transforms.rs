//! The self-supervised text transformations. Each one is a pure function of
//! (input, parameters, seed) and produces an original/transformed pair, or
//! a counted Skip when the rule does not apply to the input.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Passage, Sentence};
use crate::tokenizer::{TokenCodec, TokenId, TokenizerError};

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("trigger count must be at least 1, got {0}")]
    InvalidTriggerCount(usize),
    #[error("trigger word must be non-empty and contain no whitespace")]
    InvalidTrigger,
    #[error("swap count must be at least 1, got {0}")]
    InvalidSwapCount(usize),
    #[error("cannot replace {num_replaced} sentences in a window of {window}")]
    WindowTooSmallForReplacement { window: usize, num_replaced: usize },
    #[error("donor pool has {available} sentences from other documents, need {needed}")]
    DonorPoolTooSmall { available: usize, needed: usize },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

/// Transform tag plus its parameters; echoed into pair ids and reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    Negation,
    TriggerAppend { trigger: String, count: usize },
    ContextSwap { window: usize, num_replaced: usize },
    WordSwap { num_swaps: usize },
    TokenChop { stride: usize },
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PairContent {
    Text(String),
    Passage(Vec<String>),
    Tokens(Vec<TokenId>),
}

impl PairContent {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            PairContent::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_tokens(&self) -> Option<&[TokenId]> {
        match self {
            PairContent::Tokens(t) => Some(t),
            _ => None,
        }
    }

    /// Flat text of the content; passages join their sentences with spaces.
    pub fn joined_text(&self) -> Option<String> {
        match self {
            PairContent::Text(t) => Some(t.clone()),
            PairContent::Passage(s) => Some(s.join(" ")),
            PairContent::Tokens(_) => None,
        }
    }
}

/// An original input and its transformed counterpart. The transform
/// parameters and seed fully determine `transformed` given `original`.
#[derive(Debug, Clone, Serialize)]
pub struct TextPair {
    pub pair_id: String,
    pub original: PairContent,
    pub transformed: PairContent,
    pub transform: TransformKind,
    pub rng_seed: Option<u64>,
    /// Raw text behind token-space pairs, kept for inspection output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NegationAlreadyPresent,
    NoCopula,
    TooFewWords,
    SwapUndidItself,
    UnchangedTokenization,
}

/// A transform either yields a pair or skips the unit; Skip is a value,
/// not an error.
#[derive(Debug, Clone, Serialize)]
pub enum TransformOutcome {
    Pair(TextPair),
    Skip { unit_id: String, reason: SkipReason },
}

impl TransformOutcome {
    pub fn pair(self) -> Option<TextPair> {
        match self {
            TransformOutcome::Pair(p) => Some(p),
            TransformOutcome::Skip { .. } => None,
        }
    }
}

fn boundary_before(text: &str, pos: usize) -> bool {
    !text[..pos]
        .chars()
        .next_back()
        .is_some_and(|c| c.is_alphanumeric())
}

fn boundary_after(text: &str, pos: usize) -> bool {
    !text[pos..]
        .chars()
        .next()
        .is_some_and(|c| c.is_alphanumeric())
}

/// All whole-word, case-insensitive occurrences of `word` (ASCII) in `text`.
fn word_matches(text: &str, word: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (pos, _) in text.char_indices() {
        let end = pos + word.len();
        if let Some(candidate) = text.get(pos..end) {
            if candidate.eq_ignore_ascii_case(word)
                && boundary_before(text, pos)
                && boundary_after(text, end)
            {
                out.push((pos, end));
            }
        }
    }
    out
}

/// Byte range of the earliest whole-word occurrence of any of `words`.
fn find_first_word(text: &str, words: &[&str]) -> Option<(usize, usize)> {
    words
        .iter()
        .filter_map(|w| word_matches(text, w).into_iter().next())
        .min_by_key(|(start, _)| *start)
}

fn contains_word(text: &str, word: &str) -> bool {
    !word_matches(text, word).is_empty()
}

/// True when the sentence already carries a negation cue: a whole-word
/// "not" or "never", an "n't" contraction, or the phrase "no longer".
fn has_negation_cue(text: &str) -> bool {
    if contains_word(text, "not") || contains_word(text, "never") {
        return true;
    }
    // n't is a suffix: boundary required only after it
    let lower = text.to_lowercase();
    for (pos, _) in lower.match_indices("n't") {
        if boundary_after(&lower, pos + 3) {
            return true;
        }
    }
    for (_, end) in word_matches(text, "no") {
        let rest = &text[end..];
        let ws: usize = rest
            .chars()
            .take_while(|c| c.is_whitespace())
            .map(char::len_utf8)
            .sum();
        if ws == 0 {
            continue;
        }
        let after = &rest[ws..];
        if after
            .get(..6)
            .is_some_and(|s| s.eq_ignore_ascii_case("longer"))
            && boundary_after(after, 6)
        {
            return true;
        }
    }
    false
}

/// Inserts " not" after the first whole-word "is", "was", or "were"
/// (case-insensitive). Skips when no copula exists or a negation cue is
/// already present anywhere in the sentence.
pub fn negate(sentence: &Sentence) -> TransformOutcome {
    let text = &sentence.text;
    if has_negation_cue(text) {
        return TransformOutcome::Skip {
            unit_id: sentence.unit_id(),
            reason: SkipReason::NegationAlreadyPresent,
        };
    }
    let Some((_, end)) = find_first_word(text, &["is", "was", "were"]) else {
        return TransformOutcome::Skip {
            unit_id: sentence.unit_id(),
            reason: SkipReason::NoCopula,
        };
    };
    let transformed = format!("{} not{}", &text[..end], &text[end..]);
    TransformOutcome::Pair(TextPair {
        pair_id: format!("negation:{}", sentence.unit_id()),
        original: PairContent::Text(text.clone()),
        transformed: PairContent::Text(transformed),
        transform: TransformKind::Negation,
        rng_seed: None,
        source_text: None,
    })
}

/// Appends `count` space-separated copies of the trigger word to the
/// sentence.
pub fn append_trigger(
    sentence: &Sentence,
    trigger: &str,
    count: usize,
) -> Result<TextPair, TransformError> {
    if count < 1 {
        return Err(TransformError::InvalidTriggerCount(count));
    }
    if trigger.is_empty() || trigger.chars().any(char::is_whitespace) {
        return Err(TransformError::InvalidTrigger);
    }
    let suffix = vec![trigger; count].join(" ");
    let transformed = format!("{} {}", sentence.text, suffix);
    Ok(TextPair {
        pair_id: format!("trigger:{}", sentence.unit_id()),
        original: PairContent::Text(sentence.text.clone()),
        transformed: PairContent::Text(transformed),
        transform: TransformKind::TriggerAppend {
            trigger: trigger.to_string(),
            count,
        },
        rng_seed: None,
        source_text: None,
    })
}

/// Replaces the first `num_replaced` sentences of the passage with distinct
/// donor sentences drawn (seeded) from other documents. The final sentence
/// is always preserved verbatim.
pub fn swap_context(
    passage: &Passage,
    donor_pool: &[Sentence],
    num_replaced: usize,
    seed: u64,
) -> Result<TextPair, TransformError> {
    let window = passage.sentences.len();
    if num_replaced < 1 || num_replaced >= window {
        return Err(TransformError::WindowTooSmallForReplacement {
            window,
            num_replaced,
        });
    }
    let eligible: Vec<&Sentence> = donor_pool
        .iter()
        .filter(|s| s.doc_id != passage.doc_id)
        .collect();
    if eligible.len() < num_replaced {
        return Err(TransformError::DonorPoolTooSmall {
            available: eligible.len(),
            needed: num_replaced,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, eligible.len(), num_replaced);
    let mut transformed: Vec<String> = picked.iter().map(|i| eligible[i].text.clone()).collect();
    for sentence in &passage.sentences[num_replaced..] {
        transformed.push(sentence.text.clone());
    }
    let original: Vec<String> = passage.sentences.iter().map(|s| s.text.clone()).collect();
    Ok(TextPair {
        pair_id: format!("context_swap:{}", passage.unit_id()),
        original: PairContent::Passage(original),
        transformed: PairContent::Passage(transformed),
        transform: TransformKind::ContextSwap {
            window,
            num_replaced,
        },
        rng_seed: Some(seed),
        source_text: None,
    })
}

/// Whitespace split that keeps the separators, so a rebuild after swapping
/// preserves the original spacing exactly. Punctuation stays attached to
/// its word.
fn split_keeping_separators(text: &str) -> (Vec<&str>, Vec<&str>) {
    let mut words = Vec::new();
    let mut seps = Vec::new();
    let mut pos = 0usize;
    let bytes_len = text.len();
    while pos < bytes_len {
        let rest = &text[pos..];
        let ws_len: usize = rest
            .chars()
            .take_while(|c| c.is_whitespace())
            .map(char::len_utf8)
            .sum();
        seps.push(&rest[..ws_len]);
        pos += ws_len;
        if pos >= bytes_len {
            return (words, seps);
        }
        let rest = &text[pos..];
        let word_len: usize = rest
            .chars()
            .take_while(|c| !c.is_whitespace())
            .map(char::len_utf8)
            .sum();
        words.push(&rest[..word_len]);
        pos += word_len;
    }
    seps.push("");
    (words, seps)
}

fn rebuild(words: &[String], seps: &[&str]) -> String {
    let mut out = String::new();
    for (i, word) in words.iter().enumerate() {
        out.push_str(seps[i]);
        out.push_str(word);
    }
    if seps.len() > words.len() {
        out.push_str(seps[words.len()]);
    }
    out
}

/// Performs `num_swaps` independent seeded swaps of two distinct word
/// positions. Skips sentences with fewer than two words, and the rare case
/// where the swaps exactly undo each other.
pub fn swap_words(
    sentence: &Sentence,
    num_swaps: usize,
    seed: u64,
) -> Result<TransformOutcome, TransformError> {
    if num_swaps < 1 {
        return Err(TransformError::InvalidSwapCount(num_swaps));
    }
    let (word_slices, seps) = split_keeping_separators(&sentence.text);
    if word_slices.len() < 2 {
        return Ok(TransformOutcome::Skip {
            unit_id: sentence.unit_id(),
            reason: SkipReason::TooFewWords,
        });
    }
    let mut words: Vec<String> = word_slices.iter().map(|w| w.to_string()).collect();
    let n = words.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..num_swaps {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        words.swap(i, j);
    }
    let transformed = rebuild(&words, &seps);
    if transformed == sentence.text {
        return Ok(TransformOutcome::Skip {
            unit_id: sentence.unit_id(),
            reason: SkipReason::SwapUndidItself,
        });
    }
    Ok(TransformOutcome::Pair(TextPair {
        pair_id: format!("word_swap:{}", sentence.unit_id()),
        original: PairContent::Text(sentence.text.clone()),
        transformed: PairContent::Text(transformed),
        transform: TransformKind::WordSwap { num_swaps },
        rng_seed: Some(seed),
        source_text: None,
    }))
}

/// Token-space pair: the standard encoding of the sentence against its
/// chopped re-encoding. The transformed input exists only in token space;
/// both decode to the same text. Skips when the chop changes nothing.
pub fn chop_tokenization(
    sentence: &Sentence,
    codec: &dyn TokenCodec,
    stride: usize,
) -> Result<TransformOutcome, TransformError> {
    let original = codec.encode(&sentence.text)?;
    let transformed = codec.chop_encode(&sentence.text, stride)?;
    if original == transformed {
        return Ok(TransformOutcome::Skip {
            unit_id: sentence.unit_id(),
            reason: SkipReason::UnchangedTokenization,
        });
    }
    Ok(TransformOutcome::Pair(TextPair {
        pair_id: format!("token_chop:{}", sentence.unit_id()),
        original: PairContent::Tokens(original),
        transformed: PairContent::Tokens(transformed),
        transform: TransformKind::TokenChop { stride },
        rng_seed: None,
        source_text: Some(sentence.text.clone()),
    }))
}

/// Calibration control: transformed equals original. Every metric must
/// score exactly zero on these pairs.
pub fn identity_sentence(sentence: &Sentence, tag: &str) -> TextPair {
    TextPair {
        pair_id: format!("{tag}:{}", sentence.unit_id()),
        original: PairContent::Text(sentence.text.clone()),
        transformed: PairContent::Text(sentence.text.clone()),
        transform: TransformKind::Identity,
        rng_seed: None,
        source_text: None,
    }
}

pub fn identity_passage(passage: &Passage, tag: &str) -> TextPair {
    let texts: Vec<String> = passage.sentences.iter().map(|s| s.text.clone()).collect();
    TextPair {
        pair_id: format!("{tag}:{}", passage.unit_id()),
        original: PairContent::Passage(texts.clone()),
        transformed: PairContent::Passage(texts),
        transform: TransformKind::Identity,
        rng_seed: None,
        source_text: None,
    }
}

pub fn identity_tokens(
    sentence: &Sentence,
    codec: &dyn TokenCodec,
    tag: &str,
) -> Result<TextPair, TransformError> {
    let ids = codec.encode(&sentence.text)?;
    Ok(TextPair {
        pair_id: format!("{tag}:{}", sentence.unit_id()),
        original: PairContent::Tokens(ids.clone()),
        transformed: PairContent::Tokens(ids),
        transform: TransformKind::Identity,
        rng_seed: None,
        source_text: Some(sentence.text.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn sentence(text: &str) -> Sentence {
        Sentence {
            doc_id: "d:0".into(),
            index: 0,
            text: text.into(),
        }
    }

    fn transformed_text(outcome: TransformOutcome) -> String {
        match outcome {
            TransformOutcome::Pair(p) => match p.transformed {
                PairContent::Text(t) => t,
                other => panic!("expected text, got {other:?}"),
            },
            TransformOutcome::Skip { reason, .. } => panic!("unexpected skip: {reason:?}"),
        }
    }

    #[test]
    fn negation_inserts_after_first_copula() {
        let s = sentence(
            "April is the fourth month of the year in the Julian and Gregorian \
             calendars and comes between March and May.",
        );
        assert_eq!(
            transformed_text(negate(&s)),
            "April is not the fourth month of the year in the Julian and Gregorian \
             calendars and comes between March and May."
        );
    }

    #[test]
    fn negation_skips_existing_negations() {
        for text in [
            "He was not here.",
            "It never was a problem.",
            "That isn't right at all.",
            "The mill is no longer in use.",
        ] {
            match negate(&sentence(text)) {
                TransformOutcome::Skip { reason, .. } => {
                    assert_eq!(reason, SkipReason::NegationAlreadyPresent, "{text}")
                }
                TransformOutcome::Pair(p) => panic!("negated {text:?}: {:?}", p.transformed),
            }
        }
    }

    #[test]
    fn negation_skips_without_copula() {
        match negate(&sentence("Dogs bark loudly.")) {
            TransformOutcome::Skip { reason, .. } => assert_eq!(reason, SkipReason::NoCopula),
            TransformOutcome::Pair(_) => panic!("no copula to negate"),
        }
    }

    #[test]
    fn copula_match_is_whole_word() {
        // "island" and "basis" must not match; first real copula is "was"
        let s = sentence("The island basis was solid.");
        assert_eq!(
            transformed_text(negate(&s)),
            "The island basis was not solid."
        );
    }

    #[test]
    fn copula_match_is_case_insensitive() {
        let s = sentence("IS this the right room?");
        assert_eq!(transformed_text(negate(&s)), "IS not this the right room?");
    }

    #[test]
    fn negation_differs_by_exactly_one_word() {
        let s = sentence("Steel is an alloy of iron and carbon.");
        let out = transformed_text(negate(&s));
        let orig_words: Vec<&str> = s.text.split_whitespace().collect();
        let new_words: Vec<&str> = out.split_whitespace().collect();
        assert_eq!(new_words.len(), orig_words.len() + 1);
        assert_eq!(new_words[2], "not");
    }

    #[test]
    fn trigger_append_forms() {
        let s = sentence("Hi.");
        let pair = append_trigger(&s, "Zonk", 1).unwrap();
        assert_eq!(pair.transformed.as_text().unwrap(), "Hi. Zonk");
        let pair3 = append_trigger(&s, "Zonk", 3).unwrap();
        assert_eq!(pair3.transformed.as_text().unwrap(), "Hi. Zonk Zonk Zonk");
    }

    #[test]
    fn trigger_validation() {
        let s = sentence("Hi.");
        assert!(matches!(
            append_trigger(&s, "x", 0),
            Err(TransformError::InvalidTriggerCount(0))
        ));
        assert!(matches!(
            append_trigger(&s, "two words", 1),
            Err(TransformError::InvalidTrigger)
        ));
        assert!(matches!(
            append_trigger(&s, "", 1),
            Err(TransformError::InvalidTrigger)
        ));
    }

    fn make_passage(doc: &str, texts: &[&str]) -> Passage {
        Passage {
            doc_id: doc.into(),
            sentences: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Sentence {
                    doc_id: doc.into(),
                    index: i,
                    text: t.to_string(),
                })
                .collect(),
        }
    }

    fn donor_pool() -> Vec<Sentence> {
        (0..10)
            .map(|i| Sentence {
                doc_id: format!("other:{}", i % 3),
                index: i,
                text: format!("Donor sentence number {i}."),
            })
            .collect()
    }

    #[test]
    fn context_swap_preserves_final_sentence() {
        let p = make_passage("d:0", &["S three.", "S two.", "S one."]);
        let pair = swap_context(&p, &donor_pool(), 2, 7).unwrap();
        match (&pair.original, &pair.transformed) {
            (PairContent::Passage(orig), PairContent::Passage(new)) => {
                assert_eq!(new.len(), 3);
                assert_eq!(new[2], orig[2]);
                assert_ne!(new[0], orig[0]);
                assert_ne!(new[1], orig[1]);
                assert_ne!(new[0], new[1], "donors must be distinct");
                assert!(new[0].starts_with("Donor"));
            }
            other => panic!("unexpected contents {other:?}"),
        }
    }

    #[test]
    fn context_swap_replaces_three_of_four() {
        let p = make_passage("d:0", &["A.", "B.", "C.", "Final stays."]);
        let pair = swap_context(&p, &donor_pool(), 3, 11).unwrap();
        match &pair.transformed {
            PairContent::Passage(new) => {
                assert_eq!(new[3], "Final stays.");
                assert!(new[..3].iter().all(|s| s.starts_with("Donor")));
            }
            other => panic!("unexpected contents {other:?}"),
        }
    }

    #[test]
    fn context_swap_never_borrows_from_same_document() {
        let p = make_passage("other:1", &["A.", "B.", "C."]);
        for seed in 0..50 {
            let pair = swap_context(&p, &donor_pool(), 2, seed).unwrap();
            if let PairContent::Passage(new) = &pair.transformed {
                // donors with doc_id other:1 were filtered out
                for donor in &new[..2] {
                    let idx: usize = donor
                        .trim_start_matches("Donor sentence number ")
                        .trim_end_matches('.')
                        .parse()
                        .unwrap();
                    assert_ne!(idx % 3, 1, "seed {seed} drew a same-document donor");
                }
            }
        }
    }

    #[test]
    fn context_swap_errors() {
        let p = make_passage("d:0", &["A.", "B.", "C."]);
        assert!(matches!(
            swap_context(&p, &donor_pool(), 3, 1),
            Err(TransformError::WindowTooSmallForReplacement { .. })
        ));
        let tiny: Vec<Sentence> = donor_pool().into_iter().take(1).collect();
        assert!(matches!(
            swap_context(&p, &tiny, 2, 1),
            Err(TransformError::DonorPoolTooSmall { .. })
        ));
    }

    #[test]
    fn context_swap_is_seed_deterministic() {
        let p = make_passage("d:0", &["A.", "B.", "C."]);
        let a = swap_context(&p, &donor_pool(), 2, 99).unwrap();
        let b = swap_context(&p, &donor_pool(), 2, 99).unwrap();
        assert_eq!(a.transformed, b.transformed);
    }

    #[test]
    fn two_word_swap_is_forced() {
        let s = sentence("a b");
        let out = swap_words(&s, 1, 5).unwrap();
        assert_eq!(transformed_text(out), "b a");
    }

    #[test]
    fn one_word_sentence_skips() {
        let s = sentence("alone");
        match swap_words(&s, 1, 5).unwrap() {
            TransformOutcome::Skip { reason, .. } => assert_eq!(reason, SkipReason::TooFewWords),
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn zero_swaps_rejected() {
        assert!(matches!(
            swap_words(&sentence("a b"), 0, 5),
            Err(TransformError::InvalidSwapCount(0))
        ));
    }

    #[test]
    fn swap_preserves_word_multiset_and_spacing() {
        let s = sentence("The quick  brown fox jumps over the lazy dog.");
        for seed in 0..20u64 {
            if let TransformOutcome::Pair(pair) = swap_words(&s, 2, seed).unwrap() {
                let out = pair.transformed.as_text().unwrap();
                let mut a: Vec<&str> = s.text.split_whitespace().collect();
                let mut b: Vec<&str> = out.split_whitespace().collect();
                a.sort_unstable();
                b.sort_unstable();
                assert_eq!(a, b, "seed {seed} changed the word multiset");
                // double space between positions 2 and 3 preserved
                assert!(out.contains("  "), "seed {seed} lost original spacing");
            }
        }
    }

    #[test]
    fn swap_keeps_punctuation_attached() {
        let s = sentence("End well. Next");
        if let TransformOutcome::Pair(pair) = swap_words(&s, 1, 3).unwrap() {
            let out = pair.transformed.as_text().unwrap();
            let words: Vec<&str> = out.split_whitespace().collect();
            assert!(words.contains(&"well."), "punctuation detached in {out:?}");
        }
    }

    struct CharCodec;

    impl TokenCodec for CharCodec {
        fn vocab_size(&self) -> usize {
            128
        }
        fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
            // pairs of chars merge into one id; odd remainder stays single
            let chars: Vec<char> = text.chars().collect();
            let mut ids = Vec::new();
            let mut i = 0;
            while i < chars.len() {
                if i + 1 < chars.len() {
                    ids.push(TokenId((chars[i] as u32 % 64) * 2));
                    i += 2;
                } else {
                    ids.push(TokenId(chars[i] as u32 % 64));
                    i += 1;
                }
            }
            Ok(ids)
        }
        fn decode(&self, _ids: &[TokenId]) -> Result<String, TokenizerError> {
            unimplemented!("not needed for the transform test")
        }
        fn token_text(&self, _id: TokenId) -> Option<String> {
            None
        }
    }

    #[test]
    fn chop_skips_when_stride_covers_text() {
        let s = sentence("abcd");
        let out = chop_tokenization(&s, &CharCodec, 10).unwrap();
        match out {
            TransformOutcome::Skip { reason, .. } => {
                assert_eq!(reason, SkipReason::UnchangedTokenization)
            }
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn chop_produces_token_pair_when_it_changes() {
        let s = sentence("abcde");
        match chop_tokenization(&s, &CharCodec, 3).unwrap() {
            TransformOutcome::Pair(pair) => {
                assert_ne!(pair.original, pair.transformed);
                assert!(pair.original.as_tokens().is_some());
            }
            other => panic!("expected pair, got {other:?}"),
        }
    }

    #[test]
    fn identity_is_verbatim() {
        let s = sentence("Same on both sides.");
        let pair = identity_sentence(&s, "negation");
        assert_eq!(pair.original, pair.transformed);
        assert_eq!(pair.transform, TransformKind::Identity);
    }

    #[test]
    fn transforms_are_pure_functions_of_seed() {
        let s = sentence("one two three four five six seven");
        let mut seen: HashMap<u64, String> = HashMap::new();
        for seed in [1u64, 2, 3, 1, 2, 3] {
            if let TransformOutcome::Pair(pair) = swap_words(&s, 1, seed).unwrap() {
                let text = pair.transformed.as_text().unwrap().to_string();
                if let Some(prev) = seen.insert(seed, text.clone()) {
                    assert_eq!(prev, text, "seed {seed} not deterministic");
                }
            }
        }
    }
}
