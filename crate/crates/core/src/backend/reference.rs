//! The built-in reference backend: a word-level n-gram language model with
//! add-k smoothing over a closed vocabulary plus UNK. Deterministic,
//! dependency-free, and supporting all four capabilities, it serves as the
//! offline oracle every metric can be checked against.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backend::{
    require, Backend, BackendDescriptor, BackendError, Capabilities, DecodeParams, DecodeStrategy,
    GenerationResult, TokenScoreTrace,
};
use crate::corpus::Document;
use crate::metrics::ProbVector;
use crate::tokenizer::{TokenCodec, TokenId, TokenizerError};
use crate::util::content_hash;

pub const UNK: &str = "<unk>";

/// Sentence-start sentinel used only as conditioning context; it is never
/// part of the predicted vocabulary.
const BOS: u32 = u32::MAX;

/// Closed word vocabulary with an UNK fallback. Words are whitespace
/// tokens; ids are assigned in sorted order with UNK last, so the mapping
/// is independent of corpus iteration order.
#[derive(Debug, Clone)]
pub struct WordCodec {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl WordCodec {
    fn from_words(mut unique: Vec<String>) -> Self {
        unique.sort();
        unique.dedup();
        unique.push(UNK.to_string());
        let index = unique
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        WordCodec {
            words: unique,
            index,
        }
    }

    pub fn id_of(&self, word: &str) -> TokenId {
        TokenId(
            self.index
                .get(word)
                .copied()
                .unwrap_or((self.words.len() - 1) as u32),
        )
    }
}

impl TokenCodec for WordCodec {
    fn vocab_size(&self) -> usize {
        self.words.len()
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        Ok(text.split_whitespace().map(|w| self.id_of(w)).collect())
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let mut words = Vec::with_capacity(ids.len());
        for id in ids {
            let word = self
                .words
                .get(id.0 as usize)
                .ok_or(TokenizerError::OutOfVocab {
                    id: id.0,
                    size: self.words.len(),
                })?;
            words.push(word.as_str());
        }
        Ok(words.join(" "))
    }

    fn token_text(&self, id: TokenId) -> Option<String> {
        self.words.get(id.0 as usize).cloned()
    }
}

#[derive(Debug, Default)]
struct Row {
    counts: HashMap<u32, u32>,
    total: u32,
}

/// Word-level n-gram model with add-k smoothing. Immutable after training;
/// all operations are pure and parallel-safe.
pub struct NGramBackend {
    descriptor: BackendDescriptor,
    codec: WordCodec,
    order: usize,
    k: f64,
    rows: HashMap<Vec<u32>, Row>,
}

/// Trains the reference model on a document corpus. Counting runs over
/// each document's whole word stream, padded with start sentinels once per
/// document, so sentence boundaries inside a document are ordinary
/// positions and the model conditions across them.
pub fn train_reference_model(
    documents: &[Document],
    order: usize,
    k: f64,
) -> Result<NGramBackend, BackendError> {
    if !(1..=3).contains(&order) {
        return Err(BackendError::InvalidOrder(order));
    }
    if k <= 0.0 {
        return Err(BackendError::InvalidSmoothing(k));
    }
    let mut document_words: Vec<Vec<String>> = Vec::new();
    for doc in documents {
        let words: Vec<String> = doc.text.split_whitespace().map(str::to_owned).collect();
        if !words.is_empty() {
            document_words.push(words);
        }
    }
    if document_words.is_empty() {
        return Err(BackendError::EmptyCorpus);
    }
    let codec = WordCodec::from_words(
        document_words
            .iter()
            .flat_map(|s| s.iter().cloned())
            .collect(),
    );
    let mut rows: HashMap<Vec<u32>, Row> = HashMap::new();
    for words in &document_words {
        let ids: Vec<u32> = words.iter().map(|w| codec.id_of(w).0).collect();
        for i in 0..ids.len() {
            let mut ctx = Vec::with_capacity(order - 1);
            for back in (1..order).rev() {
                ctx.push(if i >= back { ids[i - back] } else { BOS });
            }
            let row = rows.entry(ctx).or_default();
            *row.counts.entry(ids[i]).or_insert(0) += 1;
            row.total += 1;
        }
    }
    let corpus_tag = {
        let joined: Vec<u8> = document_words
            .iter()
            .flat_map(|s| s.join(" ").into_bytes())
            .collect();
        content_hash(&[&joined])[..8].to_string()
    };
    let descriptor = BackendDescriptor {
        name: format!("reference-{order}gram-k{k}-{corpus_tag}"),
        capabilities: Capabilities {
            per_token_logprobs: true,
            full_next_token_distribution: true,
            text_generation: true,
            raw_token_input: true,
        },
        vocab_size: Some(codec.vocab_size()),
        precision: "f64".to_string(),
    };
    Ok(NGramBackend {
        descriptor,
        codec,
        order,
        k,
        rows,
    })
}

impl NGramBackend {
    pub fn word_codec(&self) -> &WordCodec {
        &self.codec
    }

    fn context_of(&self, consumed: &[u32]) -> Vec<u32> {
        let need = self.order - 1;
        let mut ctx = Vec::with_capacity(need);
        for back in (1..=need).rev() {
            ctx.push(if consumed.len() >= back {
                consumed[consumed.len() - back]
            } else {
                BOS
            });
        }
        ctx
    }

    fn smoothed(&self, ctx: &[u32], next: u32) -> f64 {
        let v = self.codec.vocab_size() as f64;
        let row = self.rows.get(ctx);
        let count = row.and_then(|r| r.counts.get(&next)).copied().unwrap_or(0) as f64;
        let total = row.map(|r| r.total).unwrap_or(0) as f64;
        (count + self.k) / (total + self.k * v)
    }

    fn distribution_after(&self, consumed: &[u32]) -> ProbVector {
        let v = self.codec.vocab_size();
        let ctx = self.context_of(consumed);
        let row = self.rows.get(&ctx);
        let total = row.map(|r| r.total).unwrap_or(0) as f64;
        let denom = total + self.k * v as f64;
        let probs: Vec<f64> = (0..v as u32)
            .map(|id| {
                let count = row.and_then(|r| r.counts.get(&id)).copied().unwrap_or(0) as f64;
                (count + self.k) / denom
            })
            .collect();
        ProbVector::new(probs).expect("add-k smoothing yields a normalized distribution")
    }

    fn check_ids(&self, tokens: &[TokenId]) -> Result<Vec<u32>, BackendError> {
        let size = self.codec.vocab_size();
        tokens
            .iter()
            .map(|t| {
                if (t.0 as usize) < size {
                    Ok(t.0)
                } else {
                    Err(BackendError::InvalidTokenId { id: t.0, size })
                }
            })
            .collect()
    }
}

impl Backend for NGramBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn score_text(&self, text: &str) -> Result<TokenScoreTrace, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let tokens = self.codec.encode(text)?;
        self.score_tokens(&tokens)
    }

    fn score_tokens(&self, tokens: &[TokenId]) -> Result<TokenScoreTrace, BackendError> {
        if tokens.is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let ids = self.check_ids(tokens)?;
        let logprobs: Vec<Option<f64>> = (0..ids.len())
            .map(|i| {
                let ctx = self.context_of(&ids[..i]);
                Some(self.smoothed(&ctx, ids[i]).ln())
            })
            .collect();
        Ok(TokenScoreTrace {
            tokens: tokens.to_vec(),
            logprobs,
            distributions: None,
        })
    }

    fn next_token_distribution(
        &self,
        tokens: &[TokenId],
        positions: &[usize],
    ) -> Result<Vec<ProbVector>, BackendError> {
        let ids = self.check_ids(tokens)?;
        positions
            .iter()
            .map(|&p| {
                if p > ids.len() {
                    return Err(BackendError::InvalidPosition {
                        position: p,
                        len: ids.len(),
                    });
                }
                Ok(self.distribution_after(&ids[..p]))
            })
            .collect()
    }

    fn generate(
        &self,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<GenerationResult, BackendError> {
        require(
            &self.descriptor,
            "generate",
            "text_generation",
            self.descriptor.capabilities.text_generation,
        )?;
        let mut consumed: Vec<u32> = prompt
            .split_whitespace()
            .map(|w| self.codec.id_of(w).0)
            .collect();
        let mut generated: Vec<TokenId> = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.unwrap_or(0));
        for _ in 0..params.max_new_tokens {
            let dist = self.distribution_after(&consumed);
            let next = match params.strategy {
                DecodeStrategy::Greedy => argmax(dist.as_slice()),
                DecodeStrategy::Temperature(t) => sample_with_temperature(&mut rng, &dist, t),
            };
            generated.push(TokenId(next as u32));
            consumed.push(next as u32);
        }
        let completion = self.codec.decode(&generated)?;
        Ok(GenerationResult {
            prompt: prompt.to_string(),
            completion,
            decode_params: params.clone(),
        })
    }

    fn codec(&self) -> Option<&dyn TokenCodec> {
        Some(&self.codec)
    }
}

/// First-maximum argmax: ties break toward the lowest token id, keeping
/// greedy decoding fully deterministic.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn sample_with_temperature(rng: &mut ChaCha8Rng, dist: &ProbVector, temperature: f64) -> usize {
    let t = temperature.max(1e-6);
    let weights: Vec<f64> = dist.as_slice().iter().map(|p| p.powf(1.0 / t)).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if draw < *w {
            return i;
        }
        draw -= w;
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        Document {
            id: id.to_string(),
            text: text.to_string(),
            source: "test".into(),
        }
    }

    fn bigram(text: &str, k: f64) -> NGramBackend {
        train_reference_model(&[doc("d:0", text)], 2, k).unwrap()
    }

    #[test]
    fn bigram_probabilities_match_hand_counts() {
        // one document stream: The cat sat. The cat ran.
        // vocab sorted: The, cat, ran., sat., <unk>  (V = 5)
        let model = bigram("The cat sat. The cat ran.", 0.1);
        assert_eq!(model.word_codec().vocab_size(), 5);
        let trace = model.score_text("The cat sat.").unwrap();
        // P(The | BOS) = (1 + 0.1) / (1 + 0.5): one document start
        let p0: f64 = 1.1 / 1.5;
        assert!((trace.logprobs[0].unwrap() - p0.ln()).abs() < 1e-12);
        // P(cat | The) = (2 + 0.1) / (2 + 0.5)
        let p1: f64 = 2.1 / 2.5;
        assert!((trace.logprobs[1].unwrap() - p1.ln()).abs() < 1e-12);
        // P(sat. | cat) = (1 + 0.1) / (2 + 0.5)
        let p2: f64 = 1.1 / 2.5;
        assert!((trace.logprobs[2].unwrap() - p2.ln()).abs() < 1e-12);
    }

    #[test]
    fn score_agrees_with_independent_brute_force() {
        // independent path: raw pair counting over the same sentences
        let model = bigram("Ax by cat. Ax by dog. By cat ax.", 0.25);
        let mut vocab: Vec<String> = Vec::new();
        let mut bigrams: HashMap<(String, String), u32> = HashMap::new();
        let mut context_totals: HashMap<String, u32> = HashMap::new();
        let words: Vec<&str> = "Ax by cat. Ax by dog. By cat ax."
            .split_whitespace()
            .collect();
        for (i, w) in words.iter().enumerate() {
            vocab.push(w.to_string());
            let prev = if i == 0 { "<bos>" } else { words[i - 1] };
            *bigrams.entry((prev.into(), (*w).into())).or_insert(0) += 1;
            *context_totals.entry(prev.into()).or_insert(0) += 1;
        }
        vocab.sort();
        vocab.dedup();
        let v = vocab.len() as f64 + 1.0; // UNK
        let k = 0.25;
        let brute = |prev: &str, w: &str| -> f64 {
            let c = *bigrams.get(&(prev.into(), w.into())).unwrap_or(&0) as f64;
            let t = *context_totals.get(prev).unwrap_or(&0) as f64;
            ((c + k) / (t + k * v)).ln()
        };
        let trace = model.score_text("Ax by cat.").unwrap();
        let expect = [brute("<bos>", "Ax"), brute("Ax", "by"), brute("by", "cat.")];
        for (got, want) in trace.logprobs.iter().zip(expect) {
            assert!((got.unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn unigram_uniform_corpus_entropy_approaches_ln_v() {
        let model = train_reference_model(&[doc("d:0", "ant bee cow doe.")], 1, 1e-9).unwrap();
        let dist = model.next_token_distribution(&[], &[0]).unwrap();
        let entropy = crate::metrics::shannon_entropy(&dist[0]);
        assert!((entropy - (4.0f64).ln()).abs() < 1e-6, "H = {entropy}");
    }

    #[test]
    fn score_tokens_consistent_with_score_text() {
        let model = bigram("the cat sat. the dog ran.", 0.1);
        let tokens = model.word_codec().encode("the cat ran.").unwrap();
        let via_tokens = model.score_tokens(&tokens).unwrap();
        let via_text = model.score_text("the cat ran.").unwrap();
        assert_eq!(via_tokens, via_text);
    }

    #[test]
    fn empty_text_is_rejected() {
        let model = bigram("the cat sat.", 0.1);
        assert!(matches!(
            model.score_text("   "),
            Err(BackendError::EmptyInput)
        ));
        assert!(matches!(
            model.score_tokens(&[]),
            Err(BackendError::EmptyInput)
        ));
    }

    #[test]
    fn scoring_is_deterministic() {
        let model = bigram("the cat sat. a dog ran.", 0.1);
        let a = model.score_text("the dog sat.").unwrap();
        let b = model.score_text("the dog sat.").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_token_id_errors() {
        let model = bigram("the cat sat.", 0.1);
        let bad = TokenId(model.word_codec().vocab_size() as u32);
        assert!(matches!(
            model.score_tokens(&[bad]),
            Err(BackendError::InvalidTokenId { .. })
        ));
    }

    #[test]
    fn distributions_are_normalized_and_consistent_with_logprobs() {
        let model = bigram("the cat sat. the dog ran. a cat ran.", 0.2);
        let tokens = model.word_codec().encode("the cat ran.").unwrap();
        let mut trace = model.score_tokens(&tokens).unwrap();
        let dists = model.next_token_distribution(&tokens, &[1, 2, 3]).unwrap();
        for d in &dists {
            let sum: f64 = d.as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        trace.distributions = Some(dists);
        trace.validate().unwrap();
    }

    #[test]
    fn unigram_distributions_ignore_context() {
        let model = train_reference_model(&[doc("d:0", "x y z. z x q.")], 1, 0.1).unwrap();
        let a = model.word_codec().encode("x y").unwrap();
        let b = model.word_codec().encode("q z").unwrap();
        let da = model.next_token_distribution(&a, &[2]).unwrap();
        let db = model.next_token_distribution(&b, &[2]).unwrap();
        assert_eq!(da[0], db[0]);
    }

    #[test]
    fn deterministic_chain_argmax_is_forced() {
        let model = bigram("alpha beta gamma. alpha beta gamma.", 0.01);
        let tokens = model.word_codec().encode("alpha beta").unwrap();
        let dist = model.next_token_distribution(&tokens, &[2]).unwrap();
        let best = argmax(dist[0].as_slice());
        assert_eq!(
            model.word_codec().token_text(TokenId(best as u32)).unwrap(),
            "gamma."
        );
    }

    #[test]
    fn trigram_generation_reproduces_memorized_chain() {
        let text = "alpha beta gamma delta epsilon zeta.";
        let model = train_reference_model(&[doc("d:0", text)], 3, 0.001).unwrap();
        let result = model
            .generate(
                "alpha beta",
                &DecodeParams {
                    strategy: DecodeStrategy::Greedy,
                    max_new_tokens: 4,
                    seed: None,
                },
            )
            .unwrap();
        assert_eq!(result.completion, "gamma delta epsilon zeta.");
    }

    #[test]
    fn zero_budget_generates_nothing() {
        let model = bigram("the cat sat.", 0.1);
        let result = model
            .generate(
                "the",
                &DecodeParams {
                    strategy: DecodeStrategy::Greedy,
                    max_new_tokens: 0,
                    seed: None,
                },
            )
            .unwrap();
        assert_eq!(result.completion, "");
    }

    #[test]
    fn greedy_generation_is_reproducible() {
        let model = bigram("one two three. one two four.", 0.1);
        let params = DecodeParams::default();
        let a = model.generate("one", &params).unwrap();
        let b = model.generate("one", &params).unwrap();
        assert_eq!(a.completion, b.completion);
    }

    #[test]
    fn training_validates_arguments() {
        let d = [doc("d:0", "a b.")];
        assert!(matches!(
            train_reference_model(&d, 0, 0.1),
            Err(BackendError::InvalidOrder(0))
        ));
        assert!(matches!(
            train_reference_model(&d, 4, 0.1),
            Err(BackendError::InvalidOrder(4))
        ));
        assert!(matches!(
            train_reference_model(&d, 2, 0.0),
            Err(BackendError::InvalidSmoothing(_))
        ));
        assert!(matches!(
            train_reference_model(&[], 2, 0.1),
            Err(BackendError::EmptyCorpus)
        ));
    }

    #[test]
    fn oov_words_map_to_unk() {
        let model = bigram("the cat sat.", 0.1);
        let ids = model.word_codec().encode("the zebra sat.").unwrap();
        let unk = model.word_codec().id_of("anything-unseen");
        assert_eq!(ids[1], unk);
        assert!(model.score_text("totally unseen words").is_ok());
    }
}
