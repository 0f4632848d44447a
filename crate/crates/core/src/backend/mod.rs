//! Uniform model interface over remote logprob APIs, local full-logit
//! servers, and the built-in deterministic n-gram reference model.
//!
//! Every operation is gated by a declared capability; invoking an operation
//! a backend does not support fails with a typed error before any IO.
//! Position convention for distributions: position `p` is the number of
//! consumed tokens, so the distribution at `p` predicts the token at index
//! `p`, and `p == tokens.len()` predicts the continuation after the input.

pub mod cache;
pub mod reference;
pub mod remote;

pub use cache::CachedBackend;
pub use reference::{train_reference_model, NGramBackend, WordCodec};
pub use remote::{RemoteBackend, RemoteConfig};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::metrics::ProbVector;
use crate::tokenizer::{TokenCodec, TokenId, TokenizerError};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend {backend} does not support {operation} (requires {capability})")]
    Unsupported {
        backend: String,
        operation: &'static str,
        capability: &'static str,
    },
    #[error("nothing to score")]
    EmptyInput,
    #[error("invalid token id {id} for vocab size {size}")]
    InvalidTokenId { id: u32, size: usize },
    #[error("invalid position {position} for {len} tokens")]
    InvalidPosition { position: usize, len: usize },
    #[error("reference model order must be 1, 2, or 3, got {0}")]
    InvalidOrder(usize),
    #[error("add-k smoothing requires k > 0, got {0}")]
    InvalidSmoothing(f64),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error from {url}: {message}")]
    Protocol { url: String, message: String },
    #[error("backend tokenizer mismatch: {0}")]
    TokenizerMismatch(String),
    #[error("cache error at {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("malformed distribution from backend: {0}")]
    BadDistribution(String),
}

/// What a backend can do. A metric that needs a missing capability refuses
/// to run before any request is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Capabilities {
    pub per_token_logprobs: bool,
    pub full_next_token_distribution: bool,
    pub text_generation: bool,
    pub raw_token_input: bool,
}

/// Identity and capability flags of a model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub capabilities: Capabilities,
    pub vocab_size: Option<usize>,
    /// Self-declared numeric precision, or "unknown".
    pub precision: String,
}

/// Per-position token log-probabilities (natural log) for one scored input.
///
/// `logprobs[i]` is the conditional log-probability of token `i` given the
/// preceding tokens; `None` marks positions the backend does not score
/// (typically position 0 of echo-style APIs). `tokens` may be empty when
/// the backend exposes no token-id space. When distributions are present,
/// `distributions[i]` predicts token `i + 1`, and the final entry predicts
/// the continuation after the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScoreTrace {
    pub tokens: Vec<TokenId>,
    pub logprobs: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributions: Option<Vec<ProbVector>>,
}

impl TokenScoreTrace {
    /// Checks the trace invariants: distributions sum to one within 1e-6
    /// (enforced by construction of `ProbVector`), and wherever a logprob
    /// and the corresponding distribution are both present they agree
    /// within 1e-5.
    pub fn validate(&self) -> Result<(), BackendError> {
        let Some(distributions) = &self.distributions else {
            return Ok(());
        };
        for (i, lp) in self.logprobs.iter().enumerate() {
            let (Some(lp), Some(token)) = (lp, self.tokens.get(i)) else {
                continue;
            };
            if i == 0 {
                continue;
            }
            let Some(dist) = distributions.get(i - 1) else {
                continue;
            };
            let Some(p) = dist.get(*token) else {
                return Err(BackendError::BadDistribution(format!(
                    "token {token} outside distribution of dim {}",
                    dist.len()
                )));
            };
            if (p.ln() - lp).abs() > 1e-5 {
                return Err(BackendError::BadDistribution(format!(
                    "logprob {lp} disagrees with distribution value ln({p}) at position {i}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "strategy", content = "temperature")]
pub enum DecodeStrategy {
    Greedy,
    Temperature(f64),
}

/// Decoding parameters for `generate`. Greedy with a bounded budget by
/// default, which keeps generations reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub strategy: DecodeStrategy,
    pub max_new_tokens: usize,
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            strategy: DecodeStrategy::Greedy,
            max_new_tokens: 64,
            seed: None,
        }
    }
}

impl DecodeParams {
    /// Deterministic requests are safe to retry and cache.
    pub fn is_deterministic(&self) -> bool {
        matches!(self.strategy, DecodeStrategy::Greedy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub prompt: String,
    /// The continuation only; never includes the prompt.
    pub completion: String,
    pub decode_params: DecodeParams,
}

/// A scoreable model endpoint.
pub trait Backend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    /// Scores `text` under the backend's own tokenization.
    fn score_text(&self, text: &str) -> Result<TokenScoreTrace, BackendError>;

    /// Scores a raw token-id sequence, bypassing backend-side tokenization.
    fn score_tokens(&self, tokens: &[TokenId]) -> Result<TokenScoreTrace, BackendError>;

    /// Full next-token distributions at the requested positions (position =
    /// number of consumed tokens, up to and including `tokens.len()`).
    fn next_token_distribution(
        &self,
        tokens: &[TokenId],
        positions: &[usize],
    ) -> Result<Vec<ProbVector>, BackendError>;

    fn generate(
        &self,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<GenerationResult, BackendError>;

    /// The backend's token space, when it exposes one. Token-space
    /// transforms (the chopped re-tokenization) target this codec.
    fn codec(&self) -> Option<&dyn TokenCodec> {
        None
    }
}

pub(crate) fn require(
    descriptor: &BackendDescriptor,
    operation: &'static str,
    capability: &'static str,
    present: bool,
) -> Result<(), BackendError> {
    if present {
        Ok(())
    } else {
        Err(BackendError::Unsupported {
            backend: descriptor.name.clone(),
            operation,
            capability,
        })
    }
}
