//! Self-supervised evaluation of language models via sensitivity and
//! invariance to closed-form text transformations.
//!
//! The crate measures how a model's outputs (token log-probabilities,
//! next-token distributions, generations) change when the input text is
//! perturbed in a controlled way: negating a copula, appending trigger
//! words, replacing long-range context, swapping word order, or re-chopping
//! the tokenization of unchanged text. No labeled data is involved; every
//! score is a function of (corpus, transform, model) alone.

pub mod backend;
pub mod corpus;
pub mod harness;
pub mod metrics;
pub mod tokenizer;
pub mod transforms;
pub mod util;
pub mod wordlist;
