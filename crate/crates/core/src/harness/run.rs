//! The run pipeline: sample units, build pairs, score them against the
//! cached backend with bounded concurrency, aggregate, and assemble the
//! report. Scoring requests may complete in any order; aggregation sorts
//! by pair id, so two runs with the same configuration and backend produce
//! bit-identical report bodies.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime};

use serde::Serialize;

use crate::backend::{
    train_reference_model, Backend, BackendError, CachedBackend, DecodeParams, RemoteBackend,
    RemoteConfig,
};
use crate::corpus::{
    load_corpus, make_passages, sample_units, split_sentences, CorpusFormat, Document, Passage,
    Sentence,
};
use crate::harness::config::{
    hash_file, BackendKind, InputHashes, MetricKind, RunConfig, MASKED_TRIGGER,
};
use crate::harness::report::{
    radar_block_single, under_sampled_flag, ComparabilityBlock, DropCounts, EvalReport, ReportBody,
    Timing, SCHEMA_VERSION,
};
use crate::harness::HarnessError;
use crate::metrics::{
    self, GenerationOutcome, PairDistributions, PairFinalDistributions, PairLogPpl, PairMass,
    ProbVector, SensitivityScore,
};
use crate::tokenizer::{load_tokenizer, BosCodec, TokenCodec, TokenId};
use crate::transforms::{self, PairContent, TextPair, TransformOutcome};
use crate::util::derive_seed;
use crate::wordlist::{load_wordlist, WordList};

/// Runs every item through `f` on a bounded worker pool, preserving input
/// order in the result.
fn parallel_map<T, R, F>(items: &[T], concurrency: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let workers = concurrency.max(1).min(n);
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let slots: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("slot filled"))
        .collect()
}

fn read_documents(
    path: &Path,
    format: CorpusFormat,
    text_field: &str,
) -> Result<(Vec<Document>, usize), HarnessError> {
    let mut reader = load_corpus(path, format, text_field)?;
    let docs: Vec<Document> = (&mut reader).collect::<Result<_, _>>()?;
    Ok((docs, reader.dropped_empty))
}

struct Prepared {
    backend: CachedBackend,
    sentences: Vec<Sentence>,
    wordlist: Option<WordList>,
    inputs: InputHashes,
    warnings: Vec<String>,
}

fn build_backend(config: &RunConfig) -> Result<(Box<dyn Backend>, Option<String>), HarnessError> {
    match config.backend.kind {
        BackendKind::Reference => {
            let train_path = config
                .backend
                .train_path
                .clone()
                .unwrap_or_else(|| config.corpus.path.clone());
            let format = config.backend.train_format.unwrap_or(config.corpus.format);
            let (docs, _) = read_documents(&train_path, format, &config.corpus.text_field)?;
            let model =
                train_reference_model(&docs, config.backend.order, config.backend.smoothing_k)?;
            Ok((Box::new(model), None))
        }
        BackendKind::Remote => {
            let base_url = config.backend.base_url.clone().expect("validated");
            let model = config.backend.model.clone().expect("validated");
            let mut tokenizer_hash = None;
            let codec: Option<Arc<dyn TokenCodec>> = match &config.tokenizer {
                Some(t) => {
                    let spec = load_tokenizer(&t.vocab, &t.merges)?;
                    tokenizer_hash = Some(format!(
                        "{}:{}",
                        hash_file(&t.vocab)?,
                        hash_file(&t.merges)?
                    ));
                    if t.bos {
                        // conventional GPT-2 begin-of-sequence token
                        let bos = spec.vocab_size() as u32 - 1;
                        Some(Arc::new(BosCodec::new(spec, TokenId(bos))?))
                    } else {
                        Some(Arc::new(spec))
                    }
                }
                None => None,
            };
            let remote = RemoteBackend::connect(RemoteConfig::new(base_url, model), codec)?;
            Ok((Box::new(remote), tokenizer_hash))
        }
    }
}

fn prepare(config: &RunConfig) -> Result<Prepared, HarnessError> {
    let mut warnings = Vec::new();
    let (docs, dropped) = read_documents(
        &config.corpus.path,
        config.corpus.format,
        &config.corpus.text_field,
    )?;
    if dropped > 0 {
        warnings.push(format!("corpus: dropped {dropped} empty document(s)"));
    }
    let sentences: Vec<Sentence> = docs.iter().flat_map(split_sentences).collect();
    if sentences.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "corpus yields no sentences".to_string(),
        ));
    }

    let (inner, tokenizer_hash) = build_backend(config)?;
    let cache_dir = config
        .shared_cache
        .clone()
        .unwrap_or_else(|| config.out_dir.join("cache"));
    let backend = CachedBackend::new(inner, &cache_dir)?;

    let wordlist = match &config.wordlist {
        Some(path) => {
            let wl = load_wordlist(path)?;
            if wl.skipped_multiword > 0 {
                warnings.push(format!(
                    "wordlist: skipped {} multi-word entr(ies); whole-word matching is per word",
                    wl.skipped_multiword
                ));
            }
            Some(wl)
        }
        None => None,
    };

    let inputs = InputHashes {
        corpus: hash_file(&config.corpus.path)?,
        wordlist: config.wordlist.as_deref().map(hash_file).transpose()?,
        benign: config
            .metrics
            .negation
            .benign_path
            .as_deref()
            .map(hash_file)
            .transpose()?,
        tokenizer: tokenizer_hash,
    };

    Ok(Prepared {
        backend,
        sentences,
        wordlist,
        inputs,
        warnings,
    })
}

/// Capability preflight: every enabled metric's requirements are checked
/// against the backend descriptor before a single request is spent.
fn preflight(config: &RunConfig, prepared: &Prepared) -> Result<(), HarnessError> {
    let descriptor = prepared.backend.descriptor();
    let caps = descriptor.capabilities;
    let has_codec = prepared.backend.codec().is_some();
    let has_wordlist = prepared.wordlist.is_some();
    let fail = |metric: MetricKind, what: &str| {
        Err(HarnessError::CapabilityMismatch {
            metric: metric.as_str().to_string(),
            backend: descriptor.name.clone(),
            what: what.to_string(),
        })
    };
    for metric in &config.metrics.enabled {
        match metric {
            MetricKind::Negation => {
                if !caps.per_token_logprobs {
                    return fail(*metric, "per_token_logprobs capability");
                }
            }
            MetricKind::ToxicityGeneration => {
                if !caps.text_generation {
                    return fail(*metric, "text_generation capability");
                }
                if !has_wordlist {
                    return fail(*metric, "a wordlist (--wordlist)");
                }
            }
            MetricKind::ToxicitySoftmax => {
                if !caps.full_next_token_distribution {
                    return fail(*metric, "full_next_token_distribution capability");
                }
                if !has_codec {
                    return fail(*metric, "a token codec (backend token space)");
                }
                if !has_wordlist {
                    return fail(*metric, "a wordlist (--wordlist)");
                }
            }
            MetricKind::Lrs | MetricKind::WordOrder => {
                if !caps.full_next_token_distribution {
                    return fail(*metric, "full_next_token_distribution capability");
                }
                if !has_codec {
                    return fail(*metric, "a token codec (backend token space)");
                }
            }
            MetricKind::Tokenization => {
                if !caps.full_next_token_distribution {
                    return fail(*metric, "full_next_token_distribution capability");
                }
                if !caps.raw_token_input {
                    return fail(*metric, "raw_token_input capability");
                }
                if !has_codec {
                    return fail(*metric, "a token codec (backend token space)");
                }
            }
        }
    }
    Ok(())
}

struct MetricOutcome {
    score: SensitivityScore,
    drops: DropCounts,
    warnings: Vec<String>,
}

fn metric_error(metric: MetricKind) -> impl Fn(metrics::MetricError) -> HarnessError {
    move |source| HarnessError::Metric {
        metric: metric.as_str().to_string(),
        source,
    }
}

fn enforce_nonfinite_budget(
    metric: MetricKind,
    dropped: usize,
    total: usize,
) -> Result<(), HarnessError> {
    if total > 0 && dropped as f64 / total as f64 > 0.01 {
        return Err(HarnessError::TooManyNonFinite {
            metric: metric.as_str().to_string(),
            dropped,
            total,
        });
    }
    Ok(())
}

fn sample_sentence_units(
    sentences: &[Sentence],
    n: usize,
    run_seed: u64,
    tag: &str,
    first_sentence_only: bool,
) -> Result<Vec<Sentence>, HarnessError> {
    let units: Vec<Sentence> = if first_sentence_only {
        sentences.iter().filter(|s| s.index == 0).cloned().collect()
    } else {
        sentences.to_vec()
    };
    Ok(sample_units(units, n, derive_seed(run_seed, tag), |s| {
        s.unit_id()
    })?)
}

fn pair_text(content: &PairContent) -> &str {
    content.as_text().expect("text pair content")
}

/// Scores original and transformed text of each pair and reduces to
/// per-pair log-perplexities. Non-finite values are dropped and counted.
fn score_ppl_pairs(
    backend: &CachedBackend,
    pairs: &[TextPair],
    concurrency: usize,
) -> Result<(Vec<PairLogPpl>, usize), HarnessError> {
    let scored: Vec<Result<PairLogPpl, HarnessError>> = parallel_map(pairs, concurrency, |pair| {
        let original = backend.score_text(pair_text(&pair.original))?;
        let transformed = backend.score_text(pair_text(&pair.transformed))?;
        Ok(PairLogPpl {
            pair_id: pair.pair_id.clone(),
            original: metrics::log_perplexity(&original).map_err(|source| {
                HarnessError::Metric {
                    metric: "log_perplexity".to_string(),
                    source,
                }
            })?,
            transformed: metrics::log_perplexity(&transformed).map_err(|source| {
                HarnessError::Metric {
                    metric: "log_perplexity".to_string(),
                    source,
                }
            })?,
        })
    });
    let mut pairs_out = Vec::with_capacity(scored.len());
    let mut nonfinite = 0usize;
    for result in scored {
        let pair = result?;
        if pair.original.is_finite() && pair.transformed.is_finite() {
            pairs_out.push(pair);
        } else {
            nonfinite += 1;
        }
    }
    Ok((pairs_out, nonfinite))
}

fn negation_metric(
    config: &RunConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<MetricOutcome, HarnessError> {
    let kind = MetricKind::Negation;
    let units = sample_sentence_units(
        &prepared.sentences,
        config.n_samples,
        run_seed,
        "sample:negation",
        config.metrics.negation.first_sentence_only,
    )?;
    let mut drops = DropCounts::default();
    let pairs: Vec<TextPair> = units
        .iter()
        .filter_map(|unit| {
            if config.identity_calibration {
                return Some(transforms::identity_sentence(unit, "negation"));
            }
            match transforms::negate(unit) {
                TransformOutcome::Pair(pair) => Some(pair),
                TransformOutcome::Skip { .. } => {
                    drops.skipped += 1;
                    None
                }
            }
        })
        .collect();
    let (scored, nonfinite) = score_ppl_pairs(&prepared.backend, &pairs, config.concurrency)?;
    drops.nonfinite = nonfinite;
    enforce_nonfinite_budget(kind, nonfinite, pairs.len())?;
    let mut score = metrics::negation_sensitivity(&scored).map_err(metric_error(kind))?;
    let mut warnings = Vec::new();

    if let Some(benign_path) = &config.metrics.negation.benign_path {
        let format = config
            .metrics
            .negation
            .benign_format
            .unwrap_or(config.corpus.format);
        let (benign_docs, _) = read_documents(benign_path, format, &config.corpus.text_field)?;
        let benign_sentences: Vec<Sentence> =
            benign_docs.iter().flat_map(split_sentences).collect();
        let benign_units = sample_units(
            benign_sentences,
            config.n_samples,
            derive_seed(run_seed, "sample:negation_benign"),
            |s| s.unit_id(),
        )?;
        let mut benign_skipped = 0usize;
        let benign_pairs: Vec<TextPair> = benign_units
            .iter()
            .filter_map(|unit| {
                if config.identity_calibration {
                    return Some(transforms::identity_sentence(unit, "negation_benign"));
                }
                match transforms::negate(unit) {
                    TransformOutcome::Pair(mut pair) => {
                        pair.pair_id = format!("benign:{}", pair.pair_id);
                        Some(pair)
                    }
                    TransformOutcome::Skip { .. } => {
                        benign_skipped += 1;
                        None
                    }
                }
            })
            .collect();
        if benign_skipped > 0 {
            warnings.push(format!(
                "negation: benign corpus skipped {benign_skipped} unit(s)"
            ));
        }
        let (benign_scored, benign_nonfinite) =
            score_ppl_pairs(&prepared.backend, &benign_pairs, config.concurrency)?;
        enforce_nonfinite_budget(kind, benign_nonfinite, benign_pairs.len())?;
        let normalized = metrics::normalized_negation_sensitivity(&score, &benign_scored)
            .map_err(metric_error(kind))?;
        score.auxiliary.insert("normalized".to_string(), normalized);
        score
            .auxiliary
            .insert("benign_n".to_string(), benign_scored.len() as f64);
    }

    Ok(MetricOutcome {
        score,
        drops,
        warnings,
    })
}

/// Resolves the trigger word: explicit configuration wins, then the first
/// wordlist term; the masked placeholder is only for wordlist-free dry
/// runs.
fn resolve_trigger(config: &RunConfig, wordlist: Option<&WordList>) -> String {
    if let Some(trigger) = &config.metrics.toxicity.trigger {
        return trigger.clone();
    }
    wordlist
        .and_then(|wl| wl.terms().next().map(str::to_owned))
        .unwrap_or_else(|| MASKED_TRIGGER.to_string())
}

fn toxicity_generation_metric(
    config: &RunConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<MetricOutcome, HarnessError> {
    let kind = MetricKind::ToxicityGeneration;
    let wordlist = prepared.wordlist.as_ref().expect("preflight checked");
    let trigger = resolve_trigger(config, Some(wordlist));
    let units = sample_sentence_units(
        &prepared.sentences,
        config.n_samples,
        run_seed,
        "sample:toxicity_generation",
        false,
    )?;
    let pairs: Vec<TextPair> = units
        .iter()
        .map(|unit| {
            if config.identity_calibration {
                Ok(transforms::identity_sentence(unit, "trigger"))
            } else {
                transforms::append_trigger(unit, &trigger, config.metrics.toxicity.trigger_count)
            }
        })
        .collect::<Result<_, _>>()?;
    let params = DecodeParams {
        max_new_tokens: config.metrics.toxicity.max_new_tokens,
        ..DecodeParams::default()
    };
    let outcomes: Vec<Result<GenerationOutcome, HarnessError>> =
        parallel_map(&pairs, config.concurrency, |pair| {
            let generation = prepared
                .backend
                .generate(pair_text(&pair.transformed), &params)?;
            Ok(GenerationOutcome {
                pair_id: pair.pair_id.clone(),
                original_prompt: pair_text(&pair.original).to_string(),
                completion: generation.completion,
            })
        });
    let outcomes: Vec<GenerationOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let score =
        metrics::toxicity_generation_score(&outcomes, wordlist).map_err(metric_error(kind))?;
    Ok(MetricOutcome {
        score,
        drops: DropCounts::default(),
        warnings: Vec::new(),
    })
}

fn toxicity_softmax_metric(
    config: &RunConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<MetricOutcome, HarnessError> {
    let kind = MetricKind::ToxicitySoftmax;
    let wordlist = prepared.wordlist.as_ref().expect("preflight checked");
    let codec = prepared.backend.codec().expect("preflight checked");
    let (profane, unmatched) =
        metrics::profane_token_set(wordlist, codec).map_err(metric_error(kind))?;
    let mut warnings = Vec::new();
    if !unmatched.is_empty() {
        warnings.push(format!(
            "toxicity_softmax: {} wordlist term(s) have no single-token form and were excluded: {}",
            unmatched.len(),
            unmatched.join(", ")
        ));
    }
    let trigger = resolve_trigger(config, Some(wordlist));
    let units = sample_sentence_units(
        &prepared.sentences,
        config.n_samples,
        run_seed,
        "sample:toxicity_softmax",
        false,
    )?;
    let pairs: Vec<TextPair> = units
        .iter()
        .map(|unit| {
            if config.identity_calibration {
                Ok(transforms::identity_sentence(unit, "trigger_softmax"))
            } else {
                transforms::append_trigger(unit, &trigger, config.metrics.toxicity.trigger_count)
            }
        })
        .collect::<Result<_, _>>()?;

    let mass_of = |text: &str| -> Result<f64, HarnessError> {
        let ids = codec.encode(text)?;
        if ids.is_empty() {
            return Ok(0.0);
        }
        let positions: Vec<usize> = (1..=ids.len()).collect();
        let dists = prepared.backend.next_token_distribution(&ids, &positions)?;
        Ok(metrics::profane_mass(&dists, &profane))
    };
    let scored: Vec<Result<PairMass, HarnessError>> =
        parallel_map(&pairs, config.concurrency, |pair| {
            Ok(PairMass {
                pair_id: pair.pair_id.clone(),
                original: mass_of(pair_text(&pair.original))?,
                transformed: mass_of(pair_text(&pair.transformed))?,
            })
        });
    let mut drops = DropCounts::default();
    let mut clean = Vec::with_capacity(scored.len());
    for result in scored {
        let pair = result?;
        if pair.original.is_finite() && pair.transformed.is_finite() {
            clean.push(pair);
        } else {
            drops.nonfinite += 1;
        }
    }
    enforce_nonfinite_budget(kind, drops.nonfinite, pairs.len())?;
    let score = metrics::toxicity_softmax_score(&clean).map_err(metric_error(kind))?;
    Ok(MetricOutcome {
        score,
        drops,
        warnings,
    })
}

/// Token span of the final sentence inside the encoded passage. `None`
/// when the prefix encoding does not align with the full encoding.
fn final_sentence_span(
    codec: &dyn TokenCodec,
    sentences: &[String],
) -> Result<Option<(Vec<TokenId>, usize)>, HarnessError> {
    let context = sentences[..sentences.len() - 1].join(" ");
    let full_text = sentences.join(" ");
    let full = codec.encode(&full_text)?;
    let prefix = codec.encode(&context)?;
    if full.len() <= prefix.len() || full[..prefix.len()] != prefix[..] {
        return Ok(None);
    }
    Ok(Some((full, prefix.len())))
}

fn lrs_metric(
    config: &RunConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<MetricOutcome, HarnessError> {
    let kind = MetricKind::Lrs;
    let codec = prepared.backend.codec().expect("preflight checked");
    let passages = make_passages(&prepared.sentences, config.metrics.lrs.window)?;
    if passages.is_empty() {
        return Err(HarnessError::InvalidConfig(format!(
            "no document is long enough for an lrs window of {}",
            config.metrics.lrs.window
        )));
    }
    let units: Vec<Passage> = sample_units(
        passages,
        config.n_samples,
        derive_seed(run_seed, "sample:lrs"),
        |p| p.unit_id(),
    )?;
    let pairs: Vec<TextPair> = units
        .iter()
        .map(|passage| {
            if config.identity_calibration {
                Ok(transforms::identity_passage(passage, "context_swap"))
            } else {
                let seed = derive_seed(run_seed, &format!("context_swap:{}", passage.unit_id()));
                transforms::swap_context(
                    passage,
                    &prepared.sentences,
                    config.metrics.lrs.num_replaced,
                    seed,
                )
            }
        })
        .collect::<Result<_, _>>()?;

    enum SpanResult {
        Aligned(PairDistributions),
        Misaligned,
    }
    let scored: Vec<Result<SpanResult, HarnessError>> =
        parallel_map(&pairs, config.concurrency, |pair| {
            let (PairContent::Passage(orig), PairContent::Passage(trans)) =
                (&pair.original, &pair.transformed)
            else {
                unreachable!("lrs pairs are passages");
            };
            let Some((full_o, start_o)) = final_sentence_span(codec, orig)? else {
                return Ok(SpanResult::Misaligned);
            };
            let Some((full_t, start_t)) = final_sentence_span(codec, trans)? else {
                return Ok(SpanResult::Misaligned);
            };
            if full_o[start_o..] != full_t[start_t..] {
                return Ok(SpanResult::Misaligned);
            }
            let positions_o: Vec<usize> = (start_o..full_o.len()).collect();
            let positions_t: Vec<usize> = (start_t..full_t.len()).collect();
            let dists_o = prepared
                .backend
                .next_token_distribution(&full_o, &positions_o)?;
            let dists_t = prepared
                .backend
                .next_token_distribution(&full_t, &positions_t)?;
            Ok(SpanResult::Aligned(PairDistributions {
                pair_id: pair.pair_id.clone(),
                original: dists_o,
                transformed: dists_t,
            }))
        });
    let mut drops = DropCounts::default();
    let mut aligned = Vec::new();
    for result in scored {
        match result? {
            SpanResult::Aligned(pair) => aligned.push(pair),
            SpanResult::Misaligned => drops.misaligned += 1,
        }
    }
    let (score, dropped) = metrics::lrs_score(&aligned).map_err(metric_error(kind))?;
    drops.misaligned += dropped;
    Ok(MetricOutcome {
        score,
        drops,
        warnings: Vec::new(),
    })
}

/// Shared tail for the two final-position JSD metrics.
fn final_distribution_pairs(
    prepared: &Prepared,
    pairs: &[(String, Vec<TokenId>, Vec<TokenId>)],
    concurrency: usize,
) -> Result<Vec<PairFinalDistributions>, HarnessError> {
    let scored: Vec<Result<PairFinalDistributions, HarnessError>> =
        parallel_map(pairs, concurrency, |(pair_id, orig, trans)| {
            let dist_of = |ids: &[TokenId]| -> Result<ProbVector, HarnessError> {
                let dists = prepared
                    .backend
                    .next_token_distribution(ids, &[ids.len()])?;
                dists
                    .into_iter()
                    .next()
                    .ok_or_else(|| BackendError::BadDistribution("empty response".into()).into())
            };
            Ok(PairFinalDistributions {
                pair_id: pair_id.clone(),
                original: dist_of(orig)?,
                transformed: dist_of(trans)?,
            })
        });
    scored.into_iter().collect()
}

fn word_order_metric(
    config: &RunConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<MetricOutcome, HarnessError> {
    let kind = MetricKind::WordOrder;
    let codec = prepared.backend.codec().expect("preflight checked");
    let n = config
        .metrics
        .word_order
        .n_samples
        .unwrap_or(config.n_samples);
    let units =
        sample_sentence_units(&prepared.sentences, n, run_seed, "sample:word_order", false)?;
    let mut drops = DropCounts::default();
    let mut token_pairs: Vec<(String, Vec<TokenId>, Vec<TokenId>)> = Vec::new();
    for unit in &units {
        let outcome = if config.identity_calibration {
            TransformOutcome::Pair(transforms::identity_sentence(unit, "word_swap"))
        } else {
            let seed = derive_seed(run_seed, &format!("word_swap:{}", unit.unit_id()));
            transforms::swap_words(unit, config.metrics.word_order.num_swaps, seed)?
        };
        match outcome {
            TransformOutcome::Pair(pair) => {
                let orig = codec.encode(pair_text(&pair.original))?;
                let trans = codec.encode(pair_text(&pair.transformed))?;
                token_pairs.push((pair.pair_id, orig, trans));
            }
            TransformOutcome::Skip { .. } => drops.skipped += 1,
        }
    }
    let scored = final_distribution_pairs(prepared, &token_pairs, config.concurrency)?;
    let score = metrics::word_order_score(&scored).map_err(metric_error(kind))?;
    Ok(MetricOutcome {
        score,
        drops,
        warnings: Vec::new(),
    })
}

fn tokenization_metric(
    config: &RunConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<MetricOutcome, HarnessError> {
    let kind = MetricKind::Tokenization;
    let codec = prepared.backend.codec().expect("preflight checked");
    let units = sample_sentence_units(
        &prepared.sentences,
        config.n_samples,
        run_seed,
        "sample:tokenization",
        false,
    )?;
    let mut drops = DropCounts::default();
    let mut token_pairs: Vec<(String, Vec<TokenId>, Vec<TokenId>)> = Vec::new();
    for unit in &units {
        let outcome = if config.identity_calibration {
            TransformOutcome::Pair(transforms::identity_tokens(unit, codec, "token_chop")?)
        } else {
            transforms::chop_tokenization(unit, codec, config.metrics.tokenization.stride)?
        };
        match outcome {
            TransformOutcome::Pair(pair) => {
                let orig = pair.original.as_tokens().expect("token pair").to_vec();
                let trans = pair.transformed.as_tokens().expect("token pair").to_vec();
                token_pairs.push((pair.pair_id, orig, trans));
            }
            TransformOutcome::Skip { .. } => drops.skipped += 1,
        }
    }
    let scored = final_distribution_pairs(prepared, &token_pairs, config.concurrency)?;
    let score = metrics::tokenization_score(&scored).map_err(metric_error(kind))?;
    Ok(MetricOutcome {
        score,
        drops,
        warnings: Vec::new(),
    })
}

/// Executes sample, transform, score, aggregate for each enabled metric
/// and assembles the report. Identical config, backend, and cache state
/// reproduce a bit-identical report body.
pub fn run(config: &RunConfig) -> Result<EvalReport, HarnessError> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    config.validate()?;
    let run_seed = config.seed.expect("validated");
    let prepared = prepare(config)?;
    preflight(config, &prepared)?;

    let mut scores = BTreeMap::new();
    let mut drops = BTreeMap::new();
    let mut under_sampled = BTreeMap::new();
    let mut warnings = prepared.warnings.clone();

    for metric in &config.metrics.enabled {
        let outcome = match metric {
            MetricKind::Negation => negation_metric(config, &prepared, run_seed)?,
            MetricKind::ToxicityGeneration => {
                toxicity_generation_metric(config, &prepared, run_seed)?
            }
            MetricKind::ToxicitySoftmax => toxicity_softmax_metric(config, &prepared, run_seed)?,
            MetricKind::Lrs => lrs_metric(config, &prepared, run_seed)?,
            MetricKind::WordOrder => word_order_metric(config, &prepared, run_seed)?,
            MetricKind::Tokenization => tokenization_metric(config, &prepared, run_seed)?,
        };
        under_sampled.insert(
            metric.as_str().to_string(),
            under_sampled_flag(*metric, &outcome.score, config),
        );
        scores.insert(metric.as_str().to_string(), outcome.score);
        drops.insert(metric.as_str().to_string(), outcome.drops);
        warnings.extend(outcome.warnings);
    }

    let comparable = config.comparable_fields(&prepared.inputs);
    let comparability = ComparabilityBlock {
        hash: crate::util::content_hash(&[comparable.to_string().as_bytes()]),
        fields: comparable,
    };
    let radar = radar_block_single(&scores);
    let body = ReportBody {
        config: config.clone(),
        config_hash: config.config_hash(),
        comparability,
        backend: prepared.backend.descriptor().clone(),
        scores,
        drops,
        under_sampled,
        warnings,
        radar,
    };
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        body,
        timing: Timing {
            wall_clock_secs: started.elapsed().as_secs_f64(),
            started_unix_secs: started_unix,
            request_count: prepared.backend.request_count(),
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyStat {
    pub value: f64,
    pub stderr: f64,
}

/// Entropy diagnostics over sampled sentences: the Shannon entropy of the
/// next-token prediction after each sentence, and the mean per-token
/// entropy within each sentence, both averaged over the sample.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub backend: String,
    pub n: usize,
    pub next_token_entropy: EntropyStat,
    pub mean_token_entropy: EntropyStat,
}

pub fn entropy_run(config: &RunConfig) -> Result<EntropyReport, HarnessError> {
    config.validate()?;
    let run_seed = config.seed.expect("validated");
    let prepared = prepare(config)?;
    let descriptor = prepared.backend.descriptor();
    if !descriptor.capabilities.full_next_token_distribution || prepared.backend.codec().is_none() {
        return Err(HarnessError::CapabilityMismatch {
            metric: "entropy".to_string(),
            backend: descriptor.name.clone(),
            what: "full_next_token_distribution capability and a token codec".to_string(),
        });
    }
    let codec = prepared.backend.codec().expect("checked");
    let units = sample_sentence_units(
        &prepared.sentences,
        config.n_samples,
        run_seed,
        "sample:entropy",
        false,
    )?;
    let per_sentence: Vec<Result<(f64, f64), HarnessError>> =
        parallel_map(&units, config.concurrency, |unit| {
            let ids = codec.encode(&unit.text)?;
            if ids.is_empty() {
                return Ok((f64::NAN, f64::NAN));
            }
            let positions: Vec<usize> = (1..=ids.len()).collect();
            let dists = prepared.backend.next_token_distribution(&ids, &positions)?;
            let next_token = metrics::shannon_entropy(dists.last().expect("nonempty"));
            let mean =
                metrics::sentence_mean_entropy(&dists).map_err(|source| HarnessError::Metric {
                    metric: "entropy".to_string(),
                    source,
                })?;
            Ok((next_token, mean))
        });
    let mut next_values = Vec::new();
    let mut mean_values = Vec::new();
    for result in per_sentence {
        let (next_token, mean) = result?;
        if next_token.is_finite() && mean.is_finite() {
            next_values.push(next_token);
            mean_values.push(mean);
        }
    }
    let (next_value, next_stderr) = metrics::aggregate(&next_values, metrics::Aggregation::Mean)
        .map_err(|source| HarnessError::Metric {
            metric: "entropy".to_string(),
            source,
        })?;
    let (mean_value, mean_stderr) = metrics::aggregate(&mean_values, metrics::Aggregation::Mean)
        .map_err(|source| HarnessError::Metric {
            metric: "entropy".to_string(),
            source,
        })?;
    Ok(EntropyReport {
        backend: descriptor.name.clone(),
        n: next_values.len(),
        next_token_entropy: EntropyStat {
            value: next_value,
            stderr: next_stderr,
        },
        mean_token_entropy: EntropyStat {
            value: mean_value,
            stderr: mean_stderr,
        },
    })
}

/// Dry run: generates and returns the transform outcomes for one metric
/// without any scoring; used by the `transform` subcommand for inspection.
pub fn transform_dry_run(
    config: &RunConfig,
    metric: MetricKind,
) -> Result<Vec<TransformOutcome>, HarnessError> {
    config.validate()?;
    let run_seed = config.seed.expect("validated");
    let (docs, _) = read_documents(
        &config.corpus.path,
        config.corpus.format,
        &config.corpus.text_field,
    )?;
    let sentences: Vec<Sentence> = docs.iter().flat_map(split_sentences).collect();
    if sentences.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "corpus yields no sentences".to_string(),
        ));
    }
    let wordlist = config.wordlist.as_deref().map(load_wordlist).transpose()?;
    match metric {
        MetricKind::Negation => {
            let units = sample_sentence_units(
                &sentences,
                config.n_samples,
                run_seed,
                "sample:negation",
                config.metrics.negation.first_sentence_only,
            )?;
            Ok(units.iter().map(transforms::negate).collect())
        }
        MetricKind::ToxicityGeneration | MetricKind::ToxicitySoftmax => {
            let trigger = resolve_trigger(config, wordlist.as_ref());
            let units = sample_sentence_units(
                &sentences,
                config.n_samples,
                run_seed,
                "sample:toxicity_generation",
                false,
            )?;
            units
                .iter()
                .map(|u| {
                    transforms::append_trigger(u, &trigger, config.metrics.toxicity.trigger_count)
                        .map(TransformOutcome::Pair)
                        .map_err(HarnessError::from)
                })
                .collect()
        }
        MetricKind::Lrs => {
            let passages = make_passages(&sentences, config.metrics.lrs.window)?;
            let units = sample_units(
                passages,
                config.n_samples,
                derive_seed(run_seed, "sample:lrs"),
                |p| p.unit_id(),
            )?;
            units
                .iter()
                .map(|p| {
                    let seed = derive_seed(run_seed, &format!("context_swap:{}", p.unit_id()));
                    transforms::swap_context(p, &sentences, config.metrics.lrs.num_replaced, seed)
                        .map(TransformOutcome::Pair)
                        .map_err(HarnessError::from)
                })
                .collect()
        }
        MetricKind::WordOrder => {
            let n = config
                .metrics
                .word_order
                .n_samples
                .unwrap_or(config.n_samples);
            let units = sample_sentence_units(&sentences, n, run_seed, "sample:word_order", false)?;
            units
                .iter()
                .map(|u| {
                    let seed = derive_seed(run_seed, &format!("word_swap:{}", u.unit_id()));
                    transforms::swap_words(u, config.metrics.word_order.num_swaps, seed)
                        .map_err(HarnessError::from)
                })
                .collect()
        }
        MetricKind::Tokenization => {
            let codec: Box<dyn TokenCodec> = match (&config.tokenizer, config.backend.kind) {
                (Some(t), _) => Box::new(load_tokenizer(&t.vocab, &t.merges)?),
                (None, BackendKind::Reference) => {
                    let train_path = config
                        .backend
                        .train_path
                        .clone()
                        .unwrap_or_else(|| config.corpus.path.clone());
                    let format = config.backend.train_format.unwrap_or(config.corpus.format);
                    let (docs, _) = read_documents(&train_path, format, &config.corpus.text_field)?;
                    let model = train_reference_model(
                        &docs,
                        config.backend.order,
                        config.backend.smoothing_k,
                    )?;
                    Box::new(model.word_codec().clone())
                }
                (None, BackendKind::Remote) => {
                    return Err(HarnessError::CapabilityMismatch {
                        metric: metric.as_str().to_string(),
                        backend: "remote".to_string(),
                        what: "a token codec (configure [tokenizer])".to_string(),
                    })
                }
            };
            let units = sample_sentence_units(
                &sentences,
                config.n_samples,
                run_seed,
                "sample:tokenization",
                false,
            )?;
            units
                .iter()
                .map(|u| {
                    transforms::chop_tokenization(
                        u,
                        codec.as_ref(),
                        config.metrics.tokenization.stride,
                    )
                    .map_err(HarnessError::from)
                })
                .collect()
        }
    }
}
