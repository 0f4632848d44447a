//! Brute-force oracle for the acceptance suite: every model quantity is
//! recomputed by direct summation over independently built n-gram count
//! tables. Unit sampling and the text transforms are shared with the
//! implementation (they are the definition of the pairs); probabilities,
//! divergences, masses, perplexities, and generations are not.

// shared across test binaries; each one uses a subset
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use lmsense::corpus::{
    load_corpus, make_passages, sample_units, split_sentences, CorpusFormat, Document, Passage,
    Sentence,
};
use lmsense::harness::RunConfig;
use lmsense::transforms::{self, PairContent, TransformOutcome};
use lmsense::util::derive_seed;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_fixture_documents(path: &Path) -> Vec<Document> {
    load_corpus(path, CorpusFormat::Text, "text")
        .expect("fixture corpus opens")
        .collect::<Result<_, _>>()
        .expect("fixture corpus parses")
}

pub fn fixture_sentences(path: &Path) -> Vec<Sentence> {
    load_fixture_documents(path)
        .iter()
        .flat_map(split_sentences)
        .collect()
}

const BOS: usize = usize::MAX;

/// Word-level add-k n-gram tables built directly from sentence word lists.
pub struct Oracle {
    order: usize,
    k: f64,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    counts: HashMap<Vec<usize>, HashMap<usize, u32>>,
    totals: HashMap<Vec<usize>, u32>,
}

impl Oracle {
    pub fn train(documents: &[Document], order: usize, k: f64) -> Oracle {
        // per-document word streams, start-padded once per document
        let mut document_words: Vec<Vec<String>> = Vec::new();
        for doc in documents {
            let words: Vec<String> = doc.text.split_whitespace().map(str::to_owned).collect();
            if !words.is_empty() {
                document_words.push(words);
            }
        }
        let mut vocab: Vec<String> = document_words.iter().flatten().cloned().collect();
        vocab.sort();
        vocab.dedup();
        vocab.push("<unk>".to_string());
        let index: HashMap<String, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let mut counts: HashMap<Vec<usize>, HashMap<usize, u32>> = HashMap::new();
        let mut totals: HashMap<Vec<usize>, u32> = HashMap::new();
        for words in &document_words {
            let ids: Vec<usize> = words.iter().map(|w| index[w]).collect();
            for i in 0..ids.len() {
                let mut ctx = Vec::with_capacity(order - 1);
                for back in (1..order).rev() {
                    ctx.push(if i >= back { ids[i - back] } else { BOS });
                }
                *counts
                    .entry(ctx.clone())
                    .or_default()
                    .entry(ids[i])
                    .or_insert(0) += 1;
                *totals.entry(ctx).or_insert(0) += 1;
            }
        }
        Oracle {
            order,
            k,
            vocab,
            index,
            counts,
            totals,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn id(&self, word: &str) -> usize {
        *self.index.get(word).unwrap_or(&(self.vocab.len() - 1))
    }

    pub fn ids(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|w| self.id(w)).collect()
    }

    fn context(&self, consumed: &[usize]) -> Vec<usize> {
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

    pub fn prob(&self, consumed: &[usize], next: usize) -> f64 {
        let ctx = self.context(consumed);
        let c = self
            .counts
            .get(&ctx)
            .and_then(|row| row.get(&next))
            .copied()
            .unwrap_or(0) as f64;
        let t = self.totals.get(&ctx).copied().unwrap_or(0) as f64;
        (c + self.k) / (t + self.k * self.vocab.len() as f64)
    }

    /// Mean negative conditional log-likelihood per word, natural log.
    pub fn log_ppl(&self, text: &str) -> f64 {
        let ids = self.ids(text);
        assert!(!ids.is_empty(), "oracle scoring of empty text");
        let mut total = 0.0;
        for i in 0..ids.len() {
            total += self.prob(&ids[..i], ids[i]).ln();
        }
        -total / ids.len() as f64
    }

    pub fn distribution(&self, consumed: &[usize]) -> Vec<f64> {
        let ctx = self.context(consumed);
        let row = self.counts.get(&ctx);
        let t = self.totals.get(&ctx).copied().unwrap_or(0) as f64;
        let denom = t + self.k * self.vocab.len() as f64;
        (0..self.vocab.len())
            .map(|id| {
                let c = row.and_then(|r| r.get(&id)).copied().unwrap_or(0) as f64;
                (c + self.k) / denom
            })
            .collect()
    }

    pub fn greedy_next(&self, consumed: &[usize]) -> usize {
        let dist = self.distribution(consumed);
        let mut best = 0usize;
        for (i, p) in dist.iter().enumerate() {
            if *p > dist[best] {
                best = i;
            }
        }
        best
    }

    pub fn greedy_generate(&self, prompt: &str, max_new_tokens: usize) -> String {
        let mut consumed = self.ids(prompt);
        let mut generated: Vec<&str> = Vec::new();
        for _ in 0..max_new_tokens {
            let next = self.greedy_next(&consumed);
            generated.push(&self.vocab[next]);
            consumed.push(next);
        }
        generated.join(" ")
    }
}

pub fn oracle_jsd(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (pi, qi) in p.iter().zip(q) {
        let m = 0.5 * (pi + qi);
        if *pi > 0.0 {
            kl_p += pi * (pi / m).ln();
        }
        if *qi > 0.0 {
            kl_q += qi * (qi / m).ln();
        }
    }
    0.5 * (kl_p + kl_q)
}

fn oracle_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn oracle_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted_values(by_id: BTreeMap<String, f64>) -> Vec<f64> {
    by_id.into_values().collect()
}

/// Simple whole-word containment check, reimplemented so the oracle does
/// not lean on the implementation's matcher.
fn oracle_contains_term(text: &str, terms: &BTreeSet<String>) -> bool {
    let lower = text.to_lowercase();
    for term in terms {
        for (start, _) in lower.match_indices(term.as_str()) {
            let before = lower[..start].chars().next_back();
            let after = lower[start + term.len()..].chars().next();
            let before_ok = !before.is_some_and(char::is_alphanumeric);
            let after_ok = !after.is_some_and(char::is_alphanumeric);
            if before_ok && after_ok {
                return true;
            }
        }
    }
    false
}

fn oracle_char_chunks(text: &str, stride: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    chars
        .chunks(stride)
        .map(|c| c.iter().collect::<String>())
        .collect()
}

/// All metric values for the golden configuration, recomputed end to end
/// from the count tables. Keys match the report's score map.
pub fn oracle_scores(config: &RunConfig) -> BTreeMap<String, f64> {
    let run_seed = config.seed.expect("golden config has a seed");
    let documents = load_fixture_documents(&config.corpus.path);
    let sentences: Vec<Sentence> = documents.iter().flat_map(split_sentences).collect();
    let oracle = Oracle::train(&documents, config.backend.order, config.backend.smoothing_k);
    let terms: BTreeSet<String> = std::fs::read_to_string(
        config
            .wordlist
            .as_ref()
            .expect("golden config has a wordlist"),
    )
    .expect("wordlist readable")
    .lines()
    .map(|l| l.trim().to_lowercase())
    .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.contains(char::is_whitespace))
    .collect();

    let mut scores = BTreeMap::new();

    // negation: mean log-ppl difference over sampled, negatable sentences
    let units = sample_units(
        sentences.clone(),
        config.n_samples,
        derive_seed(run_seed, "sample:negation"),
        |s| s.unit_id(),
    )
    .unwrap();
    let mut diffs: BTreeMap<String, f64> = BTreeMap::new();
    for unit in &units {
        if let TransformOutcome::Pair(pair) = transforms::negate(unit) {
            let orig = pair.original.as_text().unwrap();
            let trans = pair.transformed.as_text().unwrap();
            diffs.insert(pair.pair_id, oracle.log_ppl(trans) - oracle.log_ppl(orig));
        }
    }
    scores.insert("negation".to_string(), oracle_mean(&sorted_values(diffs)));

    // normalized negation: subtract the mean absolute benign difference
    if let Some(benign_path) = &config.metrics.negation.benign_path {
        let benign_sentences = fixture_sentences(benign_path);
        let benign_units = sample_units(
            benign_sentences,
            config.n_samples,
            derive_seed(run_seed, "sample:negation_benign"),
            |s| s.unit_id(),
        )
        .unwrap();
        let mut abs_diffs: BTreeMap<String, f64> = BTreeMap::new();
        for unit in &benign_units {
            if let TransformOutcome::Pair(pair) = transforms::negate(unit) {
                let orig = pair.original.as_text().unwrap();
                let trans = pair.transformed.as_text().unwrap();
                abs_diffs.insert(
                    format!("benign:{}", pair.pair_id),
                    (oracle.log_ppl(trans) - oracle.log_ppl(orig)).abs(),
                );
            }
        }
        scores.insert(
            "negation.normalized".to_string(),
            scores["negation"] - oracle_mean(&sorted_values(abs_diffs)),
        );
    }

    let trigger = config
        .metrics
        .toxicity
        .trigger
        .clone()
        .expect("golden trigger");
    let trigger_count = config.metrics.toxicity.trigger_count;

    // toxicity via generation
    let units = sample_units(
        sentences.clone(),
        config.n_samples,
        derive_seed(run_seed, "sample:toxicity_generation"),
        |s| s.unit_id(),
    )
    .unwrap();
    let mut gen_diffs: BTreeMap<String, f64> = BTreeMap::new();
    for unit in &units {
        let pair = transforms::append_trigger(unit, &trigger, trigger_count).unwrap();
        let prompt = pair.transformed.as_text().unwrap();
        let completion = oracle.greedy_generate(prompt, config.metrics.toxicity.max_new_tokens);
        let gen_toxic = oracle_contains_term(&completion, &terms) as u8 as f64;
        let prompt_toxic = oracle_contains_term(&unit.text, &terms) as u8 as f64;
        gen_diffs.insert(pair.pair_id, gen_toxic - prompt_toxic);
    }
    scores.insert(
        "toxicity_generation".to_string(),
        oracle_mean(&sorted_values(gen_diffs)),
    );

    // toxicity via softmax mass
    let profane: BTreeSet<usize> = (0..oracle.vocab_size())
        .filter(|id| terms.contains(&oracle.vocab[*id].to_lowercase()))
        .collect();
    assert!(
        !profane.is_empty(),
        "fixture wordlist must project onto the vocab"
    );
    let mass = |text: &str| -> f64 {
        let ids = oracle.ids(text);
        let mut total = 0.0;
        for p in 1..=ids.len() {
            let dist = oracle.distribution(&ids[..p]);
            total += profane.iter().map(|id| dist[*id]).sum::<f64>();
        }
        total / ids.len() as f64
    };
    let units = sample_units(
        sentences.clone(),
        config.n_samples,
        derive_seed(run_seed, "sample:toxicity_softmax"),
        |s| s.unit_id(),
    )
    .unwrap();
    let mut mass_diffs: BTreeMap<String, f64> = BTreeMap::new();
    for unit in &units {
        let pair = transforms::append_trigger(unit, &trigger, trigger_count).unwrap();
        let orig = pair.original.as_text().unwrap();
        let trans = pair.transformed.as_text().unwrap();
        mass_diffs.insert(pair.pair_id, mass(trans) - mass(orig));
    }
    scores.insert(
        "toxicity_softmax".to_string(),
        oracle_mean(&sorted_values(mass_diffs)),
    );

    // long-range sensitivity over the final sentence
    let passages = make_passages(&sentences, config.metrics.lrs.window).unwrap();
    let units: Vec<Passage> = sample_units(
        passages,
        config.n_samples,
        derive_seed(run_seed, "sample:lrs"),
        |p| p.unit_id(),
    )
    .unwrap();
    let mut pair_means: BTreeMap<String, f64> = BTreeMap::new();
    for passage in &units {
        let seed = derive_seed(run_seed, &format!("context_swap:{}", passage.unit_id()));
        let pair =
            transforms::swap_context(passage, &sentences, config.metrics.lrs.num_replaced, seed)
                .unwrap();
        let (PairContent::Passage(orig), PairContent::Passage(trans)) =
            (&pair.original, &pair.transformed)
        else {
            unreachable!()
        };
        let span_words = |sents: &[String]| -> (Vec<usize>, usize) {
            let full = oracle.ids(&sents.join(" "));
            let prefix_len = oracle.ids(&sents[..sents.len() - 1].join(" ")).len();
            (full, prefix_len)
        };
        let (full_o, start_o) = span_words(orig);
        let (full_t, start_t) = span_words(trans);
        assert_eq!(
            &full_o[start_o..],
            &full_t[start_t..],
            "final sentence ids align"
        );
        let span_len = full_o.len() - start_o;
        let mut total = 0.0;
        for offset in 0..span_len {
            let d_o = oracle.distribution(&full_o[..start_o + offset]);
            let d_t = oracle.distribution(&full_t[..start_t + offset]);
            total += oracle_jsd(&d_o, &d_t);
        }
        pair_means.insert(pair.pair_id, total / span_len as f64);
    }
    scores.insert("lrs".to_string(), oracle_mean(&sorted_values(pair_means)));

    // word order: median final-position JSD
    let n = config
        .metrics
        .word_order
        .n_samples
        .unwrap_or(config.n_samples);
    let units = sample_units(
        sentences.clone(),
        n,
        derive_seed(run_seed, "sample:word_order"),
        |s| s.unit_id(),
    )
    .unwrap();
    let mut jsds: BTreeMap<String, f64> = BTreeMap::new();
    for unit in &units {
        let seed = derive_seed(run_seed, &format!("word_swap:{}", unit.unit_id()));
        if let TransformOutcome::Pair(pair) =
            transforms::swap_words(unit, config.metrics.word_order.num_swaps, seed).unwrap()
        {
            let ids_o = oracle.ids(pair.original.as_text().unwrap());
            let ids_t = oracle.ids(pair.transformed.as_text().unwrap());
            let d_o = oracle.distribution(&ids_o);
            let d_t = oracle.distribution(&ids_t);
            jsds.insert(pair.pair_id, oracle_jsd(&d_o, &d_t));
        }
    }
    scores.insert(
        "word_order".to_string(),
        oracle_median(&sorted_values(jsds)),
    );

    // tokenization: chop against the word tokenizer, mean final-position JSD
    let units = sample_units(
        sentences.clone(),
        config.n_samples,
        derive_seed(run_seed, "sample:tokenization"),
        |s| s.unit_id(),
    )
    .unwrap();
    let mut jsds: BTreeMap<String, f64> = BTreeMap::new();
    for unit in &units {
        let plain = oracle.ids(&unit.text);
        let chopped: Vec<usize> =
            oracle_char_chunks(&unit.text, config.metrics.tokenization.stride)
                .iter()
                .flat_map(|chunk| oracle.ids(chunk))
                .collect();
        if plain == chopped {
            continue;
        }
        let d_o = oracle.distribution(&plain);
        let d_t = oracle.distribution(&chopped);
        jsds.insert(
            format!("token_chop:{}", unit.unit_id()),
            oracle_jsd(&d_o, &d_t),
        );
    }
    scores.insert(
        "tokenization".to_string(),
        oracle_mean(&sorted_values(jsds)),
    );

    scores
}
