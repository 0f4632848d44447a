//! Run configuration: one human-editable TOML file, CLI-overridable, with
//! the effective config hashed and echoed into every report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::CorpusFormat;
use crate::harness::HarnessError;
use crate::util::content_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Negation,
    ToxicityGeneration,
    ToxicitySoftmax,
    Lrs,
    WordOrder,
    Tokenization,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Negation => "negation",
            MetricKind::ToxicityGeneration => "toxicity_generation",
            MetricKind::ToxicitySoftmax => "toxicity_softmax",
            MetricKind::Lrs => "lrs",
            MetricKind::WordOrder => "word_order",
            MetricKind::Tokenization => "tokenization",
        }
    }

    pub fn all() -> [MetricKind; 6] {
        [
            MetricKind::Negation,
            MetricKind::ToxicityGeneration,
            MetricKind::ToxicitySoftmax,
            MetricKind::Lrs,
            MetricKind::WordOrder,
            MetricKind::Tokenization,
        ]
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::all()
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    pub format: CorpusFormat,
    pub text_field: String,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            path: PathBuf::new(),
            format: CorpusFormat::Text,
            text_field: "text".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Reference,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Remote: OpenAI-compatible base URL.
    pub base_url: Option<String>,
    /// Remote: model name sent with each request.
    pub model: Option<String>,
    /// Reference: training corpus; defaults to the evaluation corpus.
    pub train_path: Option<PathBuf>,
    pub train_format: Option<CorpusFormat>,
    pub order: usize,
    pub smoothing_k: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Reference,
            base_url: None,
            model: None,
            train_path: None,
            train_format: None,
            order: 2,
            smoothing_k: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub vocab: PathBuf,
    pub merges: PathBuf,
    /// Prepend a begin-of-sequence token for backends that require one.
    pub bos: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            vocab: PathBuf::new(),
            merges: PathBuf::new(),
            bos: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegationParams {
    /// Restrict negation units to each document's first sentence.
    pub first_sentence_only: bool,
    /// Benign corpus for the normalized score; same format as the corpus.
    pub benign_path: Option<PathBuf>,
    pub benign_format: Option<CorpusFormat>,
    pub stderr_threshold: Option<f64>,
}

impl Default for NegationParams {
    fn default() -> Self {
        NegationParams {
            first_sentence_only: false,
            benign_path: None,
            benign_format: None,
            stderr_threshold: Some(0.002),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToxicityParams {
    /// Trigger word appended to prompts. When unset, the first wordlist
    /// term is used; the masked placeholder is only a dry-run default.
    pub trigger: Option<String>,
    pub trigger_count: usize,
    pub max_new_tokens: usize,
}

impl Default for ToxicityParams {
    fn default() -> Self {
        ToxicityParams {
            trigger: None,
            trigger_count: 2,
            max_new_tokens: 64,
        }
    }
}

/// Masked placeholder used only when no wordlist supplies a real trigger.
pub const MASKED_TRIGGER: &str = "F***";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrsParams {
    pub window: usize,
    pub num_replaced: usize,
    pub stderr_threshold: Option<f64>,
}

impl Default for LrsParams {
    fn default() -> Self {
        LrsParams {
            window: 3,
            num_replaced: 2,
            stderr_threshold: Some(0.002),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordOrderParams {
    pub num_swaps: usize,
    /// Overrides the global sample count (the word-order metric is
    /// typically run with more samples).
    pub n_samples: Option<usize>,
}

impl Default for WordOrderParams {
    fn default() -> Self {
        WordOrderParams {
            num_swaps: 1,
            n_samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizationParams {
    pub stride: usize,
    pub stderr_threshold: Option<f64>,
}

impl Default for TokenizationParams {
    fn default() -> Self {
        TokenizationParams {
            stride: 5,
            stderr_threshold: Some(0.005),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub enabled: Vec<MetricKind>,
    pub negation: NegationParams,
    pub toxicity: ToxicityParams,
    pub lrs: LrsParams,
    pub word_order: WordOrderParams,
    pub tokenization: TokenizationParams,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            enabled: MetricKind::all().to_vec(),
            negation: NegationParams::default(),
            toxicity: ToxicityParams::default(),
            lrs: LrsParams::default(),
            word_order: WordOrderParams::default(),
            tokenization: TokenizationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub n_samples: usize,
    pub concurrency: usize,
    pub out_dir: PathBuf,
    pub shared_cache: Option<PathBuf>,
    /// Replace every transform with identity; all scores must be zero.
    pub identity_calibration: bool,
    pub corpus: CorpusConfig,
    pub backend: BackendConfig,
    pub tokenizer: Option<TokenizerConfig>,
    pub wordlist: Option<PathBuf>,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: 1,
            seed: None,
            n_samples: 200,
            concurrency: 4,
            out_dir: PathBuf::from("runs/latest"),
            shared_cache: None,
            identity_calibration: false,
            corpus: CorpusConfig::default(),
            backend: BackendConfig::default(),
            tokenizer: None,
            wordlist: None,
            metrics: MetricsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let raw = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&raw)
            .map_err(|e| HarnessError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// The `paper` preset pins the published defaults: 1000 samples (5000
    /// for word order), negation on topic sentences, two trigger words,
    /// window 3 with two replacements, one swap, split stride 5.
    pub fn apply_paper_preset(&mut self) {
        self.n_samples = 1000;
        self.metrics.negation.first_sentence_only = true;
        self.metrics.toxicity.trigger_count = 2;
        self.metrics.lrs.window = 3;
        self.metrics.lrs.num_replaced = 2;
        self.metrics.word_order.num_swaps = 1;
        self.metrics.word_order.n_samples = Some(5000);
        self.metrics.tokenization.stride = 5;
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.seed.is_none() {
            return fail("seed is mandatory; set it in the config or via --seed".into());
        }
        if self.n_samples == 0 {
            return fail("n_samples must be at least 1".into());
        }
        if self.concurrency == 0 {
            return fail("concurrency must be at least 1".into());
        }
        if self.corpus.path.as_os_str().is_empty() {
            return fail("corpus.path is required".into());
        }
        if self.metrics.enabled.is_empty() {
            return fail("metrics.enabled must name at least one metric".into());
        }
        let unique: BTreeSet<_> = self.metrics.enabled.iter().collect();
        if unique.len() != self.metrics.enabled.len() {
            return fail("metrics.enabled lists a metric twice".into());
        }
        match self.backend.kind {
            BackendKind::Remote => {
                if self.backend.base_url.is_none() || self.backend.model.is_none() {
                    return fail("remote backend requires base_url and model".into());
                }
            }
            BackendKind::Reference => {
                if !(1..=3).contains(&self.backend.order) {
                    return fail(format!(
                        "reference order must be 1..=3, got {}",
                        self.backend.order
                    ));
                }
                if self.backend.smoothing_k <= 0.0 {
                    return fail("reference smoothing_k must be positive".into());
                }
            }
        }
        if self.metrics.enabled.contains(&MetricKind::Lrs) {
            let lrs = &self.metrics.lrs;
            if lrs.window < 2 {
                return fail("lrs.window must be at least 2".into());
            }
            if lrs.num_replaced == 0 || lrs.num_replaced >= lrs.window {
                return fail(format!(
                    "lrs.num_replaced must be in 1..window ({} vs {})",
                    lrs.num_replaced, lrs.window
                ));
            }
        }
        if self.metrics.enabled.contains(&MetricKind::Tokenization)
            && self.metrics.tokenization.stride == 0
        {
            return fail("tokenization.stride must be at least 1".into());
        }
        if self.metrics.enabled.contains(&MetricKind::WordOrder)
            && self.metrics.word_order.num_swaps == 0
        {
            return fail("word_order.num_swaps must be at least 1".into());
        }
        if self.metrics.toxicity.trigger_count == 0
            && (self
                .metrics
                .enabled
                .contains(&MetricKind::ToxicityGeneration)
                || self.metrics.enabled.contains(&MetricKind::ToxicitySoftmax))
        {
            return fail("toxicity.trigger_count must be at least 1".into());
        }
        if let Some(trigger) = &self.metrics.toxicity.trigger {
            if trigger.is_empty() || trigger.chars().any(char::is_whitespace) {
                return fail("toxicity.trigger must be a single non-empty word".into());
            }
        }
        Ok(())
    }

    /// Hash of the full effective configuration.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        content_hash(&[&bytes])
    }

    /// The comparable subset of the configuration: everything that must
    /// match for two reports' scores to be meaningfully compared. Backend
    /// identity, output paths, and concurrency are deliberately excluded.
    pub fn comparable_fields(&self, inputs: &InputHashes) -> serde_json::Value {
        json!({
            "seed": self.seed,
            "n_samples": self.n_samples,
            "identity_calibration": self.identity_calibration,
            "corpus": {
                "format": self.corpus.format,
                "text_field": self.corpus.text_field,
                "content_hash": inputs.corpus,
            },
            "metrics": serde_json::to_value(&self.metrics).expect("metrics serialize"),
            "wordlist_hash": inputs.wordlist,
            "benign_hash": inputs.benign,
            "tokenizer_hash": inputs.tokenizer,
        })
    }
}

/// Content hashes of the input files behind a run, for comparability
/// checks that survive path differences between machines.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct InputHashes {
    pub corpus: String,
    pub wordlist: Option<String>,
    pub benign: Option<String>,
    pub tokenizer: Option<String>,
}

pub fn hash_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(content_hash(&[&bytes]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> RunConfig {
        let mut config = RunConfig {
            seed: Some(42),
            ..RunConfig::default()
        };
        config.corpus.path = PathBuf::from("corpus.txt");
        config
    }

    #[test]
    fn default_config_is_usable_after_seed_and_corpus() {
        minimal().validate().unwrap();
    }

    #[test]
    fn seed_is_mandatory() {
        let mut config = minimal();
        config.seed = None;
        assert!(config.validate().is_err());
    }

    #[test]
    fn lrs_replacement_must_fit_window() {
        let mut config = minimal();
        config.metrics.lrs.num_replaced = 3;
        config.metrics.lrs.window = 3;
        assert!(config.validate().is_err());
        config.metrics.lrs.num_replaced = 2;
        config.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        let mut config = minimal();
        config.apply_paper_preset();
        let text = toml::to_string(&config).unwrap();
        let parsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn config_hash_changes_with_any_field() {
        let config = minimal();
        let base = config.config_hash();
        let mut changed = config.clone();
        changed.metrics.tokenization.stride = 7;
        assert_ne!(base, changed.config_hash());
        assert_eq!(base, minimal().config_hash());
    }

    #[test]
    fn paper_preset_pins_the_published_defaults() {
        let mut config = minimal();
        config.apply_paper_preset();
        assert_eq!(config.n_samples, 1000);
        assert_eq!(config.metrics.word_order.n_samples, Some(5000));
        assert_eq!(config.metrics.tokenization.stride, 5);
        assert_eq!(config.metrics.lrs.window, 3);
        assert_eq!(config.metrics.lrs.num_replaced, 2);
        assert_eq!(config.metrics.toxicity.trigger_count, 2);
        assert_eq!(config.metrics.word_order.num_swaps, 1);
        assert!(config.metrics.negation.first_sentence_only);
    }

    #[test]
    fn metric_kind_parses_all_names() {
        for kind in MetricKind::all() {
            assert_eq!(kind.as_str().parse::<MetricKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<MetricKind>().is_err());
    }
}
