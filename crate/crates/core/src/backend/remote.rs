//! OpenAI-compatible completions client: the sole remote protocol. Scoring
//! uses `POST /v1/completions` with `echo` and per-token logprobs;
//! generation uses the same endpoint without echo. Full-distribution and
//! raw-token-id support are assumed absent unless the server advertises
//! them via the optional `GET /v1/capabilities` extension (see README for
//! the extension contract).

use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::backend::{
    require, Backend, BackendDescriptor, BackendError, Capabilities, DecodeParams, DecodeStrategy,
    GenerationResult, TokenScoreTrace,
};
use crate::metrics::ProbVector;
use crate::tokenizer::{TokenCodec, TokenId};

/// Environment variables consulted for the bearer token, in order.
const API_KEY_VARS: &[&str] = &["LMSENSE_API_KEY", "OPENAI_API_KEY"];

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
    pub max_attempts: u32,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            model: model.into(),
            timeout: Duration::from_secs(60),
            max_attempts: 3,
        }
    }
}

/// Optional extension advertisement. Servers that can return full softmax
/// rows or accept raw token ids declare it here.
#[derive(Debug, Clone, Deserialize, Default)]
struct ExtensionInfo {
    #[serde(default)]
    full_next_token_distribution: bool,
    #[serde(default)]
    raw_token_input: bool,
    #[serde(default)]
    vocab_size: Option<usize>,
    #[serde(default)]
    precision: Option<String>,
    #[serde(default = "default_distributions_path")]
    distributions_path: String,
}

fn default_distributions_path() -> String {
    "/v1/distributions".to_string()
}

pub struct RemoteBackend {
    config: RemoteConfig,
    descriptor: BackendDescriptor,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    extension: ExtensionInfo,
    codec: Option<Arc<dyn TokenCodec>>,
}

#[derive(Debug, Deserialize)]
struct CompletionsResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    #[serde(default)]
    text: String,
    #[serde(default)]
    logprobs: Option<LogprobsBlock>,
}

#[derive(Debug, Deserialize)]
struct LogprobsBlock {
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
}

#[derive(Debug, Deserialize)]
struct DistributionsResponse {
    distributions: Vec<Vec<f64>>,
}

impl RemoteBackend {
    /// Connects to an OpenAI-compatible endpoint: probes the capabilities
    /// extension and checks vocab compatibility when a tokenizer is
    /// supplied for raw-token scoring.
    pub fn connect(
        config: RemoteConfig,
        codec: Option<Arc<dyn TokenCodec>>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                attempts: 1,
                message: e.to_string(),
            })?;
        let api_key = API_KEY_VARS.iter().find_map(|v| std::env::var(v).ok());
        let extension = probe_capabilities(&client, &config, api_key.as_deref());
        if let (Some(codec), Some(server_vocab)) = (&codec, extension.vocab_size) {
            if codec.vocab_size() != server_vocab {
                return Err(BackendError::TokenizerMismatch(format!(
                    "loaded tokenizer has {} tokens, server declares {}",
                    codec.vocab_size(),
                    server_vocab
                )));
            }
        }
        let descriptor = BackendDescriptor {
            name: format!("{}@{}", config.model, config.base_url),
            capabilities: Capabilities {
                per_token_logprobs: true,
                full_next_token_distribution: extension.full_next_token_distribution,
                text_generation: true,
                raw_token_input: extension.raw_token_input,
            },
            vocab_size: extension.vocab_size,
            precision: extension
                .precision
                .clone()
                .unwrap_or_else(|| "unknown".to_string()),
        };
        Ok(RemoteBackend {
            config,
            descriptor,
            client,
            api_key,
            extension,
            codec,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    /// POST with retries: up to `max_attempts` tries with exponential
    /// backoff, but only for idempotent (deterministic) requests. Connect
    /// failures, timeouts, 429 and 5xx are retried; other statuses surface
    /// immediately.
    fn post_json(
        &self,
        url: &str,
        body: &serde_json::Value,
        idempotent: bool,
    ) -> Result<serde_json::Value, BackendError> {
        let attempts = if idempotent {
            self.config.max_attempts.max(1)
        } else {
            1
        };
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 * (1 << attempt)));
            }
            let mut request = self.client.post(url).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response.json().map_err(|e| BackendError::Protocol {
                            url: url.to_string(),
                            message: format!("invalid JSON body: {e}"),
                        });
                    }
                    let retryable = status.is_server_error() || status.as_u16() == 429;
                    let body_text = response.text().unwrap_or_default();
                    last_error = format!("HTTP {status}: {body_text}");
                    if !retryable {
                        return Err(BackendError::Protocol {
                            url: url.to_string(),
                            message: last_error,
                        });
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: format!("{url}: {last_error}"),
        })
    }

    fn completions(
        &self,
        prompt: serde_json::Value,
        max_tokens: usize,
        logprobs: bool,
        echo: bool,
        temperature: f64,
        idempotent: bool,
    ) -> Result<CompletionsResponse, BackendError> {
        let url = self.url("/v1/completions");
        let body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "logprobs": if logprobs { Some(0) } else { None },
            "echo": echo,
            "temperature": temperature,
        });
        let value = self.post_json(&url, &body, idempotent)?;
        serde_json::from_value(value).map_err(|e| BackendError::Protocol {
            url,
            message: format!("unexpected completions schema: {e}"),
        })
    }

    fn echoed_trace(
        &self,
        response: CompletionsResponse,
        tokens: Vec<TokenId>,
    ) -> Result<TokenScoreTrace, BackendError> {
        let choice = response
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Protocol {
                url: self.url("/v1/completions"),
                message: "no choices in response".to_string(),
            })?;
        let block = choice.logprobs.ok_or_else(|| BackendError::Protocol {
            url: self.url("/v1/completions"),
            message: "server returned no logprobs block".to_string(),
        })?;
        if block.token_logprobs.is_empty() {
            return Err(BackendError::Protocol {
                url: self.url("/v1/completions"),
                message: "empty token_logprobs".to_string(),
            });
        }
        let logprobs: Vec<Option<f64>> = block
            .token_logprobs
            .iter()
            .map(|lp| lp.filter(|v| v.is_finite()))
            .collect();
        Ok(TokenScoreTrace {
            tokens,
            logprobs,
            distributions: None,
        })
    }
}

fn probe_capabilities(
    client: &reqwest::blocking::Client,
    config: &RemoteConfig,
    api_key: Option<&str>,
) -> ExtensionInfo {
    let url = format!("{}/v1/capabilities", config.base_url.trim_end_matches('/'));
    let mut request = client.get(&url);
    if let Some(key) = api_key {
        request = request.bearer_auth(key);
    }
    match request.send() {
        Ok(response) if response.status().is_success() => response.json().unwrap_or_default(),
        _ => ExtensionInfo::default(),
    }
}

impl Backend for RemoteBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn score_text(&self, text: &str) -> Result<TokenScoreTrace, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let response = self.completions(json!(text), 0, true, true, 0.0, true)?;
        self.echoed_trace(response, Vec::new())
    }

    fn score_tokens(&self, tokens: &[TokenId]) -> Result<TokenScoreTrace, BackendError> {
        require(
            &self.descriptor,
            "score_tokens",
            "raw_token_input",
            self.descriptor.capabilities.raw_token_input,
        )?;
        if tokens.is_empty() {
            return Err(BackendError::EmptyInput);
        }
        if let Some(size) = self.descriptor.vocab_size {
            if let Some(bad) = tokens.iter().find(|t| t.0 as usize >= size) {
                return Err(BackendError::InvalidTokenId { id: bad.0, size });
            }
        }
        let ids: Vec<u32> = tokens.iter().map(|t| t.0).collect();
        let response = self.completions(json!(ids), 0, true, true, 0.0, true)?;
        self.echoed_trace(response, tokens.to_vec())
    }

    fn next_token_distribution(
        &self,
        tokens: &[TokenId],
        positions: &[usize],
    ) -> Result<Vec<ProbVector>, BackendError> {
        require(
            &self.descriptor,
            "next_token_distribution",
            "full_next_token_distribution",
            self.descriptor.capabilities.full_next_token_distribution,
        )?;
        if let Some(bad) = positions.iter().find(|p| **p > tokens.len()) {
            return Err(BackendError::InvalidPosition {
                position: *bad,
                len: tokens.len(),
            });
        }
        let url = self.url(&self.extension.distributions_path);
        let ids: Vec<u32> = tokens.iter().map(|t| t.0).collect();
        let body = json!({
            "model": self.config.model,
            "tokens": ids,
            "positions": positions,
        });
        let value = self.post_json(&url, &body, true)?;
        let parsed: DistributionsResponse =
            serde_json::from_value(value).map_err(|e| BackendError::Protocol {
                url: url.clone(),
                message: format!("unexpected distributions schema: {e}"),
            })?;
        if parsed.distributions.len() != positions.len() {
            return Err(BackendError::Protocol {
                url,
                message: format!(
                    "asked for {} positions, got {} distributions",
                    positions.len(),
                    parsed.distributions.len()
                ),
            });
        }
        parsed
            .distributions
            .into_iter()
            .map(|d| ProbVector::new(d).map_err(|e| BackendError::BadDistribution(e.to_string())))
            .collect()
    }

    fn generate(
        &self,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<GenerationResult, BackendError> {
        let temperature = match params.strategy {
            DecodeStrategy::Greedy => 0.0,
            DecodeStrategy::Temperature(t) => t,
        };
        let response = self.completions(
            json!(prompt),
            params.max_new_tokens,
            false,
            false,
            temperature,
            params.is_deterministic(),
        )?;
        let choice = response
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Protocol {
                url: self.url("/v1/completions"),
                message: "no choices in response".to_string(),
            })?;
        Ok(GenerationResult {
            prompt: prompt.to_string(),
            completion: choice.text,
            decode_params: params.clone(),
        })
    }

    fn codec(&self) -> Option<&dyn TokenCodec> {
        self.codec.as_deref()
    }
}
