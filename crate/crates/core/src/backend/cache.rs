//! Content-addressed trace cache. Every backend result is keyed by
//! (backend name, operation, input hash, params) and stored as one file in
//! the cache directory, so a rerun of an identical configuration performs
//! zero backend calls. Writes go through a temp file and an atomic rename;
//! concurrent writers of the same key produce identical content.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::backend::{
    Backend, BackendDescriptor, BackendError, DecodeParams, GenerationResult, TokenScoreTrace,
};
use crate::metrics::ProbVector;
use crate::tokenizer::{TokenCodec, TokenId};
use crate::util::content_hash;

/// Caching wrapper around any backend. The request counter counts actual
/// dispatches to the inner backend (cache misses only).
pub struct CachedBackend {
    inner: Box<dyn Backend>,
    dir: PathBuf,
    requests: AtomicU64,
}

impl CachedBackend {
    pub fn new(inner: Box<dyn Backend>, dir: &Path) -> Result<Self, BackendError> {
        std::fs::create_dir_all(dir).map_err(|source| BackendError::Cache {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(CachedBackend {
            inner,
            dir: dir.to_path_buf(),
            requests: AtomicU64::new(0),
        })
    }

    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    fn key(&self, op: &str, payload: &[&[u8]]) -> String {
        let name = self.inner.descriptor().name.clone();
        let mut parts: Vec<&[u8]> = vec![name.as_bytes(), op.as_bytes()];
        parts.extend_from_slice(payload);
        content_hash(&parts)
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lookup<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let raw = std::fs::read(self.path_for(key)).ok()?;
        // unreadable or stale-format entries are treated as misses
        serde_json::from_slice(&raw).ok()
    }

    fn store<T: Serialize>(&self, key: &str, value: &T) -> Result<(), BackendError> {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.tmp"));
        let bytes = serde_json::to_vec(value).expect("cacheable types serialize");
        std::fs::write(&tmp, &bytes).map_err(|source| BackendError::Cache {
            path: tmp.clone(),
            source,
        })?;
        std::fs::rename(&tmp, &path).map_err(|source| BackendError::Cache { path, source })?;
        Ok(())
    }

    fn through<T, F>(&self, key: String, call: F) -> Result<T, BackendError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, BackendError>,
    {
        if let Some(hit) = self.lookup::<T>(&key) {
            return Ok(hit);
        }
        self.requests.fetch_add(1, Ordering::SeqCst);
        let value = call()?;
        self.store(&key, &value)?;
        Ok(value)
    }
}

fn token_bytes(tokens: &[TokenId]) -> Vec<u8> {
    tokens.iter().flat_map(|t| t.0.to_le_bytes()).collect()
}

impl Backend for CachedBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        self.inner.descriptor()
    }

    fn score_text(&self, text: &str) -> Result<TokenScoreTrace, BackendError> {
        let key = self.key("score_text", &[text.as_bytes()]);
        self.through(key, || self.inner.score_text(text))
    }

    fn score_tokens(&self, tokens: &[TokenId]) -> Result<TokenScoreTrace, BackendError> {
        let bytes = token_bytes(tokens);
        let key = self.key("score_tokens", &[&bytes]);
        self.through(key, || self.inner.score_tokens(tokens))
    }

    fn next_token_distribution(
        &self,
        tokens: &[TokenId],
        positions: &[usize],
    ) -> Result<Vec<ProbVector>, BackendError> {
        let bytes = token_bytes(tokens);
        let pos_bytes: Vec<u8> = positions
            .iter()
            .flat_map(|p| (*p as u64).to_le_bytes())
            .collect();
        let key = self.key("next_token_distribution", &[&bytes, &pos_bytes]);
        self.through(key, || {
            self.inner.next_token_distribution(tokens, positions)
        })
    }

    fn generate(
        &self,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<GenerationResult, BackendError> {
        let params_bytes = serde_json::to_vec(params).expect("params serialize");
        let key = self.key("generate", &[prompt.as_bytes(), &params_bytes]);
        self.through(key, || self.inner.generate(prompt, params))
    }

    fn codec(&self) -> Option<&dyn TokenCodec> {
        self.inner.codec()
    }
}
