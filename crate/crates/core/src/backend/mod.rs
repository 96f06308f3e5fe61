//! Chat-completion and embedding providers.
//!
//! Providers sit behind [`ChatBackend`] and [`EmbeddingProvider`] and are
//! constructed by name through a [`BackendRegistry`], so the harness can pick
//! `remote`, `scripted` or `extractive-fallback` at runtime from config.

mod remote;
mod scripted;
pub mod templates;

pub use remote::{RemoteChat, RemoteEmbedding};
pub use scripted::{ReplayScript, ScriptEntry, ScriptedBackend};
pub use templates::PromptTemplates;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::memory::HashEmbedding;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {msg}")]
    Transport { attempts: u32, msg: String },
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("api key environment variable `{0}` is not set")]
    MissingKey(String),
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("script entry {index} expected cue `{expected}` in the prompt")]
    CueMismatch { index: usize, expected: String },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Digest-only record of one provider call. Prompts, responses and keys are
/// never logged in the clear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub request_digest: String,
    pub response_digest: Option<String>,
    pub attempts: u32,
}

pub fn digest(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

pub(crate) fn prompt_text(messages: &[ChatMessage]) -> String {
    messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;

    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;

    fn calls(&self) -> Vec<CallRecord> {
        Vec::new()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier, used to key embedding caches.
    fn id(&self) -> String;

    /// Returns one L2-normalized vector per input text.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        (**self).embed(texts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay_ms: 1000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base * 2^(retry-1).
    pub fn delay(&self, retry: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1u64 << (retry.saturating_sub(1)).min(16)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Registered chat provider name: `remote`, `scripted`, `extractive-fallback`.
    pub provider: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub endpoint: String,
    pub api_key_env: String,
    pub retry: RetryPolicy,
    /// Replay script for the scripted provider.
    pub script: Option<PathBuf>,
    /// Registered embedding provider name: `hash` or `remote`.
    pub embedding_provider: String,
    pub embedding_model: String,
    pub embedding_seed: u64,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            provider: "scripted".into(),
            model: "gpt-4-0125-preview".into(),
            temperature: 0.2,
            max_tokens: 1024,
            endpoint: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            retry: RetryPolicy::default(),
            script: None,
            embedding_provider: "hash".into(),
            embedding_model: "text-embedding-3-small".into(),
            embedding_seed: 0,
            timeout_secs: 120,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::Config("temperature must be >= 0".into()));
        }
        if self.retry.attempts < 1 {
            return Err(BackendError::Config("retry attempts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Returns the first `limit` whitespace tokens of `text`.
pub fn leading_tokens(text: &str, limit: usize) -> String {
    text.split_whitespace().take(limit).collect::<Vec<_>>().join(" ")
}

/// Deterministic non-LLM backend: echoes the leading tokens of the last user
/// message. Used for extractive summaries and as a degenerate agent backend.
#[derive(Debug, Default)]
pub struct ExtractiveBackend {
    calls: Mutex<Vec<CallRecord>>,
}

pub const EXTRACTIVE_TOKENS: usize = 64;

impl ChatBackend for ExtractiveBackend {
    fn name(&self) -> &str {
        "extractive-fallback"
    }

    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let last = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let out = leading_tokens(last, EXTRACTIVE_TOKENS);
        self.calls.lock().unwrap().push(CallRecord {
            request_digest: digest(&prompt_text(messages)),
            response_digest: Some(digest(&out)),
            attempts: 1,
        });
        Ok(out)
    }

    fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().unwrap().clone()
    }
}

pub type ChatFactory = fn(&BackendConfig) -> Result<Arc<dyn ChatBackend>, BackendError>;
pub type EmbeddingFactory = fn(&BackendConfig) -> Result<Arc<dyn EmbeddingProvider>, BackendError>;

/// Name-keyed constructors for chat and embedding providers.
pub struct BackendRegistry {
    chat: BTreeMap<String, ChatFactory>,
    embedding: BTreeMap<String, EmbeddingFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register_chat("remote", |c| Ok(Arc::new(RemoteChat::new(c.clone())?)));
        r.register_chat("scripted", |c| {
            let path = c
                .script
                .as_ref()
                .ok_or_else(|| BackendError::Config("scripted provider needs a script path".into()))?;
            Ok(Arc::new(ScriptedBackend::new(ReplayScript::load(path)?)))
        });
        r.register_chat("extractive-fallback", |_| Ok(Arc::new(ExtractiveBackend::default())));
        r.register_embedding("hash", |c| Ok(Arc::new(HashEmbedding::new(c.embedding_seed))));
        r.register_embedding("remote", |c| Ok(Arc::new(RemoteEmbedding::new(c.clone())?)));
        r
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            chat: BTreeMap::new(),
            embedding: BTreeMap::new(),
        }
    }

    pub fn register_chat(&mut self, name: &str, factory: ChatFactory) {
        self.chat.insert(name.to_string(), factory);
    }

    pub fn register_embedding(&mut self, name: &str, factory: EmbeddingFactory) {
        self.embedding.insert(name.to_string(), factory);
    }

    pub fn chat_names(&self) -> impl Iterator<Item = &str> {
        self.chat.keys().map(String::as_str)
    }

    pub fn embedding_names(&self) -> impl Iterator<Item = &str> {
        self.embedding.keys().map(String::as_str)
    }

    pub fn build_chat(&self, config: &BackendConfig) -> Result<Arc<dyn ChatBackend>, BackendError> {
        config.validate()?;
        let factory = self
            .chat
            .get(&config.provider)
            .ok_or_else(|| BackendError::UnknownProvider(config.provider.clone()))?;
        factory(config)
    }

    pub fn build_embedding(&self, config: &BackendConfig) -> Result<Arc<dyn EmbeddingProvider>, BackendError> {
        let factory = self
            .embedding
            .get(&config.embedding_provider)
            .ok_or_else(|| BackendError::UnknownProvider(config.embedding_provider.clone()))?;
        factory(config)
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>, BackendError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm.is_nan() || norm <= 0.0 || !norm.is_finite() {
        return Err(BackendError::Malformed("zero or non-finite embedding".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}
