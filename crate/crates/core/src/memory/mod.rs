//! Per-individual mixed memory.
//!
//! [`ClearMemory`] keeps the owner's raw messages for exact keyword lookups
//! with a context window. [`FuzzyMemory`] keeps one summary per session with
//! an embedding for semantic top-k lookups. Both are built from
//! [`Corpus::visible_messages`](crate::corpus::Corpus::visible_messages) only.

mod clear;
mod embedding;
mod fuzzy;

pub use clear::ClearMemory;
pub use embedding::{cosine, CachedEmbedding, HashEmbedding, HASH_DIM};
pub use fuzzy::{summarize_sessions, BackendSummarizer, ExtractiveSummarizer, FuzzyEntry, FuzzyMemory, SessionSummary, Summarizer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::corpus::CorpusError;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("session `{session}`: {source}")]
    Summary {
        session: String,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearQuery {
    pub keywords: Vec<String>,
    /// Messages included on each side of a match, within its session.
    pub context_window: usize,
    pub limit: usize,
}

impl ClearQuery {
    pub fn new(keywords: Vec<String>, context_window: usize, limit: usize) -> Result<Self, MemoryError> {
        let q = Self {
            keywords,
            context_window,
            limit,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.keywords.is_empty() || self.keywords.iter().any(|k| k.trim().is_empty()) {
            return Err(MemoryError::InvalidQuery("keywords must be nonempty".into()));
        }
        if self.limit < 1 {
            return Err(MemoryError::InvalidQuery("limit must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyQuery {
    pub text: String,
    pub topk: usize,
}

impl FuzzyQuery {
    pub fn new(text: impl Into<String>, topk: usize) -> Result<Self, MemoryError> {
        let q = Self { text: text.into(), topk };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.text.trim().is_empty() {
            return Err(MemoryError::InvalidQuery("query text must be nonempty".into()));
        }
        if self.topk < 1 {
            return Err(MemoryError::InvalidQuery("topk must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    Message,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub kind: HitKind,
    pub session_id: String,
    pub seq_start: u32,
    pub seq_end: u32,
    pub score: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<String>,
}

impl Hit {
    pub fn render(&self) -> String {
        match (self.kind, &self.sender, &self.receiver) {
            (HitKind::Message, Some(s), Some(r)) => {
                format!("[{}#{}] {s} to {r}: {}", self.session_id, self.seq_start, self.text)
            }
            _ => format!("[{} summary #{}-{}] {}", self.session_id, self.seq_start, self.seq_end, self.text),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
}

impl RetrievalResult {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}
