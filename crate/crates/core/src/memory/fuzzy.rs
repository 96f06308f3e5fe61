use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::embedding::cosine;
use super::{FuzzyQuery, Hit, HitKind, MemoryError, RetrievalResult};
use crate::backend::{leading_tokens, BackendError, ChatBackend, ChatMessage, EmbeddingProvider, PromptTemplates, EXTRACTIVE_TOKENS};
use crate::corpus::{Corpus, Message, SocialNetwork};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub text: String,
    pub extractive: bool,
    pub seq_start: u32,
    pub seq_end: u32,
}

pub trait Summarizer: Send + Sync {
    /// Summarizes the owner-visible messages of one session.
    fn summarize(&self, session_id: &str, messages: &[&Message]) -> Result<String, BackendError>;

    fn is_extractive(&self) -> bool {
        false
    }
}

/// First 64 whitespace tokens of the session's concatenated texts.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExtractiveSummarizer;

impl Summarizer for ExtractiveSummarizer {
    fn summarize(&self, _session_id: &str, messages: &[&Message]) -> Result<String, BackendError> {
        let joined = messages.iter().map(|m| m.text.as_str()).collect::<Vec<_>>().join(" ");
        Ok(leading_tokens(&joined, EXTRACTIVE_TOKENS))
    }

    fn is_extractive(&self) -> bool {
        true
    }
}

pub struct BackendSummarizer {
    pub backend: Arc<dyn ChatBackend>,
    pub templates: PromptTemplates,
}

impl Summarizer for BackendSummarizer {
    fn summarize(&self, _session_id: &str, messages: &[&Message]) -> Result<String, BackendError> {
        let session = messages
            .iter()
            .map(|m| format!("{} to {}: {}", m.sender, m.receiver, m.text))
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = self.templates.render("summarize", &[("session", &session)])?;
        self.backend.chat(&[ChatMessage::user(prompt)])
    }
}

/// One summary per session the owner takes part in, built from the owner's
/// visible messages only.
pub fn summarize_sessions(
    owner: &str,
    network: &SocialNetwork,
    corpus: &Corpus,
    summarizer: &dyn Summarizer,
) -> Result<Vec<SessionSummary>, MemoryError> {
    let visible = corpus.visible_messages(network, owner)?;
    let mut out = Vec::new();
    let mut start = 0;
    while start < visible.len() {
        let sid = &visible[start].session_id;
        let end = visible[start..]
            .iter()
            .position(|m| &m.session_id != sid)
            .map_or(visible.len(), |p| start + p);
        let chunk = &visible[start..end];
        let text = summarizer.summarize(sid, chunk).map_err(|source| MemoryError::Summary {
            session: sid.clone(),
            source,
        })?;
        out.push(SessionSummary {
            session_id: sid.clone(),
            text,
            extractive: summarizer.is_extractive(),
            seq_start: chunk[0].seq,
            seq_end: chunk[chunk.len() - 1].seq,
        });
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyEntry {
    pub summary: SessionSummary,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyMemory {
    owner: String,
    provider_id: String,
    dim: Option<usize>,
    entries: Vec<FuzzyEntry>,
}

impl FuzzyMemory {
    pub fn build(
        owner: &str,
        network: &SocialNetwork,
        corpus: &Corpus,
        summarizer: &dyn Summarizer,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self, MemoryError> {
        let summaries = summarize_sessions(owner, network, corpus, summarizer)?;
        Self::from_summaries(owner, summaries, provider)
    }

    pub fn from_summaries(owner: &str, summaries: Vec<SessionSummary>, provider: &dyn EmbeddingProvider) -> Result<Self, MemoryError> {
        let texts: Vec<String> = summaries.iter().map(|s| s.text.clone()).collect();
        let vectors = if texts.is_empty() { Vec::new() } else { provider.embed(&texts)? };
        if vectors.len() != summaries.len() {
            return Err(BackendError::Malformed("embedding count differs from input count".into()).into());
        }
        let dim = vectors.first().map(Vec::len);
        for v in &vectors {
            if Some(v.len()) != dim {
                return Err(BackendError::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    got: v.len(),
                }
                .into());
            }
        }
        let entries = summaries
            .into_iter()
            .zip(vectors)
            .map(|(summary, embedding)| FuzzyEntry { summary, embedding })
            .collect();
        Ok(Self {
            owner: owner.to_string(),
            provider_id: provider.id(),
            dim,
            entries,
        })
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn entries(&self) -> &[FuzzyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exhaustive cosine scan; ties go to the smaller session id.
    pub fn query(&self, q: &FuzzyQuery, provider: &dyn EmbeddingProvider) -> Result<RetrievalResult, MemoryError> {
        q.validate()?;
        if self.entries.is_empty() {
            return Ok(RetrievalResult::default());
        }
        let query = provider
            .embed(std::slice::from_ref(&q.text))?
            .pop()
            .ok_or_else(|| BackendError::Malformed("no query embedding".into()))?;
        let dim = self.dim.unwrap_or(0);
        if query.len() != dim {
            return Err(BackendError::DimensionMismatch {
                expected: dim,
                got: query.len(),
            }
            .into());
        }
        let mut scored: Vec<(f64, &FuzzyEntry)> = self.entries.iter().map(|e| (cosine(&query, &e.embedding), e)).collect();
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.summary.session_id.cmp(&b.1.summary.session_id))
        });
        let hits = scored
            .into_iter()
            .take(q.topk)
            .map(|(score, e)| Hit {
                kind: HitKind::Summary,
                session_id: e.summary.session_id.clone(),
                seq_start: e.summary.seq_start,
                seq_end: e.summary.seq_end,
                score,
                text: e.summary.text.clone(),
                sender: None,
                receiver: None,
            })
            .collect();
        Ok(RetrievalResult { hits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ReplayScript, ScriptEntry, ScriptedBackend};
    use crate::corpus::{parse_messages, parse_network};
    use crate::memory::HashEmbedding;

    fn fixture() -> (SocialNetwork, Corpus) {
        let net = parse_network("person a\nperson b\nperson c\n").unwrap();
        let corpus = Corpus::new(
            parse_messages(
                "s1\t0\ta\tb\twe went fishing at the lake\n\
                 s1\t1\tb\ta\tcaught two trout\n\
                 s2\t0\ta\tc\tdinner at seven tonight\n\
                 s3\t0\tb\tc\tprivate gossip about a\n",
            )
            .unwrap(),
            &net,
        )
        .unwrap();
        (net, corpus)
    }

    #[test]
    fn extractive_summaries_per_session() {
        let (net, corpus) = fixture();
        let s = summarize_sessions("a", &net, &corpus, &ExtractiveSummarizer).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "we went fishing at the lake caught two trout");
        assert!(s[0].extractive);
        assert_eq!((s[0].seq_start, s[0].seq_end), (0, 1));
        let mut net2 = net.clone();
        net2.add_individual("z", None).unwrap();
        assert!(summarize_sessions("z", &net2, &corpus, &ExtractiveSummarizer).unwrap().is_empty());
    }

    #[test]
    fn scripted_summaries_replay() {
        let (net, corpus) = fixture();
        let script = ReplayScript::new(vec![
            ScriptEntry {
                cue: "fishing".into(),
                response: "a and b went fishing".into(),
            },
            ScriptEntry {
                cue: "dinner".into(),
                response: "dinner plans at seven".into(),
            },
        ]);
        let s = BackendSummarizer {
            backend: Arc::new(ScriptedBackend::new(script)),
            templates: PromptTemplates::default(),
        };
        let out = summarize_sessions("a", &net, &corpus, &s).unwrap();
        let texts: Vec<_> = out.iter().map(|x| x.text.as_str()).collect();
        assert_eq!(texts, ["a and b went fishing", "dinner plans at seven"]);
        assert!(!out[0].extractive);
    }

    #[test]
    fn summary_failure_names_session() {
        let (net, corpus) = fixture();
        let s = BackendSummarizer {
            backend: Arc::new(ScriptedBackend::new(ReplayScript::default())),
            templates: PromptTemplates::default(),
        };
        let err = summarize_sessions("a", &net, &corpus, &s).unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
    }

    #[test]
    fn self_query_scores_one() {
        let (net, corpus) = fixture();
        let p = HashEmbedding::new(0);
        let mem = FuzzyMemory::build("a", &net, &corpus, &ExtractiveSummarizer, &p).unwrap();
        let q = FuzzyQuery::new("dinner at seven tonight", 1).unwrap();
        let r = mem.query(&q, &p).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].session_id, "s2");
        assert!((r.hits[0].score - 1.0).abs() < 1e-6);
        let all = mem.query(&FuzzyQuery::new("x", 10).unwrap(), &p).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all.hits[0].score >= all.hits[1].score);
    }

    #[test]
    fn fuzzy_isolation() {
        let (net, corpus) = fixture();
        let p = HashEmbedding::new(0);
        let mem = FuzzyMemory::build("a", &net, &corpus, &ExtractiveSummarizer, &p).unwrap();
        let r = mem.query(&FuzzyQuery::new("gossip", 5).unwrap(), &p).unwrap();
        assert!(r.hits.iter().all(|h| h.session_id != "s3"));
    }

    #[test]
    fn dimension_mismatch_on_query() {
        struct Three;
        impl EmbeddingProvider for Three {
            fn id(&self) -> String {
                "three".into()
            }
            fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
                Ok(texts.iter().map(|_| vec![1.0, 0.0, 0.0]).collect())
            }
        }
        let (net, corpus) = fixture();
        let mem = FuzzyMemory::build("a", &net, &corpus, &ExtractiveSummarizer, &HashEmbedding::new(0)).unwrap();
        assert!(mem.query(&FuzzyQuery::new("x", 1).unwrap(), &Three).is_err());
    }
}
