//! The human information substrate: who exists, who talks to whom, and
//! which messages each individual can see.
//!
//! Every agent in the system is bound to exactly one individual and may only
//! ever observe [`Corpus::visible_messages`] for that individual. All other
//! modules go through this boundary.

mod anonymize;
mod format;
mod graph;

pub use anonymize::{anonymize, RenameMap};
pub use format::{
    parse_messages, parse_network, parse_tasks, read_dataset, read_messages, read_network, read_tasks, write_dataset, write_messages,
    write_network, write_tasks, MESSAGES_FILE, NETWORK_FILE, TASKS_FILE,
};
pub use graph::{graph_stats, GraphStats};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown individual `{0}`")]
    UnknownIndividual(String),
    #[error("duplicate individual `{0}`")]
    DuplicateIndividual(String),
    #[error("self-loop relationship on `{0}`")]
    SelfLoop(String),
    #[error("invalid message {session}#{seq}: {msg}")]
    InvalidMessage { session: String, seq: u32, msg: String },
    #[error("invalid task `{id}`: {msg}")]
    InvalidTask { id: String, msg: String },
    #[error("empty network")]
    EmptyNetwork,
    #[error("name collision: {0}")]
    NameCollision(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub persona: Option<String>,
}

/// Undirected social graph. Edges are stored with the lexicographically
/// smaller endpoint first, so adjacency is symmetric by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialNetwork {
    individuals: BTreeMap<String, Individual>,
    edges: BTreeSet<(String, String)>,
}

fn edge_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl SocialNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_individual(&mut self, id: &str, persona: Option<String>) -> Result<(), CorpusError> {
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(CorpusError::Parse {
                line: 0,
                msg: format!("invalid individual id `{id}`"),
            });
        }
        if self.individuals.contains_key(id) {
            return Err(CorpusError::DuplicateIndividual(id.to_string()));
        }
        self.individuals.insert(
            id.to_string(),
            Individual {
                id: id.to_string(),
                persona,
            },
        );
        Ok(())
    }

    /// Adds an undirected relationship. Adding an existing edge is a no-op.
    pub fn add_edge(&mut self, a: &str, b: &str) -> Result<(), CorpusError> {
        if a == b {
            return Err(CorpusError::SelfLoop(a.to_string()));
        }
        for id in [a, b] {
            if !self.contains(id) {
                return Err(CorpusError::UnknownIndividual(id.to_string()));
            }
        }
        self.edges.insert(edge_key(a, b));
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.individuals.contains_key(id)
    }

    pub fn individual(&self, id: &str) -> Option<&Individual> {
        self.individuals.get(id)
    }

    pub fn individuals(&self) -> impl Iterator<Item = &Individual> {
        self.individuals.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.individuals.keys().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn node_count(&self) -> usize {
        self.individuals.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn are_adjacent(&self, a: &str, b: &str) -> bool {
        a != b && self.edges.contains(&edge_key(a, b))
    }

    pub fn neighbors(&self, id: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == id {
                    Some(b.as_str())
                } else if b == id {
                    Some(a.as_str())
                } else {
                    None
                }
            })
            .collect()
    }

    /// Adds a relationship for every sender/receiver pair that exchanged at
    /// least one message.
    pub fn derive_edges_from(&mut self, corpus: &Corpus) -> Result<(), CorpusError> {
        for m in corpus.messages() {
            self.add_edge(&m.sender, &m.receiver)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub session_id: String,
    pub seq: u32,
    pub sender: String,
    pub receiver: String,
    pub text: String,
}

impl Message {
    pub fn involves(&self, who: &str) -> bool {
        self.sender == who || self.receiver == who
    }

    pub fn key(&self) -> MessageRef {
        MessageRef {
            session_id: self.session_id.clone(),
            seq: self.seq,
        }
    }
}

/// Stable reference to a message by its position in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageRef {
    pub session_id: String,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session<'a> {
    pub id: &'a str,
    pub messages: &'a [Message],
}

/// Immutable message store, ordered by `(session_id, seq)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    messages: Vec<Message>,
}

impl Corpus {
    /// Builds a corpus, checking message invariants against `network`.
    pub fn new(mut messages: Vec<Message>, network: &SocialNetwork) -> Result<Self, CorpusError> {
        messages.sort_by(|a, b| (&a.session_id, a.seq).cmp(&(&b.session_id, b.seq)));
        let mut expected: Option<(&str, u32)> = None;
        for m in &messages {
            let bad = |msg: &str| CorpusError::InvalidMessage {
                session: m.session_id.clone(),
                seq: m.seq,
                msg: msg.to_string(),
            };
            if m.sender == m.receiver {
                return Err(bad("sender equals receiver"));
            }
            for who in [&m.sender, &m.receiver] {
                if !network.contains(who) {
                    return Err(CorpusError::InvalidMessage {
                        session: m.session_id.clone(),
                        seq: m.seq,
                        msg: format!("unknown individual `{who}`"),
                    });
                }
            }
            let want = match expected {
                Some((sid, next)) if sid == m.session_id => next,
                _ => 0,
            };
            if m.seq != want {
                return Err(bad(&format!("sequence numbers must be dense from 0 (expected {want})")));
            }
            expected = Some((m.session_id.as_str(), m.seq + 1));
        }
        Ok(Self { messages })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn sessions(&self) -> Vec<Session<'_>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.messages.len() {
            if i == self.messages.len() || self.messages[i].session_id != self.messages[start].session_id {
                out.push(Session {
                    id: &self.messages[start].session_id,
                    messages: &self.messages[start..i],
                });
                start = i;
            }
        }
        out
    }

    pub fn get(&self, r: &MessageRef) -> Option<&Message> {
        self.messages
            .binary_search_by(|m| (m.session_id.as_str(), m.seq).cmp(&(r.session_id.as_str(), r.seq)))
            .ok()
            .map(|i| &self.messages[i])
    }

    /// Messages where `who` is sender or receiver, in `(session_id, seq)` order.
    pub fn visible_messages(&self, network: &SocialNetwork, who: &str) -> Result<Vec<&Message>, CorpusError> {
        if !network.contains(who) {
            return Err(CorpusError::UnknownIndividual(who.to_string()));
        }
        Ok(self.messages.iter().filter(|m| m.involves(who)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    CountAccuracy,
    F1,
    IntervalIou,
}

/// Half-open time interval in minutes since midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: u32,
    pub end: u32,
}

impl TimeInterval {
    pub fn new(start: u32, end: u32) -> Self {
        Self { start, end }
    }

    pub fn duration(&self) -> u32 {
        self.end.saturating_sub(self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum GroundTruth {
    Text(String),
    Count(u64),
    Names(BTreeSet<String>),
    Intervals(Vec<TimeInterval>),
}

impl GroundTruth {
    pub fn expected_metric(&self) -> MetricKind {
        match self {
            GroundTruth::Text(_) => MetricKind::Accuracy,
            GroundTruth::Count(_) => MetricKind::CountAccuracy,
            GroundTruth::Names(_) => MetricKind::F1,
            GroundTruth::Intervals(_) => MetricKind::IntervalIou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub question: String,
    pub ground_truth: GroundTruth,
    pub initiators: (String, String),
    pub metric_kind: MetricKind,
    pub dataset_tag: String,
    /// Canonical answer names used to map free-text predictions onto a set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answer_vocabulary: Vec<String>,
}

impl TaskInstance {
    pub fn validate(&self, network: &SocialNetwork) -> Result<(), CorpusError> {
        let bad = |msg: String| CorpusError::InvalidTask { id: self.id.clone(), msg };
        for who in [&self.initiators.0, &self.initiators.1] {
            if !network.contains(who) {
                return Err(bad(format!("unknown individual `{who}`")));
            }
        }
        if self.initiators.0 == self.initiators.1 {
            return Err(bad("initiators must differ".into()));
        }
        if self.ground_truth.expected_metric() != self.metric_kind {
            return Err(bad(format!("metric {:?} does not match ground truth variant", self.metric_kind)));
        }
        Ok(())
    }
}

/// A validated network, its corpus and the tasks posed over it.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub network: SocialNetwork,
    pub corpus: Corpus,
    pub tasks: Vec<TaskInstance>,
}
