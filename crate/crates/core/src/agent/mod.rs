//! The observe-think-act turn loop between two agents, with recursive
//! sub-communications and run orchestration for one task.
//!
//! Turn `i` (1-based) belongs to the first agent when `i` is odd and to the
//! second when it is even. A communication ends when both agents' latest
//! intents are `conclude`, or at `max_turns` utterances.

mod audit;
mod engine;
mod thought;

pub use audit::{audit_trajectory, Violation};
pub use engine::{Engine, MemoryBank, OwnerMemory};
pub use thought::{parse_thought, Intent, QueryDefaults, Thought};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, EmbeddingProvider, PromptTemplates};
use crate::corpus::CorpusError;
use crate::infonav::{ConsensusResult, FakeSolvedDetector, InfoNavError, Plan};
use crate::memory::{ClearQuery, FuzzyQuery, MemoryError, Summarizer};
use crate::trajectory::Trajectory;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent {agent} called out of turn (turn {turn})")]
    OutOfTurn { agent: usize, turn: u32 },
    #[error("communication already terminated")]
    Terminated,
    #[error("`{target}` is not a neighbor of `{owner}`")]
    NotNeighbor { owner: String, target: String },
    #[error("recursion depth limit {limit} reached")]
    DepthExceeded { limit: u32 },
    #[error("recursion is disabled")]
    RecursionDisabled,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    InfoNav(#[from] InfoNavError),
}

/// Component switches; `true` means the component is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub infonav: bool,
    pub clear_memory: bool,
    pub fuzzy_memory: bool,
    pub recursion: bool,
    pub privacy_prompt: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            infonav: true,
            clear_memory: true,
            fuzzy_memory: true,
            recursion: true,
            privacy_prompt: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_turns: u32,
    pub depth_limit: u32,
    pub flags: AblationFlags,
    pub default_context_window: usize,
    pub default_limit: usize,
    pub default_topk: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_turns: 10,
            depth_limit: 1,
            flags: AblationFlags::default(),
            default_context_window: 1,
            default_limit: 10,
            default_topk: 3,
        }
    }
}

impl AgentConfig {
    pub fn query_defaults(&self) -> QueryDefaults {
        QueryDefaults {
            context_window: self.default_context_window,
            limit: self.default_limit,
            topk: self.default_topk,
        }
    }
}

/// Everything an agent needs to talk to models.
#[derive(Clone)]
pub struct Backends {
    pub chat: Arc<dyn ChatBackend>,
    pub embedding: Arc<dyn EmbeddingProvider>,
    pub summarizer: Arc<dyn Summarizer>,
    pub templates: PromptTemplates,
    pub detector: FakeSolvedDetector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryParam {
    ContextWindow,
    Limit,
    KeywordCount,
    Topk,
    QueryTextLength,
}

impl QueryParam {
    pub const ALL: [QueryParam; 5] = [
        QueryParam::ContextWindow,
        QueryParam::Limit,
        QueryParam::KeywordCount,
        QueryParam::Topk,
        QueryParam::QueryTextLength,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    Unchanged,
    /// Same size, different contents.
    Replaced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamChange {
    pub turn: u32,
    pub parameter: QueryParam,
    pub direction: Direction,
    pub old: usize,
    pub new: usize,
}

fn numeric_direction(old: usize, new: usize) -> Direction {
    match new.cmp(&old) {
        std::cmp::Ordering::Greater => Direction::Increase,
        std::cmp::Ordering::Less => Direction::Decrease,
        std::cmp::Ordering::Equal => Direction::Unchanged,
    }
}

fn sized_direction(old: usize, new: usize, same_contents: bool) -> Direction {
    match numeric_direction(old, new) {
        Direction::Unchanged if !same_contents => Direction::Replaced,
        d => d,
    }
}

pub fn clear_param_changes(turn: u32, old: &ClearQuery, new: &ClearQuery) -> Vec<ParamChange> {
    let mut old_k: Vec<String> = old.keywords.iter().map(|k| k.to_lowercase()).collect();
    let mut new_k: Vec<String> = new.keywords.iter().map(|k| k.to_lowercase()).collect();
    old_k.sort();
    old_k.dedup();
    new_k.sort();
    new_k.dedup();
    vec![
        ParamChange {
            turn,
            parameter: QueryParam::ContextWindow,
            direction: numeric_direction(old.context_window, new.context_window),
            old: old.context_window,
            new: new.context_window,
        },
        ParamChange {
            turn,
            parameter: QueryParam::Limit,
            direction: numeric_direction(old.limit, new.limit),
            old: old.limit,
            new: new.limit,
        },
        ParamChange {
            turn,
            parameter: QueryParam::KeywordCount,
            direction: sized_direction(old_k.len(), new_k.len(), old_k == new_k),
            old: old_k.len(),
            new: new_k.len(),
        },
    ]
}

pub fn fuzzy_param_changes(turn: u32, old: &FuzzyQuery, new: &FuzzyQuery) -> Vec<ParamChange> {
    let (lo, ln) = (old.text.chars().count(), new.text.chars().count());
    vec![
        ParamChange {
            turn,
            parameter: QueryParam::Topk,
            direction: numeric_direction(old.topk, new.topk),
            old: old.topk,
            new: new.topk,
        },
        ParamChange {
            turn,
            parameter: QueryParam::QueryTextLength,
            direction: sized_direction(lo, ln, old.text == new.text),
            old: lo,
            new: ln,
        },
    ]
}

/// Reference to a retrieval hit attached to an utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub store: String,
    pub session_id: String,
    pub seq_start: u32,
    pub seq_end: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub turn: u32,
    pub text: String,
    pub intent: Intent,
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub owner: String,
    /// `None` when planning is ablated.
    pub plan: Option<Plan>,
    pub memory: Arc<OwnerMemory>,
    pub clear_query: Option<ClearQuery>,
    pub fuzzy_query: Option<FuzzyQuery>,
    pub param_log: Vec<ParamChange>,
    /// Conclusions of child communications not yet observed.
    pub findings: Vec<String>,
    pub concluded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Answered,
    TurnLimit,
    Error,
}

#[derive(Debug, Clone)]
pub struct Communication {
    /// Path id: `0` for the root, `0.1`, `0.2`, ... for children.
    pub id: String,
    pub question: String,
    pub agents: [AgentState; 2],
    pub utterances: Vec<Utterance>,
    pub children: Vec<Communication>,
    pub max_turns: u32,
    pub depth: u32,
    pub termination: Option<Termination>,
    pub consensus: Option<ConsensusResult>,
    pub answer: Option<String>,
}

impl Communication {
    pub fn next_turn(&self) -> u32 {
        self.utterances.len() as u32 + 1
    }

    /// Index of the agent that speaks at `turn`.
    pub fn speaker_for(turn: u32) -> usize {
        if turn % 2 == 1 {
            0
        } else {
            1
        }
    }

    pub fn is_terminated(&self) -> bool {
        self.termination.is_some()
    }

    pub fn transcript(&self) -> String {
        if self.utterances.is_empty() {
            return "(no messages yet)".into();
        }
        self.utterances
            .iter()
            .map(|u| format!("Turn {} - agent of {}: {}", u.turn, u.speaker, u.text))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn descendant_count(&self) -> usize {
        self.children.iter().map(|c| 1 + c.descendant_count()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub plan_text: String,
    pub transcript: String,
    pub findings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub task_id: String,
    pub answer: Option<String>,
    pub consensus: Option<ConsensusResult>,
    pub termination: Termination,
    pub error: Option<String>,
    pub trajectory: Trajectory,
    pub utterances: usize,
    pub child_communications: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity() {
        assert_eq!(Communication::speaker_for(1), 0);
        assert_eq!(Communication::speaker_for(2), 1);
        assert_eq!(Communication::speaker_for(5), 0);
    }

    #[test]
    fn param_directions() {
        let a = ClearQuery::new(vec!["x".into(), "y".into()], 1, 5).unwrap();
        let b = ClearQuery::new(vec!["x".into(), "z".into()], 0, 10).unwrap();
        let ch = clear_param_changes(2, &a, &b);
        assert_eq!(ch[0].direction, Direction::Decrease);
        assert_eq!(ch[1].direction, Direction::Increase);
        assert_eq!(ch[2].direction, Direction::Replaced);
        let ch = clear_param_changes(2, &a, &a);
        assert!(ch.iter().all(|c| c.direction == Direction::Unchanged));
        let f1 = FuzzyQuery::new("abc", 3).unwrap();
        let f2 = FuzzyQuery::new("abcd", 3).unwrap();
        let ch = fuzzy_param_changes(3, &f1, &f2);
        assert_eq!(ch[0].direction, Direction::Unchanged);
        assert_eq!(ch[1].direction, Direction::Increase);
    }
}
