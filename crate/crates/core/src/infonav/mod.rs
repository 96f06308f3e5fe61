//! Explicit plan tracking for agent communication.
//!
//! A [`Plan`] lists the pieces of information (slots) needed to answer a
//! question. Slots start `Unknown` and are filled as the dialogue progresses.
//! After the dialogue both agents' plans are merged by [`consensus`], which
//! drops conflicting values.

mod consensus;
mod render;
mod stats;

pub use consensus::{consensus, normalize_description, normalize_value, Conflict, ConsensusResult};
pub use render::{parse_rendered, parse_slot_lines, render_plan, WireSlot};
pub use stats::{trajectory_stats, TaskTrajectory, TrajectoryStats};

use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatMessage, PromptTemplates};

#[derive(Debug, Error)]
pub enum InfoNavError {
    #[error("planning response contains no slot lines: {raw:?}")]
    NoSlots { raw: String },
    #[error("slot index {index} out of range for a plan of {len} slots")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("filled value for slot {0} is empty")]
    EmptyValue(usize),
    #[error("slot description is empty")]
    EmptyDescription,
    #[error("update turn {turn} precedes the last recorded turn {last}")]
    TurnRegression { turn: u32, last: u32 },
    #[error("malformed plan text at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("no trajectories to summarize")]
    EmptyInput,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    #[default]
    Rationale,
    /// Progress markers for the task itself; same mechanics as rationales.
    State,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum SlotStatus {
    Unknown,
    Filled(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationaleSlot {
    pub description: String,
    #[serde(default)]
    pub kind: SlotKind,
    pub status: SlotStatus,
}

impl RationaleSlot {
    pub fn unknown(description: impl Into<String>) -> Self {
        Self {
            description: description.into(),
            kind: SlotKind::Rationale,
            status: SlotStatus::Unknown,
        }
    }

    pub fn value(&self) -> Option<&str> {
        match &self.status {
            SlotStatus::Filled(v) => Some(v),
            SlotStatus::Unknown => None,
        }
    }

    pub fn is_filled(&self) -> bool {
        matches!(self.status, SlotStatus::Filled(_))
    }
}

/// One slot change inside one plan update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub turn: u32,
    /// 1-based ordinal of the update that made the change.
    pub update: u32,
    pub slot: usize,
    pub old: Option<String>,
    pub new: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotUpdate<'a> {
    pub index: usize,
    pub value: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub question: String,
    pub slots: Vec<RationaleSlot>,
    #[serde(default)]
    pub history: Vec<Revision>,
    #[serde(default)]
    pub updates: u32,
}

impl Plan {
    /// A plan with every slot `Unknown`.
    pub fn new(question: impl Into<String>, descriptions: Vec<(String, SlotKind)>) -> Result<Self, InfoNavError> {
        if descriptions.is_empty() {
            return Err(InfoNavError::NoSlots { raw: String::new() });
        }
        let slots = descriptions
            .into_iter()
            .map(|(description, kind)| {
                if description.trim().is_empty() {
                    Err(InfoNavError::EmptyDescription)
                } else {
                    Ok(RationaleSlot {
                        description,
                        kind,
                        status: SlotStatus::Unknown,
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            question: question.into(),
            slots,
            history: Vec::new(),
            updates: 0,
        })
    }

    /// Builds a plan from a planning response in the slot wire format. Any
    /// values the backend may have filled in are discarded.
    pub fn from_response(question: &str, response: &str) -> Result<Self, InfoNavError> {
        let slots = parse_slot_lines(response);
        if slots.is_empty() {
            return Err(InfoNavError::NoSlots { raw: response.to_string() });
        }
        Self::new(question, slots.into_iter().map(|s| (s.description, s.kind)).collect())
    }

    pub fn filled_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_filled()).count()
    }

    pub fn last_turn(&self) -> Option<u32> {
        self.history.last().map(|r| r.turn)
    }

    /// Index of the slot whose normalized description equals `description`.
    pub fn find(&self, description: &str) -> Option<usize> {
        let key = normalize_description(description);
        self.slots.iter().position(|s| normalize_description(&s.description) == key)
    }

    /// Fills (or revises) the listed slots; unlisted slots are unchanged.
    pub fn apply_update(&self, update: &[SlotUpdate<'_>], turn: u32) -> Result<Plan, InfoNavError> {
        for u in update {
            if u.index >= self.slots.len() {
                return Err(InfoNavError::IndexOutOfRange {
                    index: u.index,
                    len: self.slots.len(),
                });
            }
            if u.value.trim().is_empty() {
                return Err(InfoNavError::EmptyValue(u.index));
            }
        }
        let mut next = self.clone();
        if update.is_empty() {
            return Ok(next);
        }
        if let Some(last) = self.last_turn() {
            if turn < last {
                return Err(InfoNavError::TurnRegression { turn, last });
            }
        }
        let ordinal = self.updates + 1;
        let mut changed = false;
        for u in update {
            let slot = &mut next.slots[u.index];
            let old = slot.value().map(str::to_string);
            if old.as_deref() == Some(u.value) {
                continue;
            }
            slot.status = SlotStatus::Filled(u.value.to_string());
            next.history.push(Revision {
                turn,
                update: ordinal,
                slot: u.index,
                old,
                new: u.value.to_string(),
            });
            changed = true;
        }
        if changed {
            next.updates = ordinal;
        }
        Ok(next)
    }

    /// Adds a new `Unknown` slot at the end of the plan.
    pub fn append_slot(&self, description: &str, kind: SlotKind) -> Result<Plan, InfoNavError> {
        if description.trim().is_empty() {
            return Err(InfoNavError::EmptyDescription);
        }
        let mut next = self.clone();
        next.slots.push(RationaleSlot {
            description: description.to_string(),
            kind,
            status: SlotStatus::Unknown,
        });
        Ok(next)
    }
}

/// Asks the backend for a plan and parses it.
pub fn new_plan(
    question: &str,
    backend: &Arc<dyn ChatBackend>,
    templates: &PromptTemplates,
    header: &[(&str, &str)],
) -> Result<(Plan, String), InfoNavError> {
    let mut vars = header.to_vec();
    vars.push(("question", question));
    let prompt = templates.render("plan", &vars)?;
    let response = backend.chat(&[ChatMessage::user(prompt.clone())])?;
    Ok((Plan::from_response(question, &response)?, prompt))
}

pub const DEFAULT_FAKE_PATTERNS: &[&str] = &["unknown", "not known", "n/a", "tbd", "to be determined", "no information"];

/// Recognizes slots that were marked filled with a value that still says
/// the information is missing.
#[derive(Debug, Clone)]
pub struct FakeSolvedDetector {
    patterns: Vec<String>,
    matcher: Regex,
}

impl Default for FakeSolvedDetector {
    fn default() -> Self {
        Self::new(DEFAULT_FAKE_PATTERNS.iter().map(|s| s.to_string()).collect())
    }
}

impl FakeSolvedDetector {
    pub fn new(patterns: Vec<String>) -> Self {
        let alternation = patterns
            .iter()
            .map(|p| regex::escape(&p.to_lowercase()))
            .collect::<Vec<_>>()
            .join("|");
        let matcher = if alternation.is_empty() {
            Regex::new(r"[^\s\S]").unwrap()
        } else {
            Regex::new(&format!(r"(?:^|[^\p{{L}}\p{{N}}])(?:{alternation})(?:[^\p{{L}}\p{{N}}]|$)")).unwrap()
        };
        Self { patterns, matcher }
    }

    pub fn with_extra(mut self, extra: &[&str]) -> Self {
        self.patterns.extend(extra.iter().map(|s| s.to_string()));
        Self::new(self.patterns)
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn is_fake_value(&self, value: &str) -> bool {
        self.matcher.is_match(&value.to_lowercase())
    }

    /// True iff the slot is filled and its value matches an unknown marker.
    pub fn detect(&self, slot: &RationaleSlot) -> bool {
        slot.value().is_some_and(|v| self.is_fake_value(v))
    }
}

pub fn detect_fake_solved(slot: &RationaleSlot) -> bool {
    FakeSolvedDetector::default().detect(slot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan3() -> Plan {
        Plan::new(
            "q",
            vec![
                ("a".into(), SlotKind::Rationale),
                ("b".into(), SlotKind::Rationale),
                ("c".into(), SlotKind::State),
            ],
        )
        .unwrap()
    }

    fn filled(v: &str) -> RationaleSlot {
        RationaleSlot {
            description: "x".into(),
            kind: SlotKind::Rationale,
            status: SlotStatus::Filled(v.into()),
        }
    }

    #[test]
    fn new_plan_is_all_unknown() {
        let p = Plan::from_response(
            "q",
            "Sure:\n- [UNKNOWN] Alice's longest activity\n- [KNOWN: 3h] Bob's longest activity\n* [UNKNOWN] (state) compare\n",
        )
        .unwrap();
        assert_eq!(p.slots.len(), 3);
        assert_eq!(p.filled_count(), 0);
        assert_eq!(p.slots[2].kind, SlotKind::State);
        assert!(matches!(Plan::from_response("q", "I don't know"), Err(InfoNavError::NoSlots { raw }) if raw == "I don't know"));
    }

    #[test]
    fn fill_one_slot() {
        let p = plan3().apply_update(&[SlotUpdate { index: 0, value: "7pm" }], 1).unwrap();
        assert_eq!(p.filled_count(), 1);
        assert_eq!(p.slots.iter().filter(|s| !s.is_filled()).count(), 2);
    }

    #[test]
    fn empty_update_is_identity() {
        let p = plan3();
        assert_eq!(p.apply_update(&[], 4).unwrap(), p);
    }

    #[test]
    fn revisions_keep_history() {
        let p = plan3()
            .apply_update(&[SlotUpdate { index: 0, value: "x" }], 1)
            .unwrap()
            .apply_update(&[SlotUpdate { index: 0, value: "y" }, SlotUpdate { index: 1, value: "z" }], 3)
            .unwrap();
        assert_eq!(p.history.len(), 3);
        assert_eq!(p.history[1].old.as_deref(), Some("x"));
        assert_eq!(p.history[1].update, 2);
        assert_eq!(p.updates, 2);
        assert_eq!(p.filled_count(), 2);
    }

    #[test]
    fn update_errors() {
        let p = plan3();
        assert!(matches!(
            p.apply_update(&[SlotUpdate { index: 3, value: "v" }], 1),
            Err(InfoNavError::IndexOutOfRange { index: 3, len: 3 })
        ));
        assert!(p.apply_update(&[SlotUpdate { index: 0, value: " " }], 1).is_err());
        let p = p.apply_update(&[SlotUpdate { index: 0, value: "v" }], 5).unwrap();
        assert!(matches!(
            p.apply_update(&[SlotUpdate { index: 1, value: "v" }], 2),
            Err(InfoNavError::TurnRegression { .. })
        ));
    }

    #[test]
    fn append_slot_adds_unknown() {
        let p = plan3().append_slot("d", SlotKind::State).unwrap();
        assert_eq!(p.slots.len(), 4);
        assert!(!p.slots[3].is_filled());
        assert_eq!(p.find("  D "), Some(3));
    }

    #[test]
    fn fake_solved_patterns() {
        assert!(detect_fake_solved(&filled("unknown")));
        assert!(detect_fake_solved(&filled("Unknown.")));
        assert!(detect_fake_solved(&filled("the schedule is not known yet")));
        assert!(detect_fake_solved(&filled("N/A")));
        assert!(!detect_fake_solved(&filled("7pm–9pm cooking class")));
        assert!(!detect_fake_solved(&filled("tbdx")));
        assert!(!detect_fake_solved(&RationaleSlot::unknown("x")));
        let d = FakeSolvedDetector::default().with_extra(&["pending"]);
        assert!(d.detect(&filled("still pending")));
    }
}
