//! Post-hoc privacy audit of a trajectory.
//!
//! Every prompt sent on behalf of an agent is stripped of the segments that
//! were legitimately shared (transcript, plan, findings, consensus) and then
//! searched for verbatim texts of messages the agent cannot see. Texts the
//! agent also sees in its own messages are not leaks. Retrieval hits must
//! also point only into visible messages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MessageRef};
use crate::memory::{Hit, HitKind};
use crate::trajectory::{RecordKind, Trajectory};

/// Messages shorter than this are too generic ("ok", "see you") to count as
/// evidence of a leak.
pub const MIN_LEAK_CHARS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Index of the offending record in the trajectory.
    pub record: usize,
    pub agent: String,
    pub session_id: String,
    pub seq: u32,
    pub reason: String,
}

fn strip_shared(text: &str, shared: &[String]) -> String {
    let mut sorted: Vec<&String> = shared.iter().filter(|s| !s.is_empty()).collect();
    sorted.sort_by_key(|s| std::cmp::Reverse(s.len()));
    let mut out = text.to_string();
    for s in sorted {
        out = out.replace(s.as_str(), "");
    }
    out
}

fn hit_violations(idx: usize, agent: &str, hit: &Hit, corpus: &Corpus) -> Vec<Violation> {
    let seqs = hit.seq_start..=hit.seq_end;
    let visible: Vec<bool> = seqs
        .clone()
        .map(|seq| {
            corpus
                .get(&MessageRef {
                    session_id: hit.session_id.clone(),
                    seq,
                })
                .is_some_and(|m| m.involves(agent))
        })
        .collect();
    let ok = match hit.kind {
        HitKind::Message => visible.iter().all(|v| *v),
        // a summary spans a session range but is built from visible messages only
        HitKind::Summary => visible.iter().any(|v| *v),
    };
    if ok {
        return Vec::new();
    }
    seqs.zip(visible)
        .filter(|(_, v)| !v)
        .map(|(seq, _)| Violation {
            record: idx,
            agent: agent.to_string(),
            session_id: hit.session_id.clone(),
            seq,
            reason: "retrieval hit outside the agent's visible messages".into(),
        })
        .collect()
}

pub fn audit_trajectory(trajectory: &Trajectory, corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut own_texts: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (idx, rec) in trajectory.records.iter().enumerate() {
        let Some(agent) = rec.agent.as_deref() else {
            continue;
        };
        if rec.kind == RecordKind::Retrieval {
            let hits: Vec<Hit> = serde_json::from_value(rec.data["hits"].clone()).unwrap_or_default();
            for h in &hits {
                out.extend(hit_violations(idx, agent, h, corpus));
            }
        }
        let Some(prompts) = rec.data.get("prompts").and_then(|p| p.as_array()) else {
            continue;
        };
        for p in prompts {
            let text = p["text"].as_str().unwrap_or_default();
            let shared: Vec<String> = serde_json::from_value(p["shared"].clone()).unwrap_or_default();
            let own = own_texts.entry(agent).or_insert_with(|| {
                corpus
                    .messages()
                    .iter()
                    .filter(|m| m.involves(agent))
                    .map(|m| m.text.clone())
                    .collect()
            });
            let private = strip_shared(&strip_shared(text, &shared), own);
            for m in corpus.messages() {
                if m.involves(agent) || m.text.chars().count() < MIN_LEAK_CHARS {
                    continue;
                }
                if private.contains(m.text.as_str()) {
                    out.push(Violation {
                        record: idx,
                        agent: agent.to_string(),
                        session_id: m.session_id.clone(),
                        seq: m.seq,
                        reason: "prompt contains an invisible message verbatim".into(),
                    });
                }
            }
        }
    }
    out
}
