//! Pairwise schedule dialogues inside each information-symmetric group.
//!
//! A multi-person activity may name its other participants only when both
//! speakers take part in it. Otherwise it is described without names.

use std::sync::Arc;

use regex::Regex;

use super::schedule::{format_slot, Assignment, PersonSchedule, ScheduleWorld};
use super::BenchError;
use crate::backend::{ChatBackend, ChatMessage};
use crate::corpus::Message;

#[derive(Clone)]
pub enum DialogueMode {
    /// Deterministic sentences, one message per fact.
    Template,
    /// Asks a chat backend to write the dialogue.
    Llm(Arc<dyn ChatBackend>),
}

impl std::fmt::Debug for DialogueMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DialogueMode::Template => f.write_str("template"),
            DialogueMode::Llm(b) => write!(f, "llm({})", b.name()),
        }
    }
}

impl DialogueMode {
    pub fn label(&self) -> &'static str {
        match self {
            DialogueMode::Template => "template",
            DialogueMode::Llm(_) => "llm",
        }
    }
}

/// Splits participants into two groups: the first half (rounded up) and the rest.
pub fn split_groups(participants: &[String]) -> [Vec<String>; 2] {
    let cut = participants.len().div_ceil(2);
    [participants[..cut].to_vec(), participants[cut..].to_vec()]
}

pub fn join_names(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn span(a: &Assignment) -> (String, String) {
    (format_slot(a.start), format_slot(a.end))
}

/// The sentence `speaker` uses to tell `listener` about one assignment.
pub fn describe(a: &Assignment, listener: &str) -> String {
    let (s, e) = span(a);
    if a.co_participants.iter().any(|c| c == listener) {
        let others: Vec<String> = a.co_participants.iter().filter(|c| *c != listener).cloned().collect();
        if others.is_empty() {
            format!("We both have {} from {s} to {e}.", a.activity)
        } else {
            format!(
                "We both have {} from {s} to {e}, together with {}.",
                a.activity,
                join_names(&others)
            )
        }
    } else if a.co_participants.is_empty() {
        format!("I have {} from {s} to {e}.", a.activity)
    } else {
        format!("I have {} from {s} to {e} with some other friends.", a.activity)
    }
}

fn msg(session: &str, seq: &mut u32, from: &str, to: &str, text: String) -> Message {
    let m = Message {
        session_id: session.into(),
        seq: *seq,
        sender: from.into(),
        receiver: to.into(),
        text,
    };
    *seq += 1;
    m
}

fn template_pair(p: &PersonSchedule, q: &PersonSchedule) -> Vec<Message> {
    let session = format!("{}-{}", p.individual, q.individual);
    let (pn, qn) = (p.individual.as_str(), q.individual.as_str());
    let mut seq = 0;
    let mut out = vec![msg(&session, &mut seq, pn, qn, format!("Hi {qn}, here is my schedule for today."))];
    if p.assignments.is_empty() {
        out.push(msg(&session, &mut seq, pn, qn, "I have nothing planned today.".into()));
    }
    for a in &p.assignments {
        out.push(msg(&session, &mut seq, pn, qn, describe(a, qn)));
    }
    out.push(msg(&session, &mut seq, qn, pn, format!("Thanks {pn}! Here is mine.")));
    // shared activities were already stated by the first speaker
    let own: Vec<&Assignment> = q
        .assignments
        .iter()
        .filter(|a| !a.co_participants.iter().any(|c| c == pn))
        .collect();
    if q.assignments.is_empty() {
        out.push(msg(&session, &mut seq, qn, pn, "I have nothing planned today.".into()));
    }
    for a in own {
        out.push(msg(&session, &mut seq, qn, pn, describe(a, pn)));
    }
    out.push(msg(&session, &mut seq, pn, qn, "Got it, thanks!".into()));
    out
}

fn fact_lines(s: &PersonSchedule, listener: &str) -> String {
    if s.assignments.is_empty() {
        return format!("- {}: nothing planned", s.individual);
    }
    s.assignments
        .iter()
        .map(|a| {
            let (st, en) = span(a);
            let who = if a.co_participants.iter().any(|c| c == listener) {
                format!(" (shared; may mention {})", join_names(&a.co_participants))
            } else if a.co_participants.is_empty() {
                String::new()
            } else {
                " (do not name the other participants)".into()
            };
            format!("- {}: {} from {st} to {en}{who}", s.individual, a.activity)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Splits `{a} to {b}: text` lines into messages; other lines are ignored.
pub fn split_dialogue(session: &str, text: &str, a: &str, b: &str) -> Vec<Message> {
    let re = Regex::new(r"^\s*(\S+) to (\S+):\s*(.+?)\s*$").expect("valid regex");
    let mut seq = 0;
    let mut out = Vec::new();
    for line in text.lines() {
        let Some(c) = re.captures(line) else {
            continue;
        };
        let (from, to) = (&c[1], &c[2]);
        if (from, to) == (a, b) || (from, to) == (b, a) {
            out.push(msg(session, &mut seq, from, to, c[3].to_string()));
        }
    }
    out
}

fn llm_pair(backend: &dyn ChatBackend, p: &PersonSchedule, q: &PersonSchedule) -> Result<Vec<Message>, BenchError> {
    let (pn, qn) = (p.individual.as_str(), q.individual.as_str());
    let prompt = format!(
        "Write a short dialogue in which {pn} and {qn} tell each other their schedules for today.\n\
         Every fact below must be stated. For a shared activity the other participants may be named; \
         otherwise do not name them.\n\
         Write each message on its own line as `{pn} to {qn}: ...` or `{qn} to {pn}: ...`.\n\n\
         {}\n{}",
        fact_lines(p, qn),
        fact_lines(q, pn)
    );
    let reply = backend.chat(&[ChatMessage::user(prompt)])?;
    let session = format!("{pn}-{qn}");
    let out = split_dialogue(&session, &reply, pn, qn);
    if out.is_empty() {
        return Err(BenchError::DialogueFormat(session));
    }
    Ok(out)
}

/// Dialogues for every pair inside each group, in participant order.
pub fn gen_dialogues(world: &ScheduleWorld, groups: &[Vec<String>], mode: &DialogueMode) -> Result<Vec<Message>, BenchError> {
    let mut out = Vec::new();
    for group in groups {
        for (i, p) in group.iter().enumerate() {
            for q in &group[i + 1..] {
                let ps = world.schedule(p).ok_or_else(|| BenchError::UnknownParticipant(p.clone()))?;
                let qs = world.schedule(q).ok_or_else(|| BenchError::UnknownParticipant(q.clone()))?;
                match mode {
                    DialogueMode::Template => out.extend(template_pair(ps, qs)),
                    DialogueMode::Llm(b) => out.extend(llm_pair(b.as_ref(), ps, qs)?),
                }
            }
        }
    }
    Ok(out)
}
