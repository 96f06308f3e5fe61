//! Text forms of a plan.
//!
//! Two formats exist. The wire format is what backends emit and read:
//! `- [UNKNOWN] <description>` / `- [KNOWN: <value>] <description>`.
//! The rendered format is what agents observe:
//!
//! ```text
//! Question: <question>
//! Plan:
//! - <description>: [UNKNOWN]
//! - (state) <description>: <value>
//! ```
//!
//! Rendered text escapes `\`, newlines, `:` in descriptions and `[` in values
//! so that [`parse_rendered`] recovers slot states exactly.

use super::{InfoNavError, RationaleSlot, SlotKind, SlotStatus};

const UNKNOWN: &str = "[UNKNOWN]";
const STATE_TAG: &str = "(state)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireSlot {
    pub description: String,
    pub kind: SlotKind,
    pub status: SlotStatus,
}

fn split_kind(description: &str) -> (String, SlotKind) {
    let d = description.trim();
    match d.strip_prefix(STATE_TAG) {
        Some(rest) => (rest.trim().to_string(), SlotKind::State),
        None => (d.to_string(), SlotKind::Rationale),
    }
}

/// Extracts wire-format slot lines, ignoring everything else.
pub fn parse_slot_lines(text: &str) -> Vec<WireSlot> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let Some(rest) = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")) else {
            continue;
        };
        let rest = rest.trim_start();
        let Some(inner) = rest.strip_prefix('[') else { continue };
        // match the closing bracket, allowing nested brackets in values
        let mut depth = 1;
        let mut close = None;
        for (i, c) in inner.char_indices() {
            match c {
                '[' => depth += 1,
                ']' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else { continue };
        let tag = inner[..close].trim();
        let (description, kind) = split_kind(&inner[close + 1..]);
        if description.is_empty() {
            continue;
        }
        let status = if tag.eq_ignore_ascii_case("unknown") {
            SlotStatus::Unknown
        } else if let Some(value) = tag
            .strip_prefix("KNOWN:")
            .or_else(|| tag.strip_prefix("known:"))
            .or_else(|| tag.strip_prefix("Known:"))
        {
            let value = value.trim();
            if value.is_empty() {
                continue;
            }
            SlotStatus::Filled(value.to_string())
        } else {
            continue;
        };
        out.push(WireSlot { description, kind, status });
    }
    out
}

fn escape(text: &str, extra: char) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c if c == extra => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

fn render_description(slot: &RationaleSlot) -> String {
    let mut d = escape(&slot.description, ':');
    if d.starts_with('(') {
        d.insert(0, '\\');
    }
    match slot.kind {
        SlotKind::State => format!("{STATE_TAG} {d}"),
        SlotKind::Rationale => d,
    }
}

pub fn render_plan(plan: &super::Plan) -> String {
    let mut out = format!("Question: {}\nPlan:\n", escape(&plan.question, '\0'));
    for slot in &plan.slots {
        let value = match &slot.status {
            SlotStatus::Unknown => UNKNOWN.to_string(),
            SlotStatus::Filled(v) => escape(v, '['),
        };
        out.push_str(&format!("- {}: {}\n", render_description(slot), value));
    }
    out
}

/// Inverse of [`render_plan`]: returns the question and slots.
pub fn parse_rendered(text: &str) -> Result<(String, Vec<RationaleSlot>), InfoNavError> {
    let mut lines = text.lines().enumerate();
    let question = match lines.next() {
        Some((_, l)) => l.strip_prefix("Question: ").map(unescape).ok_or(InfoNavError::Malformed {
            line: 1,
            msg: "missing `Question:` header".into(),
        })?,
        None => {
            return Err(InfoNavError::Malformed {
                line: 1,
                msg: "empty text".into(),
            })
        }
    };
    match lines.next() {
        Some((_, "Plan:")) => {}
        _ => {
            return Err(InfoNavError::Malformed {
                line: 2,
                msg: "missing `Plan:` header".into(),
            })
        }
    }
    let mut slots = Vec::new();
    for (i, line) in lines {
        let malformed = |msg: &str| InfoNavError::Malformed {
            line: i + 1,
            msg: msg.to_string(),
        };
        let body = line.strip_prefix("- ").ok_or_else(|| malformed("slot line must start with `- `"))?;
        let (body, kind) = match body.strip_prefix(STATE_TAG) {
            Some(rest) => (rest.strip_prefix(' ').unwrap_or(rest), SlotKind::State),
            None => (body, SlotKind::Rationale),
        };
        // first unescaped ':' separates description from value
        let bytes = body.as_bytes();
        let mut sep = None;
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b':' => {
                    sep = Some(i);
                    break;
                }
                _ => i += 1,
            }
        }
        let sep = sep.ok_or_else(|| malformed("missing `:` separator"))?;
        let description = unescape(&body[..sep]);
        let value = body[sep + 1..]
            .strip_prefix(' ')
            .ok_or_else(|| malformed("missing space after `:`"))?;
        let status = if value == UNKNOWN {
            SlotStatus::Unknown
        } else {
            SlotStatus::Filled(unescape(value))
        };
        slots.push(RationaleSlot { description, kind, status });
    }
    Ok((question, slots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infonav::{Plan, SlotUpdate};
    use proptest::prelude::*;

    #[test]
    fn renders_placeholders_and_values() {
        let p = Plan::new("q", vec![("A".into(), SlotKind::Rationale)]).unwrap();
        assert!(render_plan(&p).contains("A: [UNKNOWN]"));
        let p = p.apply_update(&[SlotUpdate { index: 0, value: "7pm" }], 1).unwrap();
        assert!(render_plan(&p).contains("A: 7pm"));
    }

    #[test]
    fn wire_lines_with_values() {
        let s = parse_slot_lines("PLAN-UPDATE:\n- [KNOWN: 9:00-11:00 [approx]] Alice's yoga\n- [UNKNOWN]\n- [WHAT] x\n");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].status, SlotStatus::Filled("9:00-11:00 [approx]".into()));
        assert_eq!(s[0].description, "Alice's yoga");
    }

    #[test]
    fn rejects_malformed_rendering() {
        assert!(parse_rendered("nope").is_err());
        assert!(parse_rendered("Question: q\nPlan:\n- no separator\n").is_err());
    }

    fn slot_strategy() -> impl Strategy<Value = RationaleSlot> {
        (
            "\\PC{1,20}|[(\\[:\\\\ ]{1,6}",
            any::<bool>(),
            proptest::option::of("\\PC{1,20}|\\[UNKNOWN\\]|[\\[\\]:\\\\\n ]{1,6}"),
        )
            .prop_map(|(description, state, value)| RationaleSlot {
                description,
                kind: if state { SlotKind::State } else { SlotKind::Rationale },
                status: match value {
                    Some(v) => SlotStatus::Filled(v),
                    None => SlotStatus::Unknown,
                },
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn render_parse_round_trip(question in "\\PC{0,30}", slots in proptest::collection::vec(slot_strategy(), 1..8)) {
            let plan = Plan { question: question.clone(), slots: slots.clone(), history: vec![], updates: 0 };
            let (q, parsed) = parse_rendered(&render_plan(&plan)).unwrap();
            prop_assert_eq!(q, question);
            prop_assert_eq!(parsed, slots);
        }
    }
}
