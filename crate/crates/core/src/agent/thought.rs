//! Parsing of the backend's think response.
//!
//! ```text
//! PLAN-UPDATE:
//! - [KNOWN: 9:00-11:00] Alice's yoga class
//! CLEAR-QUERY: keywords=yoga,class; window=1; limit=10
//! FUZZY-QUERY: topk=3; text=morning plans
//! INTENT: recurse Charlie: when is your class?
//! ```
//!
//! Missing query sections mean "no query". A malformed section degrades to
//! its neutral value and leaves a warning; nothing here aborts a run.

use serde::{Deserialize, Serialize};

use crate::infonav::{parse_slot_lines, WireSlot};
use crate::memory::{ClearQuery, FuzzyQuery};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "intent", rename_all = "snake_case")]
pub enum Intent {
    Ask,
    Inform,
    Recurse { neighbor: String, question: String },
    Conclude,
}

impl Intent {
    pub fn label(&self) -> String {
        match self {
            Intent::Ask => "ask".into(),
            Intent::Inform => "inform".into(),
            Intent::Conclude => "conclude".into(),
            Intent::Recurse { neighbor, question } => format!("recurse {neighbor}: {question}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thought {
    pub plan_update: Vec<WireSlot>,
    pub clear_query: Option<ClearQuery>,
    pub fuzzy_query: Option<FuzzyQuery>,
    pub intent: Intent,
    pub warnings: Vec<String>,
}

/// Values used when a query omits `window`, `limit` or `topk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryDefaults {
    pub context_window: usize,
    pub limit: usize,
    pub topk: usize,
}

const TAGS: [&str; 4] = ["PLAN-UPDATE:", "CLEAR-QUERY:", "FUZZY-QUERY:", "INTENT:"];

fn sections(text: &str) -> [Option<String>; 4] {
    let mut out: [Option<String>; 4] = Default::default();
    let mut current: Option<usize> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        let upper = trimmed.to_ascii_uppercase();
        if let Some(i) = TAGS.iter().position(|t| upper.starts_with(t)) {
            let rest = trimmed[TAGS[i].len()..].trim();
            out[i] = Some(rest.to_string());
            current = Some(i);
        } else if let Some(i) = current {
            let s = out[i].get_or_insert_with(String::new);
            s.push('\n');
            s.push_str(line);
        }
    }
    out
}

fn is_none(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("none")
}

fn key_values(s: &str) -> Vec<(String, String)> {
    s.split(';')
        .filter_map(|part| {
            let (k, v) = part.split_once('=')?;
            Some((k.trim().to_ascii_lowercase(), v.trim().to_string()))
        })
        .collect()
}

fn parse_clear(s: &str, prev: Option<&ClearQuery>, d: QueryDefaults) -> Result<ClearQuery, String> {
    let kv = key_values(s.lines().next().unwrap_or(""));
    let mut keywords = None;
    let mut window = prev.map_or(d.context_window, |p| p.context_window);
    let mut limit = prev.map_or(d.limit, |p| p.limit);
    for (k, v) in kv {
        match k.as_str() {
            "keywords" => {
                keywords = Some(
                    v.split(',')
                        .map(str::trim)
                        .filter(|x| !x.is_empty())
                        .map(str::to_string)
                        .collect::<Vec<_>>(),
                )
            }
            "window" => window = v.parse().map_err(|_| format!("bad window `{v}`"))?,
            "limit" => limit = v.parse().map_err(|_| format!("bad limit `{v}`"))?,
            other => return Err(format!("unknown clear-query field `{other}`")),
        }
    }
    let keywords = keywords.ok_or("clear query without keywords")?;
    ClearQuery::new(keywords, window, limit).map_err(|e| e.to_string())
}

fn parse_fuzzy(s: &str, prev: Option<&FuzzyQuery>, d: QueryDefaults) -> Result<FuzzyQuery, String> {
    let line = s.lines().next().unwrap_or("");
    let (head, text) = match line.find("text=") {
        Some(i) => (&line[..i], Some(line[i + 5..].trim())),
        None => (line, None),
    };
    let mut topk = prev.map_or(d.topk, |p| p.topk);
    for (k, v) in key_values(head) {
        match k.as_str() {
            "topk" => topk = v.parse().map_err(|_| format!("bad topk `{v}`"))?,
            other => return Err(format!("unknown fuzzy-query field `{other}`")),
        }
    }
    let text = text.ok_or("fuzzy query without text")?;
    FuzzyQuery::new(text, topk).map_err(|e| e.to_string())
}

fn parse_intent(s: &str) -> Result<Intent, String> {
    let line = s.lines().next().unwrap_or("").trim();
    let (word, rest) = match line.split_once(char::is_whitespace) {
        Some((w, r)) => (w, r.trim()),
        None => (line, ""),
    };
    match word.to_ascii_lowercase().trim_end_matches('.') {
        "ask" => Ok(Intent::Ask),
        "inform" => Ok(Intent::Inform),
        "conclude" => Ok(Intent::Conclude),
        "recurse" => {
            let (neighbor, question) = rest.split_once(':').ok_or("recurse intent needs `<neighbor>: <question>`")?;
            let (neighbor, question) = (neighbor.trim(), question.trim());
            if neighbor.is_empty() || question.is_empty() {
                return Err("recurse intent needs `<neighbor>: <question>`".into());
            }
            Ok(Intent::Recurse {
                neighbor: neighbor.to_string(),
                question: question.to_string(),
            })
        }
        other => Err(format!("unknown intent `{other}`")),
    }
}

pub fn parse_thought(text: &str, prev_clear: Option<&ClearQuery>, prev_fuzzy: Option<&FuzzyQuery>, defaults: QueryDefaults) -> Thought {
    let [plan, clear, fuzzy, intent] = sections(text);
    let mut warnings = Vec::new();
    let plan_update = plan.map(|p| parse_slot_lines(&p)).unwrap_or_default();
    let clear_query = match clear {
        Some(s) if !is_none(&s) => parse_clear(&s, prev_clear, defaults)
            .map_err(|e| warnings.push(format!("CLEAR-QUERY ignored: {e}")))
            .ok(),
        _ => None,
    };
    let fuzzy_query = match fuzzy {
        Some(s) if !is_none(&s) => parse_fuzzy(&s, prev_fuzzy, defaults)
            .map_err(|e| warnings.push(format!("FUZZY-QUERY ignored: {e}")))
            .ok(),
        _ => None,
    };
    let intent = match intent {
        Some(s) => parse_intent(&s).unwrap_or_else(|e| {
            warnings.push(format!("INTENT degraded to ask: {e}"));
            Intent::Ask
        }),
        None => {
            warnings.push("INTENT missing, degraded to ask".into());
            Intent::Ask
        }
    };
    Thought {
        plan_update,
        clear_query,
        fuzzy_query,
        intent,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infonav::SlotStatus;

    const D: QueryDefaults = QueryDefaults {
        context_window: 1,
        limit: 10,
        topk: 3,
    };

    #[test]
    fn full_thought() {
        let t = parse_thought(
            "Let me think.\nPLAN-UPDATE:\n- [KNOWN: 9:00-11:00] Alice's yoga\nCLEAR-QUERY: keywords=yoga, class; window=2\nFUZZY-QUERY: topk=5; text=morning; plans\nINTENT: recurse Charlie: when is class?\n",
            None,
            None,
            D,
        );
        assert_eq!(t.plan_update.len(), 1);
        assert_eq!(t.plan_update[0].status, SlotStatus::Filled("9:00-11:00".into()));
        let c = t.clear_query.unwrap();
        assert_eq!(c.keywords, ["yoga", "class"]);
        assert_eq!((c.context_window, c.limit), (2, 10));
        let f = t.fuzzy_query.unwrap();
        assert_eq!((f.text.as_str(), f.topk), ("morning; plans", 5));
        assert_eq!(
            t.intent,
            Intent::Recurse {
                neighbor: "Charlie".into(),
                question: "when is class?".into()
            }
        );
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn conclude_and_none_queries() {
        let t = parse_thought("CLEAR-QUERY: none\nFUZZY-QUERY:\nINTENT: CONCLUDE", None, None, D);
        assert_eq!(t.intent, Intent::Conclude);
        assert!(t.clear_query.is_none() && t.fuzzy_query.is_none());
    }

    #[test]
    fn previous_params_carry_over() {
        let prev = ClearQuery::new(vec!["x".into()], 3, 7).unwrap();
        let t = parse_thought("CLEAR-QUERY: keywords=y\nINTENT: ask", Some(&prev), None, D);
        let c = t.clear_query.unwrap();
        assert_eq!((c.context_window, c.limit), (3, 7));
    }

    #[test]
    fn garbage_degrades() {
        let t = parse_thought("%%% lorem ipsum", None, None, D);
        assert!(t.plan_update.is_empty());
        assert!(t.clear_query.is_none() && t.fuzzy_query.is_none());
        assert_eq!(t.intent, Intent::Ask);
        assert_eq!(t.warnings.len(), 1);

        let t = parse_thought("CLEAR-QUERY: window=2\nFUZZY-QUERY: topk=x; text=a\nINTENT: dance", None, None, D);
        assert_eq!(t.intent, Intent::Ask);
        assert_eq!(t.warnings.len(), 3);
        let t = parse_thought("INTENT: recurse Charlie", None, None, D);
        assert_eq!(t.intent, Intent::Ask);
    }
}
