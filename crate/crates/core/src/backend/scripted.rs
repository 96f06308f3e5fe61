use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{digest, prompt_text, BackendError, CallRecord, ChatBackend, ChatMessage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Substring that must occur in the assembled prompt.
    pub cue: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayScript {
    pub entries: Vec<ScriptEntry>,
}

impl ReplayScript {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    /// Parses a JSON-lines script of `{cue, response}` objects.
    pub fn parse(text: &str) -> Result<Self, BackendError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry =
                serde_json::from_str(line).map_err(|e| BackendError::Malformed(format!("script line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Replays canned responses in order. Each call consumes exactly one entry,
/// and the entry's cue must occur in the prompt.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: ReplayScript,
    cursor: Mutex<usize>,
    calls: Mutex<Vec<CallRecord>>,
}

impl ScriptedBackend {
    pub fn new(script: ReplayScript) -> Self {
        Self {
            script,
            cursor: Mutex::new(0),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn remaining(&self) -> usize {
        self.script.entries.len() - self.consumed()
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let prompt = prompt_text(messages);
        let mut cursor = self.cursor.lock().unwrap();
        let entry = self.script.entries.get(*cursor).ok_or(BackendError::ScriptExhausted)?;
        if !prompt.contains(&entry.cue) {
            return Err(BackendError::CueMismatch {
                index: *cursor,
                expected: entry.cue.clone(),
            });
        }
        *cursor += 1;
        self.calls.lock().unwrap().push(CallRecord {
            request_digest: digest(&prompt),
            response_digest: Some(digest(&entry.response)),
            attempts: 1,
        });
        Ok(entry.response.clone())
    }

    fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script() -> ReplayScript {
        ReplayScript::parse(
            r#"{"cue": "PLAN", "response": "- [UNKNOWN] a"}
{"cue": "THINK", "response": "INTENT: ask"}
"#,
        )
        .unwrap()
    }

    #[test]
    fn replays_in_order() {
        let b = ScriptedBackend::new(script());
        assert_eq!(b.chat(&[ChatMessage::user("make a PLAN")]).unwrap(), "- [UNKNOWN] a");
        assert_eq!(
            b.chat(&[ChatMessage::system("x"), ChatMessage::user("THINK now")]).unwrap(),
            "INTENT: ask"
        );
        assert!(matches!(b.chat(&[ChatMessage::user("PLAN")]), Err(BackendError::ScriptExhausted)));
        assert_eq!(b.calls().len(), 2);
    }

    #[test]
    fn cue_mismatch_names_the_cue() {
        let b = ScriptedBackend::new(script());
        let err = b.chat(&[ChatMessage::user("something else")]).unwrap_err();
        assert!(err.to_string().contains("`PLAN`"), "{err}");
        assert_eq!(b.consumed(), 0);
    }

    #[test]
    fn identical_prompts_identical_outputs() {
        let run = || {
            let b = ScriptedBackend::new(script());
            let a = b.chat(&[ChatMessage::user("PLAN")]).unwrap();
            let c = b.chat(&[ChatMessage::user("THINK")]).unwrap();
            (a, c, b.calls())
        };
        assert_eq!(run(), run());
    }
}
