//! Append-only JSON-lines trajectory log for one task run.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    RunStart,
    PlanCreated,
    PlanUpdate,
    Retrieval,
    ParamChange,
    Utterance,
    RecursionStart,
    RecursionEnd,
    Consensus,
    Answer,
    RunEnd,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub kind: RecordKind,
    /// Communication path: `0` for the task's root, `0.1` for its first child.
    pub comm: String,
    pub depth: u32,
    pub turn: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(default)]
    pub data: Value,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("corrupt record at line {line} (byte offset {offset}): {msg}")]
    Corrupt { line: usize, offset: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn push(&mut self, kind: RecordKind, comm: &str, depth: u32, turn: u32, agent: Option<&str>, data: Value) {
        self.records.push(TrajectoryRecord {
            kind,
            comm: comm.to_string(),
            depth,
            turn,
            agent: agent.map(str::to_string),
            data,
        });
    }

    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), LogError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    /// Parses a log. On a corrupt line, returns the records read so far
    /// together with the error.
    pub fn parse(text: &str) -> (Trajectory, Option<LogError>) {
        let mut records = Vec::new();
        let mut offset = 0;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let body = line.trim_end_matches(['\n', '\r']);
            if !body.trim().is_empty() {
                match serde_json::from_str::<TrajectoryRecord>(body) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        return (
                            Trajectory { records },
                            Some(LogError::Corrupt {
                                line: i + 1,
                                offset,
                                msg: e.to_string(),
                            }),
                        )
                    }
                }
            }
            offset += line.len();
        }
        (Trajectory { records }, None)
    }

    pub fn read(path: &Path) -> Result<Trajectory, LogError> {
        let text = std::fs::read_to_string(path)?;
        match Self::parse(&text) {
            (t, None) => Ok(t),
            (_, Some(e)) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_and_corruption_offset() {
        let mut t = Trajectory::default();
        t.push(RecordKind::RunStart, "0", 0, 0, None, json!({"task": "t"}));
        t.push(RecordKind::Utterance, "0", 0, 1, Some("a"), json!({"text": "hi"}));
        let text = t.to_jsonl();
        let (back, err) = Trajectory::parse(&text);
        assert!(err.is_none());
        assert_eq!(back, t);
        let first_len = text.lines().next().unwrap().len() + 1;
        let truncated = &text[..text.len() - 10];
        let (partial, err) = Trajectory::parse(truncated);
        assert_eq!(partial.records.len(), 1);
        match err {
            Some(LogError::Corrupt { line, offset, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(offset, first_len);
            }
            other => panic!("{other:?}"),
        }
    }
}
