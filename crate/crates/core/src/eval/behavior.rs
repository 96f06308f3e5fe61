//! How agents adjust retrieval parameters between consecutive queries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::agent::{Direction, ParamChange, QueryParam};
use crate::trajectory::{RecordKind, Trajectory};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionCounts {
    pub increase: usize,
    pub decrease: usize,
    pub unchanged: usize,
    /// Same size, different contents (keyword sets and query texts only).
    pub replaced: usize,
}

impl DirectionCounts {
    fn add(&mut self, d: Direction) {
        match d {
            Direction::Increase => self.increase += 1,
            Direction::Decrease => self.decrease += 1,
            Direction::Unchanged => self.unchanged += 1,
            Direction::Replaced => self.replaced += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.increase + self.decrease + self.unchanged + self.replaced
    }

    /// Fractions in field order; all zero when nothing was counted.
    pub fn fractions(&self) -> [f64; 4] {
        let t = self.total();
        if t == 0 {
            return [0.0; 4];
        }
        let t = t as f64;
        [
            self.increase as f64 / t,
            self.decrease as f64 / t,
            self.unchanged as f64 / t,
            self.replaced as f64 / t,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBehavior {
    pub overall: DirectionCounts,
    pub success: DirectionCounts,
    pub failure: DirectionCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBehaviorStats {
    pub runs: usize,
    pub successful_runs: usize,
    pub params: BTreeMap<QueryParam, ParamBehavior>,
}

/// Whether the run's `run_end` record was marked successful. Runs without a
/// verdict count as failures.
pub fn run_succeeded(log: &Trajectory) -> bool {
    log.of_kind(RecordKind::RunEnd)
        .last()
        .and_then(|r| r.data.get("success"))
        .and_then(|v| v.as_bool())
        .unwrap_or(false)
}

pub fn memory_behavior_stats(logs: &[Trajectory]) -> Result<MemoryBehaviorStats, EvalError> {
    if logs.is_empty() {
        return Err(EvalError::EmptyInput("trajectory logs"));
    }
    let mut stats = MemoryBehaviorStats {
        runs: logs.len(),
        params: QueryParam::ALL.iter().map(|p| (*p, ParamBehavior::default())).collect(),
        ..Default::default()
    };
    for log in logs {
        let ok = run_succeeded(log);
        stats.successful_runs += ok as usize;
        for rec in log.of_kind(RecordKind::ParamChange) {
            let change: ParamChange = serde_json::from_value(rec.data.clone()).map_err(|e| EvalError::MalformedRecord(e.to_string()))?;
            let entry = stats.params.entry(change.parameter).or_default();
            entry.overall.add(change.direction);
            if ok {
                entry.success.add(change.direction);
            } else {
                entry.failure.add(change.direction);
            }
        }
    }
    Ok(stats)
}
