use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvalError, MetricResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub dataset: String,
    pub tasks: usize,
    pub mean_score: f64,
    /// Tasks whose run ended with an error.
    pub errors: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub backend: String,
    pub model: String,
    pub config_digest: String,
    pub flags: serde_json::Value,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: RunMetadata,
    /// Sorted by dataset tag.
    pub datasets: Vec<DatasetRow>,
    /// Sorted by task id.
    pub results: Vec<MetricResult>,
}

pub fn aggregate_report(results: &[MetricResult], metadata: RunMetadata) -> Result<Report, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyInput("metric results"));
    }
    let mut groups: BTreeMap<&str, Vec<&MetricResult>> = BTreeMap::new();
    for r in results {
        groups.entry(&r.dataset).or_default().push(r);
    }
    let datasets = groups
        .into_iter()
        .map(|(tag, rs)| DatasetRow {
            dataset: tag.to_string(),
            tasks: rs.len(),
            mean_score: rs.iter().map(|r| r.score).sum::<f64>() / rs.len() as f64,
            errors: rs.iter().filter(|r| r.error.is_some()).count(),
        })
        .collect();
    let mut results = results.to_vec();
    results.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    Ok(Report {
        metadata,
        datasets,
        results,
    })
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned plain-text table, scores to 4 decimals.
    pub fn to_table(&self) -> String {
        let width = self
            .datasets
            .iter()
            .map(|r| r.dataset.len())
            .chain(["dataset".len()])
            .max()
            .unwrap_or(7);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>5}  {:>6}  {:>6}", "dataset", "tasks", "errors", "score");
        for r in &self.datasets {
            let _ = writeln!(out, "{:<width$}  {:>5}  {:>6}  {:>6.4}", r.dataset, r.tasks, r.errors, r.mean_score);
        }
        out
    }
}
