//! Scoring of predicted answers, report aggregation and memory-behavior
//! analytics.

mod behavior;
mod metrics;
mod report;

pub use behavior::{memory_behavior_stats, run_succeeded, DirectionCounts, MemoryBehaviorStats, ParamBehavior};
pub use metrics::{
    contains_words, extract_count, extract_names, metric_accuracy_normalized, metric_f1, metric_iou, normalize_answer, normalize_name,
    parse_intervals, parse_judge_verdict,
};
pub use report::{aggregate_report, DatasetRow, Report, RunMetadata};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ChatBackend, ChatMessage, PromptTemplates};
use crate::corpus::{GroundTruth, MetricKind, TaskInstance};

/// Runs scoring at or above this count as successful in analytics.
pub const SUCCESS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("interval [{start}, {end}) is malformed")]
    MalformedInterval { start: u32, end: u32 },
    #[error("no {0} to aggregate")]
    EmptyInput(&'static str),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub task_id: String,
    pub dataset: String,
    pub metric_kind: MetricKind,
    pub score: f64,
    pub normalized_prediction: String,
    pub judge: bool,
    #[serde(default)]
    pub extraction_failed: bool,
    /// Set when the run produced no answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// How free-text answers are checked against text ground truth.
#[derive(Clone, Default)]
pub enum AccuracyMode {
    #[default]
    Normalized,
    Judge {
        backend: Arc<dyn ChatBackend>,
        templates: PromptTemplates,
    },
}

fn judge(backend: &dyn ChatBackend, templates: &PromptTemplates, question: &str, truth: &str, prediction: &str) -> Option<bool> {
    let prompt = templates
        .render(
            "judge",
            &[("question", question), ("ground_truth", truth), ("prediction", prediction)],
        )
        .ok()?;
    match backend.chat(&[ChatMessage::user(prompt)]) {
        Ok(reply) => parse_judge_verdict(&reply),
        Err(e) => {
            log::warn!("judge call failed: {e}");
            None
        }
    }
}

/// Scores one prediction. A missing prediction scores 0 and carries `error`.
pub fn score_prediction(task: &TaskInstance, prediction: Option<&str>, error: Option<&str>, mode: &AccuracyMode) -> MetricResult {
    let mut r = MetricResult {
        task_id: task.id.clone(),
        dataset: task.dataset_tag.clone(),
        metric_kind: task.metric_kind,
        score: 0.0,
        normalized_prediction: String::new(),
        judge: false,
        extraction_failed: false,
        error: error.map(str::to_string),
    };
    let Some(pred) = prediction else {
        if r.error.is_none() {
            r.error = Some("no answer".into());
        }
        return r;
    };
    match &task.ground_truth {
        GroundTruth::Text(truth) => {
            r.normalized_prediction = normalize_answer(pred);
            let verdict = match mode {
                AccuracyMode::Normalized => None,
                AccuracyMode::Judge { backend, templates } => {
                    let v = judge(backend.as_ref(), templates, &task.question, truth, pred);
                    if v.is_none() {
                        log::warn!("judge verdict unreadable for task {}, using normalized match", task.id);
                    }
                    v
                }
            };
            r.judge = verdict.is_some();
            r.score = match verdict {
                Some(ok) => ok as u8 as f64,
                None => metric_accuracy_normalized(pred, truth),
            };
        }
        GroundTruth::Count(truth) => match extract_count(pred) {
            Some(n) => {
                r.normalized_prediction = n.to_string();
                r.score = (n == *truth) as u8 as f64;
            }
            None => r.extraction_failed = true,
        },
        GroundTruth::Names(truth) => {
            let names = extract_names(pred, &task.answer_vocabulary);
            r.normalized_prediction = names.iter().map(|n| normalize_name(n)).collect::<Vec<_>>().join(", ");
            r.score = metric_f1(&names, truth, &normalize_name);
        }
        GroundTruth::Intervals(truth) => {
            let spans = parse_intervals(pred);
            r.normalized_prediction = spans
                .iter()
                .map(|i| format!("{}-{}", i.start, i.end))
                .collect::<Vec<_>>()
                .join(", ");
            match metric_iou(&spans, truth) {
                Ok(s) => r.score = s,
                Err(e) => r.error = Some(e.to_string()),
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, ReplayScript, ScriptEntry, ScriptedBackend};
    use crate::corpus::TimeInterval;

    fn task(gt: GroundTruth) -> TaskInstance {
        TaskInstance {
            id: "t".into(),
            question: "q".into(),
            metric_kind: gt.expected_metric(),
            ground_truth: gt,
            initiators: ("a".into(), "b".into()),
            dataset_tag: "d".into(),
            answer_vocabulary: vec![],
        }
    }

    fn judge_mode(reply: &str) -> AccuracyMode {
        AccuracyMode::Judge {
            backend: Arc::new(ScriptedBackend::new(ReplayScript::new(vec![ScriptEntry {
                cue: "".into(),
                response: reply.into(),
            }]))),
            templates: PromptTemplates::default(),
        }
    }

    #[test]
    fn per_kind() {
        let n = AccuracyMode::Normalized;
        assert_eq!(
            score_prediction(&task(GroundTruth::Count(1)), Some("delete 1"), None, &n).score,
            1.0
        );
        let miss = score_prediction(&task(GroundTruth::Count(1)), Some("none"), None, &n);
        assert!(miss.extraction_failed && miss.score == 0.0);
        let iou = score_prediction(
            &task(GroundTruth::Intervals(vec![TimeInterval::new(600, 840)])),
            Some("9:00-12:00"),
            None,
            &n,
        );
        assert!((iou.score - 0.4).abs() < 1e-9);
        let none = score_prediction(&task(GroundTruth::Count(1)), None, Some("backend down"), &n);
        assert_eq!((none.score, none.error.as_deref()), (0.0, Some("backend down")));
    }

    #[test]
    fn judge_and_fallback() {
        let t = task(GroundTruth::Text("Ross".into()));
        let r = score_prediction(&t, Some("Monica"), None, &judge_mode("1"));
        assert!(r.judge);
        assert_eq!(r.score, 1.0);
        let r = score_prediction(&t, Some("Ross"), None, &judge_mode("maybe"));
        assert!(!r.judge);
        assert_eq!(r.score, 1.0);
    }

    struct Down;
    impl ChatBackend for Down {
        fn name(&self) -> &str {
            "down"
        }
        fn chat(&self, _: &[ChatMessage]) -> Result<String, BackendError> {
            Err(BackendError::MissingKey("K".into()))
        }
    }

    #[test]
    fn judge_backend_failure_falls_back() {
        let mode = AccuracyMode::Judge {
            backend: Arc::new(Down),
            templates: PromptTemplates::default(),
        };
        let r = score_prediction(&task(GroundTruth::Text("Ross".into())), Some("Ross"), None, &mode);
        assert_eq!((r.judge, r.score), (false, 1.0));
    }
}
