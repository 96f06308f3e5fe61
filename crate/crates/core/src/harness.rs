//! Runs every task of a dataset, scores the answers and writes trajectories
//! and a report.

use std::path::Path;

use serde_json::json;

use crate::agent::{AgentConfig, Backends, Engine, Outcome, Termination};
use crate::backend::BackendError;
use crate::corpus::{Dataset, TaskInstance};
use crate::eval::{score_prediction, AccuracyMode, MetricResult, SUCCESS_THRESHOLD};
use crate::infonav::{ConsensusResult, Plan, TaskTrajectory};
use crate::trajectory::{RecordKind, Trajectory};

/// Builds the backends for one task. Called once per task so that stateful
/// providers (replay scripts) start fresh.
pub type BackendFactory<'a> = dyn Fn(&TaskInstance) -> Result<Backends, BackendError> + Sync + 'a;

#[derive(Debug, Clone)]
pub struct TaskRun {
    pub outcome: Outcome,
    pub result: MetricResult,
}

fn failed_outcome(task: &TaskInstance, err: &BackendError) -> Outcome {
    let mut log = Trajectory::default();
    log.push(
        RecordKind::RunStart,
        "0",
        0,
        0,
        None,
        json!({ "task_id": task.id, "question": task.question }),
    );
    log.push(
        RecordKind::RunEnd,
        "0",
        0,
        0,
        None,
        json!({ "termination": Termination::Error, "utterances": 0, "child_communications": 0, "error": err.to_string() }),
    );
    Outcome {
        task_id: task.id.clone(),
        answer: None,
        consensus: None,
        termination: Termination::Error,
        error: Some(err.to_string()),
        trajectory: log,
        utterances: 0,
        child_communications: 0,
    }
}

pub fn run_task(dataset: &Dataset, task: &TaskInstance, factory: &BackendFactory, config: AgentConfig, mode: &AccuracyMode) -> TaskRun {
    let mut outcome = match factory(task) {
        Ok(backends) => Engine::new(&dataset.network, &dataset.corpus, &backends, config).run(task),
        Err(e) => failed_outcome(task, &e),
    };
    let result = score_prediction(task, outcome.answer.as_deref(), outcome.error.as_deref(), mode);
    if let Some(end) = outcome.trajectory.records.last_mut() {
        end.data["score"] = json!(result.score);
        end.data["success"] = json!(result.score >= SUCCESS_THRESHOLD);
    }
    TaskRun { outcome, result }
}

/// Runs all tasks, `parallel` at a time, and returns them sorted by task id.
pub fn run_dataset(dataset: &Dataset, factory: &BackendFactory, config: AgentConfig, mode: &AccuracyMode, parallel: usize) -> Vec<TaskRun> {
    let mut tasks: Vec<&TaskInstance> = dataset.tasks.iter().collect();
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    let parallel = parallel.max(1);
    let mut runs: Vec<TaskRun> = if parallel == 1 {
        tasks.iter().map(|t| run_task(dataset, t, factory, config, mode)).collect()
    } else {
        let chunk = tasks.len().div_ceil(parallel).max(1);
        std::thread::scope(|s| {
            let handles: Vec<_> = tasks
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|t| run_task(dataset, t, factory, config, mode)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("task thread panicked")).collect()
        })
    };
    runs.sort_by(|a, b| a.outcome.task_id.cmp(&b.outcome.task_id));
    runs
}

/// File name used for a task's trajectory log.
pub fn trajectory_file_name(task_id: &str) -> String {
    let safe: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

pub fn write_trajectories(dir: &Path, runs: &[TaskRun]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in runs {
        std::fs::write(dir.join(trajectory_file_name(&r.outcome.task_id)), r.outcome.trajectory.to_jsonl())?;
    }
    Ok(())
}

/// Final plans of the root communication's agents, its consensus and the
/// run verdict, recovered from a log.
pub fn task_trajectory_from_log(log: &Trajectory) -> TaskTrajectory {
    let mut plans: Vec<(String, Plan)> = Vec::new();
    let mut consensus = None;
    for rec in &log.records {
        if rec.comm != "0" {
            continue;
        }
        match rec.kind {
            RecordKind::PlanCreated | RecordKind::PlanUpdate => {
                let (Some(agent), Ok(plan)) = (rec.agent.clone(), serde_json::from_value::<Plan>(rec.data["plan"].clone())) else {
                    continue;
                };
                match plans.iter_mut().find(|(a, _)| *a == agent) {
                    Some(slot) => slot.1 = plan,
                    None => plans.push((agent, plan)),
                }
            }
            RecordKind::Consensus => {
                consensus = serde_json::from_value::<ConsensusResult>(rec.data["result"].clone()).ok();
            }
            _ => {}
        }
    }
    let success = log
        .of_kind(RecordKind::RunEnd)
        .last()
        .and_then(|r| r.data.get("success"))
        .and_then(|v| v.as_bool());
    TaskTrajectory {
        plans: plans.into_iter().map(|(_, p)| p).collect(),
        consensus,
        success,
    }
}
