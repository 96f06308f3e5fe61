use serde::{Deserialize, Serialize};

use super::{ConsensusResult, FakeSolvedDetector, InfoNavError, Plan};

/// Final plans and consensus of one task run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskTrajectory {
    pub plans: Vec<Plan>,
    pub consensus: Option<ConsensusResult>,
    pub success: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub tasks: usize,
    pub rationale_count: f64,
    pub solved_per_update: f64,
    pub solved_ratio: f64,
    pub fake_solved_ratio: f64,
    pub consensus_ratio: f64,
}

/// Slots newly solved (unknown or fake before, genuine after) per nonempty
/// update, replayed from the plan history.
fn solved_per_update(plan: &Plan, detector: &FakeSolvedDetector) -> Vec<usize> {
    let mut genuine = vec![false; plan.slots.len()];
    let mut counts: Vec<usize> = Vec::new();
    let mut current: Option<u32> = None;
    for rev in &plan.history {
        if current != Some(rev.update) {
            counts.push(0);
            current = Some(rev.update);
        }
        if rev.slot >= genuine.len() {
            genuine.resize(rev.slot + 1, false);
        }
        let now = !detector.is_fake_value(&rev.new);
        if now && !genuine[rev.slot] {
            *counts.last_mut().unwrap() += 1;
        }
        genuine[rev.slot] = now;
    }
    counts
}

/// Per-task statistics averaged over tasks. Tasks without plans (the
/// planning ablation) are skipped.
pub fn trajectory_stats(tasks: &[TaskTrajectory], detector: &FakeSolvedDetector) -> Result<TrajectoryStats, InfoNavError> {
    let mut acc = TrajectoryStats::default();
    for task in tasks.iter().filter(|t| !t.plans.is_empty()) {
        let total_slots: usize = task.plans.iter().map(|p| p.slots.len()).sum();
        let mut solved = 0usize;
        let mut updates = 0usize;
        let mut genuine = 0usize;
        let mut fake = 0usize;
        for plan in &task.plans {
            let per = solved_per_update(plan, detector);
            solved += per.iter().sum::<usize>();
            updates += per.len();
            for slot in &plan.slots {
                if detector.detect(slot) {
                    fake += 1;
                } else if slot.is_filled() {
                    genuine += 1;
                }
            }
        }
        acc.tasks += 1;
        acc.rationale_count += total_slots as f64 / task.plans.len() as f64;
        acc.solved_per_update += if updates == 0 { 0.0 } else { solved as f64 / updates as f64 };
        if total_slots > 0 {
            acc.solved_ratio += genuine as f64 / total_slots as f64;
            acc.fake_solved_ratio += fake as f64 / total_slots as f64;
        }
        acc.consensus_ratio += task.consensus.as_ref().map_or(0.0, ConsensusResult::consensus_ratio);
    }
    if acc.tasks == 0 {
        return Err(InfoNavError::EmptyInput);
    }
    let n = acc.tasks as f64;
    acc.rationale_count /= n;
    acc.solved_per_update /= n;
    acc.solved_ratio /= n;
    acc.fake_solved_ratio /= n;
    acc.consensus_ratio /= n;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infonav::{consensus, normalize_value, SlotKind, SlotUpdate};

    fn four_slots() -> Plan {
        Plan::new("q", (0..4).map(|i| (format!("s{i}"), SlotKind::Rationale)).collect()).unwrap()
    }

    #[test]
    fn solved_per_update_from_history() {
        let p = four_slots()
            .apply_update(&[SlotUpdate { index: 0, value: "a" }], 1)
            .unwrap()
            .apply_update(&[SlotUpdate { index: 1, value: "b" }, SlotUpdate { index: 2, value: "c" }], 3)
            .unwrap();
        assert_eq!(solved_per_update(&p, &FakeSolvedDetector::default()), vec![1, 2]);
    }

    #[test]
    fn hand_computed_single_plan() {
        // updates {2},{1} over 4 slots, all merged
        let p = four_slots()
            .apply_update(&[SlotUpdate { index: 0, value: "a" }, SlotUpdate { index: 1, value: "b" }], 1)
            .unwrap()
            .apply_update(&[SlotUpdate { index: 2, value: "c" }], 3)
            .unwrap();
        let d = FakeSolvedDetector::default();
        let c = consensus(&p, &p, &normalize_value, &d);
        let s = trajectory_stats(
            &[TaskTrajectory {
                plans: vec![p],
                consensus: Some(c),
                success: None,
            }],
            &d,
        )
        .unwrap();
        assert_eq!(s.rationale_count, 4.0);
        assert_eq!(s.solved_per_update, 1.5);
        assert_eq!(s.solved_ratio, 0.75);
        assert_eq!(s.fake_solved_ratio, 0.0);
        assert_eq!(s.consensus_ratio, 1.0);
    }

    #[test]
    fn all_fake() {
        let updates: Vec<SlotUpdate> = (0..4)
            .map(|i| SlotUpdate {
                index: i,
                value: "unknown",
            })
            .collect();
        let p = four_slots().apply_update(&updates, 1).unwrap();
        let s = trajectory_stats(
            &[TaskTrajectory {
                plans: vec![p],
                ..Default::default()
            }],
            &FakeSolvedDetector::default(),
        )
        .unwrap();
        assert_eq!(s.solved_ratio, 0.0);
        assert_eq!(s.fake_solved_ratio, 1.0);
        assert_eq!(s.solved_per_update, 0.0);
    }

    #[test]
    fn empty_input_errors() {
        assert!(trajectory_stats(&[], &FakeSolvedDetector::default()).is_err());
        assert!(trajectory_stats(&[TaskTrajectory::default()], &FakeSolvedDetector::default()).is_err());
    }
}
