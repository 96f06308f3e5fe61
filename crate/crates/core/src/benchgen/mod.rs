//! Benchmark construction: seeded schedule worlds with algorithmic oracles,
//! needle-in-persona instances, and loading of prepared datasets.

mod dialogue;
mod np;
mod oracle;
mod schedule;

pub use dialogue::{describe, gen_dialogues, join_names, split_dialogue, split_groups, DialogueMode};
pub use np::{default_base_dialogues, default_needles, gen_np, Needle, NpOptions, PairDialogue, NP_PEOPLE};
pub use oracle::{min_deletions, oracle_easy, oracle_hard, oracle_medium};
pub use schedule::{
    format_slot, gen_schedules, multi_activity_count, Activity, ActivityKind, Assignment, PersonSchedule, Pools, PreferenceVector,
    ScheduleWorld, MAX_ACTIVITIES_PER_PERSON, MAX_ATTEMPTS, SLOTS,
};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::corpus::{read_dataset, write_dataset, Corpus, CorpusError, Dataset, GroundTruth, SocialNetwork, TaskInstance, TimeInterval};

pub const GENERATOR_VERSION: &str = "1";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid activity pools: {0}")]
    InvalidPools(String),
    #[error("need at least 2 participants, got {0}")]
    TooFewParticipants(usize),
    #[error("no feasible schedule after {attempts} attempts")]
    Infeasible { attempts: u64 },
    #[error("`{activity}` overlaps another activity of `{individual}`")]
    Overlap { individual: String, activity: String },
    #[error("schedules contain no activities")]
    EmptySchedules,
    #[error("unknown participant `{0}`")]
    UnknownParticipant(String),
    #[error("needle persona is empty")]
    EmptyPersona,
    #[error("needle split needs four distinct individuals, got {0}")]
    TooFewIndividuals(usize),
    #[error("bridge dialogue must connect the two inner speakers")]
    BridgeMismatch,
    #[error("backend reply for `{0}` contained no dialogue lines")]
    DialogueFormat(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn tag(self) -> &'static str {
        match self {
            Difficulty::Easy => "schedule_easy",
            Difficulty::Medium => "schedule_medium",
            Difficulty::Hard => "schedule_hard",
        }
    }

    /// Four people for the two-person question, six otherwise.
    pub fn default_participants(self) -> usize {
        match self {
            Difficulty::Easy => 4,
            Difficulty::Medium | Difficulty::Hard => 6,
        }
    }
}

pub const DEFAULT_NAMES: [&str; 12] = [
    "Alice", "Bob", "Charlie", "Dave", "Eve", "Frank", "Grace", "Heidi", "Ivan", "Judy", "Mallory", "Niaj",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator_version: String,
    pub kind: String,
    pub seed: u64,
    pub pool_digest: Option<String>,
    pub regenerations: u64,
    pub dialogue_mode: String,
}

impl Provenance {
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        let path = dir.join(PROVENANCE_FILE);
        let body = serde_json::to_string_pretty(self).expect("provenance serializes") + "\n";
        std::fs::write(&path, body).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn slots_to_interval((s, e): (u32, u32)) -> TimeInterval {
    TimeInterval::new(s * 30, e * 30)
}

/// Question and ground truth for one difficulty over a world, with the
/// first member of each group as initiator.
pub fn schedule_task(
    world: &ScheduleWorld,
    groups: &[Vec<String>; 2],
    difficulty: Difficulty,
    pools: &Pools,
    id: &str,
) -> Result<TaskInstance, BenchError> {
    let (a, b) = (groups[0][0].clone(), groups[1][0].clone());
    let sched = |who: &str| world.schedule(who).ok_or_else(|| BenchError::UnknownParticipant(who.into()));
    let (question, ground_truth, vocab) = match difficulty {
        Difficulty::Easy => (
            format!(
                "Calculate how many activities need to be deleted at least so that there are no overlapping activities between you and me ({a} and {b})?"
            ),
            GroundTruth::Count(oracle_easy(sched(&a)?, sched(&b)?)),
            Vec::new(),
        ),
        Difficulty::Medium => (
            "Please find out the activity with longest duration on the schedule of all people.".to_string(),
            GroundTruth::Names(oracle_medium(&world.schedules)?),
            pools.activities.iter().map(|x| x.name.clone()).collect(),
        ),
        Difficulty::Hard => (
            "Please find out when all our friends can join together today and list all free time spans.".to_string(),
            GroundTruth::Intervals(oracle_hard(&world.schedules).into_iter().map(slots_to_interval).collect()),
            Vec::new(),
        ),
    };
    Ok(TaskInstance {
        id: id.into(),
        question,
        metric_kind: ground_truth.expected_metric(),
        ground_truth,
        initiators: (a, b),
        dataset_tag: difficulty.tag().into(),
        answer_vocabulary: vocab,
    })
}

/// Network for a world: each group is fully connected and the two group
/// leaders know each other.
pub fn schedule_network(groups: &[Vec<String>; 2]) -> Result<SocialNetwork, BenchError> {
    let mut net = SocialNetwork::new();
    for g in groups {
        for p in g {
            net.add_individual(p, None)?;
        }
        for (i, p) in g.iter().enumerate() {
            for q in &g[i + 1..] {
                net.add_edge(p, q)?;
            }
        }
    }
    if let (Some(a), Some(b)) = (groups[0].first(), groups[1].first()) {
        net.add_edge(a, b)?;
    }
    Ok(net)
}

#[derive(Debug, Clone)]
pub struct ScheduleOptions {
    pub difficulty: Difficulty,
    pub participants: Vec<String>,
    pub pools: Pools,
    pub mode: DialogueMode,
}

impl ScheduleOptions {
    pub fn new(difficulty: Difficulty) -> Self {
        Self {
            difficulty,
            participants: DEFAULT_NAMES[..difficulty.default_participants()]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            pools: Pools::default(),
            mode: DialogueMode::Template,
        }
    }
}

/// Generates a complete schedule dataset with one task.
pub fn gen_schedule_dataset(seed: u64, opts: &ScheduleOptions) -> Result<(Dataset, ScheduleWorld, Provenance), BenchError> {
    if opts.participants.len() < 2 {
        return Err(BenchError::TooFewParticipants(opts.participants.len()));
    }
    let world = gen_schedules(seed, &opts.participants, &opts.pools)?;
    let groups = split_groups(&world.participants);
    let network = schedule_network(&groups)?;
    let messages = gen_dialogues(&world, &groups, &opts.mode)?;
    let corpus = Corpus::new(messages, &network)?;
    let id = format!("{}-{seed}", opts.difficulty.tag());
    let task = schedule_task(&world, &groups, opts.difficulty, &opts.pools, &id)?;
    let provenance = Provenance {
        generator_version: GENERATOR_VERSION.into(),
        kind: opts.difficulty.tag().into(),
        seed,
        pool_digest: Some(opts.pools.digest()),
        regenerations: world.regenerations,
        dialogue_mode: opts.mode.label().into(),
    };
    Ok((
        Dataset {
            network,
            corpus,
            tasks: vec![task],
        },
        world,
        provenance,
    ))
}

/// Writes dataset files plus provenance into `dir`.
pub fn write_generated(dir: &Path, dataset: &Dataset, provenance: &Provenance) -> Result<(), BenchError> {
    write_dataset(dir, dataset)?;
    provenance.write(dir)
}

/// Loads a prepared dataset directory (`network.txt`, `messages.tsv`,
/// `tasks.jsonl`) with full validation.
pub fn load_prepared_dataset(dir: &Path) -> Result<Dataset, BenchError> {
    Ok(read_dataset(dir)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::MetricKind;

    #[test]
    fn dataset_per_difficulty() {
        for d in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
            let (ds, world, prov) = gen_schedule_dataset(11, &ScheduleOptions::new(d)).unwrap();
            assert_eq!(ds.network.node_count(), d.default_participants());
            assert_eq!(ds.tasks[0].metric_kind, ds.tasks[0].ground_truth.expected_metric());
            assert_eq!(prov.regenerations, world.regenerations);
            assert_eq!(ds.tasks[0].dataset_tag, d.tag());
        }
    }

    #[test]
    fn group_network_shape() {
        let names: Vec<String> = DEFAULT_NAMES[..6].iter().map(|s| s.to_string()).collect();
        let net = schedule_network(&split_groups(&names)).unwrap();
        // two triangles plus the leader edge
        assert_eq!(net.edge_count(), 7);
        assert!(net.are_adjacent("Alice", "Dave"));
        assert!(!net.are_adjacent("Bob", "Eve"));
    }

    #[test]
    fn easy_truth_matches_oracle() {
        let (ds, world, _) = gen_schedule_dataset(2, &ScheduleOptions::new(Difficulty::Easy)).unwrap();
        let expected = oracle_easy(world.schedule("Alice").unwrap(), world.schedule("Charlie").unwrap());
        assert_eq!(ds.tasks[0].ground_truth, GroundTruth::Count(expected));
        assert_eq!(ds.tasks[0].metric_kind, MetricKind::CountAccuracy);
    }

    #[test]
    fn round_trip_through_files() {
        let dir = std::env::temp_dir().join(format!("iagents-bench-{}", std::process::id()));
        let (ds, _, prov) = gen_schedule_dataset(4, &ScheduleOptions::new(Difficulty::Hard)).unwrap();
        write_generated(&dir, &ds, &prov).unwrap();
        let back = load_prepared_dataset(&dir).unwrap();
        assert_eq!(back.tasks, ds.tasks);
        assert_eq!(back.corpus.messages(), ds.corpus.messages());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
