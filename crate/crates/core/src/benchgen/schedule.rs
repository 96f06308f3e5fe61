//! Seeded daily schedules on a 48 half-hour slot grid.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BenchError;

pub const SLOTS: u32 = 48;
pub const MAX_ACTIVITIES_PER_PERSON: usize = 10;
/// Attempts before giving up on a seed; each retry uses a fresh ChaCha stream.
pub const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActivityKind {
    Single,
    Multi {
        required_participants: usize,
    },
    /// Allowed start slots are `window_start..=window_end`.
    Routine {
        window_start: u32,
        window_end: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub name: String,
    /// Length in half-hour slots.
    pub duration: u32,
    #[serde(flatten)]
    pub kind: ActivityKind,
}

impl Activity {
    fn new(name: &str, duration: u32, kind: ActivityKind) -> Self {
        Self {
            name: name.into(),
            duration,
            kind,
        }
    }
}

/// Activity pools plus the slot range where single and multi-person
/// activities may be placed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pools {
    pub activities: Vec<Activity>,
    pub day_start: u32,
    pub day_end: u32,
}

impl Default for Pools {
    fn default() -> Self {
        use ActivityKind::*;
        let single = [
            ("yoga", 4),
            ("jogging", 2),
            ("reading", 3),
            ("piano practice", 2),
            ("painting", 4),
            ("grocery shopping", 2),
            ("swimming", 3),
            ("gardening", 4),
            ("meditation", 1),
            ("coding project", 6),
            ("laundry", 2),
            ("guitar lesson", 2),
            ("baking", 3),
            ("journaling", 1),
            ("chess study", 2),
            ("cycling", 4),
        ];
        let multi = [
            ("team meeting", 3, 2),
            ("badminton match", 2, 2),
            ("study group", 4, 2),
            ("hiking trip", 6, 2),
            ("board game night", 4, 3),
            ("movie outing", 5, 3),
            ("band rehearsal", 3, 3),
            ("cooking class", 4, 2),
        ];
        let routine = [("breakfast", 1, 14, 18), ("lunch", 2, 23, 27), ("dinner", 2, 35, 40)];
        let mut activities: Vec<Activity> = single.iter().map(|(n, d)| Activity::new(n, *d, Single)).collect();
        activities.extend(
            multi
                .iter()
                .map(|(n, d, r)| Activity::new(n, *d, Multi { required_participants: *r })),
        );
        activities.extend(routine.iter().map(|(n, d, s, e)| {
            Activity::new(
                n,
                *d,
                Routine {
                    window_start: *s,
                    window_end: *e,
                },
            )
        }));
        Self {
            activities,
            day_start: 14,
            day_end: 44,
        }
    }
}

impl Pools {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidPools(m));
        if self.activities.is_empty() {
            return bad("no activities".into());
        }
        if self.day_start >= self.day_end || self.day_end > SLOTS {
            return bad(format!("bad day window {}..{}", self.day_start, self.day_end));
        }
        let mut names = std::collections::BTreeSet::new();
        for a in &self.activities {
            if a.name.trim().is_empty() {
                return bad("empty activity name".into());
            }
            if !names.insert(a.name.to_lowercase()) {
                return bad(format!("duplicate activity `{}`", a.name));
            }
            if a.duration == 0 || a.duration > SLOTS {
                return bad(format!("`{}` has duration {}", a.name, a.duration));
            }
            match a.kind {
                ActivityKind::Multi { required_participants } if required_participants < 2 => {
                    return bad(format!("`{}` needs at least 2 participants", a.name))
                }
                ActivityKind::Routine { window_start, window_end } if window_start > window_end || window_end + a.duration > SLOTS => {
                    return bad(format!("`{}` has an invalid start window", a.name))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("pools serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn get(&self, name: &str) -> Option<&Activity> {
        self.activities.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub activity: String,
    pub start: u32,
    pub end: u32,
    /// Other participants of a multi-person activity.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub co_participants: Vec<String>,
}

impl Assignment {
    pub fn duration(&self) -> u32 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonSchedule {
    pub individual: String,
    pub time_vector: Vec<bool>,
    /// Sorted by start slot.
    pub assignments: Vec<Assignment>,
}

impl PersonSchedule {
    pub fn new(individual: &str) -> Self {
        Self {
            individual: individual.into(),
            time_vector: vec![false; SLOTS as usize],
            assignments: Vec::new(),
        }
    }

    pub fn is_free(&self, start: u32, end: u32) -> bool {
        end <= SLOTS && start < end && !self.time_vector[start as usize..end as usize].iter().any(|b| *b)
    }

    pub fn place(&mut self, activity: &str, start: u32, end: u32, co_participants: Vec<String>) -> Result<(), BenchError> {
        if !self.is_free(start, end) {
            return Err(BenchError::Overlap {
                individual: self.individual.clone(),
                activity: activity.into(),
            });
        }
        self.time_vector[start as usize..end as usize].fill(true);
        let at = self.assignments.partition_point(|a| a.start < start);
        self.assignments.insert(
            at,
            Assignment {
                activity: activity.into(),
                start,
                end,
                co_participants,
            },
        );
        Ok(())
    }

    pub fn intervals(&self) -> Vec<(u32, u32)> {
        self.assignments.iter().map(|a| (a.start, a.end)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceVector {
    pub individual: String,
    /// One flag per pool activity, in pool order.
    pub bits: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleWorld {
    pub seed: u64,
    /// Failed attempts before this world was produced.
    pub regenerations: u64,
    pub participants: Vec<String>,
    pub preferences: Vec<PreferenceVector>,
    pub schedules: Vec<PersonSchedule>,
}

impl ScheduleWorld {
    pub fn schedule(&self, who: &str) -> Option<&PersonSchedule> {
        self.schedules.iter().find(|s| s.individual == who)
    }
}

/// Number of multi-person activities drawn for a group.
pub fn multi_activity_count(participants: usize) -> usize {
    participants.div_ceil(2)
}

struct Infeasible;

fn attempt(
    rng: &mut ChaCha8Rng,
    participants: &[String],
    pools: &Pools,
) -> Result<(Vec<PreferenceVector>, Vec<PersonSchedule>), Infeasible> {
    let preferences: Vec<PreferenceVector> = participants
        .iter()
        .map(|p| PreferenceVector {
            individual: p.clone(),
            bits: pools.activities.iter().map(|_| rng.gen_bool(0.5)).collect(),
        })
        .collect();
    let mut schedules: Vec<PersonSchedule> = participants.iter().map(|p| PersonSchedule::new(p)).collect();

    // phase 1: multi-person activities
    let willing = |i: usize| -> Vec<usize> { (0..participants.len()).filter(|&p| preferences[p].bits[i]).collect() };
    let candidates: Vec<usize> = pools
        .activities
        .iter()
        .enumerate()
        .filter_map(|(i, a)| match a.kind {
            ActivityKind::Multi { required_participants } if willing(i).len() >= required_participants => Some(i),
            _ => None,
        })
        .collect();
    let n = multi_activity_count(participants.len()).min(candidates.len());
    let chosen: Vec<usize> = candidates.choose_multiple(rng, n).copied().collect();
    for i in chosen {
        let act = &pools.activities[i];
        let ActivityKind::Multi { required_participants } = act.kind else {
            unreachable!()
        };
        let pool = willing(i);
        let mut placed = false;
        for _ in 0..8 {
            let group: Vec<usize> = pool.choose_multiple(rng, required_participants).copied().collect();
            if group.iter().any(|&p| schedules[p].assignments.len() >= MAX_ACTIVITIES_PER_PERSON) {
                continue;
            }
            let starts: Vec<u32> = (pools.day_start..=pools.day_end.saturating_sub(act.duration))
                .filter(|&s| group.iter().all(|&p| schedules[p].is_free(s, s + act.duration)))
                .collect();
            let Some(&s) = starts.choose(rng) else {
                continue;
            };
            for &p in &group {
                let others = group.iter().filter(|&&o| o != p).map(|&o| participants[o].clone()).collect();
                schedules[p].place(&act.name, s, s + act.duration, others).map_err(|_| Infeasible)?;
            }
            placed = true;
            break;
        }
        if !placed {
            return Err(Infeasible);
        }
    }

    // phase 2: routines inside their start windows
    for sched in schedules.iter_mut() {
        for act in &pools.activities {
            let ActivityKind::Routine { window_start, window_end } = act.kind else {
                continue;
            };
            if sched.assignments.len() >= MAX_ACTIVITIES_PER_PERSON {
                break;
            }
            let starts: Vec<u32> = (window_start..=window_end)
                .filter(|&s| sched.is_free(s, s + act.duration))
                .collect();
            let &s = starts.choose(rng).ok_or(Infeasible)?;
            sched.place(&act.name, s, s + act.duration, Vec::new()).map_err(|_| Infeasible)?;
        }
    }

    // phase 3: two-pointer sweep over free gaps, filling preferred singles
    for (p, sched) in schedules.iter_mut().enumerate() {
        let mut wanted: Vec<&Activity> = pools
            .activities
            .iter()
            .enumerate()
            .filter(|(i, a)| a.kind == ActivityKind::Single && preferences[p].bits[*i])
            .map(|(_, a)| a)
            .collect();
        wanted.shuffle(rng);
        let mut i = pools.day_start;
        while i < pools.day_end && !wanted.is_empty() && sched.assignments.len() < MAX_ACTIVITIES_PER_PERSON {
            if sched.time_vector[i as usize] {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < pools.day_end && !sched.time_vector[j as usize] {
                j += 1;
            }
            let mut cursor = i;
            while sched.assignments.len() < MAX_ACTIVITIES_PER_PERSON {
                cursor += rng.gen_range(0..=2);
                let Some(k) = wanted.iter().position(|a| cursor + a.duration <= j) else {
                    break;
                };
                let act = wanted.remove(k);
                sched
                    .place(&act.name, cursor, cursor + act.duration, Vec::new())
                    .map_err(|_| Infeasible)?;
                cursor += act.duration;
            }
            i = j;
        }
    }
    Ok((preferences, schedules))
}

/// Generates one world. Multi-person activities are allocated first, then
/// routines, then single activities in the remaining gaps. A seed whose
/// placement turns out infeasible is retried on the next ChaCha stream and
/// the retry count is kept in `regenerations`.
pub fn gen_schedules(seed: u64, participants: &[String], pools: &Pools) -> Result<ScheduleWorld, BenchError> {
    pools.validate()?;
    if participants.len() < 2 {
        return Err(BenchError::TooFewParticipants(participants.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for stream in 0..MAX_ATTEMPTS {
        rng.set_stream(stream);
        rng.set_word_pos(0);
        if let Ok((preferences, schedules)) = attempt(&mut rng, participants, pools) {
            return Ok(ScheduleWorld {
                seed,
                regenerations: stream,
                participants: participants.to_vec(),
                preferences,
                schedules,
            });
        }
    }
    Err(BenchError::Infeasible { attempts: MAX_ATTEMPTS })
}

pub fn format_slot(slot: u32) -> String {
    let minutes = slot * 30;
    format!("{}:{:02}", minutes / 60, minutes % 60)
}
