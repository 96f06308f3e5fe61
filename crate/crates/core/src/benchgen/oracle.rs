//! Ground-truth algorithms for the three schedule questions.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::schedule::{PersonSchedule, SLOTS};
use super::BenchError;

/// Minimum number of intervals to delete from `a` and `b` together so that no
/// interval of `a` overlaps one of `b`. Intervals are half-open and pairwise
/// disjoint within each side.
///
/// This is a minimum vertex cover of the bipartite overlap graph, which by
/// König's theorem equals a maximum matching. Because `a`'s intervals are
/// disjoint, every `b` interval overlaps a contiguous run of them, so the
/// graph is convex and Glover's greedy finds the matching: walk `a` in order
/// and match each to the compatible `b` whose run ends first.
pub fn min_deletions(a: &[(u32, u32)], b: &[(u32, u32)]) -> usize {
    let mut a = a.to_vec();
    a.sort_unstable();
    let mut runs: Vec<(usize, usize)> = b
        .iter()
        .filter_map(|&(s, e)| {
            let lo = a.partition_point(|&(_, ae)| ae <= s);
            let hi = a.partition_point(|&(as_, _)| as_ < e);
            (lo < hi).then(|| (lo, hi - 1))
        })
        .collect();
    runs.sort_unstable();
    let mut heap = BinaryHeap::new();
    let mut next = 0;
    let mut matched = 0;
    for i in 0..a.len() {
        while next < runs.len() && runs[next].0 == i {
            heap.push(Reverse(runs[next].1));
            next += 1;
        }
        while let Some(&Reverse(hi)) = heap.peek() {
            if hi < i {
                heap.pop();
            } else {
                break;
            }
        }
        if heap.pop().is_some() {
            matched += 1;
        }
    }
    matched
}

pub fn oracle_easy(a: &PersonSchedule, b: &PersonSchedule) -> u64 {
    min_deletions(&a.intervals(), &b.intervals()) as u64
}

/// Names of every activity whose duration equals the global maximum.
pub fn oracle_medium(schedules: &[PersonSchedule]) -> Result<BTreeSet<String>, BenchError> {
    let all = schedules.iter().flat_map(|s| &s.assignments);
    let max = all.clone().map(|a| a.duration()).max().ok_or(BenchError::EmptySchedules)?;
    Ok(all.filter(|a| a.duration() == max).map(|a| a.activity.clone()).collect())
}

/// Maximal slot ranges in which nobody is busy, ascending.
pub fn oracle_hard(schedules: &[PersonSchedule]) -> Vec<(u32, u32)> {
    let mut busy: Vec<(u32, u32)> = schedules.iter().flat_map(|s| s.intervals()).collect();
    busy.sort_unstable();
    let mut free = Vec::new();
    let mut cursor = 0;
    for (s, e) in busy {
        if s > cursor {
            free.push((cursor, s));
        }
        cursor = cursor.max(e);
    }
    if cursor < SLOTS {
        free.push((cursor, SLOTS));
    }
    free
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(name: &str, spans: &[(u32, u32)]) -> PersonSchedule {
        let mut s = PersonSchedule::new(name);
        for (i, &(a, b)) in spans.iter().enumerate() {
            s.place(&format!("{name}{i}"), a, b, vec![]).unwrap();
        }
        s
    }

    #[test]
    fn easy_cases() {
        assert_eq!(min_deletions(&[(2, 6)], &[(4, 8)]), 1);
        assert_eq!(min_deletions(&[(0, 2)], &[(2, 4)]), 0);
        assert_eq!(min_deletions(&[(1, 3), (4, 6)], &[(2, 5)]), 1);
        // one long interval against three short ones
        assert_eq!(min_deletions(&[(0, 10)], &[(1, 2), (3, 4), (5, 6)]), 1);
        assert_eq!(min_deletions(&[(0, 2), (2, 4)], &[(1, 3), (3, 5)]), 2);
        assert_eq!(min_deletions(&[], &[(1, 3)]), 0);
    }

    #[test]
    fn medium_ties_kept() {
        let a = sched("a", &[(0, 4), (10, 12)]);
        let b = sched("b", &[(20, 24)]);
        assert_eq!(
            oracle_medium(&[a, b]).unwrap(),
            ["a0".to_string(), "b0".to_string()].into_iter().collect()
        );
        assert!(oracle_medium(&[PersonSchedule::new("x")]).is_err());
    }

    #[test]
    fn hard_cases() {
        assert!(oracle_hard(&[sched("a", &[(0, 48)])]).is_empty());
        assert!(oracle_hard(&[PersonSchedule::new("a"), sched("b", &[(0, 48)])]).is_empty());
        let a = sched("a", &[(2, 4), (10, 12)]);
        let b = sched("b", &[(4, 6)]);
        assert_eq!(oracle_hard(&[a, b]), vec![(0, 2), (6, 10), (12, 48)]);
    }
}
