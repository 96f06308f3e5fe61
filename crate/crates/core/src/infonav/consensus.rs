use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FakeSolvedDetector, Plan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub description: String,
    pub value_a: String,
    pub value_b: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    /// Keyed by normalized slot description.
    pub merged: BTreeMap<String, String>,
    pub conflicts: Vec<Conflict>,
    /// Agreed slots over slots filled on both sides; 0 when none are.
    pub agreement_ratio: f64,
    /// Slots filled on both sides.
    pub matched: usize,
    pub agreed: usize,
}

impl ConsensusResult {
    /// Distinct slots that carried at least one genuine value.
    pub fn considered(&self) -> usize {
        self.merged.len() + self.conflicts.len()
    }

    /// Share of considered slots that survived into the merged set.
    pub fn consensus_ratio(&self) -> f64 {
        match self.considered() {
            0 => 0.0,
            n => self.merged.len() as f64 / n as f64,
        }
    }
}

/// Lowercase with collapsed whitespace.
pub fn normalize_description(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Lowercase, collapsed whitespace, trailing sentence punctuation removed.
pub fn normalize_value(text: &str) -> String {
    normalize_description(text).trim_end_matches(['.', '!', ',', ';']).to_string()
}

fn values_agree(a: &str, b: &str, normalizer: &dyn Fn(&str) -> String) -> bool {
    let (na, nb) = (normalizer(a), normalizer(b));
    match (na.parse::<f64>(), nb.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => na == nb,
    }
}

fn genuine_values(plan: &Plan, detector: &FakeSolvedDetector) -> BTreeMap<String, Option<String>> {
    let mut out: BTreeMap<String, Option<String>> = BTreeMap::new();
    for slot in &plan.slots {
        let value = slot.value().filter(|v| !detector.is_fake_value(v)).map(str::to_string);
        let entry = out.entry(normalize_description(&slot.description)).or_insert(None);
        if entry.is_none() {
            *entry = value;
        }
    }
    out
}

/// Merges two finished plans. Slots are matched by normalized description;
/// values on both sides must agree or the slot is discarded as a conflict.
/// Fake-solved values count as unknown.
pub fn consensus(a: &Plan, b: &Plan, normalizer: &dyn Fn(&str) -> String, detector: &FakeSolvedDetector) -> ConsensusResult {
    let va = genuine_values(a, detector);
    let vb = genuine_values(b, detector);
    let mut keys: Vec<&String> = va.keys().chain(vb.keys()).collect();
    keys.sort();
    keys.dedup();

    let mut result = ConsensusResult::default();
    for key in keys {
        let x = va.get(key).cloned().flatten();
        let y = vb.get(key).cloned().flatten();
        match (x, y) {
            (Some(x), Some(y)) => {
                result.matched += 1;
                if values_agree(&x, &y, normalizer) {
                    result.agreed += 1;
                    // order-independent pick keeps consensus(a,b) == consensus(b,a)
                    result.merged.insert(key.clone(), x.min(y));
                } else {
                    result.conflicts.push(Conflict {
                        description: key.clone(),
                        value_a: x,
                        value_b: y,
                    });
                }
            }
            (Some(v), None) | (None, Some(v)) => {
                result.merged.insert(key.clone(), v);
            }
            (None, None) => {}
        }
    }
    result.agreement_ratio = if result.matched == 0 {
        0.0
    } else {
        result.agreed as f64 / result.matched as f64
    };
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infonav::{SlotKind, SlotUpdate};
    use proptest::prelude::*;

    fn plan(slots: &[(&str, Option<&str>)]) -> Plan {
        let mut p = Plan::new("q", slots.iter().map(|(d, _)| (d.to_string(), SlotKind::Rationale)).collect()).unwrap();
        let updates: Vec<SlotUpdate> = slots
            .iter()
            .enumerate()
            .filter_map(|(i, (_, v))| v.map(|value| SlotUpdate { index: i, value }))
            .collect();
        p = p.apply_update(&updates, 1).unwrap();
        p
    }

    fn run(a: &Plan, b: &Plan) -> ConsensusResult {
        consensus(a, b, &normalize_value, &FakeSolvedDetector::default())
    }

    #[test]
    fn agreeing_values_merge() {
        let r = run(&plan(&[("x", Some("3"))]), &plan(&[("x", Some("3"))]));
        assert_eq!(r.merged, BTreeMap::from([("x".to_string(), "3".to_string())]));
        assert_eq!(r.agreement_ratio, 1.0);
    }

    #[test]
    fn conflicting_values_are_discarded() {
        let r = run(&plan(&[("x", Some("3"))]), &plan(&[("x", Some("4"))]));
        assert!(r.merged.is_empty());
        assert_eq!(
            r.conflicts,
            vec![Conflict {
                description: "x".into(),
                value_a: "3".into(),
                value_b: "4".into()
            }]
        );
        assert_eq!(r.agreement_ratio, 0.0);
    }

    #[test]
    fn single_source_merges() {
        let r = run(
            &plan(&[("x", Some("3")), ("y", None)]),
            &plan(&[("x", Some("3")), ("Y ", Some("blue"))]),
        );
        assert_eq!(
            r.merged,
            BTreeMap::from([("x".to_string(), "3".to_string()), ("y".to_string(), "blue".to_string())])
        );
        assert_eq!(r.consensus_ratio(), 1.0);
    }

    #[test]
    fn numeric_and_fake_handling() {
        let r = run(
            &plan(&[("n", Some("3.0")), ("f", Some("unknown"))]),
            &plan(&[("n", Some("3")), ("f", Some("red"))]),
        );
        assert_eq!(r.merged.get("n").map(String::as_str), Some("3"));
        assert_eq!(r.merged.get("f").map(String::as_str), Some("red"));
        assert!(r.conflicts.is_empty());
    }

    proptest! {
        #[test]
        fn symmetric(a in proptest::collection::vec((0..5usize, proptest::option::of(0..3u8)), 1..6),
                     b in proptest::collection::vec((0..5usize, proptest::option::of(0..3u8)), 1..6)) {
            let build = |spec: &[(usize, Option<u8>)]| {
                let names: Vec<String> = spec.iter().map(|(d, _)| format!("slot {d}")).collect();
                let vals: Vec<Option<String>> = spec.iter().map(|(_, v)| v.map(|x| format!("v{x}"))).collect();
                let pairs: Vec<(&str, Option<&str>)> = names.iter().zip(&vals).map(|(n, v)| (n.as_str(), v.as_deref())).collect();
                plan(&pairs)
            };
            let (pa, pb) = (build(&a), build(&b));
            let ab = run(&pa, &pb);
            let ba = run(&pb, &pa);
            prop_assert_eq!(&ab.merged, &ba.merged);
            prop_assert_eq!(ab.agreement_ratio, ba.agreement_ratio);
            prop_assert!(ab.conflicts.iter().all(|c| !ab.merged.contains_key(&c.description)));
        }
    }
}
