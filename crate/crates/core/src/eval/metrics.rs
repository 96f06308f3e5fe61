use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::EvalError;
use crate::corpus::TimeInterval;

const ARTICLES: [&str; 3] = ["a", "an", "the"];
const HONORIFICS: [&str; 7] = ["mr", "mrs", "ms", "miss", "dr", "prof", "sir"];
const NUMBER_WORDS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Lowercases, turns punctuation into spaces, drops articles and collapses
/// whitespace.
pub fn normalize_answer(text: &str) -> String {
    words(text)
        .into_iter()
        .filter(|w| !ARTICLES.contains(&w.as_str()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// True when `needle` occurs in `haystack` as a run of whole words. Both are
/// expected to be normalized already.
pub fn contains_words(haystack: &str, needle: &str) -> bool {
    !needle.is_empty() && format!(" {haystack} ").contains(&format!(" {needle} "))
}

/// 1.0 when the normalized prediction equals or contains the normalized
/// ground truth, else 0.0.
pub fn metric_accuracy_normalized(prediction: &str, ground_truth: &str) -> f64 {
    let (p, g) = (normalize_answer(prediction), normalize_answer(ground_truth));
    if !g.is_empty() && (p == g || contains_words(&p, &g)) {
        1.0
    } else {
        0.0
    }
}

/// Reads the judge's verdict from the last `0` or `1` token of its reply.
pub fn parse_judge_verdict(reply: &str) -> Option<bool> {
    reply
        .split(|c: char| !c.is_ascii_alphanumeric())
        .rev()
        .find(|t| !t.is_empty())
        .and_then(|t| match t {
            "1" => Some(true),
            "0" => Some(false),
            _ => None,
        })
}

/// Last standalone integer in the text, written with digits or spelled out
/// from zero to twenty. Clock times and decimals are not standalone.
pub fn extract_count(text: &str) -> Option<u64> {
    text.split_whitespace()
        .rev()
        .filter_map(|raw| {
            let t = raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
            if !t.is_empty() && t.chars().all(|c| c.is_ascii_digit()) {
                t.parse().ok()
            } else {
                NUMBER_WORDS.iter().position(|w| *w == t).map(|n| n as u64)
            }
        })
        .next()
}

/// Lowercase, no punctuation, no honorifics, single spaces.
pub fn normalize_name(name: &str) -> String {
    words(name)
        .into_iter()
        .filter(|w| !HONORIFICS.contains(&w.as_str()))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn metric_f1(pred: &BTreeSet<String>, gt: &BTreeSet<String>, normalizer: &dyn Fn(&str) -> String) -> f64 {
    let p: BTreeSet<String> = pred.iter().map(|s| normalizer(s)).filter(|s| !s.is_empty()).collect();
    let g: BTreeSet<String> = gt.iter().map(|s| normalizer(s)).filter(|s| !s.is_empty()).collect();
    let hit = p.intersection(&g).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let precision = hit / p.len() as f64;
    let recall = hit / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Maps free text onto a name set: vocabulary entries mentioned in the text,
/// or comma/"and"/line separated items when no vocabulary is given.
pub fn extract_names(text: &str, vocabulary: &[String]) -> BTreeSet<String> {
    if !vocabulary.is_empty() {
        let hay = normalize_name(text);
        return vocabulary
            .iter()
            .filter(|v| contains_words(&hay, &normalize_name(v)))
            .cloned()
            .collect();
    }
    static SEP: OnceLock<Regex> = OnceLock::new();
    let sep = SEP.get_or_init(|| Regex::new(r"(?i),|;|\n|\band\b").expect("valid regex"));
    sep.split(text)
        .map(|s| s.trim().trim_end_matches('.').trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn merged(intervals: &[TimeInterval]) -> Result<Vec<TimeInterval>, EvalError> {
    let mut v = intervals.to_vec();
    if let Some(bad) = v.iter().find(|i| i.start >= i.end) {
        return Err(EvalError::MalformedInterval {
            start: bad.start,
            end: bad.end,
        });
    }
    v.sort();
    let mut out: Vec<TimeInterval> = Vec::new();
    for i in v {
        match out.last_mut() {
            Some(last) if i.start <= last.end => last.end = last.end.max(i.end),
            _ => out.push(i),
        }
    }
    Ok(out)
}

fn total(v: &[TimeInterval]) -> u64 {
    v.iter().map(|i| i.duration() as u64).sum()
}

/// Intersection duration over union duration, after unioning each side.
/// Two empty sides agree vacuously and score 1.0.
pub fn metric_iou(pred: &[TimeInterval], gt: &[TimeInterval]) -> Result<f64, EvalError> {
    let (p, g) = (merged(pred)?, merged(gt)?);
    if p.is_empty() && g.is_empty() {
        return Ok(1.0);
    }
    let (mut i, mut j, mut inter) = (0, 0, 0u64);
    while i < p.len() && j < g.len() {
        let lo = p[i].start.max(g[j].start);
        let hi = p[i].end.min(g[j].end);
        if lo < hi {
            inter += (hi - lo) as u64;
        }
        if p[i].end < g[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = total(&p) + total(&g) - inter;
    Ok(inter as f64 / union as f64)
}

fn to_minutes(h: u32, m: u32, meridiem: Option<&str>) -> Option<u32> {
    let h = match meridiem {
        Some("am") if h == 12 => 0,
        Some("am") => h,
        Some("pm") if h == 12 => 12,
        Some("pm") => h + 12,
        _ => h,
    };
    (h <= 24 && m < 60 && h * 60 + m <= 24 * 60).then_some(h * 60 + m)
}

/// Time spans such as `9:00-11:00`, `9:00 to 11:30` or `2pm - 4pm`.
pub fn parse_intervals(text: &str) -> Vec<TimeInterval> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)\b(\d{1,2})(?::(\d{2}))?\s*([ap]m)?\s*(?:-|–|—|to|until|till)\s*(\d{1,2})(?::(\d{2}))?\s*([ap]m)?\b")
            .expect("valid regex")
    });
    let mut out = Vec::new();
    for c in re.captures_iter(text) {
        let num = |i: usize| c.get(i).map_or(Some(0), |m| m.as_str().parse::<u32>().ok());
        let mer = |i: usize| c.get(i).map(|m| m.as_str().to_lowercase());
        let (Some(h1), Some(m1), Some(h2), Some(m2)) = (num(1), num(2), num(4), num(5)) else {
            continue;
        };
        let end_mer = mer(6);
        let start_mer = mer(3).or_else(|| end_mer.clone());
        let (Some(s), Some(e)) = (to_minutes(h1, m1, start_mer.as_deref()), to_minutes(h2, m2, end_mer.as_deref())) else {
            continue;
        };
        if s < e {
            out.push(TimeInterval::new(s, e));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(metric_accuracy_normalized("Ross Geller", "Ross Geller"), 1.0);
        assert_eq!(
            metric_accuracy_normalized("It was Ross Geller who arrived late", "Ross Geller"),
            1.0
        );
        assert_eq!(metric_accuracy_normalized("Monica", "Ross Geller"), 0.0);
        assert_eq!(
            metric_accuracy_normalized("The answer: reading mystery novels!", "reading mystery novels"),
            1.0
        );
        // whole words only
        assert_eq!(metric_accuracy_normalized("Rossy", "Ross"), 0.0);
    }

    #[test]
    fn count_cases() {
        assert_eq!(extract_count("You need to delete 1 activity"), Some(1));
        assert_eq!(extract_count("three activities, I believe"), Some(3));
        assert_eq!(extract_count("no conflicts at all"), None);
        assert_eq!(extract_count("From 9:00 we have 2, so twelve."), Some(12));
        assert_eq!(extract_count("Answer: 4."), Some(4));
    }

    #[test]
    fn f1_cases() {
        let n = &normalize_name;
        assert_eq!(metric_f1(&set(&["A", "B"]), &set(&["A", "B"]), n), 1.0);
        assert_eq!(metric_f1(&set(&["A", "B"]), &set(&["A", "C"]), n), 0.5);
        assert_eq!(metric_f1(&set(&[]), &set(&["A"]), n), 0.0);
        assert_eq!(metric_f1(&set(&["Dr. Ross"]), &set(&["ross"]), n), 1.0);
    }

    #[test]
    fn iou_cases() {
        let i = |a: u32, b: u32| TimeInterval::new(a * 60, b * 60);
        assert!((metric_iou(&[i(9, 12)], &[i(10, 14)]).unwrap() - 0.4).abs() < 1e-9);
        assert_eq!(metric_iou(&[i(9, 12)], &[i(9, 12)]).unwrap(), 1.0);
        assert_eq!(metric_iou(&[i(1, 2)], &[i(3, 4)]).unwrap(), 0.0);
        assert_eq!(metric_iou(&[], &[]).unwrap(), 1.0);
        assert_eq!(metric_iou(&[], &[i(1, 2)]).unwrap(), 0.0);
        // overlapping predictions are unioned first
        assert_eq!(metric_iou(&[i(9, 11), i(10, 12)], &[i(9, 12)]).unwrap(), 1.0);
        assert!(metric_iou(&[TimeInterval::new(5, 5)], &[]).is_err());
    }

    #[test]
    fn interval_parsing() {
        assert_eq!(
            parse_intervals("Free: 0:00-7:00, 9:30 to 11:00 and 22:00 - 24:00."),
            vec![
                TimeInterval::new(0, 420),
                TimeInterval::new(570, 660),
                TimeInterval::new(1320, 1440)
            ]
        );
        assert_eq!(parse_intervals("2pm-4pm"), vec![TimeInterval::new(840, 960)]);
        assert_eq!(parse_intervals("11am to 1pm"), vec![TimeInterval::new(660, 780)]);
        assert!(parse_intervals("nothing").is_empty());
    }

    #[test]
    fn names_from_text() {
        let vocab = vec!["yoga".to_string(), "hiking trip".to_string(), "reading".to_string()];
        assert_eq!(
            extract_names("The longest are the Hiking Trip and yoga.", &vocab),
            set(&["hiking trip", "yoga"])
        );
        assert_eq!(
            extract_names("yoga, hiking trip and chess", &[]),
            set(&["yoga", "hiking trip", "chess"])
        );
    }

    #[test]
    fn judge_verdicts() {
        assert_eq!(parse_judge_verdict("The prediction matches. 1"), Some(true));
        assert_eq!(parse_judge_verdict("0."), Some(false));
        assert_eq!(parse_judge_verdict("yes"), None);
    }
}
