use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use super::{ClearQuery, Hit, HitKind, MemoryError, RetrievalResult};
use crate::corpus::{Corpus, Message, SocialNetwork};

/// Exact-match store over one individual's visible messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClearMemory {
    owner: String,
    messages: Vec<Message>,
    lowered: Vec<String>,
    sessions: BTreeMap<String, Range<usize>>,
}

impl ClearMemory {
    pub fn build(owner: &str, network: &SocialNetwork, corpus: &Corpus) -> Result<Self, MemoryError> {
        let messages: Vec<Message> = corpus.visible_messages(network, owner)?.into_iter().cloned().collect();
        let lowered = messages.iter().map(|m| m.text.to_lowercase()).collect();
        let mut sessions: BTreeMap<String, Range<usize>> = BTreeMap::new();
        for (i, m) in messages.iter().enumerate() {
            sessions
                .entry(m.session_id.clone())
                .and_modify(|r| r.end = i + 1)
                .or_insert(i..i + 1);
        }
        Ok(Self {
            owner: owner.to_string(),
            messages,
            lowered,
            sessions,
        })
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Keyword matches (case-insensitive substring) expanded by the context
    /// window inside their session, ordered by `(session_id, seq)` and cut to
    /// the first `limit` messages.
    pub fn query(&self, q: &ClearQuery) -> Result<RetrievalResult, MemoryError> {
        q.validate()?;
        let keywords: Vec<String> = q.keywords.iter().map(|k| k.trim().to_lowercase()).collect();
        let mut seeds = BTreeSet::new();
        let mut picked = BTreeSet::new();
        for (i, text) in self.lowered.iter().enumerate() {
            if !keywords.iter().any(|k| text.contains(k.as_str())) {
                continue;
            }
            seeds.insert(i);
            let span = &self.sessions[&self.messages[i].session_id];
            let lo = i.saturating_sub(q.context_window).max(span.start);
            let hi = (i + q.context_window + 1).min(span.end);
            picked.extend(lo..hi);
        }
        let hits = picked
            .into_iter()
            .take(q.limit)
            .map(|i| {
                let m = &self.messages[i];
                Hit {
                    kind: HitKind::Message,
                    session_id: m.session_id.clone(),
                    seq_start: m.seq,
                    seq_end: m.seq,
                    score: if seeds.contains(&i) { 1.0 } else { 0.0 },
                    text: m.text.clone(),
                    sender: Some(m.sender.clone()),
                    receiver: Some(m.receiver.clone()),
                }
            })
            .collect();
        Ok(RetrievalResult { hits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_messages, parse_network};

    fn fixture() -> (SocialNetwork, Corpus) {
        let net = parse_network("person a\nperson b\nperson c\n").unwrap();
        let corpus = Corpus::new(
            parse_messages(
                "s1\t0\ta\tb\tmorning\n\
                 s1\t1\tb\ta\tthe Blackout hit us\n\
                 s1\t2\ta\tb\twow\n\
                 s1\t3\tb\ta\tcandles\n\
                 s2\t0\tb\tc\tblackout again\n\
                 s3\t0\ta\tc\tanother blackout story\n",
            )
            .unwrap(),
            &net,
        )
        .unwrap();
        (net, corpus)
    }

    fn q(k: &[&str], w: usize, l: usize) -> ClearQuery {
        ClearQuery::new(k.iter().map(|s| s.to_string()).collect(), w, l).unwrap()
    }

    #[test]
    fn keyword_matches_only() {
        let (net, corpus) = fixture();
        let mem = ClearMemory::build("a", &net, &corpus).unwrap();
        assert_eq!(mem.len(), 5);
        let r = mem.query(&q(&["blackout"], 0, 10)).unwrap();
        let got: Vec<_> = r.hits.iter().map(|h| (h.session_id.as_str(), h.seq_start)).collect();
        assert_eq!(got, [("s1", 1), ("s3", 0)]);
    }

    #[test]
    fn window_stays_in_session() {
        let (net, corpus) = fixture();
        let mem = ClearMemory::build("a", &net, &corpus).unwrap();
        let r = mem.query(&q(&["wow"], 1, 10)).unwrap();
        let seqs: Vec<_> = r.hits.iter().map(|h| h.seq_start).collect();
        assert_eq!(seqs, [1, 2, 3]);
        let r = mem.query(&q(&["another"], 3, 10)).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn limit_keeps_earliest() {
        let (net, corpus) = fixture();
        let mem = ClearMemory::build("a", &net, &corpus).unwrap();
        let r = mem.query(&q(&["o"], 0, 1)).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!((r.hits[0].session_id.as_str(), r.hits[0].seq_start), ("s1", 0));
    }

    #[test]
    fn empty_owner_returns_nothing() {
        let (mut net, corpus) = fixture();
        net.add_individual("d", None).unwrap();
        let mem = ClearMemory::build("d", &net, &corpus).unwrap();
        assert!(mem.is_empty());
        assert!(mem.query(&q(&["blackout"], 2, 5)).unwrap().is_empty());
        assert!(ClearMemory::build("zz", &net, &corpus).is_err());
    }

    #[test]
    fn invalid_queries_rejected() {
        assert!(ClearQuery::new(vec![], 0, 1).is_err());
        assert!(ClearQuery::new(vec!["x".into()], 0, 0).is_err());
        assert!(ClearQuery::new(vec![" ".into()], 0, 1).is_err());
    }
}
