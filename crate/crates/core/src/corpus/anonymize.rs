use std::collections::{BTreeMap, BTreeSet};

use regex::{Regex, RegexBuilder};

use super::{Corpus, CorpusError, Dataset, GroundTruth, Message, SocialNetwork};

pub type RenameMap = BTreeMap<String, String>;

/// Renames individuals everywhere: ids, relationships, message endpoints,
/// task initiators, and whole-word case-insensitive mentions in free text.
///
/// All names are replaced in a single pass, so chains like `a→b, b→c` are
/// rejected by the collision check rather than applied transitively.
pub fn anonymize(dataset: &Dataset, map: &RenameMap) -> Result<Dataset, CorpusError> {
    if map.is_empty() {
        return Ok(dataset.clone());
    }
    let mut targets = BTreeSet::new();
    for (old, new) in map {
        if !dataset.network.contains(old) {
            return Err(CorpusError::UnknownIndividual(old.clone()));
        }
        if new.is_empty() || new.chars().any(char::is_whitespace) {
            return Err(CorpusError::NameCollision(format!("invalid new name `{new}`")));
        }
        if !targets.insert(new.to_lowercase()) {
            return Err(CorpusError::NameCollision(format!("`{new}` is the target of more than one rename")));
        }
        if dataset.network.ids().any(|id| id.eq_ignore_ascii_case(new)) {
            return Err(CorpusError::NameCollision(format!("`{new}` already exists in the network")));
        }
    }

    let pattern = map.keys().map(|k| regex::escape(k)).collect::<Vec<_>>().join("|");
    let re: Regex = RegexBuilder::new(&format!(r"\b(?:{pattern})\b"))
        .case_insensitive(true)
        .build()
        .expect("escaped alternation compiles");
    let lower: BTreeMap<String, &String> = map.iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
    let rewrite = |text: &str| -> String {
        re.replace_all(text, |caps: &regex::Captures| lower[&caps[0].to_lowercase()].clone())
            .into_owned()
    };
    let rename = |id: &str| map.get(id).cloned().unwrap_or_else(|| id.to_string());

    let mut network = SocialNetwork::new();
    for p in dataset.network.individuals() {
        network.add_individual(&rename(&p.id), p.persona.as_deref().map(rewrite))?;
    }
    for (a, b) in dataset.network.edges() {
        network.add_edge(&rename(a), &rename(b))?;
    }

    let messages: Vec<Message> = dataset
        .corpus
        .messages()
        .iter()
        .map(|m| Message {
            session_id: m.session_id.clone(),
            seq: m.seq,
            sender: rename(&m.sender),
            receiver: rename(&m.receiver),
            text: rewrite(&m.text),
        })
        .collect();
    let corpus = Corpus::new(messages, &network)?;

    let tasks = dataset
        .tasks
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.question = rewrite(&t.question);
            t.initiators = (rename(&t.initiators.0), rename(&t.initiators.1));
            t.ground_truth = match t.ground_truth {
                GroundTruth::Text(s) => GroundTruth::Text(rewrite(&s)),
                GroundTruth::Names(names) => GroundTruth::Names(names.iter().map(|n| rewrite(n)).collect()),
                other => other,
            };
            t.answer_vocabulary = t.answer_vocabulary.iter().map(|v| rewrite(v)).collect();
            t
        })
        .collect();

    Ok(Dataset { network, corpus, tasks })
}
