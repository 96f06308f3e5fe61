//! Needle-in-persona instances: a persona statement is planted in two
//! dialogues whose speakers are not adjacent, and the agents of the two
//! people in between must find it.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dialogue::{split_dialogue, DialogueMode};
use super::BenchError;
use crate::backend::ChatMessage;
use crate::corpus::{Corpus, Dataset, GroundTruth, Message, MetricKind, SocialNetwork, TaskInstance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Needle {
    /// First-person sentence the target individuals say.
    pub statement: String,
    /// Short answer phrase, used as ground truth.
    pub answer: String,
    /// Contrasting sentence for the opposite-persona variant.
    pub opposite: String,
}

/// A two-person dialogue; each line is spoken by `speakers.0` (false) or
/// `speakers.1` (true).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDialogue {
    pub speakers: (String, String),
    pub lines: Vec<(bool, String)>,
}

impl PairDialogue {
    fn from_pool(a: &str, b: &str, lines: &[(bool, &str)]) -> Self {
        Self {
            speakers: (a.into(), b.into()),
            lines: lines.iter().map(|(s, t)| (*s, t.to_string())).collect(),
        }
    }

    fn session(&self) -> String {
        format!("{}-{}", self.speakers.0, self.speakers.1)
    }

    fn to_messages(&self) -> Vec<Message> {
        let (a, b) = (&self.speakers.0, &self.speakers.1);
        self.lines
            .iter()
            .enumerate()
            .map(|(i, (second, text))| {
                let (from, to) = if *second { (b, a) } else { (a, b) };
                Message {
                    session_id: self.session(),
                    seq: i as u32,
                    sender: from.clone(),
                    receiver: to.clone(),
                    text: text.clone(),
                }
            })
            .collect()
    }
}

pub fn default_needles() -> Vec<Needle> {
    let n = |s: &str, a: &str, o: &str| Needle {
        statement: s.into(),
        answer: a.into(),
        opposite: o.into(),
    };
    vec![
        n(
            "I am an avid reader of mystery novels.",
            "reading mystery novels",
            "Honestly, I never read novels, they bore me.",
        ),
        n(
            "I have been learning to play the cello for years.",
            "playing the cello",
            "I have never touched a musical instrument in my life.",
        ),
        n(
            "I volunteer at the animal shelter every weekend.",
            "volunteering at the animal shelter",
            "I am not really an animal person, to be honest.",
        ),
        n(
            "I grow my own tomatoes on the balcony.",
            "growing tomatoes",
            "I cannot keep a single plant alive.",
        ),
    ]
}

const SMALL_TALK: &[&[(bool, &str)]] = &[
    &[
        (false, "Did you catch the game last night?"),
        (true, "Only the second half, it was a close one."),
        (false, "The final minutes were wild."),
        (true, "Let's watch the next one together."),
    ],
    &[
        (false, "How was your trip to the coast?"),
        (true, "Windy but beautiful, the seafood was great."),
        (false, "I should go there this summer."),
        (true, "Take a jacket, the evenings get cold."),
    ],
    &[
        (false, "Are you coming to the office party on Friday?"),
        (true, "I think so, is there a dress code?"),
        (false, "Smart casual, nothing fancy."),
        (true, "Perfect, see you there."),
    ],
    &[
        (false, "I finally fixed my bike."),
        (true, "Nice, what was wrong with it?"),
        (false, "A bent wheel and a flat tire."),
        (true, "Good, we can ride to the lake then."),
    ],
    &[
        (false, "The new cafe downtown opened today."),
        (true, "Is it the one with the blue door?"),
        (false, "Yes, their pastries are amazing."),
        (true, "Let's meet there tomorrow morning."),
    ],
];

pub const NP_PEOPLE: [&str; 4] = ["Alice", "Bob", "Charlie", "Dave"];

/// Picks two base dialogues (Alice-Bob, Charlie-Dave) and a bridge
/// dialogue (Bob-Charlie) from the built-in small-talk pool.
pub fn default_base_dialogues(seed: u64) -> ([PairDialogue; 2], PairDialogue) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<&&[(bool, &str)]> = SMALL_TALK.choose_multiple(&mut rng, 3).collect();
    let [a, b, c, d] = NP_PEOPLE;
    (
        [PairDialogue::from_pool(a, b, picks[0]), PairDialogue::from_pool(c, d, picks[1])],
        PairDialogue::from_pool(b, c, picks[2]),
    )
}

#[derive(Debug, Clone)]
pub struct NpOptions {
    pub opposite: bool,
    pub mode: DialogueMode,
    pub task_id: String,
}

fn insert_template(rng: &mut ChaCha8Rng, d: &PairDialogue, by_second: bool, statement: &str) -> PairDialogue {
    let mut out = d.clone();
    let at = rng.gen_range(0..=out.lines.len());
    out.lines.insert(at, (by_second, statement.to_string()));
    out.lines
        .insert(at + 1, (!by_second, "Oh really? That is good to know about you.".to_string()));
    out
}

fn insert_llm(mode: &DialogueMode, d: &PairDialogue, by_second: bool, statement: &str) -> Result<Vec<Message>, BenchError> {
    let DialogueMode::Llm(backend) = mode else { unreachable!() };
    let (a, b) = (&d.speakers.0, &d.speakers.1);
    let speaker = if by_second { b } else { a };
    let lines: Vec<String> = d
        .to_messages()
        .iter()
        .map(|m| format!("{} to {}: {}", m.sender, m.receiver, m.text))
        .collect();
    let prompt = format!(
        "Rewrite this dialogue so that {speaker} naturally says, word for word: \"{statement}\"\n\
         Keep one message per line in the form `{a} to {b}: ...` or `{b} to {a}: ...`.\n\n{}",
        lines.join("\n")
    );
    let reply = backend.chat(&[ChatMessage::user(prompt)])?;
    let msgs = split_dialogue(&d.session(), &reply, a, b);
    if msgs.is_empty() {
        return Err(BenchError::DialogueFormat(d.session()));
    }
    Ok(msgs)
}

/// Plants `needle` in the first speaker of `base[0]` and the second speaker
/// of `base[1]`, then asks the agents of the two inner speakers to find it.
/// The bridge dialogue connects the inner speakers and stays untouched.
pub fn gen_np(
    seed: u64,
    base: &[PairDialogue; 2],
    bridge: &PairDialogue,
    needle: &Needle,
    opts: &NpOptions,
) -> Result<Dataset, BenchError> {
    if needle.statement.trim().is_empty() || needle.answer.trim().is_empty() || (opts.opposite && needle.opposite.trim().is_empty()) {
        return Err(BenchError::EmptyPersona);
    }
    let (outer_a, inner_b) = (&base[0].speakers.0, &base[0].speakers.1);
    let (inner_c, outer_d) = (&base[1].speakers.0, &base[1].speakers.1);
    let people = [outer_a, inner_b, inner_c, outer_d];
    let distinct: std::collections::BTreeSet<&String> = people.iter().copied().collect();
    if distinct.len() < 4 {
        return Err(BenchError::TooFewIndividuals(distinct.len()));
    }
    let bridge_ok = [&bridge.speakers.0, &bridge.speakers.1];
    if !(bridge_ok.contains(&inner_b) && bridge_ok.contains(&inner_c)) {
        return Err(BenchError::BridgeMismatch);
    }

    let mut net = SocialNetwork::new();
    for p in people {
        net.add_individual(p, None)?;
    }
    net.add_edge(outer_a, inner_b)?;
    net.add_edge(inner_c, outer_d)?;
    net.add_edge(inner_b, inner_c)?;

    let d_statement = if opts.opposite { &needle.opposite } else { &needle.statement };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut messages = match &opts.mode {
        DialogueMode::Template => {
            let mut m = insert_template(&mut rng, &base[0], false, &needle.statement).to_messages();
            m.extend(insert_template(&mut rng, &base[1], true, d_statement).to_messages());
            m
        }
        DialogueMode::Llm(_) => {
            let mut m = insert_llm(&opts.mode, &base[0], false, &needle.statement)?;
            m.extend(insert_llm(&opts.mode, &base[1], true, d_statement)?);
            m
        }
    };
    messages.extend(bridge.to_messages());
    let corpus = Corpus::new(messages, &net)?;

    let (question, truth) = if opts.opposite {
        (
            format!(
                "One of our friends {outer_a} and {outer_d} has a hobby the other lacks: {}. Which of them has it?",
                needle.answer
            ),
            outer_a.clone(),
        )
    } else {
        (
            format!("What hobby or trait do our friends {outer_a} and {outer_d} have in common?"),
            needle.answer.clone(),
        )
    };
    let task = TaskInstance {
        id: opts.task_id.clone(),
        question,
        ground_truth: GroundTruth::Text(truth),
        initiators: (inner_b.clone(), inner_c.clone()),
        metric_kind: MetricKind::Accuracy,
        dataset_tag: "np".into(),
        answer_vocabulary: Vec::new(),
    };
    task.validate(&net)?;
    Ok(Dataset {
        network: net,
        corpus,
        tasks: vec![task],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(opposite: bool) -> NpOptions {
        NpOptions {
            opposite,
            mode: DialogueMode::Template,
            task_id: "np-0".into(),
        }
    }

    #[test]
    fn mystery_reader_instance() {
        let (base, bridge) = default_base_dialogues(3);
        let needle = &default_needles()[0];
        let d = gen_np(3, &base, &bridge, needle, &opts(false)).unwrap();
        assert_eq!(d.network.node_count(), 4);
        assert!(!d.network.are_adjacent("Alice", "Dave"));
        assert_eq!(d.tasks[0].initiators, ("Bob".to_string(), "Charlie".to_string()));
        assert_eq!(d.tasks[0].ground_truth, GroundTruth::Text("reading mystery novels".into()));
        let said: Vec<&str> = d
            .corpus
            .messages()
            .iter()
            .filter(|m| m.text.contains("mystery novels"))
            .map(|m| m.sender.as_str())
            .collect();
        assert_eq!(said, ["Alice", "Dave"]);
    }

    #[test]
    fn opposite_variant() {
        let (base, bridge) = default_base_dialogues(1);
        let needle = &default_needles()[0];
        let d = gen_np(1, &base, &bridge, needle, &opts(true)).unwrap();
        assert_eq!(d.tasks[0].ground_truth, GroundTruth::Text("Alice".into()));
        assert!(d.corpus.messages().iter().any(|m| m.sender == "Dave" && m.text == needle.opposite));
    }

    #[test]
    fn errors() {
        let (base, bridge) = default_base_dialogues(1);
        let mut needle = default_needles()[0].clone();
        needle.statement = " ".into();
        assert!(matches!(
            gen_np(1, &base, &bridge, &needle, &opts(false)),
            Err(BenchError::EmptyPersona)
        ));
        let mut same = base.clone();
        same[1].speakers = ("Alice".into(), "Bob".into());
        assert!(matches!(
            gen_np(1, &same, &bridge, &default_needles()[0], &opts(false)),
            Err(BenchError::TooFewIndividuals(2))
        ));
    }
}
