//! Line-oriented file formats for networks, messages and tasks.
//!
//! Network: `person <id> [persona...]` and `edge <a> <b>`, `#` comments.
//! Messages: `session_id \t seq \t sender \t receiver \t text`, with `\\`,
//! `\t`, `\n` and `\r` escaped inside the text field.
//! Tasks: one JSON object per line.

use std::fmt::Write as _;
use std::path::Path;

use super::{Corpus, CorpusError, Dataset, Message, SocialNetwork, TaskInstance};

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, body: &str) -> Result<(), CorpusError> {
    std::fs::write(path, body).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub fn parse_network(text: &str) -> Result<SocialNetwork, CorpusError> {
    let mut net = SocialNetwork::new();
    let mut edges = Vec::new();
    for (line, raw) in content_lines(text) {
        let at = |e: CorpusError| match e {
            CorpusError::Parse { msg, .. } => CorpusError::Parse { line, msg },
            other => CorpusError::Parse {
                line,
                msg: other.to_string(),
            },
        };
        let mut parts = raw.trim().splitn(2, char::is_whitespace);
        match parts.next() {
            Some("person") => {
                let rest = parts.next().unwrap_or("").trim();
                let mut fields = rest.splitn(2, char::is_whitespace);
                let id = fields.next().unwrap_or("");
                if id.is_empty() {
                    return Err(CorpusError::Parse {
                        line,
                        msg: "person record without id".into(),
                    });
                }
                let persona = fields.next().map(str::trim).filter(|p| !p.is_empty()).map(unescape);
                net.add_individual(id, persona).map_err(at)?;
            }
            Some("edge") => {
                let ends: Vec<&str> = parts.next().unwrap_or("").split_whitespace().collect();
                if ends.len() != 2 {
                    return Err(CorpusError::Parse {
                        line,
                        msg: "edge record needs exactly two ids".into(),
                    });
                }
                edges.push((line, ends[0].to_string(), ends[1].to_string()));
            }
            Some(other) => {
                return Err(CorpusError::Parse {
                    line,
                    msg: format!("unknown record type `{other}`"),
                })
            }
            None => {}
        }
    }
    // persons may follow the edges that mention them
    for (line, a, b) in edges {
        net.add_edge(&a, &b).map_err(|e| CorpusError::Parse { line, msg: e.to_string() })?;
    }
    Ok(net)
}

pub fn write_network(net: &SocialNetwork) -> String {
    let mut out = String::new();
    for p in net.individuals() {
        match &p.persona {
            Some(persona) => writeln!(out, "person {} {}", p.id, escape(persona)),
            None => writeln!(out, "person {}", p.id),
        }
        .unwrap();
    }
    for (a, b) in net.edges() {
        writeln!(out, "edge {a} {b}").unwrap();
    }
    out
}

pub fn read_network(path: &Path) -> Result<SocialNetwork, CorpusError> {
    parse_network(&read(path)?)
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Parses message records without network validation.
pub fn parse_messages(text: &str) -> Result<Vec<Message>, CorpusError> {
    let mut out = Vec::new();
    for (line, raw) in content_lines(text) {
        let fields: Vec<&str> = raw.splitn(5, '\t').collect();
        if fields.len() != 5 {
            return Err(CorpusError::Parse {
                line,
                msg: format!("expected 5 tab-separated fields, found {}", fields.len()),
            });
        }
        let seq = fields[1].parse::<u32>().map_err(|_| CorpusError::Parse {
            line,
            msg: format!("invalid seq `{}`", fields[1]),
        })?;
        if fields[0].is_empty() || fields[2].is_empty() || fields[3].is_empty() {
            return Err(CorpusError::Parse {
                line,
                msg: "empty session, sender or receiver".into(),
            });
        }
        out.push(Message {
            session_id: fields[0].to_string(),
            seq,
            sender: fields[2].to_string(),
            receiver: fields[3].to_string(),
            text: unescape(fields[4]),
        });
    }
    Ok(out)
}

pub fn write_messages(corpus: &Corpus) -> String {
    let mut out = String::new();
    for m in corpus.messages() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            m.session_id,
            m.seq,
            m.sender,
            m.receiver,
            escape(&m.text)
        )
        .unwrap();
    }
    out
}

pub fn read_messages(path: &Path, network: &SocialNetwork) -> Result<Corpus, CorpusError> {
    Corpus::new(parse_messages(&read(path)?)?, network)
}

pub fn parse_tasks(text: &str) -> Result<Vec<TaskInstance>, CorpusError> {
    content_lines(text)
        .map(|(line, raw)| serde_json::from_str(raw).map_err(|e| CorpusError::Parse { line, msg: e.to_string() }))
        .collect()
}

pub fn write_tasks(tasks: &[TaskInstance]) -> String {
    let mut out = String::new();
    for t in tasks {
        out.push_str(&serde_json::to_string(t).expect("task serializes"));
        out.push('\n');
    }
    out
}

pub fn read_tasks(path: &Path, network: &SocialNetwork) -> Result<Vec<TaskInstance>, CorpusError> {
    let tasks = parse_tasks(&read(path)?)?;
    for t in &tasks {
        t.validate(network)?;
    }
    Ok(tasks)
}

pub const NETWORK_FILE: &str = "network.txt";
pub const MESSAGES_FILE: &str = "messages.tsv";
pub const TASKS_FILE: &str = "tasks.jsonl";

/// Writes the three dataset files into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write(&dir.join(NETWORK_FILE), &write_network(&dataset.network))?;
    write(&dir.join(MESSAGES_FILE), &write_messages(&dataset.corpus))?;
    write(&dir.join(TASKS_FILE), &write_tasks(&dataset.tasks))
}

/// Reads and validates a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset, CorpusError> {
    let network = read_network(&dir.join(NETWORK_FILE))?;
    let corpus = read_messages(&dir.join(MESSAGES_FILE), &network)?;
    let tasks = read_tasks(&dir.join(TASKS_FILE), &network)?;
    Ok(Dataset { network, corpus, tasks })
}
