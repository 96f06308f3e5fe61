use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

use super::thought::parse_thought;
use super::{
    clear_param_changes, fuzzy_param_changes, AgentConfig, AgentError, AgentState, Backends, Communication, EvidenceRef, Intent,
    Observation, Outcome, ParamChange, Termination, Thought, Utterance,
};
use crate::backend::ChatMessage;
use crate::corpus::{Corpus, SocialNetwork, TaskInstance};
use crate::infonav::{consensus, new_plan, normalize_value, render_plan, InfoNavError, Plan, SlotKind, SlotStatus, SlotUpdate};
use crate::memory::{ClearMemory, FuzzyMemory, Hit, RetrievalResult};
use crate::trajectory::{RecordKind, Trajectory};

/// Memories of one individual. A store is `None` when ablated.
#[derive(Debug)]
pub struct OwnerMemory {
    pub owner: String,
    pub clear: Option<ClearMemory>,
    pub fuzzy: Option<FuzzyMemory>,
}

/// Lazily built, shared per-owner memories.
#[derive(Default)]
pub struct MemoryBank {
    built: Mutex<BTreeMap<String, Arc<OwnerMemory>>>,
}

impl MemoryBank {
    pub fn get_or_build(
        &self,
        owner: &str,
        network: &SocialNetwork,
        corpus: &Corpus,
        config: &AgentConfig,
        backends: &Backends,
    ) -> Result<Arc<OwnerMemory>, AgentError> {
        if let Some(m) = self.built.lock().unwrap().get(owner) {
            return Ok(m.clone());
        }
        let clear = if config.flags.clear_memory {
            Some(ClearMemory::build(owner, network, corpus)?)
        } else {
            None
        };
        let fuzzy = if config.flags.fuzzy_memory {
            Some(FuzzyMemory::build(
                owner,
                network,
                corpus,
                backends.summarizer.as_ref(),
                backends.embedding.as_ref(),
            )?)
        } else {
            None
        };
        let mem = Arc::new(OwnerMemory {
            owner: owner.to_string(),
            clear,
            fuzzy,
        });
        self.built.lock().unwrap().insert(owner.to_string(), mem.clone());
        Ok(mem)
    }
}

pub struct Engine<'a> {
    pub network: &'a SocialNetwork,
    pub corpus: &'a Corpus,
    pub backends: &'a Backends,
    pub config: AgentConfig,
    memories: MemoryBank,
}

fn prompt_record(stage: &str, messages: &[ChatMessage], shared: &[&str]) -> Value {
    json!({
        "stage": stage,
        "text": messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n"),
        "shared": shared,
    })
}

fn render_hits(hits: &[(&str, &Hit)]) -> String {
    if hits.is_empty() {
        return "(nothing retrieved)".into();
    }
    hits.iter().map(|(_, h)| h.render()).collect::<Vec<_>>().join("\n")
}

fn extract_answer(text: &str) -> String {
    text.lines()
        .rev()
        .find_map(|l| {
            let t = l.trim();
            let lower = t.to_ascii_lowercase();
            lower.starts_with("answer:").then(|| t[7..].trim().to_string())
        })
        .filter(|a| !a.is_empty())
        .unwrap_or_else(|| text.trim().to_string())
}

impl<'a> Engine<'a> {
    pub fn new(network: &'a SocialNetwork, corpus: &'a Corpus, backends: &'a Backends, config: AgentConfig) -> Self {
        Self {
            network,
            corpus,
            backends,
            config,
            memories: MemoryBank::default(),
        }
    }

    pub fn memory(&self, owner: &str) -> Result<Arc<OwnerMemory>, AgentError> {
        self.memories
            .get_or_build(owner, self.network, self.corpus, &self.config, self.backends)
    }

    fn system_message(&self, owner: &str, partner: &str) -> Result<ChatMessage, AgentError> {
        let name = if self.config.flags.privacy_prompt {
            "system_privacy"
        } else {
            "system"
        };
        Ok(ChatMessage::system(
            self.backends.templates.render(name, &[("agent", owner), ("partner", partner)])?,
        ))
    }

    fn plan_text(&self, agent: &AgentState) -> Result<String, AgentError> {
        match &agent.plan {
            Some(p) => Ok(render_plan(p)),
            None => Ok(self.backends.templates.render("static_instruction", &[])?),
        }
    }

    fn build_agent(&self, owner: &str, question: &str, comm_id: &str, depth: u32, log: &mut Trajectory) -> Result<AgentState, AgentError> {
        if !self.network.contains(owner) {
            return Err(crate::corpus::CorpusError::UnknownIndividual(owner.to_string()).into());
        }
        let memory = self.memory(owner)?;
        let plan = if self.config.flags.infonav {
            let header = [("stage", "plan"), ("agent", owner), ("turn", "0"), ("comm", comm_id)];
            let plan = match new_plan(question, &self.backends.chat, &self.backends.templates, &header) {
                Ok((plan, prompt)) => {
                    log.push(
                        RecordKind::PlanCreated,
                        comm_id,
                        depth,
                        0,
                        Some(owner),
                        json!({ "plan": plan, "prompts": [{ "stage": "plan", "text": prompt, "shared": [] }] }),
                    );
                    plan
                }
                Err(InfoNavError::NoSlots { raw }) => {
                    log.push(
                        RecordKind::Warning,
                        comm_id,
                        depth,
                        0,
                        Some(owner),
                        json!({ "message": "planning response had no slots; using a single-slot plan", "raw": raw }),
                    );
                    let plan = Plan::new(question, vec![("answer to the question".into(), SlotKind::Rationale)])?;
                    log.push(
                        RecordKind::PlanCreated,
                        comm_id,
                        depth,
                        0,
                        Some(owner),
                        json!({ "plan": plan, "prompts": [] }),
                    );
                    plan
                }
                Err(e) => return Err(e.into()),
            };
            Some(plan)
        } else {
            None
        };
        Ok(AgentState {
            owner: owner.to_string(),
            plan,
            memory,
            clear_query: None,
            fuzzy_query: None,
            param_log: Vec::new(),
            findings: Vec::new(),
            concluded: false,
        })
    }

    /// Creates a communication between `owners.0` (speaks first) and `owners.1`.
    pub fn start(
        &self,
        id: &str,
        question: &str,
        owners: (&str, &str),
        depth: u32,
        log: &mut Trajectory,
    ) -> Result<Communication, AgentError> {
        let a = self.build_agent(owners.0, question, id, depth, log)?;
        let b = self.build_agent(owners.1, question, id, depth, log)?;
        Ok(Communication {
            id: id.to_string(),
            question: question.to_string(),
            agents: [a, b],
            utterances: Vec::new(),
            children: Vec::new(),
            max_turns: self.config.max_turns,
            depth,
            termination: None,
            consensus: None,
            answer: None,
        })
    }

    pub fn observe(&self, comm: &Communication, idx: usize) -> Result<Observation, AgentError> {
        if comm.is_terminated() {
            return Err(AgentError::Terminated);
        }
        let turn = comm.next_turn();
        if Communication::speaker_for(turn) != idx {
            return Err(AgentError::OutOfTurn { agent: idx, turn });
        }
        let agent = &comm.agents[idx];
        Ok(Observation {
            plan_text: self.plan_text(agent)?,
            transcript: comm.transcript(),
            findings: agent.findings.clone(),
        })
    }

    fn contactable(&self, comm: &Communication, idx: usize) -> String {
        if !self.config.flags.recursion || comm.depth >= self.config.depth_limit {
            return "(none)".into();
        }
        let owner = &comm.agents[idx].owner;
        let partner = &comm.agents[1 - idx].owner;
        let list: Vec<&str> = self.network.neighbors(owner).into_iter().filter(|n| n != partner).collect();
        if list.is_empty() {
            "(none)".into()
        } else {
            list.join(", ")
        }
    }

    pub fn think(&self, comm: &Communication, idx: usize, obs: &Observation, log: &mut Trajectory) -> Result<(Thought, Value), AgentError> {
        let agent = &comm.agents[idx];
        let partner = &comm.agents[1 - idx].owner;
        let turn = comm.next_turn().to_string();
        let findings = if obs.findings.is_empty() {
            "(none)".to_string()
        } else {
            obs.findings.join("\n")
        };
        let neighbors = self.contactable(comm, idx);
        let user = self.backends.templates.render(
            "think",
            &[
                ("stage", "think"),
                ("agent", &agent.owner),
                ("turn", &turn),
                ("comm", &comm.id),
                ("question", &comm.question),
                ("plan", &obs.plan_text),
                ("evidence", &findings),
                ("transcript", &obs.transcript),
                ("neighbors", &neighbors),
            ],
        )?;
        let messages = [self.system_message(&agent.owner, partner)?, ChatMessage::user(user)];
        let response = self.backends.chat.chat(&messages)?;
        let thought = parse_thought(
            &response,
            agent.clear_query.as_ref(),
            agent.fuzzy_query.as_ref(),
            self.config.query_defaults(),
        );
        for w in &thought.warnings {
            log.push(
                RecordKind::Warning,
                &comm.id,
                comm.depth,
                comm.next_turn(),
                Some(&agent.owner),
                json!({ "message": w }),
            );
        }
        let prompt = prompt_record("think", &messages, &[&obs.transcript, &obs.plan_text, &findings]);
        Ok((thought, prompt))
    }

    fn apply_plan_update(&self, agent: &mut AgentState, thought: &Thought, turn: u32) -> Result<bool, AgentError> {
        let Some(plan) = agent.plan.as_ref() else {
            return Ok(false);
        };
        let mut next = plan.clone();
        let mut fills: Vec<(usize, String)> = Vec::new();
        for ws in &thought.plan_update {
            let idx = match next.find(&ws.description) {
                Some(i) => i,
                None => {
                    next = next.append_slot(&ws.description, ws.kind)?;
                    next.slots.len() - 1
                }
            };
            if let SlotStatus::Filled(v) = &ws.status {
                fills.push((idx, v.clone()));
            }
        }
        let updates: Vec<SlotUpdate> = fills.iter().map(|(i, v)| SlotUpdate { index: *i, value: v }).collect();
        next = next.apply_update(&updates, turn)?;
        let changed = &next != plan;
        agent.plan = Some(next);
        Ok(changed)
    }

    fn log_param_changes(&self, comm: &Communication, owner: &str, changes: &[ParamChange], log: &mut Trajectory) {
        for c in changes {
            log.push(
                RecordKind::ParamChange,
                &comm.id,
                comm.depth,
                c.turn,
                Some(owner),
                serde_json::to_value(c).expect("serializable"),
            );
        }
    }

    /// Runs the thought's retrievals, applies its plan update, records query
    /// parameter changes and generates the utterance.
    pub fn act(
        &self,
        comm: &mut Communication,
        idx: usize,
        thought: &Thought,
        log: &mut Trajectory,
    ) -> Result<(Utterance, Value), AgentError> {
        let turn = comm.next_turn();
        let (comm_id, depth) = (comm.id.clone(), comm.depth);
        let partner = comm.agents[1 - idx].owner.clone();
        let owner = comm.agents[idx].owner.clone();
        let memory = comm.agents[idx].memory.clone();

        let mut results: Vec<(&str, RetrievalResult)> = Vec::new();
        if let (Some(q), Some(store)) = (&thought.clear_query, &memory.clear) {
            match store.query(q) {
                Ok(r) => {
                    log.push(
                        RecordKind::Retrieval,
                        &comm_id,
                        depth,
                        turn,
                        Some(&owner),
                        json!({ "store": "clear", "query": q, "hits": r.hits }),
                    );
                    results.push(("clear", r));
                }
                Err(e) => log.push(
                    RecordKind::Warning,
                    &comm_id,
                    depth,
                    turn,
                    Some(&owner),
                    json!({ "message": format!("clear retrieval failed: {e}") }),
                ),
            }
            let changes = comm.agents[idx]
                .clear_query
                .as_ref()
                .map(|prev| clear_param_changes(turn, prev, q))
                .unwrap_or_default();
            self.log_param_changes(comm, &owner, &changes, log);
            let agent = &mut comm.agents[idx];
            agent.param_log.extend(changes);
            agent.clear_query = Some(q.clone());
        }
        if let (Some(q), Some(store)) = (&thought.fuzzy_query, &memory.fuzzy) {
            match store.query(q, self.backends.embedding.as_ref()) {
                Ok(r) => {
                    log.push(
                        RecordKind::Retrieval,
                        &comm_id,
                        depth,
                        turn,
                        Some(&owner),
                        json!({ "store": "fuzzy", "query": q, "hits": r.hits }),
                    );
                    results.push(("fuzzy", r));
                }
                Err(e) => log.push(
                    RecordKind::Warning,
                    &comm_id,
                    depth,
                    turn,
                    Some(&owner),
                    json!({ "message": format!("fuzzy retrieval failed: {e}") }),
                ),
            }
            let changes = comm.agents[idx]
                .fuzzy_query
                .as_ref()
                .map(|prev| fuzzy_param_changes(turn, prev, q))
                .unwrap_or_default();
            self.log_param_changes(comm, &owner, &changes, log);
            let agent = &mut comm.agents[idx];
            agent.param_log.extend(changes);
            agent.fuzzy_query = Some(q.clone());
        }

        let before = comm.agents[idx].plan.as_ref().map_or(0, |p| p.history.len());
        if self.apply_plan_update(&mut comm.agents[idx], thought, turn)? {
            let plan = comm.agents[idx].plan.as_ref().expect("changed plan exists");
            log.push(
                RecordKind::PlanUpdate,
                &comm_id,
                depth,
                turn,
                Some(&owner),
                json!({ "plan": plan, "revisions": &plan.history[before..] }),
            );
        }

        let hits: Vec<(&str, &Hit)> = results
            .iter()
            .flat_map(|(store, r)| r.hits.iter().map(move |h| (*store, h)))
            .collect();
        let retrieved = render_hits(&hits);
        let plan_text = self.plan_text(&comm.agents[idx])?;
        let transcript = comm.transcript();
        let turn_s = turn.to_string();
        let intent = thought.intent.label();
        let user = self.backends.templates.render(
            "act",
            &[
                ("stage", "act"),
                ("agent", &owner),
                ("turn", &turn_s),
                ("comm", &comm_id),
                ("question", &comm.question),
                ("plan", &plan_text),
                ("transcript", &transcript),
                ("retrieved", &retrieved),
                ("intent", &intent),
                ("partner", &partner),
            ],
        )?;
        let messages = [self.system_message(&owner, &partner)?, ChatMessage::user(user)];
        let text = self.backends.chat.chat(&messages)?;
        let text = if text.trim().is_empty() {
            "(no message)".to_string()
        } else {
            text.trim().to_string()
        };
        let evidence = hits
            .iter()
            .map(|(store, h)| EvidenceRef {
                store: store.to_string(),
                session_id: h.session_id.clone(),
                seq_start: h.seq_start,
                seq_end: h.seq_end,
            })
            .collect();
        let prompt = prompt_record("act", &messages, &[&transcript, &plan_text]);
        Ok((
            Utterance {
                speaker: owner,
                turn,
                text,
                intent: thought.intent.clone(),
                evidence,
            },
            prompt,
        ))
    }

    /// Spawns and runs a child communication between the agent's owner and
    /// one of its neighbors, returning the finished child.
    pub fn recurse(
        &self,
        comm: &Communication,
        idx: usize,
        neighbor: &str,
        question: &str,
        log: &mut Trajectory,
    ) -> Result<Communication, AgentError> {
        if !self.config.flags.recursion {
            return Err(AgentError::RecursionDisabled);
        }
        let owner = &comm.agents[idx].owner;
        if !self.network.are_adjacent(owner, neighbor) {
            return Err(AgentError::NotNeighbor {
                owner: owner.clone(),
                target: neighbor.to_string(),
            });
        }
        if comm.depth >= self.config.depth_limit {
            return Err(AgentError::DepthExceeded {
                limit: self.config.depth_limit,
            });
        }
        let id = format!("{}.{}", comm.id, comm.children.len() + 1);
        let turn = comm.next_turn();
        log.push(
            RecordKind::RecursionStart,
            &comm.id,
            comm.depth,
            turn,
            Some(owner),
            json!({ "child": id, "neighbor": neighbor, "question": question }),
        );
        let mut child = self.start(&id, question, (owner, neighbor), comm.depth + 1, log)?;
        self.drive(&mut child, log)?;
        self.finalize(&mut child, log)?;
        log.push(
            RecordKind::RecursionEnd,
            &comm.id,
            comm.depth,
            turn,
            Some(owner),
            json!({ "child": id, "answer": child.answer, "termination": child.termination }),
        );
        Ok(child)
    }

    /// One utterance by the parity-selected agent.
    pub fn step(&self, comm: &mut Communication, log: &mut Trajectory) -> Result<(), AgentError> {
        if comm.is_terminated() {
            return Err(AgentError::Terminated);
        }
        let turn = comm.next_turn();
        let idx = Communication::speaker_for(turn);
        let obs = self.observe(comm, idx)?;
        let (mut thought, think_prompt) = self.think(comm, idx, &obs, log)?;

        if let Intent::Recurse { neighbor, question } = thought.intent.clone() {
            match self.recurse(comm, idx, &neighbor, &question, log) {
                Ok(child) => {
                    let finding = format!(
                        "{}'s agent, asked \"{}\", concluded: {}",
                        neighbor,
                        question,
                        child.answer.as_deref().unwrap_or("(no answer)")
                    );
                    comm.agents[idx].findings.push(finding);
                    comm.children.push(child);
                }
                Err(e @ (AgentError::NotNeighbor { .. } | AgentError::DepthExceeded { .. } | AgentError::RecursionDisabled)) => {
                    log.push(
                        RecordKind::Warning,
                        &comm.id,
                        comm.depth,
                        turn,
                        Some(&comm.agents[idx].owner.clone()),
                        json!({ "message": format!("recurse intent degraded to ask: {e}") }),
                    );
                    thought.intent = Intent::Ask;
                }
                Err(e) => return Err(e),
            }
        }

        let (utterance, act_prompt) = self.act(comm, idx, &thought, log)?;
        log.push(
            RecordKind::Utterance,
            &comm.id,
            comm.depth,
            turn,
            Some(&utterance.speaker),
            json!({
                "text": utterance.text,
                "intent": utterance.intent,
                "evidence": utterance.evidence,
                "prompts": [think_prompt, act_prompt],
            }),
        );
        comm.agents[idx].concluded = utterance.intent == Intent::Conclude;
        comm.utterances.push(utterance);
        if comm.agents.iter().all(|a| a.concluded) {
            comm.termination = Some(Termination::Answered);
        } else if comm.utterances.len() as u32 >= comm.max_turns {
            comm.termination = Some(Termination::TurnLimit);
        }
        Ok(())
    }

    pub fn drive(&self, comm: &mut Communication, log: &mut Trajectory) -> Result<(), AgentError> {
        while !comm.is_terminated() {
            self.step(comm, log)?;
        }
        Ok(())
    }

    /// Consensus over both plans, then the final reasoning call by the first
    /// agent.
    pub fn finalize(&self, comm: &mut Communication, log: &mut Trajectory) -> Result<(), AgentError> {
        let turn = comm.utterances.len() as u32;
        let result = match (&comm.agents[0].plan, &comm.agents[1].plan) {
            (Some(a), Some(b)) => {
                let r = consensus(a, b, &normalize_value, &self.backends.detector);
                log.push(RecordKind::Consensus, &comm.id, comm.depth, turn, None, json!({ "result": r }));
                Some(r)
            }
            _ => None,
        };
        let merged = match &result {
            Some(r) if !r.merged.is_empty() => r.merged.iter().map(|(k, v)| format!("- {k}: {v}")).collect::<Vec<_>>().join("\n"),
            Some(_) => "(none)".to_string(),
            None => "(no plans were kept)".to_string(),
        };
        let conflicts = match &result {
            Some(r) if !r.conflicts.is_empty() => r
                .conflicts
                .iter()
                .map(|c| format!("- {}: {} vs {}", c.description, c.value_a, c.value_b))
                .collect::<Vec<_>>()
                .join("\n"),
            _ => "(none)".to_string(),
        };
        let owner = comm.agents[0].owner.clone();
        let partner = comm.agents[1].owner.clone();
        let transcript = comm.transcript();
        let turn_s = turn.to_string();
        let user = self.backends.templates.render(
            "reasoning",
            &[
                ("stage", "reasoning"),
                ("agent", &owner),
                ("turn", &turn_s),
                ("comm", &comm.id),
                ("question", &comm.question),
                ("merged", &merged),
                ("conflicts", &conflicts),
                ("transcript", &transcript),
            ],
        )?;
        let messages = [self.system_message(&owner, &partner)?, ChatMessage::user(user)];
        let raw = self.backends.chat.chat(&messages)?;
        let answer = extract_answer(&raw);
        log.push(
            RecordKind::Answer,
            &comm.id,
            comm.depth,
            turn,
            Some(&owner),
            json!({
                "text": answer,
                "raw": raw,
                "prompts": [prompt_record("reasoning", &messages, &[&transcript, &merged, &conflicts])],
            }),
        );
        comm.consensus = result;
        comm.answer = Some(answer);
        Ok(())
    }

    /// Runs one task end to end. Backend failures end the run with
    /// `Termination::Error` and a partial trajectory.
    pub fn run(&self, task: &TaskInstance) -> Outcome {
        let mut log = Trajectory::default();
        log.push(
            RecordKind::RunStart,
            "0",
            0,
            0,
            None,
            json!({
                "task_id": task.id,
                "dataset": task.dataset_tag,
                "question": task.question,
                "initiators": [task.initiators.0, task.initiators.1],
                "max_turns": self.config.max_turns,
                "depth_limit": self.config.depth_limit,
                "flags": self.config.flags,
                "templates": self.backends.templates.version,
            }),
        );
        let result = self
            .start("0", &task.question, (&task.initiators.0, &task.initiators.1), 0, &mut log)
            .and_then(|mut comm| match self.drive(&mut comm, &mut log) {
                Ok(()) => self.finalize(&mut comm, &mut log).map(|()| comm),
                Err(e) => Err(e),
            });
        let (outcome_fields, error) = match result {
            Ok(comm) => (
                (
                    comm.answer.clone(),
                    comm.consensus.clone(),
                    comm.termination.unwrap_or(Termination::Error),
                    comm.utterances.len(),
                    comm.descendant_count(),
                ),
                None,
            ),
            Err(e) => {
                let utterances = log.of_kind(RecordKind::Utterance).filter(|r| r.comm == "0").count();
                let children = log.of_kind(RecordKind::RecursionStart).count();
                ((None, None, Termination::Error, utterances, children), Some(e.to_string()))
            }
        };
        let (answer, consensus, termination, utterances, child_communications) = outcome_fields;
        let mut end = json!({
            "termination": termination,
            "utterances": utterances,
            "child_communications": child_communications,
        });
        if let Some(e) = &error {
            end["error"] = json!(e);
        }
        log.push(RecordKind::RunEnd, "0", 0, utterances as u32, None, end);
        Outcome {
            task_id: task.id.clone(),
            answer,
            consensus,
            termination,
            error,
            trajectory: log,
            utterances,
            child_communications,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, ChatBackend, PromptTemplates, ReplayScript, ScriptEntry, ScriptedBackend};
    use crate::corpus::{parse_messages, parse_network, GroundTruth, MetricKind};
    use crate::infonav::FakeSolvedDetector;
    use crate::memory::{ExtractiveSummarizer, HashEmbedding};

    fn world() -> (SocialNetwork, Corpus) {
        let net =
            parse_network("person Alice\nperson Bob\nperson Charlie\nperson Dave\nedge Alice Bob\nedge Bob Charlie\nedge Charlie Dave\n")
                .unwrap();
        let corpus = Corpus::new(
            parse_messages(
                "ab\t0\tAlice\tBob\tmy yoga class is 9:00-11:00\n\
                 ab\t1\tBob\tAlice\tnice, I have a meeting later\n\
                 bc\t0\tCharlie\tBob\tthe piano lesson moved to 14:00\n\
                 cd\t0\tCharlie\tDave\tDave's secret recipe uses saffron\n",
            )
            .unwrap(),
            &net,
        )
        .unwrap();
        (net, corpus)
    }

    fn backends(entries: Vec<(&str, &str)>) -> Backends {
        let script = ReplayScript::new(
            entries
                .into_iter()
                .map(|(cue, response)| ScriptEntry {
                    cue: cue.into(),
                    response: response.into(),
                })
                .collect(),
        );
        Backends {
            chat: Arc::new(ScriptedBackend::new(script)),
            embedding: Arc::new(HashEmbedding::new(0)),
            summarizer: Arc::new(ExtractiveSummarizer),
            templates: PromptTemplates::default(),
            detector: FakeSolvedDetector::default(),
        }
    }

    fn task() -> TaskInstance {
        TaskInstance {
            id: "t".into(),
            question: "When is Alice's yoga?".into(),
            ground_truth: GroundTruth::Text("9:00-11:00".into()),
            initiators: ("Alice".into(), "Bob".into()),
            metric_kind: MetricKind::Accuracy,
            dataset_tag: "unit".into(),
            answer_vocabulary: vec![],
        }
    }

    const PLAN: &str = "- [UNKNOWN] yoga time";

    #[test]
    fn observe_turn_rules() {
        let (net, corpus) = world();
        let b = backends(vec![("stage=plan agent=Alice", PLAN), ("stage=plan agent=Bob", PLAN)]);
        let engine = Engine::new(&net, &corpus, &b, AgentConfig::default());
        let mut log = Trajectory::default();
        let comm = engine.start("0", "q", ("Alice", "Bob"), 0, &mut log).unwrap();
        let obs = engine.observe(&comm, 0).unwrap();
        assert_eq!(obs.transcript, "(no messages yet)");
        assert!(obs.plan_text.contains("yoga time: [UNKNOWN]"));
        assert!(matches!(engine.observe(&comm, 1), Err(AgentError::OutOfTurn { agent: 1, turn: 1 })));
    }

    #[test]
    fn act_attaches_evidence_and_param_changes() {
        let (net, corpus) = world();
        let b = backends(vec![
            ("stage=plan agent=Alice", PLAN),
            ("stage=plan agent=Bob", PLAN),
            ("stage=act agent=Alice turn=1", "first"),
            ("stage=act agent=Bob turn=2", "second"),
            ("stage=act agent=Alice turn=3", "third"),
        ]);
        let engine = Engine::new(&net, &corpus, &b, AgentConfig::default());
        let mut log = Trajectory::default();
        let mut comm = engine.start("0", "q", ("Alice", "Bob"), 0, &mut log).unwrap();
        let t1 = parse_thought(
            "CLEAR-QUERY: keywords=yoga,meeting; window=0; limit=5\nINTENT: inform",
            None,
            None,
            engine.config.query_defaults(),
        );
        let (u, _) = engine.act(&mut comm, 0, &t1, &mut log).unwrap();
        assert_eq!(u.evidence.len(), 2);
        assert!(u.evidence.iter().all(|e| e.store == "clear"));
        comm.utterances.push(u);
        let none = parse_thought("INTENT: ask", None, None, engine.config.query_defaults());
        let (u, _) = engine.act(&mut comm, 1, &none, &mut log).unwrap();
        assert!(u.evidence.is_empty());
        comm.utterances.push(u);
        let prev = comm.agents[0].clear_query.clone();
        let t3 = parse_thought(
            "CLEAR-QUERY: keywords=yoga; limit=10\nINTENT: ask",
            prev.as_ref(),
            None,
            engine.config.query_defaults(),
        );
        engine.act(&mut comm, 0, &t3, &mut log).unwrap();
        let limit = comm.agents[0]
            .param_log
            .iter()
            .find(|c| c.parameter == crate::agent::QueryParam::Limit)
            .unwrap();
        assert_eq!((limit.old, limit.new, limit.direction), (5, 10, crate::agent::Direction::Increase));
    }

    #[test]
    fn turn_limit_and_parity() {
        let (net, corpus) = world();
        let mut entries = vec![("stage=plan agent=Alice", PLAN), ("stage=plan agent=Bob", PLAN)];
        let names = ["Alice", "Bob"];
        let mut cues = Vec::new();
        for turn in 1..=10u32 {
            let who = names[((turn - 1) % 2) as usize];
            cues.push((format!("stage=think agent={who} turn={turn}"), "INTENT: ask"));
            cues.push((format!("stage=act agent={who} turn={turn}"), "still looking"));
        }
        entries.extend(cues.iter().map(|(c, r)| (c.as_str(), *r)));
        entries.push(("stage=reasoning", "Answer: unknown"));
        let b = backends(entries);
        let engine = Engine::new(&net, &corpus, &b, AgentConfig::default());
        let out = engine.run(&task());
        assert_eq!(out.termination, Termination::TurnLimit, "{:?}", out.error);
        assert_eq!(out.utterances, 10);
        let speakers: Vec<_> = out
            .trajectory
            .of_kind(RecordKind::Utterance)
            .map(|r| r.agent.clone().unwrap())
            .collect();
        for (i, s) in speakers.iter().enumerate() {
            assert_eq!(s, names[i % 2]);
        }
    }

    #[test]
    fn recursion_to_neighbor_records_child() {
        let (net, corpus) = world();
        let b = backends(vec![
            ("stage=plan agent=Alice turn=0 comm=0]", PLAN),
            ("stage=plan agent=Bob turn=0 comm=0]", PLAN),
            ("stage=think agent=Alice turn=1 comm=0]", "INTENT: ask"),
            ("stage=act agent=Alice turn=1 comm=0]", "When is the piano lesson?"),
            (
                "stage=think agent=Bob turn=2 comm=0]",
                "INTENT: recurse Charlie: when is the piano lesson?",
            ),
            ("stage=plan agent=Bob turn=0 comm=0.1]", "- [UNKNOWN] piano time"),
            ("stage=plan agent=Charlie turn=0 comm=0.1]", "- [UNKNOWN] piano time"),
            ("stage=think agent=Bob turn=1 comm=0.1]", "INTENT: conclude"),
            ("stage=act agent=Bob turn=1 comm=0.1]", "Hold on, when is it?"),
            (
                "stage=think agent=Charlie turn=2 comm=0.1]",
                "PLAN-UPDATE:\n- [KNOWN: 14:00] piano time\nINTENT: conclude",
            ),
            ("stage=act agent=Charlie turn=2 comm=0.1]", "14:00"),
            ("stage=reasoning agent=Bob turn=2 comm=0.1]", "Answer: 14:00"),
            ("stage=act agent=Bob turn=2 comm=0]", "Charlie says 14:00"),
            ("stage=think agent=Alice turn=3 comm=0]", "INTENT: conclude"),
            ("stage=act agent=Alice turn=3 comm=0]", "thanks"),
            ("stage=think agent=Bob turn=4 comm=0]", "INTENT: conclude"),
            ("stage=act agent=Bob turn=4 comm=0]", "bye"),
            ("stage=reasoning agent=Alice turn=4 comm=0]", "Answer: 14:00"),
        ]);
        let engine = Engine::new(&net, &corpus, &b, AgentConfig::default());
        let out = engine.run(&task());
        assert_eq!(out.termination, Termination::Answered, "{:?}", out.error);
        assert_eq!(out.child_communications, 1);
        assert_eq!(out.answer.as_deref(), Some("14:00"));
        let think4 = out
            .trajectory
            .of_kind(RecordKind::Utterance)
            .find(|r| r.comm == "0" && r.turn == 4)
            .unwrap();
        assert!(think4.data["prompts"][0]["text"].as_str().unwrap().contains("Charlie's agent"));
    }

    #[test]
    fn recursion_errors() {
        let (net, corpus) = world();
        let b = backends(vec![("stage=plan agent=Alice", PLAN), ("stage=plan agent=Bob", PLAN)]);
        let engine = Engine::new(&net, &corpus, &b, AgentConfig::default());
        let mut log = Trajectory::default();
        let mut comm = engine.start("0", "q", ("Alice", "Bob"), 0, &mut log).unwrap();
        assert!(matches!(
            engine.recurse(&comm, 0, "Dave", "x", &mut log),
            Err(AgentError::NotNeighbor { .. })
        ));
        comm.depth = 1;
        assert!(matches!(
            engine.recurse(&comm, 1, "Charlie", "x", &mut log),
            Err(AgentError::DepthExceeded { limit: 1 })
        ));
        assert!(log.of_kind(RecordKind::RecursionStart).next().is_none());
    }

    struct Failing;
    impl ChatBackend for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn chat(&self, _: &[ChatMessage]) -> Result<String, BackendError> {
            Err(BackendError::Transport {
                attempts: 3,
                msg: "connection refused".into(),
            })
        }
    }

    #[test]
    fn backend_failure_yields_error_outcome() {
        let (net, corpus) = world();
        let mut b = backends(vec![]);
        b.chat = Arc::new(Failing);
        let engine = Engine::new(&net, &corpus, &b, AgentConfig::default());
        let out = engine.run(&task());
        assert_eq!(out.termination, Termination::Error);
        assert!(out.error.unwrap().contains("connection refused"));
        assert_eq!(out.trajectory.records.last().unwrap().kind, RecordKind::RunEnd);
    }

    #[test]
    fn answer_line_extraction() {
        assert_eq!(extract_answer("reasoning...\nAnswer: 1"), "1");
        assert_eq!(extract_answer("just 2"), "just 2");
    }
}
