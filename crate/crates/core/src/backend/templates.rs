//! Versioned prompt templates with `{name}` placeholders.
//!
//! Every agent-facing template starts with a stage header line
//! (`[stage=... agent=... turn=... comm=...]`), which replay scripts use as
//! their cue.

use std::collections::BTreeMap;

use super::BackendError;

pub const TEMPLATE_VERSION: &str = "1";

const HEADER: &str = "[stage={stage} agent={agent} turn={turn} comm={comm}]\n";

const SYSTEM: &str = "You are the personal agent of {agent}. You can only see {agent}'s own chat \
history, which you retrieve from memory on demand. Work with the agent of {partner} to answer the \
task question. Share what you know, ask for what you are missing, and never invent facts.";

const SYSTEM_PRIVACY: &str = "You are the personal agent of {agent}. You can only see {agent}'s own \
chat history, which you retrieve from memory on demand. Work with the agent of {partner} to answer \
the task question. Share only information that is needed for the task and never disclose private \
details about {agent} or other people that the question does not require. Never invent facts.";

const PLAN: &str = "Task question: {question}

Before talking to anyone, make a plan: list every piece of information needed to answer the \
question. Nothing is known yet, so mark every item unknown. Use one line per item:
- [UNKNOWN] <description of the needed information>";

const STATIC_INSTRUCTION: &str = "Exchange information with the other agent until you can answer the question.";

const THINK: &str = "Task question: {question}

Your plan:
{plan}

Findings from conversations you started with other agents:
{evidence}

Dialogue so far:
{transcript}

Decide your next step. Reply with these sections:
PLAN-UPDATE:
- [KNOWN: <value>] <description>   (one line per item that is now known)
CLEAR-QUERY: keywords=<k1,k2,...>; window=<n>; limit=<n>   (or: none)
FUZZY-QUERY: topk=<n>; text=<query>   (or: none)
INTENT: ask | inform | conclude | recurse <neighbor>: <question for that neighbor>
People {agent} can contact: {neighbors}";

const ACT: &str = "Task question: {question}

Your plan:
{plan}

Dialogue so far:
{transcript}

Retrieved from {agent}'s memory:
{retrieved}

Your intent for this turn: {intent}
Write your next message to the agent of {partner}.";

const REASONING: &str = "Task question: {question}

Information both agents agreed on:
{merged}

Conflicting items were discarded:
{conflicts}

Dialogue:
{transcript}

Answer the question concisely. End with a line of the form `Answer: <answer>`.";

const SUMMARIZE: &str = "Summarize the following chat session objectively. Keep names, times, places \
and facts; do not add opinions.

{session}";

/// Judge prompt for answer equivalence checks.
const JUDGE: &str = "You are an experienced human labeler for reading comprehension tasks.
Given a ground truth answer and a model prediction,
you have to judge whether the model prediction is correct.
The question is {question}.
The ground truth answer is {ground_truth}.
The model prediction is {prediction}.
Return 1 if the model prediction is correct else 0.
the model prediction may be a little different on the expression, as long as the meaning or key entity is correct, the answer can be regarded as correct.";

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub version: String,
    templates: BTreeMap<String, String>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        for (name, body, header) in [
            ("system", SYSTEM, false),
            ("system_privacy", SYSTEM_PRIVACY, false),
            ("static_instruction", STATIC_INSTRUCTION, false),
            ("plan", PLAN, true),
            ("think", THINK, true),
            ("act", ACT, true),
            ("reasoning", REASONING, true),
            ("summarize", SUMMARIZE, false),
            ("judge", JUDGE, false),
        ] {
            let text = if header { format!("{HEADER}{body}") } else { body.to_string() };
            templates.insert(name.to_string(), text);
        }
        Self {
            version: TEMPLATE_VERSION.to_string(),
            templates,
        }
    }
}

impl PromptTemplates {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn set(&mut self, name: &str, body: &str) {
        self.templates.insert(name.to_string(), body.to_string());
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    /// Substitutes `{key}` placeholders in one pass over the template, so
    /// braces inside substituted values are left alone.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, BackendError> {
        let template = self
            .templates
            .get(name)
            .ok_or_else(|| BackendError::Config(format!("unknown template `{name}`")))?;
        let mut out = String::with_capacity(template.len() + 256);
        let mut rest = template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) if is_ident(&after[..close]) => {
                    let key = &after[..close];
                    let value = vars
                        .iter()
                        .find(|(k, _)| *k == key)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| BackendError::Config(format!("template `{name}` needs `{key}`")))?;
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}
