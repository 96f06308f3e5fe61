use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use iagents::infonav::{render_plan, Plan};
use iagents::trajectory::{RecordKind, Trajectory, TrajectoryRecord};
use serde_json::Value;

use crate::{dataset, CmdResult};

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Trajectory log (JSON lines).
    pub file: PathBuf,
    /// Include the full prompts sent at each stage.
    #[arg(long)]
    pub prompts: bool,
}

fn text<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

fn indent(block: &str, pad: &str) -> String {
    block.lines().map(|l| format!("{pad}{l}\n")).collect()
}

/// One rendered block per record.
pub fn render_record(r: &TrajectoryRecord, prompts: bool) -> String {
    let pad = "    ".repeat(r.depth as usize);
    let agent = r.agent.as_deref().unwrap_or("-");
    let d = &r.data;
    let mut out = String::new();
    match r.kind {
        RecordKind::RunStart => {
            let _ = writeln!(out, "{pad}== task {} [{}]", text(d, "task_id"), text(d, "dataset"));
            let _ = writeln!(out, "{pad}question: {}", text(d, "question"));
            if let Some(i) = d.get("initiators").and_then(Value::as_array) {
                let names: Vec<_> = i.iter().filter_map(Value::as_str).collect();
                let _ = writeln!(out, "{pad}initiators: {}", names.join(", "));
            }
        }
        RecordKind::PlanCreated | RecordKind::PlanUpdate => {
            let verb = if r.kind == RecordKind::PlanCreated { "plan" } else { "plan update" };
            let _ = writeln!(out, "{pad}[{}] {verb} of {agent} (turn {})", r.comm, r.turn);
            if let Ok(p) = serde_json::from_value::<Plan>(d["plan"].clone()) {
                out.push_str(&indent(&render_plan(&p), &format!("{pad}  ")));
            }
        }
        RecordKind::Retrieval => {
            let hits = d.get("hits").and_then(Value::as_array).map_or(0, Vec::len);
            let _ = writeln!(
                out,
                "{pad}[{}] {agent} searched {} memory: {} ({hits} hit(s))",
                r.comm,
                text(d, "store"),
                d["query"]
            );
        }
        RecordKind::ParamChange => {
            let _ = writeln!(
                out,
                "{pad}[{}] {agent} {} {}: {} -> {}",
                r.comm,
                text(d, "direction"),
                text(d, "parameter"),
                d["old"],
                d["new"]
            );
        }
        RecordKind::Utterance => {
            let _ = writeln!(
                out,
                "{pad}[{}] turn {} agent of {agent} ({}): {}",
                r.comm,
                r.turn,
                text(&d["intent"], "intent"),
                text(d, "text")
            );
        }
        RecordKind::RecursionStart => {
            let _ = writeln!(
                out,
                "{pad}[{}] {agent} asks the agent of {} in {}: {}",
                r.comm,
                text(d, "neighbor"),
                text(d, "child"),
                text(d, "question")
            );
        }
        RecordKind::RecursionEnd => {
            let _ = writeln!(
                out,
                "{pad}[{}] {} returned ({}): {}",
                r.comm,
                text(d, "child"),
                text(d, "termination"),
                text(d, "answer")
            );
        }
        RecordKind::Consensus => {
            let res = &d["result"];
            let merged = res.get("merged").and_then(Value::as_object).map_or(0, |m| m.len());
            let conflicts = res.get("conflicts").and_then(Value::as_array).map_or(0, Vec::len);
            let _ = writeln!(out, "{pad}[{}] consensus: {merged} merged, {conflicts} conflict(s)", r.comm);
        }
        RecordKind::Answer => {
            let _ = writeln!(out, "{pad}[{}] answer by {agent}: {}", r.comm, text(d, "text"));
        }
        RecordKind::RunEnd => {
            let _ = write!(out, "{pad}== end: {}", text(d, "termination"));
            if let Some(s) = d.get("score") {
                let _ = write!(out, ", score {s}");
            }
            if let Some(e) = d.get("error").and_then(Value::as_str) {
                let _ = write!(out, ", error: {e}");
            }
            out.push('\n');
        }
        RecordKind::Warning => {
            let _ = writeln!(out, "{pad}[{}] warning ({agent}): {}", r.comm, text(d, "message"));
        }
    }
    if prompts {
        for p in d.get("prompts").and_then(Value::as_array).into_iter().flatten() {
            let _ = writeln!(out, "{pad}  --- {} prompt", text(p, "stage"));
            out.push_str(&indent(text(p, "text"), &format!("{pad}  | ")));
        }
    }
    out
}

pub fn cmd_replay(args: &ReplayArgs) -> CmdResult {
    let body = std::fs::read_to_string(&args.file)
        .with_context(|| format!("reading {}", args.file.display()))
        .map_err(dataset)?;
    let (log, err) = Trajectory::parse(&body);
    for r in &log.records {
        print!("{}", render_record(r, args.prompts));
    }
    match err {
        Some(e) => Err(dataset(anyhow::Error::new(e).context(format!("{}", args.file.display())))),
        None => Ok(()),
    }
}
