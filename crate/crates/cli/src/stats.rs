use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use iagents::corpus::{graph_stats, read_dataset, SocialNetwork, NETWORK_FILE};
use iagents::eval::memory_behavior_stats;
use iagents::harness::task_trajectory_from_log;
use iagents::infonav::{trajectory_stats, FakeSolvedDetector, TaskTrajectory, TrajectoryStats};
use iagents::trajectory::Trajectory;
use serde_json::json;

use crate::{dataset, usage, CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsKind {
    /// Graph statistics of dataset networks.
    Graph,
    /// Planning statistics of trajectories, split by run verdict.
    Infonav,
    /// Retrieval-parameter adjustments of trajectories.
    Memory,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub kind: StatsKind,
    /// Dataset directories or network files (graph); trajectory files or
    /// directories of them (infonav, memory).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

fn load_network(p: &Path) -> Result<SocialNetwork, Failure> {
    if p.is_dir() && !p.join(iagents::corpus::TASKS_FILE).exists() {
        let text = std::fs::read_to_string(p.join(NETWORK_FILE))
            .with_context(|| format!("reading {}", p.join(NETWORK_FILE).display()))
            .map_err(dataset)?;
        return iagents::corpus::parse_network(&text).map_err(dataset);
    }
    if p.is_dir() {
        return Ok(read_dataset(p)
            .with_context(|| format!("dataset {}", p.display()))
            .map_err(dataset)?
            .network);
    }
    let text = std::fs::read_to_string(p)
        .with_context(|| format!("reading {}", p.display()))
        .map_err(dataset)?;
    iagents::corpus::parse_network(&text).map_err(dataset)
}

/// Trajectory files named by `inputs`, directories expanded to their
/// `*.jsonl` entries in name order.
pub fn collect_logs(inputs: &[PathBuf]) -> Result<Vec<Trajectory>, Failure> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))
                .map_err(dataset)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(dataset(anyhow::anyhow!("no trajectory files found")));
    }
    files
        .iter()
        .map(|f| {
            Trajectory::read(f)
                .with_context(|| format!("trajectory {}", f.display()))
                .map_err(dataset)
        })
        .collect()
}

fn stats_row(out: &mut String, label: &str, s: Option<&TrajectoryStats>) {
    match s {
        Some(s) => {
            let _ = writeln!(
                out,
                "{label:<6}  {:>5}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}",
                s.tasks, s.rationale_count, s.solved_per_update, s.solved_ratio, s.fake_solved_ratio, s.consensus_ratio
            );
        }
        None => {
            let _ = writeln!(
                out,
                "{label:<6}  {:>5}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}",
                0, "-", "-", "-", "-", "-"
            );
        }
    }
}

fn infonav(inputs: &[PathBuf], as_json: bool) -> CmdResult {
    let logs = collect_logs(inputs)?;
    let tasks: Vec<TaskTrajectory> = logs.iter().map(task_trajectory_from_log).collect();
    let detector = FakeSolvedDetector::default();
    let split = |pred: &dyn Fn(&TaskTrajectory) -> bool| {
        let subset: Vec<TaskTrajectory> = tasks.iter().filter(|t| pred(t)).cloned().collect();
        trajectory_stats(&subset, &detector).ok()
    };
    let all = split(&|_| true);
    if all.is_none() {
        return Err(dataset(anyhow::anyhow!("no trajectory contains plans")));
    }
    let right = split(&|t| t.success == Some(true));
    let wrong = split(&|t| t.success != Some(true));
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "all": all, "right": right, "wrong": wrong })).expect("stats serialize")
        );
        return Ok(());
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6}  {:>5}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}",
        "runs", "tasks", "slots", "solved/up", "solved", "fake", "consensus"
    );
    stats_row(&mut out, "all", all.as_ref());
    stats_row(&mut out, "right", right.as_ref());
    stats_row(&mut out, "wrong", wrong.as_ref());
    print!("{out}");
    Ok(())
}

fn memory(inputs: &[PathBuf], as_json: bool) -> CmdResult {
    let logs = collect_logs(inputs)?;
    let stats = memory_behavior_stats(&logs).map_err(dataset)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
        return Ok(());
    }
    println!("runs: {} ({} successful)", stats.runs, stats.successful_runs);
    println!(
        "{:<15}  {:<7}  {:>5}  {:>8}  {:>8}  {:>9}  {:>8}",
        "parameter", "runs", "n", "increase", "decrease", "unchanged", "replaced"
    );
    for (param, b) in &stats.params {
        let name = serde_json::to_value(param).expect("param serializes");
        for (label, c) in [("all", &b.overall), ("success", &b.success), ("failure", &b.failure)] {
            let f = c.fractions();
            println!(
                "{:<15}  {:<7}  {:>5}  {:>8.4}  {:>8.4}  {:>9.4}  {:>8.4}",
                name.as_str().unwrap_or("?"),
                label,
                c.total(),
                f[0],
                f[1],
                f[2],
                f[3]
            );
        }
    }
    Ok(())
}

fn graph(inputs: &[PathBuf], as_json: bool) -> CmdResult {
    let mut rows = Vec::new();
    for p in inputs {
        let net = load_network(p)?;
        rows.push((p.display().to_string(), graph_stats(&net).map_err(dataset)?));
    }
    if as_json {
        let v: Vec<_> = rows.iter().map(|(p, s)| json!({ "input": p, "stats": s })).collect();
        println!("{}", serde_json::to_string_pretty(&v).expect("stats serialize"));
        return Ok(());
    }
    for (p, s) in rows {
        println!("{p}");
        println!("  nodes: {}", s.node_count);
        println!("  edges: {}", s.edge_count);
        println!("  density: {:.4}", s.density);
        println!("  average degree: {:.4}", s.avg_degree);
        println!("  diameter: {}", s.diameter);
        println!("  average path length: {:.4}", s.avg_path_length);
        println!("  components: {} (largest {})", s.component_count, s.largest_component_size);
    }
    Ok(())
}

pub fn cmd_stats(args: &StatsArgs) -> CmdResult {
    if args.inputs.is_empty() {
        return Err(usage(anyhow::anyhow!("no inputs given")));
    }
    match args.kind {
        StatsKind::Graph => graph(&args.inputs, args.json),
        StatsKind::Infonav => infonav(&args.inputs, args.json),
        StatsKind::Memory => memory(&args.inputs, args.json),
    }
}
