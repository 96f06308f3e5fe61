use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use iagents::backend::BackendRegistry;
use iagents::benchgen::{
    default_base_dialogues, default_needles, gen_np, gen_schedule_dataset, write_generated, DialogueMode, Difficulty, NpOptions, Pools,
    Provenance, ScheduleOptions, DEFAULT_NAMES, GENERATOR_VERSION,
};

use crate::config::FileConfig;
use crate::{dataset, internal, usage, CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    ScheduleEasy,
    ScheduleMedium,
    ScheduleHard,
    Np,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Template,
    Llm,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: GenKind,
    /// Number of instances; more than one writes numbered subdirectories
    /// using consecutive seeds.
    #[arg(long)]
    pub count: Option<usize>,
    /// Schedule worlds: number of people.
    #[arg(long)]
    pub participants: Option<usize>,
    /// Schedule worlds: JSON file replacing the built-in activity pools.
    #[arg(long)]
    pub pools: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Needle instances: plant the contrasting persona in the second person.
    #[arg(long)]
    pub opposite: bool,
}

fn dialogue_mode(args: &GenArgs, file: &FileConfig) -> Result<DialogueMode, Failure> {
    let mode = match args.mode {
        Some(m) => m,
        None => Mode::from_str(&file.gen.mode, true).map_err(|e| usage(anyhow::anyhow!("gen.mode: {e}")))?,
    };
    Ok(match mode {
        Mode::Template => DialogueMode::Template,
        Mode::Llm => DialogueMode::Llm(BackendRegistry::default().build_chat(&file.backend).map_err(usage)?),
    })
}

fn load_pools(path: Option<&Path>) -> Result<Pools, Failure> {
    let Some(p) = path else {
        return Ok(Pools::default());
    };
    let text = std::fs::read_to_string(p)
        .with_context(|| format!("reading pools {}", p.display()))
        .map_err(usage)?;
    let pools: Pools = serde_json::from_str(&text)
        .with_context(|| format!("parsing pools {}", p.display()))
        .map_err(usage)?;
    pools.validate().map_err(usage)?;
    Ok(pools)
}

fn one(args: &GenArgs, file: &FileConfig, mode: &DialogueMode, seed: u64, dir: &Path) -> CmdResult {
    let bench_err = |e: iagents::benchgen::BenchError| match e {
        iagents::benchgen::BenchError::Io { .. } => internal(e),
        iagents::benchgen::BenchError::Corpus(iagents::corpus::CorpusError::Io { .. }) => internal(e),
        other => dataset(other),
    };
    let (ds, prov) = match args.kind {
        GenKind::Np => {
            let needles = default_needles();
            let needle = &needles[(seed % needles.len() as u64) as usize];
            let (base, bridge) = default_base_dialogues(seed);
            let opts = NpOptions {
                opposite: args.opposite,
                mode: mode.clone(),
                task_id: format!("np-{seed}"),
            };
            let ds = gen_np(seed, &base, &bridge, needle, &opts).map_err(bench_err)?;
            let prov = Provenance {
                generator_version: GENERATOR_VERSION.into(),
                kind: if args.opposite { "np_opposite".into() } else { "np".into() },
                seed,
                pool_digest: None,
                regenerations: 0,
                dialogue_mode: mode.label().into(),
            };
            (ds, prov)
        }
        kind => {
            let difficulty = match kind {
                GenKind::ScheduleEasy => Difficulty::Easy,
                GenKind::ScheduleMedium => Difficulty::Medium,
                _ => Difficulty::Hard,
            };
            let mut opts = ScheduleOptions::new(difficulty);
            if let Some(n) = args.participants.or(file.gen.participants) {
                if n < 2 || n > DEFAULT_NAMES.len() {
                    return Err(usage(anyhow::anyhow!("participants must be between 2 and {}", DEFAULT_NAMES.len())));
                }
                opts.participants = DEFAULT_NAMES[..n].iter().map(|s| s.to_string()).collect();
            }
            opts.pools = load_pools(args.pools.as_deref().or(file.gen.pools.as_deref()))?;
            opts.mode = mode.clone();
            let (ds, _, prov) = gen_schedule_dataset(seed, &opts).map_err(bench_err)?;
            (ds, prov)
        }
    };
    write_generated(dir, &ds, &prov).map_err(internal)?;
    println!(
        "{}: {} people, {} messages, {} task(s)",
        dir.display(),
        ds.network.node_count(),
        ds.corpus.len(),
        ds.tasks.len()
    );
    Ok(())
}

pub fn cmd_gen(args: &GenArgs, file: &FileConfig, seed: u64, out: PathBuf) -> CmdResult {
    let count = args.count.unwrap_or(file.gen.count);
    if count == 0 {
        return Err(usage(anyhow::anyhow!("count must be at least 1")));
    }
    let mode = dialogue_mode(args, file)?;
    if count == 1 {
        return one(args, file, &mode, seed, &out);
    }
    for i in 0..count as u64 {
        one(args, file, &mode, seed + i, &out.join(format!("{:04}", i)))?;
    }
    Ok(())
}
