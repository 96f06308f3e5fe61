use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use iagents::agent::{AgentConfig, Backends};
use iagents::backend::{BackendConfig, BackendRegistry, EmbeddingProvider, PromptTemplates, ReplayScript, ScriptedBackend};
use iagents::benchgen::load_prepared_dataset;
use iagents::corpus::{anonymize, Dataset, RenameMap, TaskInstance};
use iagents::eval::{aggregate_report, AccuracyMode, RunMetadata};
use iagents::harness::{run_dataset, write_trajectories, TaskRun};
use iagents::infonav::FakeSolvedDetector;
use iagents::memory::{BackendSummarizer, CachedEmbedding, ExtractiveSummarizer, Summarizer};

use crate::config::{FileConfig, RunConfig};
use crate::{dataset, internal, usage, CmdResult, Failure, RunArgs};

pub const EMBEDDING_CACHE_FILE: &str = "embedding_cache.jsonl";

fn effective(args: &RunArgs, file: &FileConfig, seed: Option<u64>, out: PathBuf) -> RunConfig {
    let mut backend = file.backend.clone();
    if let Some(p) = &args.backend {
        backend.provider = p.clone();
    }
    if let Some(m) = &args.model {
        backend.model = m.clone();
    }
    if let Some(s) = &args.script {
        backend.script = Some(s.clone());
    }
    if let Some(e) = &args.endpoint {
        backend.endpoint = e.clone();
    }
    if let Some(s) = seed {
        backend.embedding_seed = s;
    }
    let mut run = file.run.clone();
    if let Some(t) = args.max_turns {
        run.max_turns = t;
    }
    if let Some(d) = args.depth_limit {
        run.depth_limit = d;
    }
    if let Some(p) = args.parallel {
        run.parallel = p;
    }
    if args.anonymize.is_some() {
        run.anonymize = args.anonymize.clone();
    }
    run.judge |= args.judge;
    let f = &mut run.flags;
    f.infonav &= !args.no_infonav;
    f.clear_memory &= !args.no_clear_memory;
    f.fuzzy_memory &= !args.no_fuzzy_memory;
    f.recursion &= !args.no_recursion;
    f.privacy_prompt |= args.privacy_prompt;
    let datasets = if args.datasets.is_empty() {
        file.run.datasets.clone()
    } else {
        args.datasets.clone()
    };
    RunConfig {
        datasets,
        backend,
        run,
        seed: seed.unwrap_or(0),
        out,
    }
}

/// Shared, task-independent parts of the backends.
struct Shared {
    embedding: Arc<dyn EmbeddingProvider>,
    summarize_with_backend: bool,
    script_dir: Option<PathBuf>,
}

impl Shared {
    fn new(cfg: &RunConfig) -> Result<Self, Failure> {
        let registry = BackendRegistry::default();
        if !registry.chat_names().any(|n| n == cfg.backend.provider) {
            let known: Vec<_> = registry.chat_names().collect();
            return Err(usage(anyhow::anyhow!(
                "unknown backend `{}` (known: {})",
                cfg.backend.provider,
                known.join(", ")
            )));
        }
        let script_dir = match &cfg.backend.script {
            Some(p) if p.is_dir() => Some(p.clone()),
            Some(p) if !p.exists() => return Err(usage(anyhow::anyhow!("script {} does not exist", p.display()))),
            _ => None,
        };
        if cfg.backend.provider == "scripted" && cfg.backend.script.is_none() {
            return Err(usage(anyhow::anyhow!("the scripted backend needs --script")));
        }
        if cfg.backend.provider == "remote" || cfg.backend.embedding_provider == "remote" {
            // fail before any task starts when the key is missing
            if std::env::var_os(&cfg.backend.api_key_env).is_none() {
                return Err(usage(iagents::backend::BackendError::MissingKey(cfg.backend.api_key_env.clone())));
            }
            registry.build_chat(&cfg.backend).map_err(usage)?;
        }
        let raw = registry.build_embedding(&cfg.backend).map_err(usage)?;
        let embedding: Arc<dyn EmbeddingProvider> = if cfg.backend.embedding_provider == "remote" {
            std::fs::create_dir_all(&cfg.out).map_err(internal)?;
            Arc::new(CachedEmbedding::open(raw, &cfg.out.join(EMBEDDING_CACHE_FILE)).map_err(usage)?)
        } else {
            raw
        };
        let summarize_with_backend = match cfg.run.summarizer.as_str() {
            "backend" => true,
            "extractive" => false,
            _ => cfg.backend.provider == "remote",
        };
        Ok(Self {
            embedding,
            summarize_with_backend,
            script_dir,
        })
    }

    fn backends(&self, cfg: &BackendConfig, task: &TaskInstance) -> Result<Backends, iagents::backend::BackendError> {
        let chat = match &self.script_dir {
            Some(dir) => {
                let path = dir.join(format!("{}.jsonl", task.id));
                Arc::new(ScriptedBackend::new(ReplayScript::load(&path)?)) as Arc<_>
            }
            None => BackendRegistry::default().build_chat(cfg)?,
        };
        let templates = PromptTemplates::default();
        let summarizer: Arc<dyn Summarizer> = if self.summarize_with_backend {
            Arc::new(BackendSummarizer {
                backend: chat.clone(),
                templates: templates.clone(),
            })
        } else {
            Arc::new(ExtractiveSummarizer)
        };
        Ok(Backends {
            chat,
            embedding: self.embedding.clone(),
            summarizer,
            templates,
            detector: FakeSolvedDetector::default(),
        })
    }
}

fn load_datasets(cfg: &RunConfig) -> Result<Vec<Dataset>, Failure> {
    let map: Option<RenameMap> = match &cfg.run.anonymize {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading rename map {}", p.display()))
                .map_err(usage)?;
            Some(
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing rename map {}", p.display()))
                    .map_err(usage)?,
            )
        }
        None => None,
    };
    cfg.datasets
        .iter()
        .map(|dir| {
            let ds = load_prepared_dataset(dir)
                .with_context(|| format!("dataset {}", dir.display()))
                .map_err(dataset)?;
            match &map {
                Some(m) => anonymize(&ds, m).map_err(dataset),
                None => Ok(ds),
            }
        })
        .collect()
}

fn write_outputs(out: &Path, runs: &[TaskRun], metadata: RunMetadata) -> CmdResult {
    write_trajectories(&out.join("trajectories"), runs).map_err(internal)?;
    let results: Vec<_> = runs.iter().map(|r| r.result.clone()).collect();
    let report = aggregate_report(&results, metadata).map_err(dataset)?;
    std::fs::write(out.join("report.json"), report.to_json()).map_err(internal)?;
    let table = report.to_table();
    std::fs::write(out.join("report.txt"), &table).map_err(internal)?;
    print!("{table}");
    Ok(())
}

pub fn cmd_run(args: &RunArgs, file: &FileConfig, seed: Option<u64>, out: PathBuf) -> CmdResult {
    let cfg = effective(args, file, seed, out);
    cfg.validate().map_err(usage)?;
    let shared = Shared::new(&cfg)?;
    let datasets = load_datasets(&cfg)?;
    let agent = AgentConfig {
        max_turns: cfg.run.max_turns,
        depth_limit: cfg.run.depth_limit,
        flags: cfg.run.flags,
        ..AgentConfig::default()
    };
    let mode = if cfg.run.judge {
        let backend = match &shared.script_dir {
            Some(_) => return Err(usage(anyhow::anyhow!("--judge needs a single script file or a remote backend"))),
            None => BackendRegistry::default().build_chat(&cfg.backend).map_err(usage)?,
        };
        AccuracyMode::Judge {
            backend,
            templates: PromptTemplates::default(),
        }
    } else {
        AccuracyMode::Normalized
    };
    let factory = |t: &TaskInstance| shared.backends(&cfg.backend, t);
    let mut runs = Vec::new();
    for ds in &datasets {
        runs.extend(run_dataset(ds, &factory, agent, &mode, cfg.run.parallel));
    }
    runs.sort_by(|a, b| a.outcome.task_id.cmp(&b.outcome.task_id));
    std::fs::create_dir_all(&cfg.out).map_err(internal)?;
    let metadata = RunMetadata {
        backend: cfg.backend.provider.clone(),
        model: cfg.backend.model.clone(),
        config_digest: cfg.digest(),
        flags: serde_json::to_value(cfg.run.flags).expect("flags serialize"),
        seed: cfg.seed,
    };
    write_outputs(&cfg.out, &runs, metadata)?;
    let failed: Vec<_> = runs
        .iter()
        .filter_map(|r| r.outcome.error.as_ref().map(|e| (&r.outcome.task_id, e)))
        .collect();
    if !failed.is_empty() {
        eprintln!("{} of {} task(s) ended with an error:", failed.len(), runs.len());
        for (id, e) in failed {
            eprintln!("  {id}: {e}");
        }
    }
    Ok(())
}
