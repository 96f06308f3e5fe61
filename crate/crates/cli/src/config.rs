//! TOML configuration file plus command-line overrides.
//!
//! ```toml
//! seed = 7
//! out = "out"
//!
//! [backend]            # provider, model, endpoint, api_key_env, script, ...
//! provider = "scripted"
//! script = "fixtures/schedule_easy/scripts/full"
//!
//! [run]
//! datasets = ["fixtures/schedule_easy"]
//! max_turns = 10
//! depth_limit = 1
//! parallel = 1
//! summarizer = "auto"  # auto | extractive | backend
//! judge = false
//! anonymize = "rename.json"
//!
//! [run.flags]
//! infonav = true
//! clear_memory = true
//! fuzzy_memory = true
//! recursion = true
//! privacy_prompt = false
//!
//! [gen]
//! participants = 6
//! pools = "pools.json"
//! mode = "template"
//! count = 1
//! ```
//!
//! Relative paths are resolved against the config file's directory. API keys
//! are read from the environment variable named by `backend.api_key_env`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use iagents::agent::AblationFlags;
use iagents::backend::BackendConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub backend: BackendConfig,
    pub run: RunSection,
    pub gen: GenSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub datasets: Vec<PathBuf>,
    pub max_turns: u32,
    pub depth_limit: u32,
    pub parallel: usize,
    pub summarizer: String,
    pub judge: bool,
    pub anonymize: Option<PathBuf>,
    pub flags: AblationFlags,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            max_turns: 10,
            depth_limit: 1,
            parallel: 1,
            summarizer: "auto".into(),
            judge: false,
            anonymize: None,
            flags: AblationFlags::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    pub participants: Option<usize>,
    pub pools: Option<PathBuf>,
    pub mode: String,
    pub count: usize,
}

impl Default for GenSection {
    fn default() -> Self {
        Self {
            participants: None,
            pools: None,
            mode: "template".into(),
            count: 1,
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(o) = cfg.out.as_mut() {
            rebase(base, o);
        }
        if let Some(s) = cfg.backend.script.as_mut() {
            rebase(base, s);
        }
        for d in cfg.run.datasets.iter_mut() {
            rebase(base, d);
        }
        if let Some(a) = cfg.run.anonymize.as_mut() {
            rebase(base, a);
        }
        if let Some(p) = cfg.gen.pools.as_mut() {
            rebase(base, p);
        }
        Ok(cfg)
    }
}

/// Effective settings of a `run`, after flags are applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub datasets: Vec<PathBuf>,
    pub backend: BackendConfig,
    pub run: RunSection,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.datasets.is_empty(), "no dataset given (use --dataset or run.datasets)");
        anyhow::ensure!(self.run.max_turns >= 1, "max_turns must be at least 1");
        anyhow::ensure!(self.run.parallel >= 1, "parallel must be at least 1");
        anyhow::ensure!(
            ["auto", "extractive", "backend"].contains(&self.run.summarizer.as_str()),
            "summarizer must be auto, extractive or backend"
        );
        self.backend.validate()?;
        Ok(())
    }

    /// Short digest of the effective configuration, for reports.
    pub fn digest(&self) -> String {
        iagents::backend::digest(&serde_json::to_string(self).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let doc = include_str!("config.rs")
            .lines()
            .filter_map(|l| l.strip_prefix("//! "))
            .skip_while(|l| !l.starts_with("```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("```"))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg: FileConfig = toml::from_str(&doc).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.run.max_turns, 10);
        assert!(cfg.run.flags.recursion);
        assert_eq!(cfg.gen.participants, Some(6));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("[run]\nmax_turn = 3\n").is_err());
        assert!(toml::from_str::<FileConfig>("api_key = \"x\"\n").is_err());
    }
}
