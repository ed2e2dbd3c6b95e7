//! Stage metadata, the run manifest, and idempotence checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageMeta {
    pub command: String,
    pub config_hash: String,
    pub rng_algorithm: String,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub counters: BTreeMap<String, u64>,
    pub extras: BTreeMap<String, f64>,
    pub wall_secs: f64,
    pub artifacts: Vec<String>,
}

impl StageMeta {
    pub fn new(command: &str, config_hash: &str) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(
            "opcorrect".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        Self {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            rng_algorithm: opcorrect_core::rng::RNG_ALGORITHM.to_string(),
            seeds: BTreeMap::new(),
            versions,
            counters: BTreeMap::new(),
            extras: BTreeMap::new(),
            wall_secs: 0.0,
            artifacts: Vec::new(),
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageMeta>,
}

pub struct RunDir {
    pub root: PathBuf,
    pub config_hash: String,
}

impl RunDir {
    pub fn create(root: &Path, config_hash: &str, resolved_config: &str) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("creating output dir `{}`", root.display()))?;
        std::fs::write(root.join("config.resolved"), resolved_config)?;
        Ok(Self {
            root: root.to_path_buf(),
            config_hash: config_hash.to_string(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn manifest(&self) -> Manifest {
        match std::fs::read_to_string(self.manifest_path()) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => Manifest::default(),
        }
    }

    /// A stage is up to date when its recorded config hash matches and every
    /// artifact file still exists.
    pub fn stage_is_current(&self, stage: &str) -> bool {
        let manifest = self.manifest();
        let Some(meta) = manifest.stages.get(stage) else {
            return false;
        };
        meta.config_hash == self.config_hash
            && meta
                .artifacts
                .iter()
                .all(|a| self.root.join(a).exists())
    }

    /// Record a finished stage: write `<stage>.meta.json` and fold the entry
    /// into the manifest.
    pub fn record_stage(&self, stage: &str, meta: StageMeta) -> Result<()> {
        let meta_path = self.path(&format!("{stage}.meta.json"));
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
        let mut manifest = self.manifest();
        manifest.stages.insert(stage.to_string(), meta);
        std::fs::write(
            self.manifest_path(),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    pub fn stage_meta(&self, stage: &str) -> Result<StageMeta> {
        let path = self.path(&format!("{stage}.meta.json"));
        let text = std::fs::read_to_string(&path).with_context(|| {
            format!(
                "stage `{stage}` has not produced `{}`",
                path.display()
            )
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Error text used when a stage needs an artifact a producer has not
    /// written yet: names the producing subcommand.
    pub fn require(&self, file: &str, producer: &str) -> Result<PathBuf> {
        let path = self.path(file);
        if !path.exists() {
            anyhow::bail!(
                "missing artifact `{}`; run `opcorrect {producer}` first",
                path.display()
            );
        }
        Ok(path)
    }
}
