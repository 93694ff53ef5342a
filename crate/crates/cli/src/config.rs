use std::path::{Path, PathBuf};

use qualinfer::eval::{Checker, CheckerConfig};
use qualinfer::infer::{ConjoinConfig, DEFAULT_PAIR_CAP, DEFAULT_THRESHOLD};
use qualinfer::ingest::{sha256_hex, SizeBounds};
use qualinfer::learn::{GcnConfig, GtnConfig, ModelConfig, ModelKind, SplitSpec};
use qualinfer::napast::PruneConfig;
use qualinfer::rewrite::RewriteConfig;
use qualinfer::{AliasTable, Error, Result};
use serde::{Deserialize, Serialize};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    pub enabled: bool,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            enabled: false,
            k_min: 1,
            k_max: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerSetting {
    Stub,
    Command(CheckerConfig),
}

/// Settings merged from defaults, the config file and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the split, model initialization, sampling and clustering.
    pub seed: u64,
    pub tau: f64,
    pub model: ModelKind,
    pub gcn: GcnConfig,
    pub gtn: GtnConfig,
    pub split: SplitSpec,
    pub pair_cap: usize,
    /// Qualifier annotation names; empty means the built-in table.
    pub aliases: Vec<String>,
    pub prune: Option<PathBuf>,
    pub size_bounds: SizeBounds,
    pub ablation_reps: usize,
    pub cluster: ClusterSettings,
    pub checker: Option<CheckerSetting>,
    pub rewrite: RewriteConfig,
    pub dry_run: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            tau: DEFAULT_THRESHOLD,
            model: ModelKind::FastGtn,
            gcn: GcnConfig::default(),
            gtn: GtnConfig::default(),
            split: SplitSpec::default(),
            pair_cap: DEFAULT_PAIR_CAP,
            aliases: Vec::new(),
            prune: None,
            size_bounds: SizeBounds::default(),
            ablation_reps: 50,
            cluster: ClusterSettings::default(),
            checker: None,
            rewrite: RewriteConfig::default(),
            dry_run: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Pushes the master seed into every seeded component and validates.
    pub fn resolve(mut self) -> Result<Self> {
        self.gcn.seed = self.seed;
        self.gtn.seed = self.seed;
        self.split.seed = self.seed;
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.cluster.k_min == 0 || self.cluster.k_min > self.cluster.k_max {
            return Err(Error::Config("cluster k range is empty".into()));
        }
        self.model_config().validate()?;
        self.prune_config()?;
        self.alias_table()?;
        Ok(self)
    }

    pub fn model_config(&self) -> ModelConfig {
        match self.model {
            ModelKind::Gcn => ModelConfig::Gcn(self.gcn.clone()),
            ModelKind::FastGtn => ModelConfig::FastGtn(self.gtn.clone()),
        }
    }

    pub fn prune_config(&self) -> Result<PruneConfig> {
        match &self.prune {
            Some(p) => PruneConfig::load(p),
            None => Ok(PruneConfig::default()),
        }
    }

    pub fn alias_table(&self) -> Result<AliasTable> {
        if self.aliases.is_empty() {
            Ok(AliasTable::default())
        } else {
            AliasTable::new(self.aliases.iter().cloned())
        }
    }

    pub fn conjoin(&self) -> ConjoinConfig {
        ConjoinConfig {
            pair_cap: self.pair_cap,
        }
    }

    pub fn checker(&self) -> Option<Checker> {
        self.checker.as_ref().map(|c| match c {
            CheckerSetting::Stub => Checker::Stub,
            CheckerSetting::Command(cfg) => Checker::Command(cfg.clone()),
        })
    }

    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())[..16].to_string()
    }

    /// Record embedded in every artifact.
    pub fn provenance(&self, command: &[String]) -> serde_json::Value {
        serde_json::json!({
            "format_version": ARTIFACT_FORMAT_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_digest": self.digest(),
            "seeds": {
                "seed": self.seed,
                "split": self.split.seed,
                "model": self.model_config().seed(),
            },
            "config": self,
        })
    }
}
