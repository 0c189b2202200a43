use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use crs_core::chat::ChatConfig;
use crs_core::scoring::ScorerConfig;
use serde::{Deserialize, Serialize};

pub const STORE_ENV: &str = "CRS_STORE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub corpus: u64,
    pub probes: u64,
    pub mf: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            corpus: 0,
            probes: 13,
            mf: 0,
        }
    }
}

/// `crs.toml`. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store: Option<PathBuf>,
    pub port: u16,
    /// Corpus directory the n-gram backend trains on. Without one it trains
    /// on sequence, tag and review examples rebuilt from the store.
    pub corpus: Option<PathBuf>,
    pub scorer: ScorerConfig,
    pub chat: ChatConfig,
    pub seeds: Seeds,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            store: None,
            port: 8080,
            corpus: None,
            scorer: ScorerConfig::default(),
            chat: ChatConfig::default(),
            seeds: Seeds::default(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.scorer.validate()?;
        Ok(config)
    }

    /// Store directory: the command-line flag, then `CRS_STORE`, then the
    /// config file.
    pub fn store_path(&self, flag: Option<&Path>) -> anyhow::Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p.to_path_buf());
        }
        if let Some(p) = std::env::var_os(STORE_ENV).filter(|v| !v.is_empty()) {
            return Ok(PathBuf::from(p));
        }
        match &self.store {
            Some(p) => Ok(p.clone()),
            None => bail!("no store given: pass --store, set {STORE_ENV} or add `store` to the config file"),
        }
    }
}
