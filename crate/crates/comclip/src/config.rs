//! Run configuration: a TOML file mirrors this struct, CLI flags override
//! individual fields, and two environment variables fill gaps
//! (COMCLIP_CACHE_DIR for the cache location, COMCLIP_LLM_TOKEN for the
//! language-model bearer token).

use std::path::PathBuf;
use std::time::Duration;

use comclip_core::compose::CompositionConfig;
use serde::{Deserialize, Serialize};

use crate::client::{
    FixtureMode, LlmClientConfig, DEFAULT_MAX_IN_FLIGHT, DEFAULT_RETRIES, DEFAULT_TIMEOUT_SECS,
};

pub const ENV_CACHE_DIR: &str = "COMCLIP_CACHE_DIR";
pub const ENV_LLM_TOKEN: &str = "COMCLIP_LLM_TOKEN";

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for instance scoring; 0 means the CPU count.
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub composition: CompositionConfig,
    pub backend: BackendConfig,
    pub llm: LlmConfig,
    pub captioner: CaptionerConfig,
    pub fixtures: FixtureConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    /// "mock" or "remote".
    pub kind: String,
    pub dim: usize,
    /// Cache identity; defaults to "mock-{dim}" for the mock backend.
    pub id: Option<String>,
    pub endpoint: Option<String>,
    pub preprocessing: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: "mock".to_string(),
            dim: 512,
            id: None,
            endpoint: None,
            preprocessing: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    pub max_in_flight: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            retries: DEFAULT_RETRIES,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CaptionerConfig {
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureConfig {
    pub llm_dir: Option<PathBuf>,
    pub captioner_dir: Option<PathBuf>,
    pub encoder_dir: Option<PathBuf>,
    /// Record live responses into the fixture dirs instead of replaying.
    pub record: bool,
}

impl FixtureConfig {
    pub fn mode_for(&self, dir: &Option<PathBuf>) -> FixtureMode {
        match dir {
            None => FixtureMode::Off,
            Some(d) if self.record => FixtureMode::Record(d.clone()),
            Some(d) => FixtureMode::Replay(d.clone()),
        }
    }
}

impl RunConfig {
    /// Load from a TOML file, or defaults when no path is given; then
    /// apply environment fallbacks.
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, String> {
        let mut cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", p.display()))?
            }
        };
        cfg.apply_env();
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if self.cache_dir.is_none() {
            if let Ok(dir) = std::env::var(ENV_CACHE_DIR) {
                if !dir.is_empty() {
                    self.cache_dir = Some(PathBuf::from(dir));
                }
            }
        }
    }

    pub fn llm_client_config(&self) -> LlmClientConfig {
        LlmClientConfig {
            endpoint: self.llm.endpoint.clone(),
            token: std::env::var(ENV_LLM_TOKEN).ok().filter(|t| !t.is_empty()),
            timeout: Duration::from_secs(self.llm.timeout_secs),
            retries: self.llm.retries,
            max_in_flight: self.llm.max_in_flight,
            fixtures: self.fixtures.mode_for(&self.fixtures.llm_dir),
        }
    }

    pub fn effective_parallelism(&self) -> usize {
        if self.parallelism == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            self.parallelism
        }
    }
}
