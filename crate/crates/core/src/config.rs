//! Agent configuration: a TOML file plus environment overrides.
//!
//! ```toml
//! executor = "simulated"
//!
//! [reasoner]
//! base_url = "https://api.deepseek.com/v1"
//! model = "deepseek-reasoner"
//! api_key_env = "DEEPSEEK_API_KEY"
//!
//! [run]
//! max_reflections = 10
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{EndpointConfig, PriceTable};
use crate::runner::{Executor, ProcessExecutor, RunConfig, SimulatedExecutor};

pub const EXECUTOR_ENV: &str = "CHATCFD_EXECUTOR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorMode {
    #[default]
    Real,
    Simulated,
}

impl std::str::FromStr for ExecutorMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(ExecutorMode::Real),
            "simulated" => Ok(ExecutorMode::Simulated),
            other => Err(ConfigError::Invalid(format!("executor must be 'real' or 'simulated', not '{other}'"))),
        }
    }
}

impl ExecutorMode {
    pub fn build(self) -> Arc<dyn Executor> {
        match self {
            ExecutorMode::Real => Arc::new(ProcessExecutor),
            ExecutorMode::Simulated => Arc::new(SimulatedExecutor::default()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("{0}: {1}")]
    Parse(String, String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub executor: ExecutorMode,
    pub reasoner: EndpointConfig,
    pub editor: EndpointConfig,
    pub prices: PriceTable,
    /// Attempts per LLM call, transient failures included.
    pub llm_attempts: u32,
    pub run: RunConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            executor: ExecutorMode::default(),
            reasoner: EndpointConfig::deepseek_reasoner(),
            editor: EndpointConfig::deepseek_editor(),
            prices: PriceTable::default(),
            llm_attempts: 3,
            run: RunConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: AgentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse("config".into(), e.to_string()))?;
        cfg.run.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads `path` when given, else defaults; then applies the environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.display().to_string(), e.to_string()))?;
                Self::from_toml(&text).map_err(|e| match e {
                    ConfigError::Parse(_, m) => ConfigError::Parse(p.display().to_string(), m),
                    other => other,
                })?
            }
            None => AgentConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var(EXECUTOR_ENV).filter(|v| !v.is_empty()) {
            self.executor = v.parse()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = AgentConfig::from_toml("executor = \"simulated\"\n[run]\nmax_reflections = 7\n").unwrap();
        assert_eq!(cfg.executor, ExecutorMode::Simulated);
        assert_eq!(cfg.run.max_reflections, 7);
        assert_eq!(cfg.run.write_every, 5);
        assert_eq!(cfg.reasoner, EndpointConfig::deepseek_reasoner());
    }

    #[test]
    fn one_role_price_override() {
        let cfg = AgentConfig::from_toml("[prices.editor]\ninput_per_1k = \"0.001\"\noutput_per_1k = \"0.002\"\n").unwrap();
        assert_eq!(cfg.prices.reasoner, PriceTable::default().reasoner);
        assert_eq!(cfg.prices.editor.input_per_1k.to_string(), "0.001");
    }

    #[test]
    fn environment_overrides_file() {
        let mut cfg = AgentConfig::default();
        cfg.apply_env(|k| (k == EXECUTOR_ENV).then(|| "simulated".to_string())).unwrap();
        assert_eq!(cfg.executor, ExecutorMode::Simulated);
        assert!(cfg.apply_env(|_| Some("docker".into())).is_err());
    }

    #[test]
    fn invalid_run_section_is_rejected() {
        assert!(matches!(
            AgentConfig::from_toml("[run]\nmax_reflections = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(AgentConfig::from_toml("executor = 3"), Err(ConfigError::Parse(..))));
    }
}
