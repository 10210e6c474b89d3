//! Service configuration: one TOML file plus `OPTIAGENT_*` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::agent::{Clock, HttpBackendConfig};
use crate::evalharness::ConfigCondition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Scripted responses; the bundled table when `path` is absent.
    Scripted {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    Http(HttpBackendConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Scripted { path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Static bearer token required on every request when set.
    pub api_token: Option<String>,
    pub backend: BackendConfig,
    /// Prompting condition used for operator queries.
    pub condition: ConfigCondition,
    pub clock: Clock,
    /// Indexed instead of the bundled library when set.
    pub knowledge_dir: Option<PathBuf>,
    pub rulebase: Option<PathBuf>,
    pub examples: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            api_token: None,
            backend: BackendConfig::default(),
            condition: ConfigCondition::AdvancedPlusRag,
            clock: Clock::Wall,
            knowledge_dir: None,
            rulebase: None,
            examples: None,
        }
    }
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Reads `path` (defaults when `None`) and applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, GatewayError> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// `OPTIAGENT_HOST`, `_PORT`, `_DATA_DIR`, `_API_TOKEN`, `_LLM_URL` and
    /// `_LLM_MODEL`. Setting the URL switches to the HTTP backend; the LLM
    /// token itself is read from the environment at request time.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), GatewayError> {
        if let Some(h) = var("OPTIAGENT_HOST") {
            self.host = h;
        }
        if let Some(p) = var("OPTIAGENT_PORT") {
            self.port = p
                .parse()
                .map_err(|_| GatewayError::Config(format!("OPTIAGENT_PORT is not a port: {p:?}")))?;
        }
        if let Some(d) = var("OPTIAGENT_DATA_DIR") {
            self.data_dir = d.into();
        }
        if let Some(t) = var("OPTIAGENT_API_TOKEN") {
            self.api_token = Some(t).filter(|t| !t.is_empty());
        }
        let model = var("OPTIAGENT_LLM_MODEL");
        if let Some(url) = var("OPTIAGENT_LLM_URL") {
            match &mut self.backend {
                BackendConfig::Http(h) => h.url = url,
                b => {
                    *b = BackendConfig::Http(HttpBackendConfig {
                        url,
                        model: model.clone().unwrap_or_else(|| "default".into()),
                        token_env: "OPTIAGENT_LLM_TOKEN".into(),
                        timeout_secs: 30,
                        retries: 2,
                    })
                }
            }
        }
        if let (Some(m), BackendConfig::Http(h)) = (model, &mut self.backend) {
            h.model = m;
        }
        Ok(())
    }
}
