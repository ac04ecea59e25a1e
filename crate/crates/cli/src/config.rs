use std::path::{Path, PathBuf};
use std::time::Duration;

use mobo_core::SessionConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_PORT: &str = "MOBO_PORT";
pub const ENV_STORE: &str = "MOBO_STORE";

/// Service settings, read from TOML. `[session]` holds the defaults every
/// new session starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub store_dir: PathBuf,
    /// Idle sessions are dropped from memory after this long. Their logs
    /// stay on disk and are replayed on the next request.
    pub expiry_secs: u64,
    pub session: SessionConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            store_dir: PathBuf::from("sessions"),
            expiry_secs: 3600,
            session: SessionConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::new("config_invalid", e.to_string()))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::new("io", format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    /// Applies `MOBO_PORT` and `MOBO_STORE` as read through `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        if let Some(p) = var(ENV_PORT) {
            self.port = p
                .trim()
                .parse()
                .map_err(|_| CliError::new("config_invalid", format!("{ENV_PORT}={p:?} is not a port")))?;
        }
        if let Some(s) = var(ENV_STORE) {
            self.store_dir = PathBuf::from(s);
        }
        Ok(())
    }

    pub fn expiry(&self) -> Duration {
        Duration::from_secs(self.expiry_secs)
    }

    /// Checks the expiry and the session defaults, and that the store
    /// directory can be created and written to.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.expiry_secs == 0 {
            return Err(CliError::new("config_invalid", "expiry_secs must be positive"));
        }
        self.session
            .validate()
            .map_err(|e| CliError::new("config_invalid", e.to_string()))?;
        let probe = self.store_dir.join(".write-probe");
        std::fs::create_dir_all(&self.store_dir)
            .and_then(|_| std::fs::write(&probe, b""))
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| CliError::new("store_unwritable", format!("{}: {e}", self.store_dir.display())))
    }
}
