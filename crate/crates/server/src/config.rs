use std::path::{Path, PathBuf};

use ctf_core::perception::DEFAULT_RAYS;
use ctf_core::ArenaConfig;
use serde::{Deserialize, Serialize};

use crate::ServerError;

/// Who controls a seat that no human occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeatFill {
    /// The scripted expert, or the bot checkpoint when one is configured.
    Default,
    /// Stand still.
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub session_id: String,
    pub seed: u64,
    pub arena: ArenaConfig,
    pub bind: String,
    pub port: u16,
    pub demo_dir: PathBuf,
    /// Defaults to `{demo_dir}/{session_id}.session.jsonl`.
    pub log_path: Option<PathBuf>,
    pub bot_checkpoint: Option<PathBuf>,
    pub empty_seats: SeatFill,
    pub intermission_ticks: u64,
    pub idle_timeout_ticks: u64,
    pub rays: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            session_id: "session".into(),
            seed: 0,
            arena: ArenaConfig::default(),
            bind: "127.0.0.1".into(),
            port: 8765,
            demo_dir: "demos".into(),
            log_path: None,
            bot_checkpoint: None,
            empty_seats: SeatFill::Default,
            intermission_ticks: 100,
            idle_timeout_ticks: 1200,
            rays: DEFAULT_RAYS,
        }
    }
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        self.arena.validate()?;
        if self.session_id.is_empty() || self.session_id.contains(['/', '\\']) {
            return Err(ServerError::Config(format!(
                "bad session_id {:?}",
                self.session_id
            )));
        }
        if self.rays == 0 {
            return Err(ServerError::Config("rays must be positive".into()));
        }
        if self.idle_timeout_ticks == 0 {
            return Err(ServerError::Config(
                "idle_timeout_ticks must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn log_path(&self) -> PathBuf {
        self.log_path.clone().unwrap_or_else(|| {
            self.demo_dir
                .join(format!("{}.session.jsonl", self.session_id))
        })
    }
}
