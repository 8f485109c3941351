//! Authoritative real-time play sessions: humans join over a WebSocket,
//! empty seats are driven by a bot checkpoint or the scripted expert, and
//! every human seat records a demonstration.

mod config;
mod net;
pub mod protocol;
mod replay;
mod session;

use std::path::PathBuf;

use ctf_core::demos::DemoError;
use ctf_core::nn::CheckpointError;
use ctf_core::EngineError;
use thiserror::Error;

pub use config::{SeatFill, ServerConfig};
pub use net::{start_server, ServerHandle};
pub use protocol::{TeamChoice, Winner, WireMessage};
pub use replay::{replay_session, LogEntry, ReplayReport};
pub use session::{ConnId, Counters, Outgoing, SeatKind, Session, SessionSummary, Target};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bot checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("session thread panicked")]
    Panicked,
}
