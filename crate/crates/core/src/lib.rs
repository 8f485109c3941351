//! Headless 3v3 capture-the-flag simulator, demonstration records, and the
//! imitation/reinforcement learning stack that trains bots from them.

pub mod action;
pub mod arena;
pub mod demos;
pub mod engine;
pub mod error;
pub mod geom;
pub mod nn;
pub mod perception;
pub mod training;

pub use action::{decode_action, Action, Intent};
pub use engine::{ArenaConfig, Team, WorldState};
pub use error::{ContractError, EngineError};
