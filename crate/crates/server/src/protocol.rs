//! JSON text-frame protocol between play clients and the session server.

use ctf_core::engine::{BallMode, FlagMode, WorldState};
use ctf_core::{ArenaConfig, Team};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeamChoice {
    Auto,
    Blue,
    White,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Blue,
    White,
    Draw,
}

/// Every frame exchanged on the socket. `join`, `input` and `leave` travel
/// client to server, the rest server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Join {
        name: String,
        #[serde(default = "auto")]
        team: TeamChoice,
    },
    /// Raw values as sent; the session clamps them into range.
    Input {
        #[serde(default)]
        tick: u64,
        #[serde(rename = "move")]
        mv: [f64; 2],
        #[serde(default)]
        act: f64,
    },
    Leave {},
    Welcome {
        player_id: usize,
        team: Team,
        arena: ArenaConfig,
        tick_dt: f64,
    },
    State {
        tick: u64,
        players: Vec<PlayerView>,
        balls: Vec<BallView>,
        flags: Vec<FlagView>,
        time_s: f64,
    },
    RoundEnd {
        winner: Winner,
        time_s: f64,
    },
    Error {
        code: String,
        msg: String,
    },
}

fn auto() -> TeamChoice {
    TeamChoice::Auto
}

impl WireMessage {
    pub fn error(code: &str, msg: impl Into<String>) -> Self {
        Self::Error {
            code: code.to_string(),
            msg: msg.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// True for the variants a client may send.
    pub fn is_client_message(&self) -> bool {
        matches!(
            self,
            Self::Join { .. } | Self::Input { .. } | Self::Leave {}
        )
    }

    /// State frame for session tick `tick`.
    pub fn state(w: &WorldState, tick: u64) -> Self {
        let dt = w.arena.tick_dt;
        Self::State {
            tick,
            players: w
                .players
                .iter()
                .map(|p| PlayerView {
                    id: p.id,
                    team: p.team,
                    pos: [p.pos.x, p.pos.y],
                    stun: p.stun_ticks as f64 * dt,
                    has_ball: p.held_ball.is_some(),
                    has_flag: p.carried_flag.is_some(),
                })
                .collect(),
            balls: w
                .balls
                .iter()
                .map(|b| BallView {
                    id: b.id,
                    pos: [b.pos.x, b.pos.y],
                    mode: match b.mode {
                        BallMode::OnGround => BallViewMode::Ground,
                        BallMode::Held(_) => BallViewMode::Held,
                        BallMode::InFlight => BallViewMode::Flight,
                    },
                })
                .collect(),
            flags: w
                .flags
                .iter()
                .map(|f| FlagView {
                    team: f.team,
                    pos: [f.pos.x, f.pos.y],
                    mode: match f.mode {
                        FlagMode::AtSpawn => FlagViewMode::Spawn,
                        FlagMode::Carried(_) => FlagViewMode::Carried,
                        FlagMode::Dropped => FlagViewMode::Dropped,
                    },
                })
                .collect(),
            time_s: w.time_s(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub id: usize,
    pub team: Team,
    pub pos: [f64; 2],
    /// Remaining stun in seconds.
    pub stun: f64,
    pub has_ball: bool,
    pub has_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallViewMode {
    Ground,
    Held,
    Flight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallView {
    pub id: usize,
    pub pos: [f64; 2],
    pub mode: BallViewMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlagViewMode {
    Spawn,
    Carried,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagView {
    pub team: Team,
    pub pos: [f64; 2],
    pub mode: FlagViewMode,
}
