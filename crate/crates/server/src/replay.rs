use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ctf_core::demos::{read_demo, DemoStep};
use ctf_core::perception::{obs_dim, observe_into, ObsConfig};
use ctf_core::{Action, ArenaConfig, Team, WorldState};
use serde::{Deserialize, Serialize};

use crate::protocol::Winner;
use crate::session::Counters;

/// One line of the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    Start {
        session_id: String,
        seed: u64,
        arena: ArenaConfig,
        rays: usize,
    },
    Join {
        tick: u64,
        seat: usize,
        name: String,
        file: PathBuf,
    },
    Leave {
        tick: u64,
        seat: usize,
        reason: String,
    },
    /// World-frame actions of all six seats for one engine step.
    Tick {
        tick: u64,
        actions: [Action; 6],
    },
    RoundEnd {
        tick: u64,
        winner: Winner,
        time_s: f64,
    },
    Reset {
        tick: u64,
    },
    Counters {
        tick: u64,
        counters: Counters,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub engine_steps: u64,
    pub demos: usize,
    pub demo_steps: usize,
}

/// Re-runs a session from its log and checks that every human demo it
/// references reproduces its observations, actions and done flags.
pub fn replay_session(log_path: &Path) -> Result<ReplayReport, String> {
    let file = std::fs::File::open(log_path).map_err(|e| format!("{}: {e}", log_path.display()))?;
    let mut world: Option<WorldState> = None;
    let mut cfg = ObsConfig::default();
    let mut obs = Vec::new();
    // (seat, t) -> step
    let mut expected: HashMap<(usize, u64), DemoStep> = HashMap::new();
    let mut report = ReplayReport {
        engine_steps: 0,
        demos: 0,
        demo_steps: 0,
    };
    let mut total = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry =
            serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        match entry {
            LogEntry::Start {
                seed, arena, rays, ..
            } => {
                cfg.rays = rays;
                obs = vec![0.0; obs_dim(&arena, rays).map_err(|e| e.to_string())?];
                world = Some(WorldState::new(arena, seed).map_err(|e| e.to_string())?);
            }
            LogEntry::Join { seat, file, .. } => {
                let traj = read_demo(&file).map_err(|e| e.to_string())?;
                if traj.header.agent_id != seat {
                    return Err(format!(
                        "{}: agent {} but seat {seat}",
                        file.display(),
                        traj.header.agent_id
                    ));
                }
                total += traj.steps.len();
                report.demos += 1;
                for s in traj.steps {
                    expected.insert((seat, s.t), s);
                }
            }
            LogEntry::Tick { tick, actions } => {
                let w = world.as_mut().ok_or("tick before start")?;
                let mut checks = Vec::new();
                for (seat, act) in actions.iter().enumerate() {
                    if let Some(step) = expected.remove(&(seat, tick)) {
                        observe_into(w, seat, &cfg, &mut obs);
                        if obs != step.obs {
                            return Err(format!("seat {seat} tick {tick}: observation differs"));
                        }
                        if cfg.frame_action(Team::of_player(seat), *act) != step.act {
                            return Err(format!("seat {seat} tick {tick}: action differs"));
                        }
                        checks.push(step.done);
                    }
                }
                w.step(&actions).map_err(|e| e.to_string())?;
                report.engine_steps += 1;
                for done in checks {
                    if done != w.outcome.is_over() {
                        return Err(format!("tick {tick}: done flag disagrees with engine"));
                    }
                    report.demo_steps += 1;
                }
            }
            LogEntry::Reset { .. } => {
                world
                    .as_mut()
                    .ok_or("reset before start")?
                    .reset_round()
                    .map_err(|e| e.to_string())?;
            }
            LogEntry::RoundEnd {
                tick,
                winner,
                time_s,
            } => {
                let w = world.as_ref().ok_or("round end before start")?;
                let ok = match w.outcome {
                    ctf_core::engine::Outcome::Won { team, time_s: ts } => {
                        ts == time_s
                            && winner
                                == if team == Team::Blue {
                                    Winner::Blue
                                } else {
                                    Winner::White
                                }
                    }
                    ctf_core::engine::Outcome::Draw => winner == Winner::Draw,
                    ctf_core::engine::Outcome::Ongoing => false,
                };
                if !ok {
                    return Err(format!(
                        "tick {tick}: logged round result differs from replay"
                    ));
                }
            }
            LogEntry::Leave { .. } | LogEntry::Counters { .. } => {}
        }
    }
    if report.demo_steps != total {
        return Err(format!(
            "{} of {total} demo steps have no matching engine tick",
            total - report.demo_steps
        ));
    }
    Ok(report)
}
