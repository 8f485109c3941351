//! Demonstration records: `.ctfdemo.jsonl` files.
//!
//! Line 1 is a [`DemoHeader`] object; every following line is one
//! [`DemoStep`]. Floats are written in shortest round-trip form, so a
//! read after a write reproduces every value bit for bit.

mod recorder;
mod validate;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use recorder::DemoRecorder;
pub use validate::{validate_demo, ValidationReport};

use crate::action::{Action, BRANCHES};
use crate::engine::{ArenaConfig, Team};
use crate::error::ContractError;
use crate::perception::{rays_for_dim, OBS_LAYOUT};

pub const MAGIC: &str = "CTFDEMO";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "ctfdemo.jsonl";

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Engine(#[from] crate::error::EngineError),
}

impl DemoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DemoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        DemoError::Format {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

/// Who produced the demonstration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Scripted,
    Policy(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    pub magic: String,
    pub version: u32,
    pub obs_layout: String,
    pub obs_dim: usize,
    pub action_branches: [usize; 3],
    pub tick_dt: f64,
    pub arena: ArenaConfig,
    pub session_id: String,
    pub agent_id: usize,
    pub team: Team,
    pub source: Source,
    /// World seed of the session, when known; enables replay checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DemoHeader {
    pub fn new(
        arena: ArenaConfig,
        obs_dim: usize,
        session_id: impl Into<String>,
        agent_id: usize,
        source: Source,
    ) -> Self {
        Self {
            magic: MAGIC.to_string(),
            version: VERSION,
            obs_layout: OBS_LAYOUT.to_string(),
            obs_dim,
            action_branches: BRANCHES,
            tick_dt: arena.tick_dt,
            arena,
            session_id: session_id.into(),
            agent_id,
            team: Team::of_player(agent_id),
            source,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Header-level invariants; each violation as a message.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.magic != MAGIC {
            out.push(format!("bad magic {:?}", self.magic));
        }
        if self.version != VERSION {
            out.push(format!("unsupported version {}", self.version));
        }
        if self.obs_layout != OBS_LAYOUT {
            out.push(format!("unknown obs_layout {:?}", self.obs_layout));
        } else if rays_for_dim(self.obs_dim).is_none() {
            out.push(format!(
                "obs_dim {} does not match layout {OBS_LAYOUT}",
                self.obs_dim
            ));
        }
        if self.action_branches != BRANCHES {
            out.push(format!(
                "action_branches {:?} != {BRANCHES:?}",
                self.action_branches
            ));
        }
        if !(self.tick_dt > 0.0) || self.tick_dt != self.arena.tick_dt {
            out.push(format!("tick_dt {} inconsistent with arena", self.tick_dt));
        }
        if let Err(e) = self.arena.validate() {
            out.push(e.to_string());
        }
        if self.agent_id >= 6 {
            out.push(format!("agent_id {} out of range", self.agent_id));
        } else if self.team != Team::of_player(self.agent_id) {
            out.push(format!(
                "team {} does not own agent {}",
                self.team, self.agent_id
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub t: u64,
    pub obs: Vec<f64>,
    pub act: Action,
    pub rew: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub header: DemoHeader,
    pub steps: Vec<DemoStep>,
}

impl Trajectory {
    pub fn rounds(&self) -> usize {
        self.steps.iter().filter(|s| s.done).count()
    }

    pub fn duration_s(&self) -> f64 {
        self.steps.len() as f64 * self.header.tick_dt
    }
}

/// Conventional file name of one agent's record within a session bundle.
pub fn bundle_file_name(session_id: &str, agent: usize) -> String {
    format!("{session_id}_agent{agent}.{EXTENSION}")
}

pub fn write_demo(path: &Path, traj: &Trajectory) -> Result<(), DemoError> {
    let file = File::create(path).map_err(|e| DemoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_line(&mut w, &traj.header).map_err(|e| DemoError::io(path, e))?;
    for s in &traj.steps {
        write_line(&mut w, s).map_err(|e| DemoError::io(path, e))?;
    }
    w.flush().map_err(|e| DemoError::io(path, e))
}

pub(crate) fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(std::io::Error::other)?;
    w.write_all(b"\n")
}

/// Result of a lenient read: the trajectory plus any recoverable problems
/// (a truncated final line).
#[derive(Debug, Clone)]
pub struct DemoRead {
    pub trajectory: Trajectory,
    pub warnings: Vec<String>,
}

/// Reads a demo, logging a warning if the final line was truncated.
pub fn read_demo(path: &Path) -> Result<Trajectory, DemoError> {
    let read = read_demo_lenient(path)?;
    for w in &read.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(read.trajectory)
}

pub fn read_demo_lenient(path: &Path) -> Result<DemoRead, DemoError> {
    let file = File::open(path).map_err(|e| DemoError::io(path, e))?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| DemoError::io(path, e))?;
    parse_demo(path, &text)
}

fn parse_demo(path: &Path, text: &str) -> Result<DemoRead, DemoError> {
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let Some(first) = lines.first() else {
        return Err(DemoError::format(path, 1, "empty file"));
    };
    let header = parse_header(path, first)?;
    let mut steps = Vec::with_capacity(lines.len().saturating_sub(1));
    let mut warnings = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(1) {
        let lineno = i + 1;
        match serde_json::from_str::<DemoStep>(line) {
            Ok(s) => {
                if s.obs.len() != header.obs_dim {
                    return Err(DemoError::format(
                        path,
                        lineno,
                        format!("obs length {} != obs_dim {}", s.obs.len(), header.obs_dim),
                    ));
                }
                steps.push(s);
            }
            Err(e) if lineno == lines.len() && !complete => {
                warnings.push(format!("truncated final line {lineno} ignored ({e})"));
            }
            Err(e) => return Err(DemoError::format(path, lineno, e.to_string())),
        }
    }
    Ok(DemoRead {
        trajectory: Trajectory { header, steps },
        warnings,
    })
}

fn parse_header(path: &Path, line: &str) -> Result<DemoHeader, DemoError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| DemoError::format(path, 1, e.to_string()))?;
    let magic = value.get("magic").and_then(|m| m.as_str()).unwrap_or("");
    if magic != MAGIC {
        return Err(DemoError::format(path, 1, format!("bad magic {magic:?}")));
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(VERSION as u64) {
        return Err(DemoError::format(
            path,
            1,
            format!("unsupported version {version:?}"),
        ));
    }
    serde_json::from_value(value).map_err(|e| DemoError::format(path, 1, e.to_string()))
}

/// Per-file summary for `demo stats`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoStats {
    pub steps: usize,
    pub rounds: usize,
    pub duration_s: f64,
    /// Counts per branch index: `[[x-, x0, x+], [y-, y0, y+], [none, throw]]`.
    pub action_histogram: [Vec<u64>; 3],
}

pub fn demo_stats(traj: &Trajectory) -> DemoStats {
    let mut hist = [vec![0u64; 3], vec![0u64; 3], vec![0u64; 2]];
    for s in &traj.steps {
        for (b, &idx) in s.act.branches.iter().enumerate() {
            hist[b][idx as usize] += 1;
        }
    }
    DemoStats {
        steps: traj.steps.len(),
        rounds: traj.rounds(),
        duration_s: traj.duration_s(),
        action_histogram: hist,
    }
}

/// Files under `dir` (non-recursive) with the demo extension, sorted by name.
pub fn list_demo_files(dir: &Path) -> Result<Vec<PathBuf>, DemoError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| DemoError::io(dir, e))? {
        let p = entry.map_err(|e| DemoError::io(dir, e))?.path();
        if p.to_string_lossy().ends_with(EXTENSION) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub(crate) fn open_lines(path: &Path) -> Result<std::io::Lines<BufReader<File>>, DemoError> {
    let file = File::open(path).map_err(|e| DemoError::io(path, e))?;
    Ok(BufReader::new(file).lines())
}

/// Replays a full six-seat bundle of one session through a fresh world
/// built from the recorded seed and checks every recorded observation.
/// Returns the number of steps verified.
pub fn replay_bundle(trajs: &[Trajectory]) -> Result<usize, String> {
    use crate::engine::{WorldState, NUM_PLAYERS};
    use crate::perception::{observe_into, rays_for_dim, ObsConfig};

    if trajs.len() != NUM_PLAYERS {
        return Err(format!(
            "need {NUM_PLAYERS} trajectories, got {}",
            trajs.len()
        ));
    }
    let mut seats: Vec<Option<&Trajectory>> = vec![None; NUM_PLAYERS];
    for t in trajs {
        let a = t.header.agent_id;
        if a >= NUM_PLAYERS || seats[a].is_some() {
            return Err(format!("duplicate or invalid agent {a}"));
        }
        seats[a] = Some(t);
    }
    let first = &trajs[0].header;
    let seed = first.seed.ok_or("header has no seed")?;
    let len = trajs[0].steps.len();
    for t in trajs {
        if t.header.session_id != first.session_id || t.header.seed != first.seed {
            return Err("trajectories come from different sessions".into());
        }
        if t.steps.len() != len {
            return Err("step counts differ between seats".into());
        }
    }
    let rays = rays_for_dim(first.obs_dim).ok_or("bad obs_dim")?;
    let cfg = ObsConfig {
        rays,
        ..ObsConfig::default()
    };
    let mut world = WorldState::new(first.arena.clone(), seed).map_err(|e| e.to_string())?;
    let mut obs = vec![0.0; first.obs_dim];
    for k in 0..len {
        let mut actions = [crate::action::Action::NOOP; NUM_PLAYERS];
        for (a, seat) in seats.iter().enumerate() {
            let step = &seat.expect("all seats filled").steps[k];
            observe_into(&world, a, &cfg, &mut obs);
            if obs != step.obs {
                return Err(format!(
                    "agent {a} step {k} (t={}): observation differs",
                    step.t
                ));
            }
            actions[a] = cfg.frame_action(seat.expect("all seats filled").header.team, step.act);
        }
        world.step(&actions).map_err(|e| e.to_string())?;
        let done = seats[0].expect("seat 0").steps[k].done;
        if done != world.outcome.is_over() {
            return Err(format!("step {k}: done flag disagrees with engine"));
        }
        if done && k + 1 < len {
            world.reset_round().map_err(|e| e.to_string())?;
        }
    }
    Ok(len)
}
