//! Python bindings. Built with maturin into the `ctfsim` module.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ctf_core::arena::{evaluate as run_eval, generate_expert_demos, scripted_expert, PolicySource};
use ctf_core::demos::{read_demo, validate_demo as validate};
use ctf_core::engine::{BallMode, FlagMode, Outcome, RayHit, NUM_PLAYERS};
use ctf_core::geom::Vec2;
use ctf_core::nn::Checkpoint;
use ctf_core::perception::observe;
use ctf_core::training::{compute_gae as gae, train as run_train, TrainConfig};
use ctf_core::{Action, ArenaConfig, Team, WorldState};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// `default`, `curriculum`, `open`, or an arena as a JSON string.
fn parse_arena(spec: &str) -> PyResult<ArenaConfig> {
    let arena = match spec {
        "default" => ArenaConfig::default(),
        "curriculum" => ArenaConfig::fetch_flag_curriculum(),
        "open" => ArenaConfig::open(),
        json => serde_json::from_str(json).map_err(value_err)?,
    };
    arena.validate().map_err(value_err)?;
    Ok(arena)
}

fn to_action(t: (u8, u8, u8)) -> PyResult<Action> {
    Action::new([t.0, t.1, t.2]).map_err(value_err)
}

fn from_action(a: Action) -> (u8, u8, u8) {
    (a.branches[0], a.branches[1], a.branches[2])
}

fn team_name(t: Team) -> &'static str {
    match t {
        Team::Blue => "blue",
        Team::White => "white",
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// One arena and its full game state.
#[pyclass(module = "ctfsim", skip_from_py_object)]
#[derive(Clone)]
pub struct World {
    inner: WorldState,
}

#[pymethods]
impl World {
    #[new]
    #[pyo3(signature = (seed, arena = "default"))]
    fn new(seed: u64, arena: &str) -> PyResult<Self> {
        let inner = WorldState::new(parse_arena(arena)?, seed).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Advances one tick with six `(x, y, throw)` world-frame actions;
    /// returns the tick's events as strings.
    fn step(&mut self, actions: Vec<(u8, u8, u8)>) -> PyResult<Vec<String>> {
        if actions.len() != NUM_PLAYERS {
            return Err(PyValueError::new_err(format!(
                "expected {NUM_PLAYERS} actions, got {}",
                actions.len()
            )));
        }
        let acts = actions
            .into_iter()
            .map(to_action)
            .collect::<PyResult<Vec<_>>>()?;
        let events = self.inner.step(&acts).map_err(runtime_err)?;
        Ok(events.iter().map(|e| format!("{:?}", e.kind)).collect())
    }

    fn reset_round(&mut self) -> PyResult<()> {
        self.inner.reset_round().map_err(runtime_err)
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.inner.tick
    }

    #[getter]
    fn time_s(&self) -> f64 {
        self.inner.time_s()
    }

    /// `("ongoing" | "draw" | "blue" | "white", win time or None)`.
    #[getter]
    fn outcome(&self) -> (&'static str, Option<f64>) {
        match self.inner.outcome {
            Outcome::Ongoing => ("ongoing", None),
            Outcome::Draw => ("draw", None),
            Outcome::Won { team, time_s } => (team_name(team), Some(time_s)),
        }
    }

    fn player_pos(&self, id: usize) -> PyResult<(f64, f64)> {
        let p = self
            .inner
            .players
            .get(id)
            .ok_or_else(|| value_err(format!("no player {id}")))?;
        Ok((p.pos.x, p.pos.y))
    }

    fn stun_remaining(&self, id: usize) -> f64 {
        self.inner.stun_remaining(id)
    }

    /// `(team, x, y, mode)` for both flags.
    fn flags(&self) -> Vec<(&'static str, f64, f64, &'static str)> {
        self.inner
            .flags
            .iter()
            .map(|f| {
                let mode = match f.mode {
                    FlagMode::AtSpawn => "spawn",
                    FlagMode::Carried(_) => "carried",
                    FlagMode::Dropped => "dropped",
                };
                (team_name(f.team), f.pos.x, f.pos.y, mode)
            })
            .collect()
    }

    /// `(x, y, mode)` for every ball.
    fn balls(&self) -> Vec<(f64, f64, &'static str)> {
        self.inner
            .balls
            .iter()
            .map(|b| {
                let mode = match b.mode {
                    BallMode::OnGround => "ground",
                    BallMode::Held(_) => "held",
                    BallMode::InFlight => "flight",
                };
                (b.pos.x, b.pos.y, mode)
            })
            .collect()
    }

    /// Team-local observation vector of `agent`.
    fn observe(&self, agent: usize) -> PyResult<Vec<f64>> {
        if agent >= NUM_PLAYERS {
            return Err(value_err(format!("agent id {agent} out of range")));
        }
        Ok(observe(&self.inner, agent).values)
    }

    /// Nearest hit along a ray as `(distance, tag)`, or None.
    fn raycast(
        &self,
        origin: (f64, f64),
        direction: (f64, f64),
        max_dist: f64,
        owner: usize,
    ) -> Option<(f64, String)> {
        let dir = Vec2::new(direction.0, direction.1).normalized();
        match self
            .inner
            .raycast(Vec2::new(origin.0, origin.1), dir, max_dist, owner)
        {
            RayHit::Hit { dist, tag } => Some((dist, format!("{tag:?}"))),
            RayHit::Miss => None,
        }
    }

    /// The x-mirrored world with team roles swapped.
    fn mirrored(&self) -> Self {
        Self {
            inner: self.inner.mirrored(),
        }
    }

    /// Scripted-expert world-frame action for `agent`.
    fn expert_action(&self, agent: usize) -> PyResult<(u8, u8, u8)> {
        if agent >= NUM_PLAYERS {
            return Err(value_err(format!("agent id {agent} out of range")));
        }
        Ok(from_action(scripted_expert(&self.inner, agent)))
    }

    fn __repr__(&self) -> String {
        format!(
            "World(tick={}, outcome={:?})",
            self.inner.tick, self.inner.outcome
        )
    }
}

/// A trained policy loaded from a checkpoint.
#[pyclass(module = "ctfsim")]
pub struct Policy {
    ck: Checkpoint,
}

#[pymethods]
impl Policy {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ck = Checkpoint::load(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self { ck })
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.ck.obs_dim
    }

    #[getter]
    fn id(&self) -> String {
        self.ck.id()
    }

    /// Greedy team-local action for one observation.
    fn act(&self, obs: Vec<f64>) -> PyResult<(u8, u8, u8)> {
        let out = self.ck.policy.forward(&obs).map_err(value_err)?;
        Ok(from_action(ctf_core::nn::greedy_action(&out.logits)))
    }
}

/// `(advantages, returns)` for one agent's step sequence.
#[pyfunction]
fn compute_gae(
    rewards: Vec<f64>,
    values: Vec<f64>,
    dones: Vec<bool>,
    bootstrap: f64,
    gamma: f64,
    lam: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if values.len() != rewards.len() || dones.len() != rewards.len() {
        return Err(value_err(
            "rewards, values and dones must have equal length",
        ));
    }
    Ok(gae(&rewards, &values, &dones, bootstrap, gamma, lam))
}

/// Validation report of one demo file as a dict.
#[pyfunction]
fn validate_demo<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let r = validate(&path);
    let text = serde_json::json!({
        "ok": r.ok,
        "steps": r.steps,
        "rounds": r.rounds,
        "duration_s": r.duration_s,
        "problems": r.problems,
    });
    json_to_py(py, &text.to_string())
}

/// `(header dict, steps)` where each step is `(t, obs, action, rew, done)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn load_demo<'py>(
    py: Python<'py>,
    path: PathBuf,
) -> PyResult<(
    Bound<'py, PyAny>,
    Vec<(u64, Vec<f64>, (u8, u8, u8), f64, bool)>,
)> {
    let t = read_demo(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let header = json_to_py(py, &serde_json::to_string(&t.header).map_err(runtime_err)?)?;
    let steps = t
        .steps
        .into_iter()
        .map(|s| (s.t, s.obs, from_action(s.act), s.rew, s.done))
        .collect();
    Ok((header, steps))
}

/// Records expert sessions; returns one list of six paths per session.
#[pyfunction]
#[pyo3(signature = (sessions, seed, out_dir, arena = "default"))]
fn expert_demos(
    sessions: usize,
    seed: u64,
    out_dir: PathBuf,
    arena: &str,
) -> PyResult<Vec<Vec<PathBuf>>> {
    let arena = parse_arena(arena)?;
    generate_expert_demos(&arena, sessions, seed, &out_dir).map_err(runtime_err)
}

/// Round statistics of `blue` vs `white` (each `expert`, `random` or a
/// checkpoint path) as a dict.
#[pyfunction]
#[pyo3(signature = (blue, white, episodes, seed, arena = "default"))]
fn evaluate<'py>(
    py: Python<'py>,
    blue: &str,
    white: &str,
    episodes: usize,
    seed: u64,
    arena: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let arena = parse_arena(arena)?;
    let b = PolicySource::parse(blue).map_err(value_err)?;
    let w = PolicySource::parse(white).map_err(value_err)?;
    let m = py
        .detach(|| run_eval(&arena, &b, &w, episodes, seed))
        .map_err(runtime_err)?;
    json_to_py(py, &serde_json::to_string(&m).map_err(runtime_err)?)
}

/// Trains from a JSON config file; returns the final checkpoint path.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new()))]
fn train(py: Python<'_>, config: PathBuf, overrides: Vec<String>) -> PyResult<PathBuf> {
    if !Path::new(&config).is_file() {
        return Err(PyIOError::new_err(format!(
            "config file {} not found",
            config.display()
        )));
    }
    let cfg = TrainConfig::load(&config, &overrides).map_err(value_err)?;
    let out = py.detach(|| run_train(&cfg)).map_err(runtime_err)?;
    Ok(out.checkpoint_path)
}

#[pymodule]
fn ctfsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<World>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(compute_gae, m)?)?;
    m.add_function(wrap_pyfunction!(validate_demo, m)?)?;
    m.add_function(wrap_pyfunction!(load_demo, m)?)?;
    m.add_function(wrap_pyfunction!(expert_demos, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add("NUM_PLAYERS", NUM_PLAYERS)?;
    Ok(())
}
