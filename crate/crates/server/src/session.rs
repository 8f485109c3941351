use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use ctf_core::arena::scripted_expert;
use ctf_core::demos::{DemoHeader, DemoRecorder, Source};
use ctf_core::engine::{EventKind, Outcome, NUM_PLAYERS};
use ctf_core::nn::{greedy_action, Checkpoint, PolicyParams};
use ctf_core::perception::{compute_rewards, obs_dim, observe_into, ObsConfig, RewardSpec};
use ctf_core::{Action, EngineError, Team, WorldState};
use serde::Serialize;

use crate::config::{SeatFill, ServerConfig};
use crate::protocol::{TeamChoice, Winner, WireMessage};
use crate::replay::LogEntry;
use crate::ServerError;

pub type ConnId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Conn(ConnId),
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub to: Target,
    pub msg: WireMessage,
}

impl Outgoing {
    fn to(conn: ConnId, msg: WireMessage) -> Self {
        Self {
            to: Target::Conn(conn),
            msg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeatKind {
    Human,
    Bot,
    Scripted,
    IdleHold,
}

/// Protocol anomalies, reported in the session log when the session ends.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Counters {
    /// Inputs with values outside their range (clamped).
    pub malformed_inputs: u64,
    /// Frames that failed to parse or were not client messages.
    pub bad_messages: u64,
    pub idle_kicks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub ticks: u64,
    pub rounds: u64,
    pub demo_files: Vec<PathBuf>,
    pub counters: Counters,
}

struct Human {
    conn: ConnId,
    recorder: DemoRecorder,
    pending: Option<Action>,
    last_move: [u8; 2],
    idle_ticks: u64,
}

enum Seat {
    Human(Box<Human>),
    Bot,
    Scripted,
    IdleHold,
}

impl Seat {
    fn kind(&self) -> SeatKind {
        match self {
            Seat::Human(_) => SeatKind::Human,
            Seat::Bot => SeatKind::Bot,
            Seat::Scripted => SeatKind::Scripted,
            Seat::IdleHold => SeatKind::IdleHold,
        }
    }
}

/// One game session. All mutation goes through `handle*`, `disconnect` and
/// `tick`, so a transport only has to serialize those calls.
pub struct Session {
    cfg: ServerConfig,
    world: WorldState,
    seats: Vec<Seat>,
    bot: Option<Arc<PolicyParams>>,
    obs_cfg: ObsConfig,
    obs: Vec<f64>,
    reward: RewardSpec,
    tick: u64,
    started: bool,
    intermission: Option<u64>,
    rounds: u64,
    conns: BTreeMap<ConnId, Option<usize>>,
    joins: u64,
    log: BufWriter<File>,
    counters: Counters,
    demo_files: Vec<PathBuf>,
}

impl Session {
    /// Builds a session, loading the bot checkpoint named in `cfg` if any.
    pub fn new(cfg: ServerConfig) -> Result<Self, ServerError> {
        let bot = match &cfg.bot_checkpoint {
            Some(p) => {
                let ck = Checkpoint::load(p)?;
                let dim = obs_dim(&cfg.arena, cfg.rays).map_err(EngineError::from)?;
                ck.check_obs_dim(dim)
                    .map_err(|m| ServerError::Config(format!("{}: {m}", p.display())))?;
                Some(Arc::new(ck.policy))
            }
            None => None,
        };
        Self::with_bot(cfg, bot)
    }

    pub fn with_bot(
        cfg: ServerConfig,
        bot: Option<Arc<PolicyParams>>,
    ) -> Result<Self, ServerError> {
        cfg.validate()?;
        let dim = obs_dim(&cfg.arena, cfg.rays).map_err(EngineError::from)?;
        if let Some(b) = &bot {
            if b.obs_dim() != dim {
                return Err(ServerError::Config(format!(
                    "bot expects obs_dim {}, session produces {dim}",
                    b.obs_dim()
                )));
            }
        }
        std::fs::create_dir_all(&cfg.demo_dir).map_err(|e| ServerError::Io {
            path: cfg.demo_dir.clone(),
            source: e,
        })?;
        let log_path = cfg.log_path();
        if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| ServerError::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        let file = File::create(&log_path).map_err(|e| ServerError::Io {
            path: log_path.clone(),
            source: e,
        })?;
        let world = WorldState::new(cfg.arena.clone(), cfg.seed)?;
        let mut s = Self {
            seats: Vec::new(),
            world,
            bot,
            obs_cfg: ObsConfig {
                rays: cfg.rays,
                ..ObsConfig::default()
            },
            obs: vec![0.0; dim],
            reward: RewardSpec::default(),
            tick: 0,
            started: false,
            intermission: None,
            rounds: 0,
            conns: BTreeMap::new(),
            joins: 0,
            log: BufWriter::new(file),
            counters: Counters::default(),
            demo_files: Vec::new(),
            cfg,
        };
        s.seats = (0..NUM_PLAYERS).map(|_| s.fill_seat()).collect();
        s.write_log(&LogEntry::Start {
            session_id: s.cfg.session_id.clone(),
            seed: s.cfg.seed,
            arena: s.cfg.arena.clone(),
            rays: s.cfg.rays,
        })?;
        Ok(s)
    }

    fn fill_seat(&self) -> Seat {
        match (self.cfg.empty_seats, &self.bot) {
            (SeatFill::Idle, _) => Seat::IdleHold,
            (SeatFill::Default, Some(_)) => Seat::Bot,
            (SeatFill::Default, None) => Seat::Scripted,
        }
    }

    fn write_log(&mut self, e: &LogEntry) -> Result<(), ServerError> {
        let path = || self.cfg.log_path();
        let line = serde_json::to_string(e).expect("log entries serialize");
        writeln!(self.log, "{line}")
            .and_then(|_| self.log.flush())
            .map_err(|source| ServerError::Io {
                path: path(),
                source,
            })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn config(&self) -> &ServerConfig {
        &self.cfg
    }

    /// Session tick of the next state frame.
    pub fn session_tick(&self) -> u64 {
        self.tick
    }

    pub fn is_running(&self) -> bool {
        self.started
    }

    pub fn in_intermission(&self) -> bool {
        self.intermission.is_some()
    }

    pub fn rounds_played(&self) -> u64 {
        self.rounds
    }

    pub fn seat_kind(&self, seat: usize) -> SeatKind {
        self.seats[seat].kind()
    }

    pub fn seat_of(&self, conn: ConnId) -> Option<usize> {
        self.conns.get(&conn).copied().flatten()
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Demo files of seats that have already been vacated.
    pub fn demo_files(&self) -> &[PathBuf] {
        &self.demo_files
    }

    pub fn humans(&self, team: Team) -> usize {
        team.players()
            .filter(|&i| matches!(self.seats[i], Seat::Human(_)))
            .count()
    }

    /// Starts ticking without waiting for a human, e.g. for bot-only play.
    pub fn start(&mut self) {
        self.started = true;
    }

    /// Registers a connection as a spectator; it receives broadcasts.
    pub fn connect(&mut self, conn: ConnId) {
        self.conns.entry(conn).or_insert(None);
    }

    pub fn disconnect(&mut self, conn: ConnId) -> Result<Vec<Outgoing>, ServerError> {
        if let Some(seat) = self.seat_of(conn) {
            self.vacate(seat, "disconnect")?;
        }
        self.conns.remove(&conn);
        Ok(Vec::new())
    }

    /// Parses and applies one text frame.
    pub fn handle_text(&mut self, conn: ConnId, text: &str) -> Result<Vec<Outgoing>, ServerError> {
        match WireMessage::from_json(text) {
            Ok(m) if m.is_client_message() => self.handle(conn, m),
            Ok(_) => {
                self.counters.bad_messages += 1;
                Ok(vec![Outgoing::to(
                    conn,
                    WireMessage::error("bad_message", "not a client message"),
                )])
            }
            Err(e) => {
                self.counters.bad_messages += 1;
                Ok(vec![Outgoing::to(
                    conn,
                    WireMessage::error("bad_message", e.to_string()),
                )])
            }
        }
    }

    pub fn handle(&mut self, conn: ConnId, msg: WireMessage) -> Result<Vec<Outgoing>, ServerError> {
        self.connect(conn);
        match msg {
            WireMessage::Join { name, team } => self.join(conn, &name, team),
            WireMessage::Input { mv, act, .. } => Ok(self.input(conn, mv, act)),
            WireMessage::Leave {} => {
                match self.seat_of(conn) {
                    Some(seat) => self.vacate(seat, "leave")?,
                    None => {
                        return Ok(vec![Outgoing::to(
                            conn,
                            WireMessage::error("not_seated", "not seated"),
                        )])
                    }
                }
                Ok(Vec::new())
            }
            _ => {
                self.counters.bad_messages += 1;
                Ok(vec![Outgoing::to(
                    conn,
                    WireMessage::error("bad_message", "not a client message"),
                )])
            }
        }
    }

    fn join(
        &mut self,
        conn: ConnId,
        name: &str,
        choice: TeamChoice,
    ) -> Result<Vec<Outgoing>, ServerError> {
        if let Some(seat) = self.seat_of(conn) {
            let msg = format!("already seated as player {seat}");
            return Ok(vec![Outgoing::to(
                conn,
                WireMessage::error("already_seated", msg),
            )]);
        }
        let free = |s: &Self, t: Team| t.players().find(|&i| !matches!(s.seats[i], Seat::Human(_)));
        let team = match choice {
            TeamChoice::Blue => Some(Team::Blue),
            TeamChoice::White => Some(Team::White),
            TeamChoice::Auto => {
                let first = if self.humans(Team::White) < self.humans(Team::Blue) {
                    Team::White
                } else {
                    Team::Blue
                };
                [first, first.other()]
                    .into_iter()
                    .find(|&t| free(self, t).is_some())
            }
        };
        let Some(seat) = team.and_then(|t| free(self, t)) else {
            return Ok(vec![Outgoing::to(
                conn,
                WireMessage::error("full", "no free seat"),
            )]);
        };
        let dim = self.obs.len();
        let header = DemoHeader::new(
            self.cfg.arena.clone(),
            dim,
            &self.cfg.session_id,
            seat,
            Source::Human,
        )
        .with_seed(self.cfg.seed);
        let file = self.cfg.demo_dir.join(format!(
            "{}_agent{seat}_j{:03}.{}",
            self.cfg.session_id,
            self.joins,
            ctf_core::demos::EXTENSION
        ));
        self.joins += 1;
        let recorder = DemoRecorder::create(&file, &header)?;
        self.seats[seat] = Seat::Human(Box::new(Human {
            conn,
            recorder,
            pending: None,
            last_move: [1, 1],
            idle_ticks: 0,
        }));
        self.conns.insert(conn, Some(seat));
        self.started = true;
        self.write_log(&LogEntry::Join {
            tick: self.tick,
            seat,
            name: name.to_string(),
            file: file.clone(),
        })?;
        log::info!("{name} joined as player {seat}");
        Ok(vec![Outgoing::to(
            conn,
            WireMessage::Welcome {
                player_id: seat,
                team: Team::of_player(seat),
                arena: self.cfg.arena.clone(),
                tick_dt: self.cfg.arena.tick_dt,
            },
        )])
    }

    fn input(&mut self, conn: ConnId, mv: [f64; 2], act: f64) -> Vec<Outgoing> {
        let Some(seat) = self.seat_of(conn) else {
            return vec![Outgoing::to(
                conn,
                WireMessage::error("not_seated", "input before join"),
            )];
        };
        let mut bad = false;
        let mut clamp = |v: f64, lo: f64, hi: f64| {
            let c = if v.is_nan() {
                0.0
            } else {
                v.round().clamp(lo, hi)
            };
            bad |= c != v;
            c
        };
        let a = Action {
            branches: [
                (clamp(mv[0], -1.0, 1.0) + 1.0) as u8,
                (clamp(mv[1], -1.0, 1.0) + 1.0) as u8,
                clamp(act, 0.0, 1.0) as u8,
            ],
        };
        if bad {
            self.counters.malformed_inputs += 1;
        }
        if let Seat::Human(h) = &mut self.seats[seat] {
            h.pending = Some(a);
        }
        Vec::new()
    }

    fn vacate(&mut self, seat: usize, reason: &str) -> Result<(), ServerError> {
        let fill = self.fill_seat();
        let old = std::mem::replace(&mut self.seats[seat], fill);
        if let Seat::Human(h) = old {
            self.conns.insert(h.conn, None);
            self.demo_files.push(h.recorder.finish()?);
            self.write_log(&LogEntry::Leave {
                tick: self.tick,
                seat,
                reason: reason.to_string(),
            })?;
        }
        Ok(())
    }

    /// Advances the session by one clock tick and returns the frames to send.
    pub fn tick(&mut self) -> Result<Vec<Outgoing>, ServerError> {
        if !self.started {
            return Ok(Vec::new());
        }
        let t = self.tick;
        self.tick += 1;
        let mut out = Vec::new();
        if let Some(n) = self.intermission {
            // the world stays frozen; the last intermission frame already
            // shows the fresh spawn so clients act on the new round
            if n <= 1 {
                self.begin_round(t)?;
            } else {
                self.intermission = Some(n - 1);
            }
            out.push(Outgoing {
                to: Target::All,
                msg: WireMessage::state(&self.world, t),
            });
            return Ok(out);
        }

        let mut actions = [Action::NOOP; NUM_PLAYERS];
        let mut human_obs: Vec<(usize, Vec<f64>)> = Vec::new();
        for a in 0..NUM_PLAYERS {
            actions[a] = match &mut self.seats[a] {
                Seat::Human(h) => {
                    observe_into(&self.world, a, &self.obs_cfg, &mut self.obs);
                    human_obs.push((a, self.obs.clone()));
                    match h.pending.take() {
                        Some(act) => {
                            h.idle_ticks = 0;
                            h.last_move = [act.branches[0], act.branches[1]];
                            act
                        }
                        None => {
                            h.idle_ticks += 1;
                            Action {
                                branches: [h.last_move[0], h.last_move[1], 0],
                            }
                        }
                    }
                }
                Seat::Bot => {
                    let bot = self.bot.as_ref().expect("bot seats need a policy");
                    observe_into(&self.world, a, &self.obs_cfg, &mut self.obs);
                    let local = match bot.forward(&self.obs) {
                        Ok(o) => greedy_action(&o.logits),
                        Err(e) => {
                            log::error!("bot forward failed for player {a}: {e}");
                            Action::NOOP
                        }
                    };
                    self.obs_cfg.frame_action(Team::of_player(a), local)
                }
                Seat::Scripted => scripted_expert(&self.world, a),
                Seat::IdleHold => Action::NOOP,
            };
        }
        let events = self.world.step(&actions)?;
        let rew = compute_rewards(&events, &self.reward);
        let done = events
            .iter()
            .any(|e| matches!(e.kind, EventKind::RoundEnd(_)));
        for (a, obs) in &human_obs {
            if let Seat::Human(h) = &mut self.seats[*a] {
                let local = self.obs_cfg.frame_action(Team::of_player(*a), actions[*a]);
                h.recorder.record_step_at(t, obs, local, rew[*a], done)?;
            }
        }
        self.write_log(&LogEntry::Tick { tick: t, actions })?;
        out.push(Outgoing {
            to: Target::All,
            msg: WireMessage::state(&self.world, t),
        });
        if done {
            let (winner, time_s) = match self.world.outcome {
                Outcome::Won {
                    team: Team::Blue,
                    time_s,
                } => (Winner::Blue, time_s),
                Outcome::Won {
                    team: Team::White,
                    time_s,
                } => (Winner::White, time_s),
                _ => (Winner::Draw, self.world.time_s()),
            };
            self.rounds += 1;
            self.write_log(&LogEntry::RoundEnd {
                tick: t,
                winner,
                time_s,
            })?;
            out.push(Outgoing {
                to: Target::All,
                msg: WireMessage::RoundEnd { winner, time_s },
            });
            if self.cfg.intermission_ticks == 0 {
                self.begin_round(t)?;
            } else {
                self.intermission = Some(self.cfg.intermission_ticks);
            }
        }

        for a in 0..NUM_PLAYERS {
            let idle = match &self.seats[a] {
                Seat::Human(h) if h.idle_ticks >= self.cfg.idle_timeout_ticks => Some(h.conn),
                _ => None,
            };
            if let Some(conn) = idle {
                self.counters.idle_kicks += 1;
                self.vacate(a, "idle")?;
                out.push(Outgoing::to(
                    conn,
                    WireMessage::error("idle", "no input received; seat handed to a bot"),
                ));
            }
        }
        Ok(out)
    }

    fn begin_round(&mut self, t: u64) -> Result<(), ServerError> {
        self.intermission = None;
        self.world.reset_round()?;
        for seat in &mut self.seats {
            if let Seat::Human(h) = seat {
                h.pending = None;
                h.last_move = [1, 1];
            }
        }
        self.write_log(&LogEntry::Reset { tick: t })
    }

    /// Closes all recorders and the log; returns every demo file written.
    pub fn finish(mut self) -> Result<SessionSummary, ServerError> {
        for seat in 0..NUM_PLAYERS {
            self.vacate(seat, "shutdown")?;
        }
        let counters = self.counters.clone();
        self.write_log(&LogEntry::Counters {
            tick: self.tick,
            counters: counters.clone(),
        })?;
        Ok(SessionSummary {
            ticks: self.tick,
            rounds: self.rounds,
            demo_files: self.demo_files,
            counters,
        })
    }
}
