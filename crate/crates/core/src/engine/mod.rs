//! Fixed-timestep simulation of the 3v3 capture-the-flag game.
//!
//! Player ids 0..3 are Blue (left half), 3..6 are White. A tick runs, in order:
//! stun countdown, velocities from intents, player integration with
//! axis-separated wall clamping, throws, ball flights and hits, contact
//! pickups, scoring, and the draw rule.

mod config;
mod raycast;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::ArenaConfig;
pub use raycast::{HitTag, RayHit};

use crate::action::{decode_action, Action, Intent};
use crate::error::{ContractError, EngineError};
use crate::geom::{sweep_point_disc, Rect, Vec2};

pub const NUM_PLAYERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Team {
    Blue,
    White,
}

impl Team {
    pub fn index(self) -> usize {
        match self {
            Team::Blue => 0,
            Team::White => 1,
        }
    }

    pub fn other(self) -> Team {
        match self {
            Team::Blue => Team::White,
            Team::White => Team::Blue,
        }
    }

    pub fn of_player(id: usize) -> Team {
        if id < 3 {
            Team::Blue
        } else {
            Team::White
        }
    }

    /// Player ids belonging to this team.
    pub fn players(self) -> std::ops::Range<usize> {
        match self {
            Team::Blue => 0..3,
            Team::White => 3..6,
        }
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Team::Blue => "blue",
            Team::White => "white",
        })
    }
}

/// Id of the player occupying the same slot on the other team.
pub fn mirror_id(id: usize) -> usize {
    (id + 3) % NUM_PLAYERS
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerState {
    pub id: usize,
    pub team: Team,
    pub pos: Vec2,
    pub vel: Vec2,
    pub facing: Vec2,
    /// Remaining stun in ticks; seconds are `stun_ticks * tick_dt`.
    pub stun_ticks: u32,
    pub held_ball: Option<usize>,
    pub carried_flag: Option<Team>,
}

impl PlayerState {
    pub fn is_stunned(&self) -> bool {
        self.stun_ticks > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallMode {
    OnGround,
    Held(usize),
    InFlight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallState {
    pub id: usize,
    pub pos: Vec2,
    pub mode: BallMode,
    pub vel: Vec2,
    pub flown: f64,
    pub thrower: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagMode {
    AtSpawn,
    Carried(usize),
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlagState {
    pub team: Team,
    pub mode: FlagMode,
    pub pos: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Ongoing,
    Won { team: Team, time_s: f64 },
    Draw,
}

impl Outcome {
    pub fn is_over(self) -> bool {
        !matches!(self, Outcome::Ongoing)
    }

    fn mirrored(self) -> Outcome {
        match self {
            Outcome::Won { team, time_s } => Outcome::Won {
                team: team.other(),
                time_s,
            },
            o => o,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    FlagPickup { player: usize, flag: Team },
    FlagDelivered { team: Team, player: usize },
    FlagReturned { team: Team, player: usize },
    BallHit { thrower: usize, victim: usize },
    BallPickup { player: usize, ball: usize },
    Throw { player: usize, ball: usize },
    RoundEnd(Outcome),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameEvent {
    pub tick: u64,
    pub kind: EventKind,
}

/// Complete authoritative game state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    pub players: Vec<PlayerState>,
    pub balls: Vec<BallState>,
    /// Indexed by [`Team::index`].
    pub flags: [FlagState; 2],
    pub arena: ArenaConfig,
    pub rng: ChaCha8Rng,
    pub outcome: Outcome,
}

impl WorldState {
    pub fn new(arena: ArenaConfig, seed: u64) -> Result<Self, EngineError> {
        arena.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (players, balls, flags) = spawn(&arena, &mut rng);
        Ok(Self {
            tick: 0,
            players,
            balls,
            flags,
            arena,
            rng,
            outcome: Outcome::Ongoing,
        })
    }

    /// Fresh spawns for the next round, continuing the random stream.
    pub fn reset_round(&mut self) -> Result<(), EngineError> {
        if !self.outcome.is_over() {
            return Err(EngineError::State("reset_round on an ongoing round".into()));
        }
        let (players, balls, flags) = spawn(&self.arena, &mut self.rng);
        self.players = players;
        self.balls = balls;
        self.flags = flags;
        self.tick = 0;
        self.outcome = Outcome::Ongoing;
        Ok(())
    }

    pub fn time_s(&self) -> f64 {
        self.tick as f64 * self.arena.tick_dt
    }

    pub fn stun_remaining(&self, id: usize) -> f64 {
        self.players[id].stun_ticks as f64 * self.arena.tick_dt
    }

    pub fn flag(&self, team: Team) -> &FlagState {
        &self.flags[team.index()]
    }

    /// Advance one tick. `actions[i]` drives player `i`.
    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<GameEvent>, EngineError> {
        if self.outcome.is_over() {
            return Err(EngineError::State("cannot step a finished round".into()));
        }
        if actions.len() != NUM_PLAYERS {
            return Err(ContractError::new(format!(
                "expected {NUM_PLAYERS} actions, got {}",
                actions.len()
            ))
            .into());
        }
        let mut intents = [Intent::default(); NUM_PLAYERS];
        for (slot, a) in intents.iter_mut().zip(actions) {
            *slot = decode_action(a)?;
        }

        let arena = &self.arena;
        let dt = arena.tick_dt;
        self.tick += 1;
        let tick = self.tick;
        let mut events = Vec::new();

        // stuns
        for p in &mut self.players {
            p.stun_ticks = p.stun_ticks.saturating_sub(1);
        }

        // velocities and movement
        for (p, intent) in self.players.iter_mut().zip(&intents) {
            if p.is_stunned() {
                p.vel = Vec2::ZERO;
            } else {
                let dir = Vec2::new(intent.mv[0] as f64, intent.mv[1] as f64).normalized();
                p.vel = dir * arena.max_speed;
                if dir != Vec2::ZERO {
                    p.facing = dir;
                }
            }
            p.pos = integrate_player(arena, p.pos, p.vel);
        }
        for p in &self.players {
            if let Some(b) = p.held_ball {
                self.balls[b].pos = p.pos;
            }
            if let Some(team) = p.carried_flag {
                self.flags[team.index()].pos = p.pos;
            }
        }

        // throws
        for (p, intent) in self.players.iter_mut().zip(&intents) {
            if !intent.throw || p.is_stunned() {
                continue;
            }
            if let Some(b) = p.held_ball.take() {
                let ball = &mut self.balls[b];
                ball.mode = BallMode::InFlight;
                ball.pos = p.pos;
                ball.vel = p.facing * arena.throw_speed;
                ball.flown = 0.0;
                ball.thrower = Some(p.id);
                events.push(GameEvent {
                    tick,
                    kind: EventKind::Throw {
                        player: p.id,
                        ball: b,
                    },
                });
            }
        }

        // flights
        let stun_ticks = arena.stun_ticks();
        for b in 0..self.balls.len() {
            if self.balls[b].mode != BallMode::InFlight {
                continue;
            }
            let ball = &self.balls[b];
            let thrower = ball.thrower.expect("in-flight ball has a thrower");
            let p0 = ball.pos;
            let mut delta = ball.vel * dt;
            let mut len = delta.length();
            let remaining = arena.throw_max_range - ball.flown;
            let mut range_end = false;
            if len >= remaining {
                delta = delta * (remaining / len);
                len = remaining;
                range_end = true;
            }

            let mut wall_s = f64::INFINITY;
            let inner = arena.bounds().expanded(-arena.ball_radius);
            let exit = inner.ray_exit(p0, delta);
            if exit <= 1.0 {
                wall_s = exit;
            }
            for w in &arena.walls {
                if let Some(s) = w.expanded(arena.ball_radius).ray_entry(p0, delta) {
                    if s <= 1.0 {
                        wall_s = wall_s.min(s);
                    }
                }
            }

            let thrower_team = Team::of_player(thrower);
            let reach = arena.player_radius + arena.ball_radius;
            let mut hit: Option<(f64, usize)> = None;
            for p in &self.players {
                if p.team == thrower_team {
                    continue;
                }
                if let Some(s) = sweep_point_disc(p0, delta, p.pos, reach) {
                    if hit.is_none_or(|(best, _)| s < best) {
                        hit = Some((s, p.id));
                    }
                }
            }

            match hit {
                Some((s, victim)) if s <= wall_s => {
                    let stop = p0 + delta * s;
                    let ball = &mut self.balls[b];
                    ball.pos = stop;
                    ball.flown += len * s;
                    ball.mode = BallMode::OnGround;
                    ball.vel = Vec2::ZERO;
                    ball.thrower = None;
                    events.push(GameEvent {
                        tick,
                        kind: EventKind::BallHit { thrower, victim },
                    });
                    let v = &mut self.players[victim];
                    v.stun_ticks = stun_ticks;
                    v.vel = Vec2::ZERO;
                    let vpos = v.pos;
                    if let Some(dropped) = v.held_ball.take() {
                        let db = &mut self.balls[dropped];
                        db.mode = BallMode::OnGround;
                        db.pos = vpos;
                        db.vel = Vec2::ZERO;
                    }
                    if let Some(team) = v.carried_flag.take() {
                        let f = &mut self.flags[team.index()];
                        f.mode = FlagMode::Dropped;
                        f.pos = vpos;
                    }
                }
                _ => {
                    let ball = &mut self.balls[b];
                    if wall_s <= 1.0 {
                        ball.pos = p0 + delta * wall_s;
                        ball.flown += len * wall_s;
                        land(ball);
                    } else {
                        ball.pos = p0 + delta;
                        ball.flown += len;
                        if range_end {
                            land(ball);
                        }
                    }
                }
            }
        }

        // pickups
        let ball_reach = arena.player_radius + arena.ball_radius;
        for b in 0..self.balls.len() {
            if self.balls[b].mode != BallMode::OnGround {
                continue;
            }
            let bpos = self.balls[b].pos;
            let winner =
                nearest_contact(&self.players, bpos, ball_reach, |p| p.held_ball.is_none());
            if let Some(pid) = winner {
                self.players[pid].held_ball = Some(b);
                let ball = &mut self.balls[b];
                ball.mode = BallMode::Held(pid);
                ball.pos = self.players[pid].pos;
                events.push(GameEvent {
                    tick,
                    kind: EventKind::BallPickup {
                        player: pid,
                        ball: b,
                    },
                });
            }
        }
        let flag_reach = arena.player_radius + arena.flag_radius;
        for team in [Team::Blue, Team::White] {
            let flag = &self.flags[team.index()];
            let mode = flag.mode;
            if matches!(mode, FlagMode::Carried(_)) {
                continue;
            }
            let fpos = flag.pos;
            let winner = nearest_contact(&self.players, fpos, flag_reach, |p| {
                if p.team == team {
                    mode == FlagMode::Dropped
                } else {
                    p.carried_flag.is_none()
                }
            });
            let Some(pid) = winner else { continue };
            if self.players[pid].team == team {
                let f = &mut self.flags[team.index()];
                f.mode = FlagMode::AtSpawn;
                f.pos = arena.flag_spawn(team);
                events.push(GameEvent {
                    tick,
                    kind: EventKind::FlagReturned { team, player: pid },
                });
            } else {
                self.players[pid].carried_flag = Some(team);
                let f = &mut self.flags[team.index()];
                f.mode = FlagMode::Carried(pid);
                f.pos = self.players[pid].pos;
                events.push(GameEvent {
                    tick,
                    kind: EventKind::FlagPickup {
                        player: pid,
                        flag: team,
                    },
                });
            }
        }

        // scoring
        for pid in 0..NUM_PLAYERS {
            let p = &self.players[pid];
            let Some(flag_team) = p.carried_flag else {
                continue;
            };
            if !arena.in_base(p.team, p.pos) {
                continue;
            }
            let team = p.team;
            self.players[pid].carried_flag = None;
            let f = &mut self.flags[flag_team.index()];
            f.mode = FlagMode::AtSpawn;
            f.pos = arena.flag_spawn(flag_team);
            self.outcome = Outcome::Won {
                team,
                time_s: tick as f64 * dt,
            };
            events.push(GameEvent {
                tick,
                kind: EventKind::FlagDelivered { team, player: pid },
            });
            events.push(GameEvent {
                tick,
                kind: EventKind::RoundEnd(self.outcome),
            });
            break;
        }

        if !self.outcome.is_over() && tick >= arena.draw_ticks() {
            self.outcome = Outcome::Draw;
            events.push(GameEvent {
                tick,
                kind: EventKind::RoundEnd(Outcome::Draw),
            });
        }
        Ok(events)
    }

    /// Reflect the world across x = 0, swapping team roles: player `i` takes
    /// the mirrored state of player `mirror_id(i)`.
    pub fn mirrored(&self) -> WorldState {
        let players = (0..NUM_PLAYERS)
            .map(|i| {
                let src = &self.players[mirror_id(i)];
                PlayerState {
                    id: i,
                    team: src.team.other(),
                    pos: src.pos.mirror_x(),
                    vel: src.vel.mirror_x(),
                    facing: src.facing.mirror_x(),
                    stun_ticks: src.stun_ticks,
                    held_ball: src.held_ball,
                    carried_flag: src.carried_flag.map(Team::other),
                }
            })
            .collect();
        let balls = self
            .balls
            .iter()
            .map(|b| BallState {
                id: b.id,
                pos: b.pos.mirror_x(),
                mode: match b.mode {
                    BallMode::Held(p) => BallMode::Held(mirror_id(p)),
                    m => m,
                },
                vel: b.vel.mirror_x(),
                flown: b.flown,
                thrower: b.thrower.map(mirror_id),
            })
            .collect();
        let mirror_flag = |team: Team| {
            let src = &self.flags[team.other().index()];
            FlagState {
                team,
                mode: match src.mode {
                    FlagMode::Carried(p) => FlagMode::Carried(mirror_id(p)),
                    m => m,
                },
                pos: src.pos.mirror_x(),
            }
        };
        WorldState {
            tick: self.tick,
            players,
            balls,
            flags: [mirror_flag(Team::Blue), mirror_flag(Team::White)],
            arena: self.arena.clone(),
            rng: self.rng.clone(),
            outcome: self.outcome.mirrored(),
        }
    }

    /// Check the structural invariants of every entity. Returns the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let a = &self.arena;
        let bounds = a.bounds();
        for p in &self.players {
            if !p.pos.is_finite() {
                return Err(format!("player {} position not finite", p.id));
            }
            if p.pos.x.abs() > bounds.max.x - a.player_radius + 1e-9
                || p.pos.y.abs() > bounds.max.y - a.player_radius + 1e-9
            {
                return Err(format!("player {} outside arena at {:?}", p.id, p.pos));
            }
            for (i, w) in a.walls.iter().enumerate() {
                if w.contains_strict(p.pos) {
                    return Err(format!("player {} inside wall {i}", p.id));
                }
            }
            if p.is_stunned()
                && (p.vel != Vec2::ZERO || p.held_ball.is_some() || p.carried_flag.is_some())
            {
                return Err(format!("stunned player {} is active", p.id));
            }
            if p.vel.length() > a.max_speed + 1e-9 {
                return Err(format!("player {} too fast", p.id));
            }
            if (p.facing.length() - 1.0).abs() > 1e-12 {
                return Err(format!("player {} facing not unit", p.id));
            }
            if p.carried_flag == Some(p.team) {
                return Err(format!("player {} carries own flag", p.id));
            }
            if let Some(b) = p.held_ball {
                if self.balls[b].mode != BallMode::Held(p.id) {
                    return Err(format!("player {} holds ball {b} which disagrees", p.id));
                }
            }
            if let Some(t) = p.carried_flag {
                if self.flags[t.index()].mode != FlagMode::Carried(p.id) {
                    return Err(format!("player {} carries flag {t} which disagrees", p.id));
                }
            }
        }
        for b in &self.balls {
            match b.mode {
                BallMode::InFlight => {
                    if (b.vel.length() - a.throw_speed).abs() > 1e-9 {
                        return Err(format!("ball {} in flight at wrong speed", b.id));
                    }
                    if b.flown > a.throw_max_range + 1e-9 {
                        return Err(format!("ball {} flew past max range", b.id));
                    }
                }
                BallMode::Held(p) => {
                    if self.players[p].held_ball != Some(b.id) {
                        return Err(format!("ball {} held by {p} which disagrees", b.id));
                    }
                    if self.players[p].is_stunned() {
                        return Err(format!("ball {} held by stunned player {p}", b.id));
                    }
                }
                BallMode::OnGround => {}
            }
        }
        for f in &self.flags {
            match f.mode {
                FlagMode::Carried(p) => {
                    if self.players[p].carried_flag != Some(f.team) {
                        return Err(format!("{} flag carrier {p} disagrees", f.team));
                    }
                }
                FlagMode::AtSpawn => {
                    if f.pos != a.flag_spawn(f.team) {
                        return Err(format!("{} flag at spawn but displaced", f.team));
                    }
                }
                FlagMode::Dropped => {}
            }
        }
        if self.tick > a.draw_ticks() {
            return Err("tick beyond draw time".into());
        }
        Ok(())
    }
}

fn land(ball: &mut BallState) {
    ball.mode = BallMode::OnGround;
    ball.vel = Vec2::ZERO;
    ball.thrower = None;
}

/// Nearest unstunned eligible player within `reach` of `at`; ties go to the
/// lowest id.
fn nearest_contact(
    players: &[PlayerState],
    at: Vec2,
    reach: f64,
    eligible: impl Fn(&PlayerState) -> bool,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for p in players {
        if p.is_stunned() || !eligible(p) {
            continue;
        }
        let d2 = (p.pos - at).length_sq();
        if d2 <= reach * reach && best.is_none_or(|(bd, _)| d2 < bd) {
            best = Some((d2, p.id));
        }
    }
    best.map(|(_, id)| id)
}

fn integrate_player(arena: &ArenaConfig, pos: Vec2, vel: Vec2) -> Vec2 {
    let dt = arena.tick_dt;
    let r = arena.player_radius;
    let lim_x = arena.half_width() - r;
    let lim_y = arena.half_height() - r;
    let walls = arena.walls.iter().map(|w| w.expanded(r));

    let mut x = (pos.x + vel.x * dt).clamp(-lim_x, lim_x);
    for e in walls.clone() {
        if e.contains_strict(Vec2::new(x, pos.y)) {
            if vel.x > 0.0 {
                x = e.min.x;
            } else if vel.x < 0.0 {
                x = e.max.x;
            }
        }
    }
    let mut y = (pos.y + vel.y * dt).clamp(-lim_y, lim_y);
    for e in walls {
        if e.contains_strict(Vec2::new(x, y)) {
            if vel.y > 0.0 {
                y = e.min.y;
            } else if vel.y < 0.0 {
                y = e.max.y;
            }
        }
    }
    Vec2::new(x, y)
}

type Spawned = (Vec<PlayerState>, Vec<BallState>, [FlagState; 2]);

fn spawn(arena: &ArenaConfig, rng: &mut ChaCha8Rng) -> Spawned {
    let players = (0..NUM_PLAYERS)
        .map(|id| {
            let team = Team::of_player(id);
            PlayerState {
                id,
                team,
                pos: arena.player_spawn(id),
                vel: Vec2::ZERO,
                facing: match team {
                    Team::Blue => Vec2::new(1.0, 0.0),
                    Team::White => Vec2::new(-1.0, 0.0),
                },
                stun_ticks: 0,
                held_ball: None,
                carried_flag: None,
            }
        })
        .collect();
    let balls = arena
        .ball_slots()
        .into_iter()
        .enumerate()
        .map(|(id, slot)| {
            let jitter = if arena.ball_jitter > 0.0 {
                rng.random_range(-arena.ball_jitter..=arena.ball_jitter)
            } else {
                0.0
            };
            BallState {
                id,
                pos: Vec2::new(slot.x, slot.y + jitter),
                mode: BallMode::OnGround,
                vel: Vec2::ZERO,
                flown: 0.0,
                thrower: None,
            }
        })
        .collect();
    let flag = |team: Team| FlagState {
        team,
        mode: FlagMode::AtSpawn,
        pos: arena.flag_spawn(team),
    };
    (players, balls, [flag(Team::Blue), flag(Team::White)])
}

/// Expose the per-wall test used for player clamping (collision geometry
/// helpers for tests and the scripted expert).
pub fn blocked_by_wall(arena: &ArenaConfig, p: Vec2) -> Option<Rect> {
    arena
        .walls
        .iter()
        .map(|w| w.expanded(arena.player_radius))
        .find(|e| e.contains_strict(p))
}
