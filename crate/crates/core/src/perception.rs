//! The agent/environment contract: observation vectors, action decoding and
//! per-event rewards.
//!
//! Observation layout (`obsv1`), all entries in [-1, 1], expressed in the
//! agent's team-local frame (White sees the world mirrored in x, so both
//! teams attack towards +x):
//!
//! | range  | content |
//! |--------|---------|
//! | 0..2   | own position / half extents |
//! | 2..4   | own velocity / max speed |
//! | 4..6   | facing |
//! | 6..12  | own flag: position / half extents, mode one-hot (at spawn, carried by ally, carried by enemy, dropped) |
//! | 12..18 | enemy flag, same encoding |
//! | 18     | holding a ball |
//! | 19     | stun remaining / stun duration |
//! | 20     | carrying the enemy flag |
//! | 21..27 | two teammates (ascending id): relative position / arena size, carrying a flag |
//! | 27     | elapsed round time / draw time |
//! | 28..   | per ray: distance / range (1 on miss), tag one-hot in [`HitTag::ALL`] order |

use serde::{Deserialize, Serialize};

use crate::engine::{
    ArenaConfig, EventKind, FlagMode, GameEvent, HitTag, RayHit, Team, WorldState, NUM_PLAYERS,
};
use crate::error::ContractError;
use crate::geom::Vec2;

pub use crate::action::{decode_action, Action, Intent};

pub const OBS_LAYOUT: &str = "obsv1";
pub const STATE_DIM: usize = 28;
pub const RAY_FEATURES: usize = 1 + HitTag::ALL.len();
pub const DEFAULT_RAYS: usize = 24;
pub const DEFAULT_RAY_RANGE: f64 = 30.0;

/// Length of an observation vector for `rays` rays.
pub fn obs_dim(_arena: &ArenaConfig, rays: usize) -> Result<usize, ContractError> {
    if rays == 0 {
        return Err(ContractError::new("observation needs at least one ray"));
    }
    Ok(STATE_DIM + rays * RAY_FEATURES)
}

/// Number of rays encoded by an `obsv1` vector of length `dim`, if valid.
pub fn rays_for_dim(dim: usize) -> Option<usize> {
    (dim > STATE_DIM && (dim - STATE_DIM) % RAY_FEATURES == 0)
        .then(|| (dim - STATE_DIM) / RAY_FEATURES)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObsConfig {
    pub rays: usize,
    pub ray_range: f64,
    /// Present White agents with the x-mirrored world.
    pub team_frame: bool,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self {
            rays: DEFAULT_RAYS,
            ray_range: DEFAULT_RAY_RANGE,
            team_frame: true,
        }
    }
}

impl ObsConfig {
    /// Maps an action between the team-local frame of a `team` agent and
    /// world coordinates. The map is its own inverse.
    pub fn frame_action(&self, team: Team, a: Action) -> Action {
        if self.team_frame && team == Team::White {
            a.mirror_x()
        } else {
            a
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Default-layout observation of `agent`.
pub fn observe(w: &WorldState, agent: usize) -> Observation {
    observe_with(w, agent, &ObsConfig::default())
}

pub fn observe_with(w: &WorldState, agent: usize, cfg: &ObsConfig) -> Observation {
    let mut values = vec![0.0; STATE_DIM + cfg.rays * RAY_FEATURES];
    observe_into(w, agent, cfg, &mut values);
    Observation { values }
}

/// Writes the observation of `agent` into `out`, which must have length
/// `STATE_DIM + cfg.rays * RAY_FEATURES`.
pub fn observe_into(w: &WorldState, agent: usize, cfg: &ObsConfig, out: &mut [f64]) {
    assert!(agent < NUM_PLAYERS, "agent id {agent} out of range");
    assert_eq!(out.len(), STATE_DIM + cfg.rays * RAY_FEATURES);
    let a = &w.arena;
    let me = &w.players[agent];
    let team = me.team;
    let flip = cfg.team_frame && team == Team::White;
    let frame = |v: Vec2| if flip { v.mirror_x() } else { v };
    let hw = a.half_width();
    let hh = a.half_height();

    let pos = frame(me.pos);
    out[0] = pos.x / hw;
    out[1] = pos.y / hh;
    let vel = frame(me.vel);
    out[2] = vel.x / a.max_speed;
    out[3] = vel.y / a.max_speed;
    let facing = frame(me.facing);
    out[4] = facing.x;
    out[5] = facing.y;

    for (k, flag_team) in [team, team.other()].into_iter().enumerate() {
        let f = w.flag(flag_team);
        let base = 6 + k * 6;
        let p = frame(f.pos);
        out[base] = p.x / hw;
        out[base + 1] = p.y / hh;
        let mode = match f.mode {
            FlagMode::AtSpawn => 0,
            FlagMode::Carried(c) if w.players[c].team == team => 1,
            FlagMode::Carried(_) => 2,
            FlagMode::Dropped => 3,
        };
        for m in 0..4 {
            out[base + 2 + m] = if m == mode { 1.0 } else { 0.0 };
        }
    }

    out[18] = f64::from(u8::from(me.held_ball.is_some()));
    out[19] = (me.stun_ticks as f64 / a.stun_ticks() as f64).min(1.0);
    out[20] = f64::from(u8::from(me.carried_flag.is_some()));

    let mut base = 21;
    for mate in team.players().filter(|&i| i != agent) {
        let m = &w.players[mate];
        let rel = frame(m.pos - me.pos);
        out[base] = rel.x / a.width;
        out[base + 1] = rel.y / a.height;
        out[base + 2] = f64::from(u8::from(m.carried_flag.is_some()));
        base += 3;
    }
    out[27] = (w.tick as f64 / a.draw_ticks() as f64).min(1.0);

    for k in 0..cfg.rays {
        let theta = std::f64::consts::TAU * k as f64 / cfg.rays as f64;
        let local = Vec2::new(theta.cos(), theta.sin());
        let dir = frame(local);
        let slot = &mut out[STATE_DIM + k * RAY_FEATURES..STATE_DIM + (k + 1) * RAY_FEATURES];
        slot.fill(0.0);
        match w.raycast(me.pos, dir, cfg.ray_range, agent) {
            RayHit::Hit { dist, tag } => {
                slot[0] = dist / cfg.ray_range;
                slot[1 + tag.index()] = 1.0;
            }
            RayHit::Miss => slot[0] = 1.0,
        }
    }
}

/// Reward shaping values. Win/loss rewards are zero-sum across teams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSpec {
    pub flag_delivered_team: f64,
    pub flag_pickup: f64,
    pub ball_hit_dealt: f64,
    pub ball_hit_taken: f64,
    pub own_flag_returned: f64,
    pub time_penalty_per_tick: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            flag_delivered_team: 1.0,
            flag_pickup: 0.3,
            ball_hit_dealt: 0.1,
            ball_hit_taken: -0.1,
            own_flag_returned: 0.2,
            time_penalty_per_tick: -0.0005,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<(), ContractError> {
        if !(self.time_penalty_per_tick < 0.0) {
            return Err(ContractError::new("time_penalty_per_tick must be negative"));
        }
        Ok(())
    }
}

/// Per-agent reward for one engine tick's events.
pub fn compute_rewards(events: &[GameEvent], spec: &RewardSpec) -> [f64; NUM_PLAYERS] {
    let mut r = [0.0; NUM_PLAYERS];
    let mut terminal = false;
    for e in events {
        match e.kind {
            EventKind::FlagPickup { player, .. } => r[player] += spec.flag_pickup,
            EventKind::FlagDelivered { team, .. } => {
                for p in team.players() {
                    r[p] += spec.flag_delivered_team;
                }
                for p in team.other().players() {
                    r[p] -= spec.flag_delivered_team;
                }
            }
            EventKind::FlagReturned { player, .. } => r[player] += spec.own_flag_returned,
            EventKind::BallHit { thrower, victim } => {
                r[thrower] += spec.ball_hit_dealt;
                r[victim] += spec.ball_hit_taken;
            }
            EventKind::RoundEnd(_) => terminal = true,
            EventKind::BallPickup { .. } | EventKind::Throw { .. } => {}
        }
    }
    if !terminal {
        for x in &mut r {
            *x += spec.time_penalty_per_tick;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::engine::{mirror_id, Outcome};

    #[test]
    fn obs_dim_examples() {
        let a = ArenaConfig::default();
        assert_eq!(obs_dim(&a, 24).unwrap(), 196);
        assert_eq!(obs_dim(&a, 1).unwrap(), 35);
        assert!(obs_dim(&a, 0).is_err());
        assert_eq!(rays_for_dim(196), Some(24));
        assert_eq!(rays_for_dim(195), None);
    }

    #[test]
    fn fresh_world_time_and_stun_are_zero() {
        let w = WorldState::new(ArenaConfig::default(), 1).unwrap();
        let o = observe(&w, 0);
        assert_eq!(o.len(), 196);
        assert_eq!(o.values[27], 0.0);
        assert_eq!(o.values[19], 0.0);
    }

    #[test]
    fn ray_zero_sees_right_boundary_from_center() {
        let arena = ArenaConfig {
            ball_count: 0,
            ..ArenaConfig::open()
        };
        let mut w = WorldState::new(arena, 1).unwrap();
        for p in &mut w.players {
            p.pos.y = 9.0;
        }
        for f in &mut w.flags {
            f.mode = FlagMode::Dropped;
            f.pos.y = -9.0;
        }
        w.players[0].pos = Vec2::ZERO;
        let o = observe(&w, 0);
        let ray0 = &o.values[STATE_DIM..STATE_DIM + RAY_FEATURES];
        let expected = w
            .raycast(Vec2::ZERO, Vec2::new(1.0, 0.0), 30.0, 0)
            .dist()
            .unwrap()
            / 30.0;
        assert_eq!(expected, 20.0 / 30.0);
        assert_eq!(ray0[0], expected);
        assert_eq!(&ray0[1..], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn observe_is_pure() {
        let w = WorldState::new(ArenaConfig::default(), 5).unwrap();
        assert_eq!(observe(&w, 4), observe(&w, 4));
    }

    fn random_world(seed: u64, ticks: usize) -> WorldState {
        let mut w = WorldState::new(ArenaConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        for _ in 0..ticks {
            let acts: Vec<Action> = (0..6)
                .map(|_| Action {
                    branches: [
                        rng.random_range(0..3),
                        rng.random_range(0..3),
                        u8::from(rng.random_bool(0.2)),
                    ],
                })
                .collect();
            w.step(&acts).unwrap();
            if w.outcome.is_over() {
                w.reset_round().unwrap();
            }
        }
        w
    }

    #[test]
    fn mirrored_counterpart_sees_identical_observation() {
        for seed in 0..20 {
            let w = random_world(seed, 50 + seed as usize * 37);
            let m = w.mirrored();
            for agent in 0..6 {
                assert_eq!(
                    observe(&w, agent),
                    observe(&m, mirror_id(agent)),
                    "seed {seed} agent {agent}"
                );
            }
        }
    }

    #[test]
    fn disabling_team_frame_changes_white_view() {
        let w = WorldState::new(ArenaConfig::default(), 2).unwrap();
        let cfg = ObsConfig {
            team_frame: false,
            ..ObsConfig::default()
        };
        let o = observe_with(&w, 3, &cfg);
        assert!(o.values[0] > 0.0);
        assert!(observe(&w, 3).values[0] < 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn entries_bounded_and_ray_blocks_well_formed(seed in any::<u64>(), ticks in 0usize..2500) {
            let w = random_world(seed, ticks);
            for agent in 0..6 {
                let o = observe(&w, agent);
                prop_assert_eq!(o.len(), 196);
                for (i, v) in o.values.iter().enumerate() {
                    prop_assert!(v.is_finite() && (-1.0..=1.0).contains(v), "entry {} = {}", i, v);
                }
                for k in 0..DEFAULT_RAYS {
                    let s = &o.values[STATE_DIM + k * RAY_FEATURES..STATE_DIM + (k + 1) * RAY_FEATURES];
                    let ones = s[1..].iter().filter(|&&x| x == 1.0).count();
                    let zeros = s[1..].iter().filter(|&&x| x == 0.0).count();
                    prop_assert_eq!(ones + zeros, 6);
                    prop_assert!(ones <= 1);
                    if ones == 0 {
                        prop_assert_eq!(s[0], 1.0);
                    }
                }
            }
        }
    }

    fn ev(kind: EventKind) -> GameEvent {
        GameEvent { tick: 1, kind }
    }

    #[test]
    fn reward_examples() {
        let spec = RewardSpec::default();
        assert_eq!(compute_rewards(&[], &spec), [-0.0005; 6]);

        let won = Outcome::Won {
            team: Team::Blue,
            time_s: 12.0,
        };
        let r = compute_rewards(
            &[
                ev(EventKind::FlagDelivered {
                    team: Team::Blue,
                    player: 1,
                }),
                ev(EventKind::RoundEnd(won)),
            ],
            &spec,
        );
        assert_eq!(r, [1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        assert_eq!(r.iter().sum::<f64>(), 0.0);

        let r = compute_rewards(
            &[ev(EventKind::BallHit {
                thrower: 0,
                victim: 3,
            })],
            &spec,
        );
        // hand-summed: 0.1 - 0.0005 and -0.1 - 0.0005
        assert_eq!(r[0], 0.1 + -0.0005);
        assert_eq!(r[3], -0.1 + -0.0005);
        assert!((r[0] - 0.0995).abs() < 1e-15);
        assert!((r[3] + 0.1005).abs() < 1e-15);
        assert_eq!(r[1], -0.0005);
    }

    #[test]
    fn draw_tick_has_no_penalty_or_team_reward() {
        let r = compute_rewards(
            &[ev(EventKind::RoundEnd(Outcome::Draw))],
            &RewardSpec::default(),
        );
        assert_eq!(r, [0.0; 6]);
    }
}
