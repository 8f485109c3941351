//! Deterministic role-based bot used as a stand-in demonstrator.
//!
//! Decisions are made in the team-local frame (own flag towards -x), so a
//! White expert in a mirrored world behaves exactly like its Blue
//! counterpart.

use crate::action::{Action, Intent};
use crate::engine::{BallMode, FlagMode, Team, WorldState};
use crate::geom::{Rect, Vec2};

/// Opponents closer than this are thrown at.
pub const THROW_RANGE: f64 = 8.0;
/// Lateral tolerance for a throw along one of the eight move directions.
const AIM_TOLERANCE: f64 = 0.6;
const DEADBAND: f64 = 0.15;
const LOOKAHEAD: f64 = 0.9;
const GUARD_OFFSET: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Runner,
    Defender,
    Support,
}

impl Role {
    pub fn of_player(id: usize) -> Role {
        match id % 3 {
            0 => Role::Runner,
            1 => Role::Defender,
            _ => Role::Support,
        }
    }
}

const DIRS: [(i8, i8); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// World seen from one agent's team frame.
struct View<'a> {
    w: &'a WorldState,
    me: usize,
    team: Team,
    flip: bool,
    walls: Vec<Rect>,
}

impl<'a> View<'a> {
    fn new(w: &'a WorldState, me: usize) -> Self {
        let team = Team::of_player(me);
        let flip = team == Team::White;
        let walls = w
            .arena
            .walls
            .iter()
            .map(|r| if flip { r.mirror_x() } else { *r })
            .collect();
        Self {
            w,
            me,
            team,
            flip,
            walls,
        }
    }

    fn local(&self, v: Vec2) -> Vec2 {
        if self.flip {
            v.mirror_x()
        } else {
            v
        }
    }

    fn pos(&self, id: usize) -> Vec2 {
        self.local(self.w.players[id].pos)
    }

    fn my_pos(&self) -> Vec2 {
        self.pos(self.me)
    }

    fn own_flag_spawn(&self) -> Vec2 {
        self.local(self.w.arena.flag_spawn(self.team))
    }

    fn opponents(&self) -> impl Iterator<Item = usize> + '_ {
        self.team.other().players()
    }

    /// Slot-ordered teammate with the given role.
    fn mate(&self, role: Role) -> usize {
        self.team
            .players()
            .find(|&i| Role::of_player(i) == role)
            .expect("three slots")
    }

    fn nearest_ground_ball(&self, filter: impl Fn(Vec2) -> bool) -> Option<Vec2> {
        let me = self.my_pos();
        self.w
            .balls
            .iter()
            .filter(|b| b.mode == BallMode::OnGround)
            .map(|b| self.local(b.pos))
            .filter(|&p| filter(p))
            .min_by(|a, b| a.distance(me).total_cmp(&b.distance(me)))
    }

    fn nearest_threat(&self, range: f64) -> Option<usize> {
        let me = self.my_pos();
        self.opponents()
            .filter(|&o| !self.w.players[o].is_stunned())
            .map(|o| (o, self.pos(o).distance(me)))
            .filter(|&(_, d)| d <= range)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(o, _)| o)
    }

    fn wall_between(&self, from: Vec2, to: Vec2) -> bool {
        let r = self.w.arena.ball_radius;
        self.walls.iter().any(|wall| {
            wall.expanded(r)
                .ray_entry(from, to - from)
                .is_some_and(|s| s <= 1.0)
        })
    }

    fn blocked(&self, p: Vec2) -> Option<Rect> {
        let m = self.w.arena.player_radius + 0.05;
        self.walls
            .iter()
            .map(|r| r.expanded(m))
            .find(|r| r.contains_strict(p))
    }

    /// Greedy axis-wise step towards `target`, sidestepping walls.
    fn go_to(&self, target: Vec2) -> [i8; 2] {
        let p = self.my_pos();
        let d = target - p;
        let sx = axis(d.x);
        let sy = axis(d.y);
        let mv = [sx, sy];
        if mv == [0, 0] {
            return mv;
        }
        let dir = Vec2::new(sx as f64, sy as f64).normalized();
        let Some(wall) = self.blocked(p + dir * LOOKAHEAD) else {
            return mv;
        };
        // try the pure axis moves before going around
        for alt in [[sx, 0], [0, sy]] {
            if alt != [0, 0] {
                let a = Vec2::new(alt[0] as f64, alt[1] as f64);
                if self.blocked(p + a * LOOKAHEAD).is_none() {
                    return alt;
                }
            }
        }
        let c = Vec2::new(
            (wall.min.x + wall.max.x) / 2.0,
            (wall.min.y + wall.max.y) / 2.0,
        );
        if sx != 0 && (p.x - c.x).signum() == -(sx as f64) && p.y > wall.min.y && p.y < wall.max.y {
            // wall ahead in x: slide along y around the nearer end
            let up = (wall.max.y - p.y) + (target.y - wall.max.y).abs();
            let down = (p.y - wall.min.y) + (target.y - wall.min.y).abs();
            [0, if up <= down { 1 } else { -1 }]
        } else {
            let right = (wall.max.x - p.x) + (target.x - wall.max.x).abs();
            let left = (p.x - wall.min.x) + (target.x - wall.min.x).abs();
            [if right <= left { 1 } else { -1 }, 0]
        }
    }

    /// Moves to line up with `target` and throws once it sits on one of the
    /// eight move directions with a clear line.
    fn attack(&self, target: usize) -> Intent {
        let p = self.my_pos();
        let t = self.pos(target);
        let d = t - p;
        if d.length() > THROW_RANGE {
            return Intent {
                mv: self.go_to(t),
                throw: false,
            };
        }
        let mut best: Option<((i8, i8), f64)> = None;
        for &(ux, uy) in &DIRS {
            let u = Vec2::new(ux as f64, uy as f64).normalized();
            let fwd = d.dot(u);
            let perp = (d.x * u.y - d.y * u.x).abs();
            if fwd > 0.0 && perp <= AIM_TOLERANCE && best.is_none_or(|(_, bp)| perp < bp) {
                best = Some(((ux, uy), perp));
            }
        }
        if let Some(((ux, uy), _)) = best {
            let u = Vec2::new(ux as f64, uy as f64).normalized();
            let from = p + u * (self.w.arena.max_speed * self.w.arena.tick_dt);
            let clear = self.blocked(from).is_none() && !self.wall_between(from, t);
            return Intent {
                mv: [ux, uy],
                throw: clear,
            };
        }
        // close the smaller offset first to reach an axis line
        let mv = if d.x.abs() <= d.y.abs() {
            [axis_strict(d.x), 0]
        } else {
            [0, axis_strict(d.y)]
        };
        let a = Vec2::new(mv[0] as f64, mv[1] as f64);
        if self.blocked(p + a * LOOKAHEAD).is_some() {
            return Intent {
                mv: self.go_to(t),
                throw: false,
            };
        }
        Intent { mv, throw: false }
    }

    fn has_ball(&self) -> bool {
        self.w.players[self.me].held_ball.is_some()
    }

    fn enemy_carrier_of_own_flag(&self) -> Option<usize> {
        match self.w.flag(self.team).mode {
            FlagMode::Carried(c) => Some(c),
            _ => None,
        }
    }
}

fn axis(v: f64) -> i8 {
    if v > DEADBAND {
        1
    } else if v < -DEADBAND {
        -1
    } else {
        0
    }
}

fn axis_strict(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Action of the scripted expert for `agent`.
pub fn scripted_expert(w: &WorldState, agent: usize) -> Action {
    let me = &w.players[agent];
    if me.is_stunned() {
        return Action::NOOP;
    }
    let v = View::new(w, agent);
    let intent = decide(&v);
    let a = Action::from_intent(intent);
    if v.flip {
        a.mirror_x()
    } else {
        a
    }
}

fn decide(v: &View) -> Intent {
    let me = &v.w.players[v.me];
    let home = v.own_flag_spawn();
    let move_to = |t: Vec2| Intent {
        mv: v.go_to(t),
        throw: false,
    };
    if me.carried_flag.is_some() {
        return move_to(home);
    }
    let own_flag = v.w.flag(v.team);
    let enemy_flag = v.w.flag(v.team.other());
    let p = v.my_pos();
    match Role::of_player(v.me) {
        Role::Runner => match enemy_flag.mode {
            FlagMode::Carried(c) => {
                let escort = v.pos(c) + Vec2::new(1.5, 0.0);
                move_to(escort)
            }
            _ => move_to(v.local(enemy_flag.pos)),
        },
        Role::Defender => {
            if own_flag.mode == FlagMode::Dropped {
                return move_to(v.local(own_flag.pos));
            }
            if v.has_ball() {
                if let Some(c) = v.enemy_carrier_of_own_flag() {
                    return v.attack(c);
                }
                if let Some(o) = v.nearest_threat(THROW_RANGE) {
                    return v.attack(o);
                }
                return move_to(home + Vec2::new(GUARD_OFFSET, 0.0));
            }
            if let Some(b) = v.nearest_ground_ball(|b| b.x <= 0.0) {
                return move_to(b);
            }
            if let Some(c) = v.enemy_carrier_of_own_flag() {
                return move_to(v.pos(c));
            }
            move_to(home + Vec2::new(GUARD_OFFSET, 0.0))
        }
        Role::Support => {
            if own_flag.mode == FlagMode::Dropped && v.local(own_flag.pos).distance(p) < 5.0 {
                return move_to(v.local(own_flag.pos));
            }
            let runner = v.mate(Role::Runner);
            if v.has_ball() {
                if let Some(c) = v.enemy_carrier_of_own_flag() {
                    return v.attack(c);
                }
                if let Some(o) = v.nearest_threat(THROW_RANGE) {
                    return v.attack(o);
                }
                return move_to(v.pos(runner) - Vec2::new(1.5, 0.0));
            }
            if let Some(b) = v.nearest_ground_ball(|_| true) {
                return move_to(b);
            }
            if let Some(c) = v.enemy_carrier_of_own_flag() {
                return move_to(v.pos(c));
            }
            move_to(v.pos(runner) - Vec2::new(1.5, 0.0))
        }
    }
}
