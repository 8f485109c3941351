use crate::geom::{ray_disc, Vec2};

use super::{BallMode, FlagMode, Team, WorldState};

/// Category of the first object a ray meets, relative to the ray's owner.
/// Declaration order is the one-hot order used in observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HitTag {
    Wall,
    Ball,
    Teammate,
    Opponent,
    EnemyFlag,
    OwnFlag,
}

impl HitTag {
    pub const ALL: [HitTag; 6] = [
        HitTag::Wall,
        HitTag::Ball,
        HitTag::Teammate,
        HitTag::Opponent,
        HitTag::EnemyFlag,
        HitTag::OwnFlag,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Lower wins when two hits are at exactly the same distance.
    pub fn priority(self) -> u8 {
        match self {
            HitTag::Wall => 0,
            HitTag::Opponent => 1,
            HitTag::Teammate => 2,
            HitTag::Ball => 3,
            HitTag::EnemyFlag => 4,
            HitTag::OwnFlag => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayHit {
    Hit { dist: f64, tag: HitTag },
    Miss,
}

impl RayHit {
    pub fn dist(self) -> Option<f64> {
        match self {
            RayHit::Hit { dist, .. } => Some(dist),
            RayHit::Miss => None,
        }
    }

    pub fn tag(self) -> Option<HitTag> {
        match self {
            RayHit::Hit { tag, .. } => Some(tag),
            RayHit::Miss => None,
        }
    }
}

impl WorldState {
    /// Nearest object along a ray from `origin` in unit direction `dir`,
    /// seen by player `owner` (whose own disc is ignored).
    pub fn raycast(&self, origin: Vec2, dir: Vec2, max_dist: f64, owner: usize) -> RayHit {
        let a = &self.arena;
        let team = Team::of_player(owner);
        let mut best: Option<(f64, HitTag)> = None;
        let mut offer = |d: f64, tag: HitTag| {
            let better = match best {
                None => true,
                Some((bd, bt)) => d < bd || (d == bd && tag.priority() < bt.priority()),
            };
            if better {
                best = Some((d, tag));
            }
        };

        offer(a.bounds().ray_exit(origin, dir), HitTag::Wall);
        for w in &a.walls {
            if let Some(d) = w.ray_entry(origin, dir) {
                offer(d, HitTag::Wall);
            }
        }
        for p in &self.players {
            if p.id == owner {
                continue;
            }
            if let Some(d) = ray_disc(origin, dir, p.pos, a.player_radius) {
                let tag = if p.team == team {
                    HitTag::Teammate
                } else {
                    HitTag::Opponent
                };
                offer(d, tag);
            }
        }
        for b in &self.balls {
            if b.mode != BallMode::OnGround {
                continue;
            }
            if let Some(d) = ray_disc(origin, dir, b.pos, a.ball_radius) {
                offer(d, HitTag::Ball);
            }
        }
        for f in &self.flags {
            if matches!(f.mode, FlagMode::Carried(_)) {
                continue;
            }
            if let Some(d) = ray_disc(origin, dir, f.pos, a.flag_radius) {
                let tag = if f.team == team {
                    HitTag::OwnFlag
                } else {
                    HitTag::EnemyFlag
                };
                offer(d, tag);
            }
        }

        match best {
            Some((dist, tag)) if dist <= max_dist => RayHit::Hit { dist, tag },
            _ => RayHit::Miss,
        }
    }
}
