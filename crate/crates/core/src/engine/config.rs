use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::geom::{Rect, Vec2};

use super::Team;

/// Geometry, physics constants and timing of one arena.
///
/// Blue defends the left half (negative x), White the right half. Every
/// layout must be symmetric under x-negation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaConfig {
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Rect>,
    pub base_depth: f64,
    /// `[blue, white]` flag spawn points.
    pub flag_spawns: [Vec2; 2],
    pub ball_count: usize,
    /// Half-width of the uniform y-jitter applied to each ball spawn slot at
    /// round start. Balls always stay on x = 0.
    pub ball_jitter: f64,
    pub player_radius: f64,
    pub ball_radius: f64,
    pub flag_radius: f64,
    pub max_speed: f64,
    pub throw_speed: f64,
    pub throw_max_range: f64,
    pub stun_duration: f64,
    pub tick_dt: f64,
    pub draw_time: f64,
    pub players_per_team: usize,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            width: 40.0,
            height: 20.0,
            walls: vec![
                Rect::new(-11.0, 2.5, -10.0, 7.5),
                Rect::new(10.0, 2.5, 11.0, 7.5),
                Rect::new(-6.0, -7.5, -5.0, -2.5),
                Rect::new(5.0, -7.5, 6.0, -2.5),
            ],
            base_depth: 4.0,
            flag_spawns: [Vec2::new(-18.0, 0.0), Vec2::new(18.0, 0.0)],
            ball_count: 6,
            ball_jitter: 0.5,
            player_radius: 0.5,
            ball_radius: 0.3,
            flag_radius: 0.5,
            max_speed: 6.0,
            throw_speed: 14.0,
            throw_max_range: 25.0,
            stun_duration: 3.0,
            tick_dt: 0.05,
            draw_time: 1000.0,
            players_per_team: 3,
        }
    }
}

impl ArenaConfig {
    /// Open arena: same dimensions, no walls.
    pub fn open() -> Self {
        Self {
            walls: Vec::new(),
            ..Self::default()
        }
    }

    /// Compact wall-less, ball-less arena with a 20 s round cap, used as the
    /// fetch-the-flag reinforcement learning curriculum.
    pub fn fetch_flag_curriculum() -> Self {
        Self {
            width: 8.0,
            height: 4.0,
            walls: Vec::new(),
            base_depth: 2.5,
            flag_spawns: [Vec2::new(-2.25, 0.0), Vec2::new(2.25, 0.0)],
            ball_count: 0,
            ball_jitter: 0.0,
            draw_time: 20.0,
            ..Self::default()
        }
    }

    pub fn half_width(&self) -> f64 {
        self.width * 0.5
    }

    pub fn half_height(&self) -> f64 {
        self.height * 0.5
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(
            -self.half_width(),
            -self.half_height(),
            self.half_width(),
            self.half_height(),
        )
    }

    pub fn flag_spawn(&self, team: Team) -> Vec2 {
        self.flag_spawns[team.index()]
    }

    /// Number of ticks in a full round before the draw rule fires.
    pub fn draw_ticks(&self) -> u64 {
        (self.draw_time / self.tick_dt).round() as u64
    }

    pub fn stun_ticks(&self) -> u32 {
        (self.stun_duration / self.tick_dt).round() as u32
    }

    /// Is `p` inside `team`'s scoring base?
    pub fn in_base(&self, team: Team, p: Vec2) -> bool {
        match team {
            Team::Blue => p.x <= -self.half_width() + self.base_depth,
            Team::White => p.x >= self.half_width() - self.base_depth,
        }
    }

    /// Fixed spawn slot of a player: three slots per side, mirrored.
    pub fn player_spawn(&self, id: usize) -> Vec2 {
        let team = Team::of_player(id);
        let slot = id % 3;
        let x = -self.half_width() + self.base_depth * 0.75;
        let dy = self.height * 0.2;
        let y = match slot {
            0 => dy,
            1 => 0.0,
            _ => -dy,
        };
        let p = Vec2::new(x, y);
        match team {
            Team::Blue => p,
            Team::White => p.mirror_x(),
        }
    }

    /// Ball spawn slots before jitter: evenly spread along x = 0.
    pub fn ball_slots(&self) -> Vec<Vec2> {
        let n = self.ball_count;
        (0..n)
            .map(|i| {
                let y = -self.half_height() + self.height * (i as f64 + 0.5) / n as f64;
                Vec2::new(0.0, y)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("player_radius", self.player_radius),
            ("ball_radius", self.ball_radius),
            ("flag_radius", self.flag_radius),
            ("max_speed", self.max_speed),
            ("throw_speed", self.throw_speed),
            ("throw_max_range", self.throw_max_range),
            ("stun_duration", self.stun_duration),
            ("tick_dt", self.tick_dt),
            ("draw_time", self.draw_time),
            ("base_depth", self.base_depth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(EngineError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.ball_jitter.is_finite() && self.ball_jitter >= 0.0) {
            return Err(EngineError::Config(
                "ball_jitter must be non-negative".into(),
            ));
        }
        if self.players_per_team != 3 {
            return Err(EngineError::Config(format!(
                "players_per_team must be 3, got {}",
                self.players_per_team
            )));
        }
        if self.base_depth >= self.half_width() {
            return Err(EngineError::Config(
                "base_depth must be less than half the width".into(),
            ));
        }
        let ticks = self.draw_time / self.tick_dt;
        if (ticks - ticks.round()).abs() > 1e-9 * ticks.max(1.0) {
            return Err(EngineError::Config(format!(
                "tick_dt {} does not divide draw_time {}",
                self.tick_dt, self.draw_time
            )));
        }
        let bounds = self.bounds();
        for (i, w) in self.walls.iter().enumerate() {
            let ok = w.min.x < w.max.x
                && w.min.y < w.max.y
                && w.min.x >= bounds.min.x
                && w.max.x <= bounds.max.x
                && w.min.y >= bounds.min.y
                && w.max.y <= bounds.max.y;
            if !ok {
                return Err(EngineError::Config(format!(
                    "wall {i} {w:?} is degenerate or outside the arena"
                )));
            }
            for team in [Team::Blue, Team::White] {
                if w.intersects_disc(self.flag_spawn(team), self.flag_radius) {
                    return Err(EngineError::Config(format!(
                        "wall {i} {w:?} covers the {team} flag spawn"
                    )));
                }
            }
            for id in 0..6 {
                if w.intersects_disc(self.player_spawn(id), self.player_radius) {
                    return Err(EngineError::Config(format!(
                        "wall {i} {w:?} covers the spawn of player {id}"
                    )));
                }
            }
            for (b, slot) in self.ball_slots().iter().enumerate() {
                if w.intersects_disc(*slot, self.ball_radius + self.ball_jitter) {
                    return Err(EngineError::Config(format!(
                        "wall {i} {w:?} covers ball spawn {b}"
                    )));
                }
            }
            if !self.walls.contains(&w.mirror_x()) {
                return Err(EngineError::Config(format!(
                    "wall {i} {w:?} has no mirror image; layout must be symmetric"
                )));
            }
        }
        for team in [Team::Blue, Team::White] {
            let p = self.flag_spawn(team);
            let inside = p.x.abs() + self.flag_radius <= self.half_width()
                && p.y.abs() + self.flag_radius <= self.half_height();
            if !inside {
                return Err(EngineError::Config(format!(
                    "{team} flag spawn {p:?} outside arena"
                )));
            }
        }
        if self.flag_spawns[1] != self.flag_spawns[0].mirror_x() {
            return Err(EngineError::Config(
                "flag spawns are not mirror images".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ArenaConfig::default().validate().unwrap();
        ArenaConfig::open().validate().unwrap();
        ArenaConfig::fetch_flag_curriculum().validate().unwrap();
    }

    #[test]
    fn default_counts() {
        let a = ArenaConfig::default();
        assert_eq!(a.draw_ticks(), 20_000);
        assert_eq!(a.stun_ticks(), 60);
        assert_eq!(a.ball_slots().len(), 6);
    }

    #[test]
    fn wall_over_flag_spawn_is_named() {
        let mut a = ArenaConfig::default();
        a.walls.push(Rect::new(-19.0, -1.0, -17.5, 1.0));
        a.walls.push(Rect::new(17.5, -1.0, 19.0, 1.0));
        let err = a.validate().unwrap_err().to_string();
        assert!(err.contains("wall 4"), "{err}");
        assert!(err.contains("flag spawn"), "{err}");
    }

    #[test]
    fn asymmetric_layout_rejected() {
        let mut a = ArenaConfig::default();
        a.walls.push(Rect::new(-3.0, 8.0, -2.0, 9.0));
        assert!(a.validate().is_err());
    }

    #[test]
    fn tick_must_divide_draw_time() {
        let a = ArenaConfig {
            tick_dt: 0.3,
            draw_time: 1000.0,
            ..ArenaConfig::default()
        };
        assert!(a.validate().is_err());
    }

    #[test]
    fn json_keys_round_trip() {
        let a = ArenaConfig::default();
        let s = serde_json::to_string(&a).unwrap();
        assert!(
            s.contains("\"flag_spawns\":[[-18.0,0.0],[18.0,0.0]]"),
            "{s}"
        );
        let b: ArenaConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        let partial: ArenaConfig = serde_json::from_str(r#"{"draw_time": 60.0}"#).unwrap();
        assert_eq!(partial.draw_time, 60.0);
        assert_eq!(partial.width, 40.0);
    }
}
