//! Plane geometry shared by the simulation and the sensors.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in the arena plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn length_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        self.length_sq().sqrt()
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }

    /// Unit vector in the same direction, or zero for the zero vector.
    pub fn normalized(self) -> Vec2 {
        let len = self.length();
        if len == 0.0 {
            Vec2::ZERO
        } else {
            Vec2::new(self.x / len, self.y / len)
        }
    }

    /// Reflection across the line x = 0.
    pub fn mirror_x(self) -> Vec2 {
        Vec2::new(-self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle, `min` corner inclusive to `max` corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Vec2::new(x0, y0),
            max: Vec2::new(x1, y1),
        }
    }

    /// Grow by `r` on every side (Minkowski sum with a square of half-size `r`).
    pub fn expanded(self, r: f64) -> Rect {
        Rect::new(
            self.min.x - r,
            self.min.y - r,
            self.max.x + r,
            self.max.y + r,
        )
    }

    /// Strict interior test.
    pub fn contains_strict(&self, p: Vec2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn mirror_x(self) -> Rect {
        Rect::new(-self.max.x, self.min.y, -self.min.x, self.max.y)
    }

    /// Does the disc of radius `r` centred at `c` overlap this rectangle?
    pub fn intersects_disc(&self, c: Vec2, r: f64) -> bool {
        let nx = c.x.clamp(self.min.x, self.max.x);
        let ny = c.y.clamp(self.min.y, self.max.y);
        let dx = c.x - nx;
        let dy = c.y - ny;
        dx * dx + dy * dy < r * r
    }

    /// Entry distance of a ray into the rectangle (slab test). Origins inside
    /// report 0.
    pub fn ray_entry(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.min.x, self.max.x),
            (origin.y, dir.y, self.min.y, self.max.y),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let t1 = (lo - o) / d;
                let t2 = (hi - o) / d;
                t_near = t_near.max(t1.min(t2));
                t_far = t_far.min(t1.max(t2));
            }
        }
        if t_near > t_far || t_far < 0.0 {
            None
        } else {
            Some(t_near.max(0.0))
        }
    }

    /// Exit distance of a ray starting inside the rectangle.
    pub fn ray_exit(&self, origin: Vec2, dir: Vec2) -> f64 {
        let mut t = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.min.x, self.max.x),
            (origin.y, dir.y, self.min.y, self.max.y),
        ] {
            if d > 0.0 {
                t = t.min((hi - o) / d);
            } else if d < 0.0 {
                t = t.min((lo - o) / d);
            }
        }
        t.max(0.0)
    }
}

/// Smallest non-negative distance along a ray at which it meets a disc.
/// Origins inside the disc report 0.
pub fn ray_disc(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let c = oc.length_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = oc.dot(dir);
    if b >= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    // numerically stable smaller root for |dir| = 1: c / (-b + sqrt(disc))
    Some(c / (-b + disc.sqrt()))
}

/// First parameter `s` in [0, 1] at which a point moving from `p0` by `delta`
/// comes within `radius` of `center`.
pub fn sweep_point_disc(p0: Vec2, delta: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = p0 - center;
    let c = oc.length_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let a = delta.length_sq();
    if a == 0.0 {
        return None;
    }
    let b = oc.dot(delta);
    if b >= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = c / (-b + disc.sqrt());
    (s <= 1.0).then_some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_disc_front_hit() {
        let d = ray_disc(Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(5.0, 0.0), 0.5).unwrap();
        assert!((d - 4.5).abs() < 1e-12);
    }

    #[test]
    fn ray_disc_behind_misses() {
        assert!(ray_disc(Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(-5.0, 0.0), 0.5).is_none());
    }

    #[test]
    fn slab_entry_and_exit() {
        let r = Rect::new(2.0, -1.0, 3.0, 1.0);
        assert_eq!(r.ray_entry(Vec2::ZERO, Vec2::new(1.0, 0.0)), Some(2.0));
        assert_eq!(r.ray_entry(Vec2::ZERO, Vec2::new(0.0, 1.0)), None);
        let arena = Rect::new(-20.0, -10.0, 20.0, 10.0);
        assert_eq!(arena.ray_exit(Vec2::ZERO, Vec2::new(1.0, 0.0)), 20.0);
    }

    #[test]
    fn sweep_hits_within_segment_only() {
        let s =
            sweep_point_disc(Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(1.5, 0.0), 0.8).unwrap();
        assert!((s - 0.7).abs() < 1e-12);
        assert!(
            sweep_point_disc(Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(3.0, 0.0), 0.8).is_none()
        );
    }

    #[test]
    fn mirror_is_involution() {
        let r = Rect::new(-10.0, 2.0, -9.0, 7.0);
        assert_eq!(r.mirror_x().mirror_x(), r);
        assert_eq!(r.mirror_x(), Rect::new(9.0, 2.0, 10.0, 7.0));
    }
}
