use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn from_polar(r: f64, phi: f64) -> Self {
        Point::new(r * phi.cos(), r * phi.sin())
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Polar angle in (-pi, pi].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Closed axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn from_corner(corner: Point, w: f64, h: f64) -> Self {
        Rect::new(corner, Point::new(corner.x + w, corner.y + h))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect::new(
            Point::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            Point::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        )
    }

    pub fn pad(&self, d: f64) -> Rect {
        Rect::new(
            Point::new(self.min.x - d, self.min.y - d),
            Point::new(self.max.x + d, self.max.y + d),
        )
    }

    pub fn translate(&self, v: Point) -> Rect {
        Rect::new(self.min + v, self.max + v)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Distance from `p` to the nearest point of the rectangle (0 inside).
    pub fn min_dist(&self, p: Point) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// Distance from `p` to the farthest corner.
    pub fn max_dist(&self, p: Point) -> f64 {
        let dx = (p.x - self.min.x).abs().max((self.max.x - p.x).abs());
        let dy = (p.y - self.min.y).abs().max((self.max.y - p.y).abs());
        dx.hypot(dy)
    }

    /// True when the circle of radius `r` about `c` meets the closed rectangle.
    pub fn meets_circle(&self, c: Point, r: f64) -> bool {
        self.min_dist(c) <= r && r <= self.max_dist(c)
    }
}

/// A direction in the plane, either with rational tangent `p/q` (direction
/// vector `(q, p)`) or as a floating-point angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Rational { p: i64, q: i64 },
    Radians(f64),
}

impl Angle {
    pub fn from_tan(p: i64, q: i64) -> Self {
        Angle::Rational { p, q }
    }

    pub fn radians(&self) -> f64 {
        match *self {
            Angle::Rational { p, q } => (p as f64).atan2(q as f64),
            Angle::Radians(t) => t,
        }
    }

    /// Unit vector `(cos t, sin t)`.
    pub fn unit(&self) -> Point {
        match *self {
            Angle::Rational { p, q } => {
                let n = (p as f64).hypot(q as f64);
                Point::new(q as f64 / n, p as f64 / n)
            }
            Angle::Radians(t) => Point::new(t.cos(), t.sin()),
        }
    }

    /// Integer direction vector `(q, p)` when the tangent is rational.
    pub fn integer_direction(&self) -> Option<(i64, i64)> {
        match *self {
            Angle::Rational { p, q } => Some((q, p)),
            Angle::Radians(_) => None,
        }
    }

    /// The angle rotated by a quarter turn; stays rational when `self` is.
    pub fn perpendicular(&self) -> Angle {
        match *self {
            Angle::Rational { p, q } => Angle::Rational { p: q, q: -p },
            Angle::Radians(t) => Angle::Radians(t + FRAC_PI_2),
        }
    }

    /// Angle reduced to `[0, pi)`.
    pub fn reduced(&self) -> f64 {
        self.radians().rem_euclid(PI)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Angle::Rational { p, q } => write!(f, "tan={p}/{q}"),
            Angle::Radians(t) => write!(f, "{t}rad"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_rect_band() {
        let r = Rect::from_corner(Point::new(1.0, -0.5), 1.0, 1.0);
        assert!(r.meets_circle(Point::ORIGIN, 1.5));
        assert!(!r.meets_circle(Point::ORIGIN, 0.5));
        assert!(!r.meets_circle(Point::ORIGIN, 3.0));
        // circle fully around the square, square inside the disk
        assert!(!Rect::from_corner(Point::new(-0.1, -0.1), 0.2, 0.2).meets_circle(Point::ORIGIN, 1.0));
    }

    #[test]
    fn rational_perpendicular_is_orthogonal() {
        let a = Angle::from_tan(1, 2);
        let b = a.perpendicular();
        assert!(a.unit().dot(b.unit()).abs() < 1e-15);
        assert!((b.radians() - a.radians() - FRAC_PI_2).abs() < 1e-12);
    }
}
