//! Planar vectors and the simple boundary shapes used by lattice domains.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Vec2::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// (a, b)⊥ = (b, −a). With this convention u = ∇⊥Ψ.
    pub fn perp(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Vec2::new(z.re, z.im)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl From<(f64, f64)> for Vec2 {
    fn from((x, y): (f64, f64)) -> Self {
        Vec2::new(x, y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2::new(x, y)
    }
}

/// Bounded simply-connected shapes with closed-form boundary geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Disk { center: Vec2, radius: f64 },
    Rectangle { min: Vec2, max: Vec2 },
}

impl Shape {
    pub fn unit_disk() -> Self {
        Shape::Disk {
            center: Vec2::ZERO,
            radius: 1.0,
        }
    }

    /// The square (−a, a)².
    pub fn square(half_side: f64) -> Self {
        Shape::Rectangle {
            min: Vec2::new(-half_side, -half_side),
            max: Vec2::new(half_side, half_side),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Shape::Disk { center, radius } => center.is_finite() && radius.is_finite() && radius > 0.0,
            Shape::Rectangle { min, max } => {
                min.is_finite() && max.is_finite() && max.x > min.x && max.y > min.y
            }
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        match *self {
            Shape::Disk { center, radius } => radius - (p - center).norm(),
            Shape::Rectangle { min, max } => {
                let dx = (p.x - min.x).min(max.x - p.x);
                let dy = (p.y - min.y).min(max.y - p.y);
                if dx >= 0.0 && dy >= 0.0 {
                    dx.min(dy)
                } else {
                    // outside: negative euclidean distance to the rectangle
                    let ex = (min.x - p.x).max(p.x - max.x).max(0.0);
                    let ey = (min.y - p.y).max(p.y - max.y).max(0.0);
                    -ex.hypot(ey)
                }
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.boundary_distance(p) > 0.0
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::Rectangle { min, max } => (max - min).norm(),
        }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match *self {
            Shape::Disk { center, radius } => (
                center - Vec2::new(radius, radius),
                center + Vec2::new(radius, radius),
            ),
            Shape::Rectangle { min, max } => (min, max),
        }
    }

    /// For `a` inside and `b` outside, the fraction t ∈ (0, 1] with a + t(b − a)
    /// on the boundary.
    pub fn crossing(&self, a: Vec2, b: Vec2) -> f64 {
        let d = b - a;
        let t = match *self {
            Shape::Disk { center, radius } => {
                let p = a - center;
                let qa = d.norm_sq();
                let qb = 2.0 * p.dot(d);
                let qc = p.norm_sq() - radius * radius;
                // qc < 0, so the positive root is well defined
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                // stable form of (−qb + √disc)/(2qa)
                if qb >= 0.0 {
                    -2.0 * qc / (qb + disc.sqrt())
                } else {
                    (-qb + disc.sqrt()) / (2.0 * qa)
                }
            }
            Shape::Rectangle { min, max } => {
                let mut t: f64 = 1.0;
                if d.x > 0.0 {
                    t = t.min((max.x - a.x) / d.x);
                } else if d.x < 0.0 {
                    t = t.min((min.x - a.x) / d.x);
                }
                if d.y > 0.0 {
                    t = t.min((max.y - a.y) / d.y);
                } else if d.y < 0.0 {
                    t = t.min((min.y - a.y) / d.y);
                }
                t
            }
        };
        t.clamp(0.0, 1.0)
    }
}
