//! Planar geometry for element footprints: vectors, oriented rectangles and
//! convex polygon clipping.

use std::ops::{Add, Mul, Neg, Sub};

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

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| Vec2::new(self.x / n, self.y / n))
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
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

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn distance(self, o: Point3) -> f64 {
        let (dx, dy, dz) = (self.x - o.x, self.y - o.y, self.z - o.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn from_points(points: &[Vec2]) -> Option<Aabb> {
        let first = *points.first()?;
        Some(points.iter().skip(1).fold(
            Aabb {
                min: first,
                max: first,
            },
            |b, p| Aabb {
                min: Vec2::new(b.min.x.min(p.x), b.min.y.min(p.y)),
                max: Vec2::new(b.max.x.max(p.x), b.max.y.max(p.y)),
            },
        ))
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    pub fn inflate(self, by: f64) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x - by, self.min.y - by),
            max: Vec2::new(self.max.x + by, self.max.y + by),
        }
    }

    pub fn intersects(self, o: Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    pub fn width(self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Oriented rectangle: `length` along `dir`, `width` across it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub center: Vec2,
    /// Unit vector along the length.
    pub dir: Vec2,
    pub length: f64,
    pub width: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let u = self.dir * (0.5 * self.length);
        let v = self.dir.perp() * (0.5 * self.width);
        let c = self.center;
        [c - u - v, c + u - v, c + u + v, c - u + v]
    }

    pub fn aabb(&self) -> Aabb {
        let hx = 0.5 * (self.length * self.dir.x.abs() + self.width * self.dir.y.abs());
        let hy = 0.5 * (self.length * self.dir.y.abs() + self.width * self.dir.x.abs());
        Aabb {
            min: Vec2::new(self.center.x - hx, self.center.y - hy),
            max: Vec2::new(self.center.x + hx, self.center.y + hy),
        }
    }

    /// Half-extent of the projection onto unit axis `axis`.
    fn half_projection(&self, axis: Vec2) -> f64 {
        0.5 * (self.length * self.dir.dot(axis).abs() + self.width * self.dir.perp().dot(axis).abs())
    }

    /// Separating-axis test. Rectangles closer than `tol` count as touching.
    pub fn intersects(&self, o: &Rect, tol: f64) -> bool {
        let d = o.center - self.center;
        [self.dir, self.dir.perp(), o.dir, o.dir.perp()]
            .into_iter()
            .all(|axis| d.dot(axis).abs() <= self.half_projection(axis) + o.half_projection(axis) + tol)
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let d = p - self.center;
        let along = (d.dot(self.dir).abs() - 0.5 * self.length).max(0.0);
        let across = (d.dot(self.dir.perp()).abs() - 0.5 * self.width).max(0.0);
        along.hypot(across)
    }
}

/// Signed area of a simple polygon (positive for counter-clockwise).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        twice += poly[i].cross(poly[(i + 1) % poly.len()]);
    }
    0.5 * twice
}

/// Sutherland-Hodgman clipping of `subject` against the convex,
/// counter-clockwise polygon `clip`.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output: Vec<Vec2> = subject.to_vec();
    let mut input = Vec::with_capacity(8);
    for k in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[k];
        let b = clip[(k + 1) % clip.len()];
        let edge = b - a;
        let inside = |p: Vec2| edge.cross(p - a) >= 0.0;
        std::mem::swap(&mut input, &mut output);
        output.clear();
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (cin, pin) = (inside(cur), inside(prev));
            if cin != pin {
                let denom = edge.cross(cur - prev);
                if denom != 0.0 {
                    let t = edge.cross(a - prev) / denom;
                    output.push(prev.lerp(cur, t));
                }
            }
            if cin {
                output.push(cur);
            }
        }
    }
    output
}

/// Area of intersection of two oriented rectangles.
pub fn rect_overlap_area(a: &Rect, b: &Rect) -> f64 {
    if !a.aabb().intersects(b.aabb()) || !a.intersects(b, 0.0) {
        return 0.0;
    }
    polygon_area(&clip_convex(&a.corners(), &b.corners())).max(0.0)
}

/// Angle between two undirected lines with unit directions `a` and `b`,
/// in `[0, pi/2]`.
pub fn line_angle(a: Vec2, b: Vec2) -> f64 {
    a.dot(b).abs().min(1.0).acos()
}
