use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        dist(p, self.center) <= self.radius
    }

    /// True when the closed segment `a`-`b` passes through the disk interior.
    pub fn blocks(&self, a: Point, b: Point) -> bool {
        segment_point_distance(a, b, self.center) < self.radius
    }
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Scales `v` down so its length is at most `bound`.
pub fn clip_norm(v: Point, bound: f64) -> Point {
    let n = norm(v);
    if n > bound {
        [v[0] * bound / n, v[1] * bound / n]
    } else {
        v
    }
}

/// A step of length at most `bound` from `from` toward `to`.
pub fn step_toward(from: Point, to: Point, bound: f64) -> Point {
    clip_norm(sub(to, from), bound)
}

pub fn segment_point_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(a, p);
    }
    let ap = sub(p, a);
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist([a[0] + t * ab[0], a[1] + t * ab[1]], p)
}

/// Axis-aligned workspace rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn clamp(&self, p: Point) -> Point {
        [p[0].clamp(self.min[0], self.max[0]), p[1].clamp(self.min[1], self.max[1])]
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..2).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }
}
