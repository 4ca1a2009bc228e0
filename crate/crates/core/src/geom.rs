//! Small fixed-size vector types and planar polygon helpers shared by the
//! shape, polytope and stability code.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotation by -90 degrees. For a ccw boundary edge this is the outward direction.
    pub fn rot_cw(self) -> Self {
        Self::new(self.y, -self.x)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Signed shoelace area; positive for ccw rings.
pub fn signed_area(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += ring[i].cross(ring[(i + 1) % n]);
    }
    0.5 * acc
}

pub fn ring_perimeter(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| ring[i].dist(ring[(i + 1) % n])).sum()
}

/// Area-weighted centroid of a ring (falls back to the vertex mean when degenerate).
pub fn ring_centroid(ring: &[Vec2]) -> Vec2 {
    let n = ring.len();
    let a = signed_area(ring);
    if a.abs() < 1e-300 {
        let s = ring.iter().fold(Vec2::default(), |acc, &p| acc + p);
        return s * (1.0 / n.max(1) as f64);
    }
    let mut c = Vec2::default();
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let w = p.cross(q);
        c += (p + q) * w;
    }
    c * (1.0 / (6.0 * a))
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// O(n^2) simplicity check: no two non-adjacent edges touch, no zero-length edges.
pub fn is_simple(ring: &[Vec2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if ring[i] == ring[(i + 1) % n] {
            return false;
        }
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    // adjacent edges folding back onto each other
    for i in 0..n {
        let p = ring[(i + n - 1) % n];
        let q = ring[i];
        let r = ring[(i + 1) % n];
        if orient(p, q, r) == 0.0 && (q - p).dot(r - q) < 0.0 {
            return false;
        }
    }
    true
}

/// Checks only the edges incident to vertex `i` against every other edge.
pub fn is_simple_near(ring: &[Vec2], i: usize) -> bool {
    let n = ring.len();
    let prev = (i + n - 1) % n;
    for &e in &[prev, i] {
        let (a, b) = (ring[e], ring[(e + 1) % n]);
        if a == b {
            return false;
        }
        for j in 0..n {
            if j == e || j == (e + 1) % n || (j + 1) % n == e {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    for k in [prev, i, (i + 1) % n] {
        let p = ring[(k + n - 1) % n];
        let q = ring[k];
        let r = ring[(k + 1) % n];
        if orient(p, q, r) == 0.0 && (q - p).dot(r - q) < 0.0 {
            return false;
        }
    }
    true
}

/// Even-odd point-in-ring test.
pub fn point_in_ring(ring: &[Vec2], p: Vec2) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Convexity of a ccw ring, allowing collinear vertices up to `tol`.
pub fn is_convex_ccw(ring: &[Vec2], tol: f64) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| orient(ring[i], ring[(i + 1) % n], ring[(i + 2) % n]) >= -tol)
}

/// Sutherland-Hodgman clip of an arbitrary ring against one halfplane `n.x <= b`.
pub fn clip_ring_halfplane(ring: &[Vec2], normal: Vec2, offset: f64) -> Vec<Vec2> {
    let n = ring.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let fp = normal.dot(p) - offset;
        let fq = normal.dot(q) - offset;
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Clips an arbitrary ring (concave allowed) by a convex ccw window.
/// The signed area of the result equals the signed area of `ring ∩ window`.
pub fn clip_ring_convex(ring: &[Vec2], window: &[Vec2]) -> Vec<Vec2> {
    let m = window.len();
    let mut cur = ring.to_vec();
    for i in 0..m {
        if cur.is_empty() {
            break;
        }
        let a = window[i];
        let b = window[(i + 1) % m];
        let normal = (b - a).rot_cw();
        cur = clip_ring_halfplane(&cur, normal, normal.dot(a));
    }
    cur
}

/// Line intersection of `n1.x = b1` and `n2.x = b2`.
pub fn intersect_lines(n1: Vec2, b1: f64, n2: Vec2, b2: f64) -> Option<Vec2> {
    let det = n1.cross(n2);
    if det == 0.0 {
        return None;
    }
    Some(Vec2::new((b1 * n2.y - b2 * n1.y) / det, (n1.x * b2 - n2.x * b1) / det))
}
