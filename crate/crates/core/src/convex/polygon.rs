use crate::geom::{intersect_lines, signed_area, Vec2};

use super::{GeometryError, Tolerances};

/// A convex polygon with matching V- and H-representations: edge `i` runs from vertex `i`
/// to vertex `i + 1` (ccw) and lies on the line `normals[i] . x = offsets[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
    normals: Vec<Vec2>,
    offsets: Vec<f64>,
    area: f64,
}

impl ConvexPolygon {
    pub fn empty() -> Self {
        Self { vertices: Vec::new(), normals: Vec::new(), offsets: Vec::new(), area: 0.0 }
    }

    fn from_parts(vertices: Vec<Vec2>, normals: Vec<Vec2>, offsets: Vec<f64>) -> Self {
        let area = signed_area(&vertices);
        if vertices.len() < 3 || !(area > 0.0) {
            return Self::empty();
        }
        Self { vertices, normals, offsets, area }
    }

    /// Convex hull of a point set (Andrew's monotone chain), collinear points dropped.
    pub fn hull(points: &[Vec2], tol: f64) -> Self {
        let ring = convex_hull_2d(points, tol);
        Self::from_ccw_ring(ring, tol)
    }

    /// Builds the H-representation from a strictly convex ccw ring.
    pub fn from_ccw_ring(ring: Vec<Vec2>, tol: f64) -> Self {
        let ring = drop_degenerate(ring, tol);
        let n = ring.len();
        if n < 3 {
            return Self::empty();
        }
        let mut normals = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for i in 0..n {
            let e = ring[(i + 1) % n] - ring[i];
            let nrm = e.rot_cw() * (1.0 / e.norm());
            normals.push(nrm);
            offsets.push(nrm.dot(ring[i]));
        }
        Self::from_parts(ring, normals, offsets)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        crate::geom::ring_perimeter(&self.vertices)
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2, offset_map: impl Fn(Vec2, f64) -> f64) -> Self {
        let vertices: Vec<Vec2> = self.vertices.iter().map(|&v| f(v)).collect();
        let offsets = self
            .normals
            .iter()
            .zip(&self.offsets)
            .map(|(&n, &b)| offset_map(n, b))
            .collect();
        let area = signed_area(&vertices);
        Self { vertices, normals: self.normals.clone(), offsets, area }
    }

    /// Clips by `normal . x <= offset`, keeping track of which input edge every output edge
    /// came from. Points created on the clip line get `pin` applied (used to make the clip
    /// coordinate exact).
    pub fn clip(&self, normal: Vec2, offset: f64, tol: f64, pin: impl Fn(Vec2) -> Vec2) -> Self {
        const NEW: usize = usize::MAX;
        let n = self.vertices.len();
        if n == 0 {
            return Self::empty();
        }
        let f: Vec<f64> = self.vertices.iter().map(|&v| normal.dot(v) - offset).collect();
        let mut out: Vec<(Vec2, usize)> = Vec::with_capacity(n + 2);
        for i in 0..n {
            let j = (i + 1) % n;
            let (p, q) = (self.vertices[i], self.vertices[j]);
            if f[i] <= 0.0 {
                let label = if f[i] < 0.0 || f[j] <= 0.0 { i } else { NEW };
                out.push((if f[i] == 0.0 { pin(p) } else { p }, label));
                if f[i] < 0.0 && f[j] > 0.0 {
                    let t = f[i] / (f[i] - f[j]);
                    out.push((pin(p + (q - p) * t), NEW));
                }
            } else if f[j] < 0.0 {
                let t = f[i] / (f[i] - f[j]);
                out.push((pin(p + (q - p) * t), i));
            }
        }
        // merge coincident consecutive points; the survivor takes the outgoing label
        let scale = 1.0 + self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut merged: Vec<(Vec2, usize)> = Vec::with_capacity(out.len());
        for (p, l) in out {
            if let Some(last) = merged.last_mut() {
                if last.0.dist(p) <= tol * scale {
                    last.1 = l;
                    continue;
                }
            }
            merged.push((p, l));
        }
        while merged.len() > 1 && merged[0].0.dist(merged[merged.len() - 1].0) <= tol * scale {
            let (_, l) = merged.pop().unwrap();
            let _ = l;
        }
        if merged.len() < 3 {
            return Self::empty();
        }
        let vertices: Vec<Vec2> = merged.iter().map(|m| m.0).collect();
        let (normals, offsets) = merged
            .iter()
            .map(|&(_, l)| {
                if l == NEW {
                    (normal, offset)
                } else {
                    (self.normals[l], self.offsets[l])
                }
            })
            .unzip();
        Self::from_parts(vertices, normals, offsets)
    }

    /// Max of `x . nu` over the vertices and the indices attaining it (within `tol`).
    pub fn support(&self, nu: Vec2, tol: f64) -> (f64, Vec<usize>) {
        let vals: Vec<f64> = self.vertices.iter().map(|v| v.dot(nu)).collect();
        let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let idx = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| best - v <= tol)
            .map(|(i, _)| i)
            .collect();
        (best, idx)
    }

    /// Max violation of the V/H consistency: every vertex inside every halfspace and every
    /// halfspace touched by its two edge endpoints.
    pub fn consistency_residual(&self) -> f64 {
        let n = self.vertices.len();
        let mut worst = 0.0f64;
        for (k, (&nrm, &b)) in self.normals.iter().zip(&self.offsets).enumerate() {
            for v in &self.vertices {
                worst = worst.max(nrm.dot(*v) - b);
            }
            worst = worst.max((nrm.dot(self.vertices[k]) - b).abs());
            worst = worst.max((nrm.dot(self.vertices[(k + 1) % n]) - b).abs());
        }
        worst
    }
}

fn drop_degenerate(ring: Vec<Vec2>, tol: f64) -> Vec<Vec2> {
    let mut ring = ring;
    let scale = 1.0 + ring.iter().map(|v| v.norm()).fold(0.0, f64::max);
    loop {
        let n = ring.len();
        if n < 3 {
            return ring;
        }
        let mut drop = None;
        for i in 0..n {
            let p = ring[(i + n - 1) % n];
            let q = ring[i];
            let r = ring[(i + 1) % n];
            if q.dist(r) <= tol * scale || (q - p).cross(r - q).abs() <= tol * scale * scale {
                drop = Some(i);
                break;
            }
        }
        match drop {
            Some(i) => {
                ring.remove(i);
            }
            None => return ring,
        }
    }
}

pub(crate) fn convex_hull_2d(points: &[Vec2], tol: f64) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.dist(*b) <= tol);
    if pts.len() < 3 {
        return pts;
    }
    let scale = 1.0 + pts.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= tol * scale * scale
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= tol * scale * scale
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Sorted-angle incremental intersection of halfplanes `normal . x <= offset` with unit
/// normals. The origin must be strictly feasible and the normals must not leave an angular
/// gap of pi or more (otherwise the intersection is unbounded).
pub fn intersect_halfplanes(
    normals: &[Vec2],
    offsets: &[f64],
    tol: &Tolerances,
) -> Result<ConvexPolygon, GeometryError> {
    let mut lines: Vec<(f64, Vec2, f64)> = normals
        .iter()
        .zip(offsets)
        .map(|(&n, &b)| (n.y.atan2(n.x), n, b))
        .collect();
    if lines.len() < 3 {
        return Err(GeometryError::Unbounded);
    }
    if lines.iter().any(|l| !(l.2 > 0.0) || !l.2.is_finite()) {
        return Err(GeometryError::Unbounded);
    }
    // stable: earlier entries win ties, so exact directions listed first are preferred
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut uniq: Vec<(f64, Vec2, f64)> = Vec::with_capacity(lines.len());
    for l in lines {
        match uniq.last_mut() {
            Some(last) if (l.0 - last.0).abs() <= 1e-12 => {
                if l.2 < last.2 {
                    *last = l;
                }
            }
            _ => uniq.push(l),
        }
    }
    if uniq.len() >= 2 {
        let first = uniq[0].0;
        let last = uniq[uniq.len() - 1].0;
        if (last - first - std::f64::consts::TAU).abs() <= 1e-12 {
            let l = uniq.pop().unwrap();
            if l.2 < uniq[0].2 {
                uniq[0] = l;
            }
        }
    }
    let m = uniq.len();
    for k in 0..m {
        let gap = if k + 1 < m {
            uniq[k + 1].0 - uniq[k].0
        } else {
            uniq[0].0 + std::f64::consts::TAU - uniq[k].0
        };
        if gap >= std::f64::consts::PI - 1e-12 {
            return Err(GeometryError::Unbounded);
        }
    }
    let scale = uniq.iter().map(|l| l.2).fold(0.0, f64::max);
    let eps = tol.constraint * scale * 1e-3;
    let meet = |a: &(f64, Vec2, f64), b: &(f64, Vec2, f64)| -> Result<Vec2, GeometryError> {
        intersect_lines(a.1, a.2, b.1, b.2)
            .ok_or_else(|| GeometryError::NumericalDegeneracy("parallel consecutive lines".into()))
    };
    let outside = |l: &(f64, Vec2, f64), p: Vec2| l.1.dot(p) > l.2 + eps;

    let mut dq: std::collections::VecDeque<(f64, Vec2, f64)> = Default::default();
    for l in uniq {
        while dq.len() >= 2 && outside(&l, meet(&dq[dq.len() - 2], &dq[dq.len() - 1])?) {
            dq.pop_back();
        }
        while dq.len() >= 2 && outside(&l, meet(&dq[0], &dq[1])?) {
            dq.pop_front();
        }
        dq.push_back(l);
    }
    while dq.len() >= 3 && outside(&dq[0], meet(&dq[dq.len() - 2], &dq[dq.len() - 1])?) {
        dq.pop_back();
    }
    while dq.len() >= 3 && outside(&dq[dq.len() - 1], meet(&dq[0], &dq[1])?) {
        dq.pop_front();
    }
    let mut active: Vec<(f64, Vec2, f64)> = dq.into_iter().collect();

    // drop lines whose edge collapsed to a point (concurrent redundant lines), recomputing
    // the shared vertex from the remaining neighbours
    let dedup = tol.dedup * (1.0 + scale);
    loop {
        let m = active.len();
        if m < 3 {
            return Err(GeometryError::NumericalDegeneracy("fewer than 3 active lines".into()));
        }
        let verts: Vec<Vec2> = (0..m)
            .map(|k| meet(&active[(k + m - 1) % m], &active[k]))
            .collect::<Result<_, _>>()?;
        let keep: Vec<bool> = (0..m).map(|k| verts[k].dist(verts[(k + 1) % m]) > dedup).collect();
        if keep.iter().all(|&k| k) {
            let normals = active.iter().map(|l| l.1).collect();
            let offsets = active.iter().map(|l| l.2).collect();
            let poly = ConvexPolygon::from_parts(verts, normals, offsets);
            if poly.is_empty() {
                return Err(GeometryError::NumericalDegeneracy("zero-area intersection".into()));
            }
            return Ok(poly);
        }
        active = active.into_iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn square_from_four_lines() {
        let normals = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)];
        let p = intersect_halfplanes(&normals, &[1.0; 4], &tol()).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert_eq!(p.area(), 4.0);
        assert!(p.consistency_residual() <= 1e-15);
    }

    #[test]
    fn redundant_concurrent_lines_are_dropped() {
        // every line of the l1 ball's dual passes through a corner of the square
        let n = 360;
        let (normals, offsets): (Vec<Vec2>, Vec<f64>) = (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                let nu = Vec2::new(t.cos(), t.sin());
                (nu, nu.x.abs() + nu.y.abs())
            })
            .unzip();
        let p = intersect_halfplanes(&normals, &offsets, &tol()).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert!((p.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_detected() {
        let normals = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0)];
        assert!(matches!(
            intersect_halfplanes(&normals, &[1.0; 3], &tol()),
            Err(GeometryError::Unbounded)
        ));
    }

    #[test]
    fn clip_tracks_labels() {
        let normals = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)];
        let sq = intersect_halfplanes(&normals, &[1.0; 4], &tol()).unwrap();
        let c = sq.clip(Vec2::new(0.0, -1.0), 0.5, 1e-12, |p| Vec2::new(p.x, -0.5));
        assert_eq!(c.area(), 3.0);
        assert!(c.consistency_residual() <= 1e-15);
        // clipping along an existing edge changes nothing
        let same = sq.clip(Vec2::new(0.0, -1.0), 1.0, 1e-12, |p| p);
        assert_eq!(same.area(), 4.0);
        assert_eq!(same.vertices().len(), 4);
        // clip that removes everything
        let gone = sq.clip(Vec2::new(0.0, -1.0), -1.0, 1e-12, |p| p);
        assert!(gone.is_empty());
    }

    #[test]
    fn hull_drops_interior_and_collinear() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(1.0, 1.0),
        ];
        let h = ConvexPolygon::hull(&pts, 1e-12);
        assert_eq!(h.vertices().len(), 4);
        assert_eq!(h.area(), 4.0);
    }
}
