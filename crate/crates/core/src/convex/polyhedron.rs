use crate::geom::Vec3;

use super::GeometryError;

/// One face of a convex polyhedron: outward unit normal, offset and ccw vertex loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: Vec3,
    pub offset: f64,
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolyhedron {
    vertices: Vec<Vec3>,
    facets: Vec<Facet>,
    volume: f64,
}

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    n: Vec3,
    c: f64,
    alive: bool,
}

fn make_tri(pts: &[Vec3], v: [usize; 3]) -> Tri {
    let n = (pts[v[1]] - pts[v[0]]).cross(pts[v[2]] - pts[v[0]]).normalized();
    Tri { v, n, c: n.dot(pts[v[0]]), alive: true }
}

/// Incremental 3D convex hull; returns outward-oriented triangles.
pub(crate) fn hull_triangles(pts: &[Vec3], tol: f64) -> Result<Vec<[usize; 3]>, GeometryError> {
    let degenerate = |m: &str| GeometryError::NumericalDegeneracy(m.to_string());
    if pts.len() < 4 {
        return Err(degenerate("fewer than 4 points"));
    }
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let eps = tol * scale;
    let i0 = (0..pts.len()).min_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x)).unwrap();
    let i1 = (0..pts.len())
        .max_by(|&a, &b| (pts[a] - pts[i0]).norm().total_cmp(&(pts[b] - pts[i0]).norm()))
        .unwrap();
    let dir = pts[i1] - pts[i0];
    if dir.norm() <= eps {
        return Err(degenerate("all points coincide"));
    }
    let line_dist = |p: Vec3| (p - pts[i0]).cross(dir).norm() / dir.norm();
    let i2 = (0..pts.len()).max_by(|&a, &b| line_dist(pts[a]).total_cmp(&line_dist(pts[b]))).unwrap();
    if line_dist(pts[i2]) <= eps {
        return Err(degenerate("points are collinear"));
    }
    let pn = dir.cross(pts[i2] - pts[i0]).normalized();
    let plane_dist = |p: Vec3| (p - pts[i0]).dot(pn);
    let i3 = (0..pts.len())
        .max_by(|&a, &b| plane_dist(pts[a]).abs().total_cmp(&plane_dist(pts[b]).abs()))
        .unwrap();
    if plane_dist(pts[i3]).abs() <= eps {
        return Err(degenerate("points are coplanar"));
    }
    let inner = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) * 0.25;
    let mut tris: Vec<Tri> = Vec::new();
    for f in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut t = make_tri(pts, f);
        if t.n.dot(inner) > t.c {
            t = make_tri(pts, [f[0], f[2], f[1]]);
        }
        tris.push(t);
    }
    let mut edge_set: std::collections::HashSet<(usize, usize)> = Default::default();
    for (pi, &p) in pts.iter().enumerate() {
        if pi == i0 || pi == i1 || pi == i2 || pi == i3 {
            continue;
        }
        let visible: Vec<usize> = (0..tris.len())
            .filter(|&k| tris[k].alive && tris[k].n.dot(p) - tris[k].c > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        edge_set.clear();
        for &k in &visible {
            let v = tris[k].v;
            for e in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                edge_set.insert(e);
            }
        }
        let horizon: Vec<(usize, usize)> =
            edge_set.iter().copied().filter(|&(a, b)| !edge_set.contains(&(b, a))).collect();
        for &k in &visible {
            tris[k].alive = false;
        }
        for (a, b) in horizon {
            tris.push(make_tri(pts, [a, b, pi]));
        }
        if tris.len() > 64 && tris.iter().filter(|t| t.alive).count() * 2 < tris.len() {
            tris.retain(|t| t.alive);
        }
    }
    Ok(tris.into_iter().filter(|t| t.alive).map(|t| t.v).collect())
}

fn hull_2d_indices(ids: &[usize], pts2: &[(f64, f64)], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| pts2[a].0.total_cmp(&pts2[b].0).then(pts2[a].1.total_cmp(&pts2[b].1)));
    let turn = |o: usize, a: usize, b: usize| {
        (pts2[a].0 - pts2[o].0) * (pts2[b].1 - pts2[o].1)
            - (pts2[a].1 - pts2[o].1) * (pts2[b].0 - pts2[o].0)
    };
    let chain = |it: &mut dyn Iterator<Item = usize>| {
        let mut h: Vec<usize> = Vec::new();
        for p in it {
            while h.len() >= 2 && turn(h[h.len() - 2], h[h.len() - 1], p) <= tol {
                h.pop();
            }
            h.push(p);
        }
        h.pop();
        h
    };
    let mut lower = chain(&mut order.iter().copied());
    let upper = chain(&mut order.iter().rev().copied());
    lower.extend(upper);
    lower.into_iter().map(|k| ids[k]).collect()
}

impl ConvexPolyhedron {
    pub fn empty() -> Self {
        Self { vertices: Vec::new(), facets: Vec::new(), volume: 0.0 }
    }

    /// Convex hull of a point cloud with coplanar triangles merged into polygonal facets.
    pub fn from_points(points: &[Vec3], tol: f64) -> Result<Self, GeometryError> {
        let mut pts: Vec<Vec3> = Vec::with_capacity(points.len());
        let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        for &p in points {
            if !pts.iter().any(|q: &Vec3| (*q - p).norm() <= tol * (1.0 + scale)) {
                pts.push(p);
            }
        }
        let tris = hull_triangles(&pts, tol)?;
        // group triangles by (nearly) identical supporting plane via union-find on adjacency
        let planes: Vec<Tri> = tris.iter().map(|&v| make_tri(&pts, v)).collect();
        let mut parent: Vec<usize> = (0..tris.len()).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            let mut i = i;
            while p[i] != r {
                let nx = p[i];
                p[i] = r;
                i = nx;
            }
            r
        }
        let mut edge_owner: std::collections::HashMap<(usize, usize), usize> = Default::default();
        for (k, t) in tris.iter().enumerate() {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edge_owner.insert(e, k);
            }
        }
        let plane_tol = 1e-9_f64.max(tol);
        for (k, t) in tris.iter().enumerate() {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if let Some(&j) = edge_owner.get(&(b, a)) {
                    let same = (planes[k].n - planes[j].n).norm() <= plane_tol
                        && (planes[k].c - planes[j].c).abs() <= plane_tol * (1.0 + scale);
                    if same {
                        let (ra, rb) = (find(&mut parent, k), find(&mut parent, j));
                        if ra != rb {
                            parent[ra] = rb;
                        }
                    }
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..tris.len() {
            let r = find(&mut parent, k);
            groups.entry(r).or_default().push(k);
        }
        let mut raw_facets: Vec<(Vec3, Vec<usize>)> = Vec::new();
        for (_, members) in groups {
            let mut nsum = Vec3::new(0.0, 0.0, 0.0);
            let mut ids: Vec<usize> = Vec::new();
            for &k in &members {
                let v = tris[k];
                let a = (pts[v[1]] - pts[v[0]]).cross(pts[v[2]] - pts[v[0]]);
                nsum += a;
                ids.extend_from_slice(&v);
            }
            ids.sort_unstable();
            ids.dedup();
            let n = nsum.normalized();
            let u = if n.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
            let e1 = n.cross(u).normalized();
            let e2 = n.cross(e1);
            let pts2: Vec<(f64, f64)> = ids.iter().map(|&i| (pts[i].dot(e1), pts[i].dot(e2))).collect();
            // e1 x e2 = n, so the 2D ccw order matches ccw seen from outside
            let loop_ids = hull_2d_indices(&ids, &pts2, tol * (1.0 + scale) * (1.0 + scale));
            if loop_ids.len() >= 3 {
                raw_facets.push((n, loop_ids));
            }
        }
        // reindex to the vertices actually used
        let mut map = vec![usize::MAX; pts.len()];
        let mut vertices = Vec::new();
        let mut facets = Vec::with_capacity(raw_facets.len());
        for (n, ids) in raw_facets {
            let local: Vec<usize> = ids
                .iter()
                .map(|&i| {
                    if map[i] == usize::MAX {
                        map[i] = vertices.len();
                        vertices.push(pts[i]);
                    }
                    map[i]
                })
                .collect();
            let offset = local.iter().map(|&i| n.dot(vertices[i])).sum::<f64>() / local.len() as f64;
            facets.push(Facet { normal: n, offset, vertices: local });
        }
        let mut out = Self { vertices, facets, volume: 0.0 };
        out.volume = out.facets.iter().map(|f| f.offset * out.facet_area(f)).sum::<f64>() / 3.0;
        if !(out.volume > 0.0) {
            return Err(GeometryError::NumericalDegeneracy("zero-volume hull".into()));
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn facet_area(&self, f: &Facet) -> f64 {
        let v = &f.vertices;
        let mut s = Vec3::new(0.0, 0.0, 0.0);
        for k in 1..v.len().saturating_sub(1) {
            let a = self.vertices[v[k]] - self.vertices[v[0]];
            let b = self.vertices[v[k + 1]] - self.vertices[v[0]];
            s += a.cross(b);
        }
        0.5 * s.dot(f.normal)
    }

    pub fn surface_area(&self) -> f64 {
        self.facets.iter().map(|f| self.facet_area(f)).sum()
    }

    pub fn map_points(&self, f: impl Fn(Vec3) -> Vec3, tol: f64) -> Result<Self, GeometryError> {
        let pts: Vec<Vec3> = self.vertices.iter().map(|&p| f(p)).collect();
        Self::from_points(&pts, tol)
    }

    /// Clips by `normal . x <= offset`; new points on the clip plane go through `pin`.
    pub fn clip(
        &self,
        normal: Vec3,
        offset: f64,
        tol: f64,
        pin: impl Fn(Vec3) -> Vec3,
    ) -> Result<Self, GeometryError> {
        let f: Vec<f64> = self.vertices.iter().map(|&v| normal.dot(v) - offset).collect();
        if f.iter().all(|&x| x <= 0.0) {
            return Ok(self.clone());
        }
        let mut pts: Vec<Vec3> = Vec::new();
        for (i, &v) in self.vertices.iter().enumerate() {
            if f[i] < 0.0 {
                pts.push(v);
            } else if f[i] == 0.0 {
                pts.push(pin(v));
            }
        }
        for fct in &self.facets {
            let m = fct.vertices.len();
            for k in 0..m {
                let (a, b) = (fct.vertices[k], fct.vertices[(k + 1) % m]);
                if a < b && ((f[a] < 0.0 && f[b] > 0.0) || (f[a] > 0.0 && f[b] < 0.0)) {
                    let t = f[a] / (f[a] - f[b]);
                    let p = self.vertices[a] + (self.vertices[b] - self.vertices[a]) * t;
                    pts.push(pin(p));
                }
            }
        }
        if pts.len() < 4 {
            return Ok(Self::empty());
        }
        match Self::from_points(&pts, tol) {
            Ok(p) => Ok(p),
            Err(GeometryError::NumericalDegeneracy(_)) => Ok(Self::empty()),
            Err(e) => Err(e),
        }
    }

    pub fn consistency_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for f in &self.facets {
            for v in &self.vertices {
                worst = worst.max(f.normal.dot(*v) - f.offset);
            }
            for &i in &f.vertices {
                worst = worst.max((f.normal.dot(self.vertices[i]) - f.offset).abs());
            }
        }
        worst
    }
}
