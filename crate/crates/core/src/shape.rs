//! Candidate shapes in the closed upper half-space and the substrate energy evaluated on them.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::anisotropy::Anisotropy;
use crate::convex::{ConvexPolyhedron, ConvexPolytope, GeometryError, Tolerances};
use crate::geom::{is_convex_ccw, is_simple, point_in_ring, ring_perimeter, signed_area, Vec2, Vec3};

/// Coordinates this close to the substrate are snapped onto it.
pub const SNAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("ring needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex below the substrate (x_d = {0})")]
    BelowSubstrate(f64),
    #[error("boundary ring is not simple")]
    NotSimple,
    #[error("shape has zero volume")]
    ZeroVolume,
    #[error("hole is not inside its outer boundary")]
    HoleOutside,
    #[error("dimension mismatch: shape is {shape}D, density is {density}D")]
    DimensionMismatch { shape: usize, density: usize },
    #[error("pixel shape is not edge-connected")]
    Disconnected,
    #[error("invalid pixel shape: {0}")]
    InvalidPixels(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A simple polygon with a ccw outer ring and cw holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    outer: Vec<Vec2>,
    holes: Vec<Vec<Vec2>>,
}

impl Polygon {
    pub fn outer(&self) -> &[Vec2] {
        &self.outer
    }

    pub fn holes(&self) -> &[Vec<Vec2>] {
        &self.holes
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.outer) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }

    fn rings(&self) -> impl Iterator<Item = &Vec<Vec2>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Planar(Vec<Polygon>),
    Solid(ConvexPolyhedron),
}

/// A bounded set in `{x_d >= 0}`: polygons with holes in 2D, a convex polytope in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateShape {
    body: Body,
    volume: f64,
}

fn snap2(p: Vec2) -> Vec2 {
    if p.y.abs() <= SNAP {
        Vec2::new(p.x, 0.0)
    } else {
        p
    }
}

fn check_ring(ring: &[Vec2]) -> Result<Vec<Vec2>, ShapeError> {
    if ring.len() < 3 {
        return Err(ShapeError::TooFewVertices(ring.len()));
    }
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(ShapeError::NonFinite);
    }
    if let Some(p) = ring.iter().find(|p| p.y < -SNAP) {
        return Err(ShapeError::BelowSubstrate(p.y));
    }
    let ring: Vec<Vec2> = ring.iter().map(|&p| snap2(p)).collect();
    if !is_simple(&ring) {
        return Err(ShapeError::NotSimple);
    }
    Ok(ring)
}

/// A point strictly inside `ring` (cw or ccw) next to its first edge.
fn interior_probe(ring: &[Vec2]) -> Vec2 {
    let ccw = signed_area(ring) > 0.0;
    let (a, b) = (ring[0], ring[1]);
    let e = b - a;
    let inward = if ccw { -e.rot_cw() } else { e.rot_cw() };
    let mid = (a + b) * 0.5;
    mid + inward * (1e-6 / e.norm().max(1e-300) * e.norm().min(1.0))
}

impl SubstrateShape {
    /// A single simple polygon without holes; orientation is normalized.
    pub fn polygon(outer: Vec<Vec2>) -> Result<Self, ShapeError> {
        Self::from_polygons(vec![(outer, Vec::new())])
    }

    /// Polygons given as (outer, holes); orientations are normalized.
    pub fn from_polygons(parts: Vec<(Vec<Vec2>, Vec<Vec<Vec2>>)>) -> Result<Self, ShapeError> {
        let mut polys = Vec::with_capacity(parts.len());
        for (outer, holes) in parts {
            let mut outer = check_ring(&outer)?;
            if signed_area(&outer) < 0.0 {
                outer.reverse();
            }
            let mut hs = Vec::with_capacity(holes.len());
            for h in holes {
                let mut h = check_ring(&h)?;
                if signed_area(&h) > 0.0 {
                    h.reverse();
                }
                if !point_in_ring(&outer, interior_probe(&h)) {
                    return Err(ShapeError::HoleOutside);
                }
                hs.push(h);
            }
            polys.push(Polygon { outer, holes: hs });
        }
        Self::from_checked(polys)
    }

    fn from_checked(polys: Vec<Polygon>) -> Result<Self, ShapeError> {
        let volume: f64 = polys.iter().map(|p| p.area()).sum();
        if polys.is_empty() || !(volume > 0.0) {
            return Err(ShapeError::ZeroVolume);
        }
        Ok(Self { body: Body::Planar(polys), volume })
    }

    /// Rings with positive signed area become outer boundaries, negative ones holes of the
    /// outer ring containing them.
    pub fn from_rings(rings: Vec<Vec<Vec2>>) -> Result<Self, ShapeError> {
        let mut outers: Vec<(Vec<Vec2>, Vec<Vec<Vec2>>)> = Vec::new();
        let mut holes = Vec::new();
        for r in rings {
            if signed_area(&r) > 0.0 {
                outers.push((r, Vec::new()));
            } else {
                holes.push(r);
            }
        }
        for h in holes {
            let probe = interior_probe(&h);
            let owner = outers
                .iter_mut()
                .filter(|(o, _)| point_in_ring(o, probe))
                .min_by(|a, b| signed_area(&a.0).total_cmp(&signed_area(&b.0)))
                .ok_or(ShapeError::HoleOutside)?;
            owner.1.push(h);
        }
        Self::from_polygons(outers)
    }

    /// A convex polytope from the convex-geometry module (Wulff or Winterbottom shapes).
    pub fn from_polytope(k: &ConvexPolytope) -> Result<Self, ShapeError> {
        if k.is_empty() {
            return Err(ShapeError::ZeroVolume);
        }
        match k {
            ConvexPolytope::Polygon(p) => Self::polygon(p.vertices().to_vec()),
            ConvexPolytope::Polyhedron(p) => Self::solid(p),
        }
    }

    pub fn solid(p: &ConvexPolyhedron) -> Result<Self, ShapeError> {
        if let Some(v) = p.vertices().iter().find(|v| v.z < -SNAP) {
            return Err(ShapeError::BelowSubstrate(v.z));
        }
        let snapped = p.map_points(
            |v| if v.z.abs() <= SNAP { Vec3::new(v.x, v.y, 0.0) } else { v },
            Tolerances::default().dedup,
        )?;
        let volume = snapped.volume();
        if !(volume > 0.0) {
            return Err(ShapeError::ZeroVolume);
        }
        Ok(Self { body: Body::Solid(snapped), volume })
    }

    pub fn dim(&self) -> usize {
        match self.body {
            Body::Planar(_) => 2,
            Body::Solid(_) => 3,
        }
    }

    /// Area in 2D, volume in 3D.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn polygons(&self) -> Option<&[Polygon]> {
        match &self.body {
            Body::Planar(p) => Some(p),
            Body::Solid(_) => None,
        }
    }

    pub fn polyhedron(&self) -> Option<&ConvexPolyhedron> {
        match &self.body {
            Body::Solid(p) => Some(p),
            Body::Planar(_) => None,
        }
    }

    /// The outer ring when the shape is a single planar polygon.
    pub fn outer(&self) -> Option<&[Vec2]> {
        match &self.body {
            Body::Planar(p) if p.len() == 1 => Some(p[0].outer()),
            _ => None,
        }
    }

    /// Single convex polygon without holes.
    pub fn is_convex(&self) -> bool {
        match &self.body {
            Body::Planar(p) => p.len() == 1 && p[0].holes.is_empty() && is_convex_ccw(&p[0].outer, 1e-12),
            Body::Solid(_) => true,
        }
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match &self.body {
            Body::Planar(ps) => ps
                .iter()
                .flat_map(|p| p.rings().flatten().map(|v| vec![v.x, v.y]).collect::<Vec<_>>())
                .collect(),
            Body::Solid(p) => p.vertices().iter().map(|v| v.to_array().to_vec()).collect(),
        }
    }

    /// Axis-aligned bounding box as (min corner, max corner).
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let vs = self.vertices();
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for v in &vs {
            for k in 0..d {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    /// Calls `f(normal, measure, on_substrate)` for every boundary facet. In 2D facets are
    /// polygon edges; an edge is on the substrate iff both endpoints have `x_d = 0`.
    pub fn for_each_facet(&self, mut f: impl FnMut(&[f64], f64, bool)) {
        match &self.body {
            Body::Planar(ps) => {
                for ring in ps.iter().flat_map(|p| p.rings()) {
                    let n = ring.len();
                    for i in 0..n {
                        let (a, b) = (ring[i], ring[(i + 1) % n]);
                        let (nu, len) = edge_normal(a, b);
                        f(&nu, len, a.y == 0.0 && b.y == 0.0);
                    }
                }
            }
            Body::Solid(p) => {
                for fc in p.facets() {
                    let on = fc.vertices.iter().all(|&i| p.vertices()[i].z == 0.0);
                    let nu = if on { [0.0, 0.0, -1.0] } else { fc.normal.to_array() };
                    f(&nu, p.facet_area(fc), on);
                }
            }
        }
    }

    pub fn boundary_facets(&self) -> Vec<BoundaryFacet> {
        let mut out = Vec::new();
        self.for_each_facet(|n, m, on| {
            out.push(BoundaryFacet { normal: n.to_vec(), measure: m, on_substrate: on })
        });
        out
    }

    /// Total boundary measure (perimeter in 2D, surface area in 3D).
    pub fn perimeter(&self) -> f64 {
        match &self.body {
            Body::Planar(ps) => ps.iter().flat_map(|p| p.rings()).map(|r| ring_perimeter(r)).sum(),
            Body::Solid(p) => p.surface_area(),
        }
    }

    /// `|sum of nu * measure|` over the boundary, zero for a closed boundary.
    pub fn gauss_green_residual(&self) -> f64 {
        let mut s = [0.0f64; 3];
        self.for_each_facet(|n, m, _| {
            for (k, c) in n.iter().enumerate() {
                s[k] += c * m;
            }
        });
        s.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn map_points(&self, f2: impl Fn(Vec2) -> Vec2, f3: impl Fn(Vec3) -> Vec3) -> Result<Self, ShapeError> {
        match &self.body {
            Body::Planar(ps) => {
                let polys = ps
                    .iter()
                    .map(|p| Polygon {
                        outer: p.outer.iter().map(|&v| snap2(f2(v))).collect(),
                        holes: p.holes.iter().map(|h| h.iter().map(|&v| snap2(f2(v))).collect()).collect(),
                    })
                    .collect();
                Self::from_checked(polys)
            }
            Body::Solid(p) => {
                Self::solid(&p.map_points(f3, Tolerances::default().dedup)?)
            }
        }
    }

    /// Horizontal translation by `tau` (length `d - 1`).
    pub fn translate_horizontal(&self, tau: &[f64]) -> Result<Self, ShapeError> {
        let t1 = tau.first().copied().unwrap_or(0.0);
        let t2 = tau.get(1).copied().unwrap_or(0.0);
        self.map_points(|v| Vec2::new(v.x + t1, v.y), |v| Vec3::new(v.x + t1, v.y + t2, v.z))
    }

    /// Translation by an arbitrary vector; the result must stay in the upper half-space.
    pub fn translate(&self, t: &[f64]) -> Result<Self, ShapeError> {
        let lifted = match &self.body {
            Body::Planar(ps) => {
                let polys: Vec<(Vec<Vec2>, Vec<Vec<Vec2>>)> = ps
                    .iter()
                    .map(|p| {
                        let m = |r: &Vec<Vec2>| r.iter().map(|&v| Vec2::new(v.x + t[0], v.y + t[1])).collect();
                        (m(&p.outer), p.holes.iter().map(m).collect())
                    })
                    .collect();
                return Self::from_polygons(polys);
            }
            Body::Solid(p) => p.map_points(|v| v + Vec3::from_slice(t), Tolerances::default().dedup)?,
        };
        Self::solid(&lifted)
    }
}

/// Outward unit normal of the edge `a -> b` of a ccw ring, and its length. Axis-parallel
/// edges get exactly axis-aligned normals.
pub fn edge_normal(a: Vec2, b: Vec2) -> ([f64; 2], f64) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dy == 0.0 {
        return ([0.0, -dx.signum()], dx.abs());
    }
    if dx == 0.0 {
        return ([dy.signum(), 0.0], dy.abs());
    }
    let len = dx.hypot(dy);
    ([dy / len, -dx / len], len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFacet {
    pub normal: Vec<f64>,
    pub measure: f64,
    pub on_substrate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub free_surface: f64,
    pub contact: f64,
    pub total: f64,
    pub contact_measure: f64,
    pub free_measure: f64,
}

fn check_dims(e_dim: usize, phi: &Anisotropy) -> Result<(), ShapeError> {
    if e_dim != phi.dim() {
        return Err(ShapeError::DimensionMismatch { shape: e_dim, density: phi.dim() });
    }
    Ok(())
}

/// `int_{boundary off H} phi(nu) + lambda * |boundary on H|`.
pub fn energy_f(e: &SubstrateShape, phi: &Anisotropy, lambda: f64) -> Result<EnergyBreakdown, ShapeError> {
    check_dims(e.dim(), phi)?;
    let mut free = 0.0;
    let mut free_measure = 0.0;
    let mut contact_measure = 0.0;
    e.for_each_facet(|n, m, on| {
        if on {
            contact_measure += m;
        } else {
            free += phi.value(n) * m;
            free_measure += m;
        }
    });
    let contact = lambda * contact_measure;
    Ok(EnergyBreakdown { free_surface: free, contact, total: free + contact, contact_measure, free_measure })
}

/// `int_{whole boundary} psi(nu)`, facets on the substrate included.
pub fn perimeter_p(e: &SubstrateShape, psi: &Anisotropy) -> Result<f64, ShapeError> {
    check_dims(e.dim(), psi)?;
    let mut s = 0.0;
    e.for_each_facet(|n, m, _| s += psi.value(n) * m);
    Ok(s)
}

/// `(free-surface energy, phi(e_d) * contact measure)`; the first is never below the second.
pub fn jensen_lower_bound(e: &SubstrateShape, phi: &Anisotropy) -> Result<(f64, f64), ShapeError> {
    let b = energy_f(e, phi, 0.0)?;
    let (up, _) = phi.vertical_values();
    Ok((b.free_surface, up * b.contact_measure))
}

/// `x -> anchor + r (x - anchor)` for an anchor on the substrate.
pub fn rescale(e: &SubstrateShape, r: f64, anchor: &[f64]) -> Result<SubstrateShape, ShapeError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(ShapeError::InvalidArgument(format!("scale factor must be positive, got {r}")));
    }
    let d = e.dim();
    if anchor.len() != d || anchor[d - 1] != 0.0 {
        return Err(ShapeError::InvalidArgument("anchor must lie on the substrate".into()));
    }
    let a2 = Vec2::new(anchor[0], 0.0);
    let a3 = if d == 3 { Vec3::new(anchor[0], anchor[1], 0.0) } else { Vec3::default() };
    e.map_points(|v| a2 + (v - a2) * r, |v| a3 + (v - a3) * r)
}

/// Energies of the slabs `(0,R)^{d-1} x (0, v / R^{d-1})`.
pub fn wetting_demo(phi: &Anisotropy, lambda: f64, v: f64, radii: &[f64]) -> Result<Vec<(f64, f64)>, ShapeError> {
    if !(v > 0.0) {
        return Err(ShapeError::InvalidArgument(format!("volume must be positive, got {v}")));
    }
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(ShapeError::InvalidArgument(format!("R must be positive, got {r}")));
            }
            let e = slab(phi.dim(), r, v)?;
            Ok((r, energy_f(&e, phi, lambda)?.total))
        })
        .collect()
}

/// The slab `(0,R)^{d-1} x (0, v / R^{d-1})` resting on the substrate.
pub fn slab(dim: usize, r: f64, v: f64) -> Result<SubstrateShape, ShapeError> {
    let h = v / r.powi(dim as i32 - 1);
    if dim == 2 {
        SubstrateShape::polygon(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(r, 0.0),
            Vec2::new(r, h),
            Vec2::new(0.0, h),
        ])
    } else {
        let mut pts = Vec::new();
        for &x in &[0.0, r] {
            for &y in &[0.0, r] {
                for &z in &[0.0, h] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        SubstrateShape::solid(&ConvexPolyhedron::from_points(&pts, Tolerances::default().dedup)?)
    }
}

/// Random polygon star-shaped about the origin with a single contact edge: two vertices on
/// the substrate and `n - 2` above it at increasing angles.
pub fn random_grounded_polygon(rng: &mut impl Rng, n: usize) -> SubstrateShape {
    let n = n.max(3);
    let aspect = rng.gen_range(0.4..2.5f64);
    let mut angles: Vec<f64> = (0..n - 2).map(|_| rng.gen_range(0.05..std::f64::consts::PI - 0.05)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut ring = vec![Vec2::new(rng.gen_range(0.3..1.0) * aspect, 0.0)];
    for t in angles {
        let r = rng.gen_range(0.3..1.0);
        ring.push(Vec2::new(r * aspect * t.cos(), r * t.sin()));
    }
    ring.push(Vec2::new(-rng.gen_range(0.3..1.0) * aspect, 0.0));
    SubstrateShape::polygon(ring).expect("star-shaped ring is simple")
}

/// Random polygon star-shaped about `(0, c)` with `c` above its radius, so it floats
/// above the substrate.
pub fn random_floating_polygon(rng: &mut impl Rng, n: usize) -> SubstrateShape {
    let n = n.max(3);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let lift = rng.gen_range(1.05..3.0);
    let ring: Vec<Vec2> = angles
        .iter()
        .map(|&t| {
            let r = rng.gen_range(0.2..1.0);
            Vec2::new(r * t.cos(), lift + r * t.sin())
        })
        .collect();
    SubstrateShape::polygon(ring).unwrap_or_else(|_| random_floating_polygon(rng, n))
}

#[derive(Serialize, Deserialize)]
struct PolygonJson {
    outer: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    holes: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ShapeJson {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polygons: Option<Vec<PolygonJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Vec<f64>>>,
}

fn ring_json(r: &[Vec2]) -> Vec<[f64; 2]> {
    r.iter().map(|v| v.to_array()).collect()
}

fn ring_from_json(r: &[[f64; 2]]) -> Vec<Vec2> {
    r.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

impl Serialize for SubstrateShape {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let j = match &self.body {
            Body::Planar(ps) => ShapeJson {
                dim: 2,
                polygons: Some(
                    ps.iter()
                        .map(|p| PolygonJson {
                            outer: ring_json(&p.outer),
                            holes: p.holes.iter().map(|h| ring_json(h)).collect(),
                        })
                        .collect(),
                ),
                vertices: None,
            },
            Body::Solid(_) => ShapeJson { dim: 3, polygons: None, vertices: Some(self.vertices()) },
        };
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubstrateShape {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = ShapeJson::deserialize(d)?;
        match j.dim {
            2 => {
                let polys = j.polygons.ok_or_else(|| D::Error::custom("2D shape needs \"polygons\""))?;
                let parts = polys
                    .iter()
                    .map(|p| (ring_from_json(&p.outer), p.holes.iter().map(|h| ring_from_json(h)).collect()))
                    .collect();
                SubstrateShape::from_polygons(parts).map_err(D::Error::custom)
            }
            3 => {
                let v = j.vertices.ok_or_else(|| D::Error::custom("3D shape needs \"vertices\""))?;
                if v.iter().any(|p| p.len() != 3) {
                    return Err(D::Error::custom("3D vertices need 3 coordinates"));
                }
                let pts: Vec<Vec3> = v.iter().map(|p| Vec3::from_slice(p)).collect();
                let poly = ConvexPolyhedron::from_points(&pts, Tolerances::default().dedup)
                    .map_err(D::Error::custom)?;
                SubstrateShape::solid(&poly).map_err(D::Error::custom)
            }
            other => Err(D::Error::custom(format!("unsupported dimension {other}"))),
        }
    }
}

/// Unit grid cells; `rows[0]` is the lowest row, sitting `lift` rows above the substrate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelShape {
    width: usize,
    height: usize,
    cells: Vec<bool>,
    lift: usize,
}

impl PixelShape {
    pub fn new(width: usize, height: usize, cells: Vec<bool>, lift: usize) -> Result<Self, ShapeError> {
        if cells.len() != width * height {
            return Err(ShapeError::InvalidPixels(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        let p = Self { width, height, cells, lift };
        if p.count() == 0 {
            return Err(ShapeError::ZeroVolume);
        }
        if !p.is_connected() {
            return Err(ShapeError::Disconnected);
        }
        Ok(p)
    }

    /// Rows of '0'/'1' (or '.'/'#'), lowest row first.
    pub fn from_rows<S: AsRef<str>>(rows: &[S], lift: usize) -> Result<Self, ShapeError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().chars().count()).unwrap_or(0);
        let mut cells = Vec::with_capacity(width * height);
        for r in rows {
            let r = r.as_ref();
            if r.chars().count() != width {
                return Err(ShapeError::InvalidPixels("rows have different lengths".into()));
            }
            for c in r.chars() {
                cells.push(match c {
                    '1' | '#' => true,
                    '0' | '.' => false,
                    other => return Err(ShapeError::InvalidPixels(format!("unexpected character {other:?}"))),
                });
            }
        }
        Self::new(width, height, cells, lift)
    }

    /// Builds the tight bounding grid of a cell list `(column, row)`.
    pub fn from_cells(cells: &[(i32, i32)], lift: usize) -> Result<Self, ShapeError> {
        if cells.is_empty() {
            return Err(ShapeError::ZeroVolume);
        }
        let x0 = cells.iter().map(|c| c.0).min().unwrap();
        let y0 = cells.iter().map(|c| c.1).min().unwrap();
        let w = (cells.iter().map(|c| c.0).max().unwrap() - x0 + 1) as usize;
        let h = (cells.iter().map(|c| c.1).max().unwrap() - y0 + 1) as usize;
        let mut grid = vec![false; w * h];
        for &(x, y) in cells {
            grid[(y - y0) as usize * w + (x - x0) as usize] = true;
        }
        Self::new(w, h, grid, lift)
    }

    pub fn rectangle(width: usize, height: usize, lift: usize) -> Self {
        Self::new(width, height, vec![true; width * height], lift).expect("rectangle is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn lift(&self) -> usize {
        self.lift
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        col < self.width && row < self.height && self.cells[row * self.width + col]
    }

    fn occupied(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && self.get(col as usize, row as usize)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|r| (0..self.width).map(|c| if self.get(c, r) { '1' } else { '0' }).collect())
            .collect()
    }

    pub fn is_rectangle(&self) -> bool {
        self.cells.iter().all(|&c| c)
    }

    fn is_connected(&self) -> bool {
        let start = match self.cells.iter().position(|&c| c) {
            Some(s) => s,
            None => return false,
        };
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut n = 0;
        while let Some(i) = stack.pop() {
            n += 1;
            let (c, r) = ((i % self.width) as i64, (i / self.width) as i64);
            for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nc, nr) = (c + dc, r + dr);
                if nc >= 0 && nr >= 0 && (nc as usize) < self.width && (nr as usize) < self.height {
                    let j = nr as usize * self.width + nc as usize;
                    if self.cells[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        n == self.count()
    }

    /// Boundary loops with the cells on the left. A loop passing a pinch vertex twice is split
    /// there, so every loop is simple.
    pub fn boundary_rings(&self) -> Vec<Vec<Vec2>> {
        use std::collections::HashMap;
        let lift = self.lift as i64;
        let mut out_edges: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
        let mut add = |a: (i64, i64), b: (i64, i64)| out_edges.entry(a).or_default().push(b);
        for r in 0..self.height as i64 {
            for c in 0..self.width as i64 {
                if !self.occupied(c, r) {
                    continue;
                }
                let y = r + lift;
                if !self.occupied(c, r - 1) {
                    add((c, y), (c + 1, y));
                }
                if !self.occupied(c + 1, r) {
                    add((c + 1, y), (c + 1, y + 1));
                }
                if !self.occupied(c, r + 1) {
                    add((c + 1, y + 1), (c, y + 1));
                }
                if !self.occupied(c - 1, r) {
                    add((c, y + 1), (c, y));
                }
            }
        }
        let mut starts: Vec<(i64, i64)> = out_edges.keys().copied().collect();
        starts.sort_unstable();
        let mut rings = Vec::new();
        for s in starts {
            while out_edges.get(&s).is_some_and(|v| !v.is_empty()) {
                let mut ring = vec![s];
                let mut prev = s;
                let mut cur = out_edges.get_mut(&s).unwrap().pop().unwrap();
                while cur != s {
                    ring.push(cur);
                    let din = (cur.0 - prev.0, cur.1 - prev.1);
                    let outs = out_edges.get_mut(&cur).unwrap();
                    let pick = if outs.len() == 1 {
                        0
                    } else {
                        // left turn of the incoming direction
                        let left = (cur.0 - din.1, cur.1 + din.0);
                        outs.iter().position(|&o| o == left).unwrap_or(0)
                    };
                    let next = outs.swap_remove(pick);
                    prev = cur;
                    cur = next;
                }
                for piece in split_at_repeats(ring) {
                    rings.push(piece.into_iter().map(|(x, y)| Vec2::new(x as f64, y as f64)).collect());
                }
            }
        }
        rings
    }

    /// The union of the cells as a polygonal shape (holes included).
    pub fn to_shape(&self) -> Result<SubstrateShape, ShapeError> {
        SubstrateShape::from_rings(self.boundary_rings())
    }
}

fn split_at_repeats(ring: Vec<(i64, i64)>) -> Vec<Vec<(i64, i64)>> {
    let mut seen = std::collections::HashMap::new();
    for (i, &p) in ring.iter().enumerate() {
        if let Some(&j) = seen.get(&p) {
            let inner: Vec<(i64, i64)> = ring[j..i].to_vec();
            let mut outer: Vec<(i64, i64)> = ring[..j].to_vec();
            outer.extend_from_slice(&ring[i..]);
            let mut out = split_at_repeats(inner);
            out.extend(split_at_repeats(outer));
            return out;
        }
        seen.insert(p, i);
    }
    vec![ring]
}

#[derive(Serialize, Deserialize)]
struct PixelJson {
    width: usize,
    rows: Vec<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    lift: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl Serialize for PixelShape {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PixelJson { width: self.width, rows: self.rows(), lift: self.lift }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PixelShape {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = PixelJson::deserialize(d)?;
        let p = PixelShape::from_rows(&j.rows, j.lift).map_err(D::Error::custom)?;
        if p.width != j.width {
            return Err(D::Error::custom("width does not match the rows"));
        }
        Ok(p)
    }
}

/// Energy of a pixel shape: unit edges weighted by `phi(+-e_i)`, bottom edges on the
/// substrate by `lambda`.
pub fn pixel_energy(p: &PixelShape, phi: &Anisotropy, lambda: f64) -> Result<EnergyBreakdown, ShapeError> {
    check_dims(2, phi)?;
    let w = [
        phi.value(&[1.0, 0.0]),
        phi.value(&[-1.0, 0.0]),
        phi.value(&[0.0, 1.0]),
        phi.value(&[0.0, -1.0]),
    ];
    let mut free = 0.0;
    let mut free_measure = 0.0;
    let mut contact_measure = 0.0;
    for r in 0..p.height as i64 {
        for c in 0..p.width as i64 {
            if !p.occupied(c, r) {
                continue;
            }
            let mut edge = |present: bool, weight: f64| {
                if !present {
                    free += weight;
                    free_measure += 1.0;
                }
            };
            edge(p.occupied(c + 1, r), w[0]);
            edge(p.occupied(c - 1, r), w[1]);
            edge(p.occupied(c, r + 1), w[2]);
            if !p.occupied(c, r - 1) {
                if r + p.lift as i64 == 0 {
                    contact_measure += 1.0;
                } else {
                    free += w[3];
                    free_measure += 1.0;
                }
            }
        }
    }
    let contact = lambda * contact_measure;
    Ok(EnergyBreakdown { free_surface: free, contact, total: free + contact, contact_measure, free_measure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::make_phi_lambda;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> SubstrateShape {
        SubstrateShape::polygon(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
        .unwrap()
    }

    fn l1() -> Anisotropy {
        Anisotropy::pnorm(1.0, 2).unwrap()
    }

    #[test]
    fn rectangle_fixture() {
        let a = 1.0 / 3f64.sqrt();
        let e = rect(-a, 0.0, a, 3f64.sqrt() / 2.0);
        let b = energy_f(&e, &l1(), 0.5).unwrap();
        assert!((b.total - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(b.total, b.free_surface + b.contact);
    }

    #[test]
    fn unit_square_wetting_energy() {
        let b = energy_f(&rect(0.0, 0.0, 1.0, 1.0), &l1(), -0.5).unwrap();
        assert_eq!((b.free_surface, b.contact, b.total), (3.0, -0.5, 2.5));
    }

    #[test]
    fn lambda_perimeter_examples() {
        let psi = make_phi_lambda(&l1(), 0.5);
        let on = rect(0.0, 0.0, 1.0, 1.0);
        assert_eq!(perimeter_p(&on, &psi).unwrap(), 3.5);
        assert_eq!(energy_f(&on, &l1(), 0.5).unwrap().total, 3.5);
        let off = rect(0.0, 1.0, 1.0, 2.0);
        assert_eq!(perimeter_p(&off, &psi).unwrap(), 3.5);
        assert_eq!(energy_f(&off, &l1(), 0.5).unwrap().total, 4.0);
    }

    #[test]
    fn snapping_and_validation() {
        let e = SubstrateShape::polygon(vec![
            Vec2::new(0.0, 1e-13),
            Vec2::new(1.0, -1e-13),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(e.boundary_facets().iter().filter(|f| f.on_substrate).count(), 1);
        assert!(matches!(
            SubstrateShape::polygon(vec![Vec2::new(0.0, -1e-3), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]),
            Err(ShapeError::BelowSubstrate(_))
        ));
        let bowtie = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        assert_eq!(SubstrateShape::polygon(bowtie), Err(ShapeError::NotSimple));
        // cw input is reoriented
        let cw = SubstrateShape::polygon(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).unwrap();
        assert!(cw.volume() > 0.0);
    }

    #[test]
    fn partial_contact_edge_is_free() {
        let e = SubstrateShape::polygon(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0), Vec2::new(0.0, 2.0)]).unwrap();
        let b = energy_f(&e, &Anisotropy::euclidean(2), 0.3).unwrap();
        assert_eq!(b.contact_measure, 0.0);
    }

    #[test]
    fn holes_add_free_surface() {
        let outer = vec![Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(3.0, 3.0), Vec2::new(0.0, 3.0)];
        let hole = vec![Vec2::new(1.0, 1.0), Vec2::new(2.0, 1.0), Vec2::new(2.0, 2.0), Vec2::new(1.0, 2.0)];
        let e = SubstrateShape::from_polygons(vec![(outer, vec![hole])]).unwrap();
        assert_eq!(e.volume(), 8.0);
        let b = energy_f(&e, &l1(), 0.0).unwrap();
        assert_eq!(b.free_surface, 9.0 + 4.0);
        assert!(e.gauss_green_residual() < 1e-12);
        let bad_hole = vec![Vec2::new(5.0, 1.0), Vec2::new(6.0, 1.0), Vec2::new(6.0, 2.0)];
        let outer = vec![Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(3.0, 3.0)];
        assert_eq!(SubstrateShape::from_polygons(vec![(outer, vec![bad_hole])]), Err(ShapeError::HoleOutside));
    }

    #[test]
    fn pixel_examples() {
        let r42 = PixelShape::rectangle(4, 2, 0);
        assert_eq!(pixel_energy(&r42, &l1(), 0.0).unwrap().total, 8.0);
        let one = PixelShape::rectangle(1, 1, 0);
        assert_eq!(pixel_energy(&one, &Anisotropy::euclidean(2), 0.5).unwrap().total, 3.5);
        let tower = PixelShape::rectangle(2, 4, 0);
        assert_eq!(pixel_energy(&tower, &l1(), 0.0).unwrap().total, 10.0);
        assert_eq!(PixelShape::from_rows(&["10", "01"], 0), Err(ShapeError::Disconnected));
    }

    #[test]
    fn pixel_ring_with_pinched_hole() {
        // hole at (1,1) touching the outside through the corner (2,1)
        let cells = [(0, 0), (1, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1)];
        let p = PixelShape::from_cells(&cells, 0).unwrap();
        let ring = [(0, 0), (1, 0), (2, 0), (0, 1), (2, 1), (0, 2), (1, 2), (2, 2)];
        let q = PixelShape::from_cells(&ring, 1).unwrap();
        for shape in [p, q] {
            let poly = shape.to_shape().unwrap();
            assert_eq!(poly.volume(), shape.count() as f64);
            for lambda in [-0.5, 0.0, 0.7] {
                let a = pixel_energy(&shape, &l1(), lambda).unwrap().total;
                let b = energy_f(&poly, &l1(), lambda).unwrap().total;
                assert!((a - b).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn wetting_examples() {
        let l2 = Anisotropy::euclidean(2);
        let t = wetting_demo(&l2, -1.5, 1.0, &[1.0, 10.0, 100.0]).unwrap();
        for (r, f) in &t {
            assert!((f - (2.0 / r - 0.5 * r)).abs() < 1e-12);
        }
        assert!(t[2].1 < -40.0);
        let t = wetting_demo(&l2, -1.0, 1.0, &[100.0]).unwrap();
        assert!((t[0].1 - 0.02).abs() < 1e-12);
        assert_eq!(wetting_demo(&l2, 0.0, 1.0, &[1.0]).unwrap()[0].1, 3.0);
        let l2_3 = Anisotropy::euclidean(3);
        let t = wetting_demo(&l2_3, 0.0, 1.0, &[1.0, 2.0]).unwrap();
        assert!((t[0].1 - 5.0).abs() < 1e-12);
        assert!((t[1].1 - (4.0 + 4.0 * 2.0 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn rescale_examples() {
        let sq = rect(0.0, 0.0, 1.0, 1.0);
        assert_eq!(rescale(&sq, 1.0, &[0.0, 0.0]).unwrap(), sq);
        let big = rescale(&sq, 2.0, &[0.5, 0.0]).unwrap();
        let phi = l1();
        assert_eq!(energy_f(&big, &phi, 0.3).unwrap().total, 2.0 * energy_f(&sq, &phi, 0.3).unwrap().total);
        assert!(rescale(&sq, 2.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = rand::thread_rng();
        let e = random_grounded_polygon(&mut rng, 12);
        let s = serde_json::to_string(&e).unwrap();
        let back: SubstrateShape = serde_json::from_str(&s).unwrap();
        let phi = Anisotropy::euclidean(2);
        assert_eq!(energy_f(&e, &phi, 0.2).unwrap(), energy_f(&back, &phi, 0.2).unwrap());
        let p: PixelShape = serde_json::from_str(r#"{"width":3,"rows":["111","010"]}"#).unwrap();
        assert_eq!(p.count(), 4);
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"width":3,"rows":["111","010"]}"#);
    }
}
