//! Convex polytopes in the plane and in space, with the Wulff and Winterbottom
//! constructions built on top of them.

mod polygon;
mod polyhedron;
mod wulff;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::anisotropy::AnisotropyError;
use crate::geom::{Vec2, Vec3};

pub use polygon::{intersect_halfplanes, ConvexPolygon};
pub use polyhedron::{ConvexPolyhedron, Facet};
pub use wulff::{
    build_wulff, build_wulff_with, classify_regime, winterbottom, winterbottom_with_volume,
    young_law_check, Regime, RegimeLabel, WulffOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("density is not coercive: the Wulff set is unbounded")]
    Unbounded,
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("polytope is empty")]
    EmptyPolytope,
    #[error("no contact facet on the substrate")]
    NoContactFacet,
    #[error(transparent)]
    Anisotropy(#[from] AnisotropyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Points and directions closer than this (relative to the body's size) are merged.
    pub dedup: f64,
    /// Slack allowed when checking that a point satisfies a halfspace.
    pub constraint: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { dedup: 1e-12, constraint: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexPolytope {
    Polygon(ConvexPolygon),
    Polyhedron(ConvexPolyhedron),
}

impl ConvexPolytope {
    pub fn empty(dim: usize) -> Self {
        if dim == 3 {
            Self::Polyhedron(ConvexPolyhedron::empty())
        } else {
            Self::Polygon(ConvexPolygon::empty())
        }
    }

    /// Convex hull of the given points (each of length 2 or 3).
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self, GeometryError> {
        let tol = Tolerances::default();
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) || !(dim == 2 || dim == 3) {
            return Err(GeometryError::InvalidArgument("points must all be 2D or all 3D".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidArgument("non-finite coordinate".into()));
        }
        if dim == 2 {
            let pts: Vec<Vec2> = points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
            let poly = ConvexPolygon::hull(&pts, tol.dedup);
            if poly.is_empty() {
                return Err(GeometryError::NumericalDegeneracy("points are collinear".into()));
            }
            Ok(Self::Polygon(poly))
        } else {
            let pts: Vec<Vec3> = points.iter().map(|p| Vec3::from_slice(p)).collect();
            Ok(Self::Polyhedron(ConvexPolyhedron::from_points(&pts, tol.dedup)?))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Polygon(_) => 2,
            Self::Polyhedron(_) => 3,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Self::Polygon(p) => p.is_empty(),
            Self::Polyhedron(p) => p.is_empty(),
        }
    }

    pub fn as_polygon(&self) -> Option<&ConvexPolygon> {
        match self {
            Self::Polygon(p) => Some(p),
            Self::Polyhedron(_) => None,
        }
    }

    pub fn as_polyhedron(&self) -> Option<&ConvexPolyhedron> {
        match self {
            Self::Polyhedron(p) => Some(p),
            Self::Polygon(_) => None,
        }
    }

    /// Vertices; ccw in 2D.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            Self::Polygon(p) => p.vertices().iter().map(|v| vec![v.x, v.y]).collect(),
            Self::Polyhedron(p) => p.vertices().iter().map(|v| vec![v.x, v.y, v.z]).collect(),
        }
    }

    pub fn halfspaces(&self) -> Vec<Halfspace> {
        match self {
            Self::Polygon(p) => p
                .normals()
                .iter()
                .zip(p.offsets())
                .map(|(n, &b)| Halfspace { normal: vec![n.x, n.y], offset: b })
                .collect(),
            Self::Polyhedron(p) => p
                .facets()
                .iter()
                .map(|f| Halfspace { normal: f.normal.to_array().to_vec(), offset: f.offset })
                .collect(),
        }
    }

    pub fn facet_count(&self) -> usize {
        match self {
            Self::Polygon(p) => p.normals().len(),
            Self::Polyhedron(p) => p.facets().len(),
        }
    }

    /// Area in 2D, volume in 3D.
    pub fn volume(&self) -> f64 {
        match self {
            Self::Polygon(p) => p.area(),
            Self::Polyhedron(p) => p.volume(),
        }
    }

    /// Perimeter in 2D, surface area in 3D.
    pub fn boundary_measure(&self) -> f64 {
        match self {
            Self::Polygon(p) => p.perimeter(),
            Self::Polyhedron(p) => p.surface_area(),
        }
    }

    /// `max_{x in K} x . nu` and the vertices within 1e-9 of it.
    pub fn support_function(&self, nu: &[f64]) -> (f64, Vec<usize>) {
        const ARGMAX_TOL: f64 = 1e-9;
        match self {
            Self::Polygon(p) => p.support(Vec2::new(nu[0], nu[1]), ARGMAX_TOL),
            Self::Polyhedron(p) => {
                let nu = Vec3::from_slice(nu);
                let vals: Vec<f64> = p.vertices().iter().map(|v| v.dot(nu)).collect();
                let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let idx =
                    (0..vals.len()).filter(|&i| best - vals[i] <= ARGMAX_TOL).collect();
                (best, idx)
            }
        }
    }

    pub fn translate(&self, t: &[f64]) -> Self {
        match self {
            Self::Polygon(p) => {
                let t = Vec2::new(t[0], t[1]);
                Self::Polygon(p.map(|v| v + t, |n, b| b + n.dot(t)))
            }
            Self::Polyhedron(p) => {
                let t = Vec3::from_slice(t);
                Self::Polyhedron(
                    p.map_points(|v| v + t, Tolerances::default().dedup).unwrap_or_else(|_| p.clone()),
                )
            }
        }
    }

    /// Largest violation of the V-rep / H-rep consistency.
    pub fn consistency_residual(&self) -> f64 {
        match self {
            Self::Polygon(p) => p.consistency_residual(),
            Self::Polyhedron(p) => p.consistency_residual(),
        }
    }

    /// `H^{d-1}` of the lowest face `{x in K : x_d = min_K x_d}` (zero if that face is a
    /// vertex or an edge in 3D).
    pub fn bottom_facet_measure(&self) -> f64 {
        const TOL: f64 = 1e-12;
        match self {
            Self::Polygon(p) => {
                let v = p.vertices();
                let low = v.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
                let n = v.len();
                (0..n)
                    .filter(|&i| (v[i].y - low).abs() <= TOL && (v[(i + 1) % n].y - low).abs() <= TOL)
                    .map(|i| v[i].dist(v[(i + 1) % n]))
                    .sum()
            }
            Self::Polyhedron(p) => {
                let low = p.vertices().iter().map(|q| q.z).fold(f64::INFINITY, f64::min);
                p.facets()
                    .iter()
                    .filter(|f| f.vertices.iter().all(|&i| (p.vertices()[i].z - low).abs() <= TOL))
                    .map(|f| p.facet_area(f))
                    .sum()
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    dim: usize,
    vertices: Vec<Vec<f64>>,
}

impl Serialize for ConvexPolytope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolytopeJson { dim: self.dim(), vertices: self.vertices() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvexPolytope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PolytopeJson::deserialize(d)?;
        if raw.vertices.is_empty() {
            return Ok(Self::empty(raw.dim));
        }
        if raw.vertices.iter().any(|v| v.len() != raw.dim) {
            return Err(serde::de::Error::custom("vertex length does not match dim"));
        }
        Self::from_points(&raw.vertices).map_err(serde::de::Error::custom)
    }
}
