//! Anisotropic surface-tension densities.
//!
//! An [`Anisotropy`] is a positively 1-homogeneous function `phi: R^d -> R`
//! (d = 2 or 3) weighting boundary normals. Besides the convex base kinds it
//! carries the two non-convex modifications used by the optimality argument:
//! the substrate-weighted density `phi_lambda`, which replaces the value on the
//! open ray `-t e_d` by `lambda * t`, and the tilted density
//! `phi_x0(nu) = phi(nu) - x0 . nu`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::convex::{self, ConvexPolytope};

/// Default number of sampled unit directions used for coercivity estimates in 2D.
pub const COERCIVITY_SAMPLES_2D: usize = 4096;
/// Default number of sampled unit directions (Fibonacci sphere) in 3D.
pub const COERCIVITY_SAMPLES_3D: usize = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnisotropyError {
    #[error("non-finite component in direction {0:?}")]
    NonFinite(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (only 2 and 3)")]
    UnsupportedDimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("density is not coercive (estimated constant {0})")]
    NotCoercive(f64),
    #[error("density is not differentiable at {0:?}")]
    NotDifferentiable(Vec<f64>),
    #[error("shift point is not interior to the Wulff shape (estimated epsilon {0})")]
    NotInterior(f64),
    #[error("lambda = {lambda} outside the partial-wetting interval ({lower}, {upper})")]
    Regime { lambda: f64, lower: f64, upper: f64 },
    #[error("empty polytope")]
    EmptyPolytope,
    #[error("could not construct Wulff shape: {0}")]
    Geometry(String),
}

/// Record of a non-convex modification applied to a convex base density.
#[derive(Debug, Clone, PartialEq)]
pub enum Modification {
    /// `lambda * t` on `-t e_d`, base value elsewhere.
    Lambda { lambda: f64 },
    /// `phi(nu) - x0 . nu`.
    Shifted { x0: Vec<f64> },
    /// The shifted density, then lambda-modified: `(phi_x0)_lambda`.
    Both { lambda: f64, x0: Vec<f64> },
}

impl Modification {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            Modification::Lambda { lambda } | Modification::Both { lambda, .. } => Some(*lambda),
            Modification::Shifted { .. } => None,
        }
    }

    pub fn x0(&self) -> Option<&[f64]> {
        match self {
            Modification::Shifted { x0 } | Modification::Both { x0, .. } => Some(x0),
            Modification::Lambda { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnisotropyKind {
    /// `h_K(nu) = max_v v . nu` for a polytope with the given vertices.
    SupportOfPolytope { vertices: Vec<Vec<f64>> },
    /// `|A nu|` for an invertible d x d matrix (row-major).
    WeightedNorm { matrix: Vec<Vec<f64>> },
    /// `|nu|_p`, p in [1, inf].
    PNorm { p: f64 },
    /// `max_i w_i . nu` over a finite generator set.
    CrystallineMax { generators: Vec<Vec<f64>> },
    /// A convex base density with a modification on top. The base is never itself modified.
    Modified { base: Box<Anisotropy>, modification: Modification },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anisotropy {
    kind: AnisotropyKind,
    dim: usize,
    coercivity: f64,
}

fn check_dim(dim: usize) -> Result<(), AnisotropyError> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(AnisotropyError::UnsupportedDimension(dim))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn is_downward_ray(nu: &[f64]) -> Option<f64> {
    let d = nu.len();
    if nu[..d - 1].iter().all(|&c| c == 0.0) && nu[d - 1] < 0.0 {
        Some(-nu[d - 1])
    } else {
        None
    }
}

fn determinant(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => f64::NAN,
    }
}

/// Uniform angles in 2D (starting at angle 0), Fibonacci sphere in 3D.
pub fn sample_unit_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => fibonacci_sphere(count),
    }
}

pub fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * k as f64;
            vec![r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

fn default_samples(dim: usize) -> usize {
    if dim == 2 {
        COERCIVITY_SAMPLES_2D
    } else {
        COERCIVITY_SAMPLES_3D
    }
}

impl Anisotropy {
    fn finish(kind: AnisotropyKind, dim: usize) -> Self {
        let mut a = Anisotropy { kind, dim, coercivity: 0.0 };
        a.coercivity = a.sampled_minimum(default_samples(dim));
        a
    }

    fn require_coercive(self) -> Result<Self, AnisotropyError> {
        if self.coercivity > 0.0 {
            Ok(self)
        } else {
            Err(AnisotropyError::NotCoercive(self.coercivity))
        }
    }

    pub fn pnorm(p: f64, dim: usize) -> Result<Self, AnisotropyError> {
        check_dim(dim)?;
        if !(p >= 1.0) {
            return Err(AnisotropyError::InvalidParameter(format!("p = {p} must be in [1, inf]")));
        }
        Ok(Self::finish(AnisotropyKind::PNorm { p }, dim))
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::pnorm(2.0, dim).expect("valid")
    }

    pub fn weighted(matrix: Vec<Vec<f64>>) -> Result<Self, AnisotropyError> {
        let dim = matrix.len();
        check_dim(dim)?;
        if matrix.iter().any(|r| r.len() != dim) {
            return Err(AnisotropyError::InvalidParameter("matrix must be square".into()));
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(AnisotropyError::InvalidParameter("matrix entries must be finite".into()));
        }
        let det = determinant(&matrix);
        if det.abs() < 1e-14 {
            return Err(AnisotropyError::InvalidParameter("matrix is singular".into()));
        }
        Self::finish(AnisotropyKind::WeightedNorm { matrix }, dim).require_coercive()
    }

    fn check_point_set(points: &[Vec<f64>], what: &str) -> Result<usize, AnisotropyError> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| AnisotropyError::InvalidParameter(format!("empty {what} list")))?;
        check_dim(dim)?;
        if points.iter().any(|p| p.len() != dim || p.iter().any(|c| !c.is_finite())) {
            return Err(AnisotropyError::InvalidParameter(format!(
                "{what} must be finite points of equal dimension"
            )));
        }
        Ok(dim)
    }

    pub fn support(vertices: Vec<Vec<f64>>) -> Result<Self, AnisotropyError> {
        let dim = Self::check_point_set(&vertices, "vertex")?;
        Self::finish(AnisotropyKind::SupportOfPolytope { vertices }, dim).require_coercive()
    }

    pub fn crystalline(generators: Vec<Vec<f64>>) -> Result<Self, AnisotropyError> {
        let dim = Self::check_point_set(&generators, "generator")?;
        Self::finish(AnisotropyKind::CrystallineMax { generators }, dim).require_coercive()
    }

    pub fn kind(&self) -> &AnisotropyKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cached lower bound `c` with `phi(nu) >= c |nu|` (estimated by sampling).
    /// A value `<= 0` flags a non-coercive density.
    pub fn coercivity(&self) -> f64 {
        self.coercivity
    }

    pub fn is_coercive(&self) -> bool {
        self.coercivity > 0.0
    }

    /// The convex density underneath any modification.
    pub fn base(&self) -> &Anisotropy {
        match &self.kind {
            AnisotropyKind::Modified { base, .. } => base,
            _ => self,
        }
    }

    pub fn modification(&self) -> Option<&Modification> {
        match &self.kind {
            AnisotropyKind::Modified { modification, .. } => Some(modification),
            _ => None,
        }
    }

    /// True for kinds that are convex by construction (everything except a lambda modification).
    pub fn is_convex(&self) -> bool {
        !matches!(
            self.modification(),
            Some(Modification::Lambda { .. } | Modification::Both { .. })
        )
    }

    /// Kinds for which `gradient` is defined away from the origin.
    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            AnisotropyKind::PNorm { p } => *p > 1.0 && p.is_finite(),
            AnisotropyKind::WeightedNorm { .. } => true,
            AnisotropyKind::Modified { base, modification } => {
                matches!(modification, Modification::Shifted { .. }) && base.is_smooth()
            }
            _ => false,
        }
    }

    pub fn sampled_minimum(&self, samples: usize) -> f64 {
        sample_unit_directions(self.dim, samples)
            .iter()
            .map(|nu| self.value(nu))
            .fold(f64::INFINITY, f64::min)
    }

    /// Re-estimates the coercivity constant with a custom sample count.
    pub fn with_coercivity_samples(mut self, samples: usize) -> Self {
        self.coercivity = match self.modification() {
            Some(Modification::Lambda { lambda }) => {
                self.base().sampled_minimum(samples).min(*lambda)
            }
            _ => self.sampled_minimum(samples),
        };
        self
    }

    /// Checked evaluation: rejects wrong lengths and non-finite components.
    pub fn eval(&self, nu: &[f64]) -> Result<f64, AnisotropyError> {
        if nu.len() != self.dim {
            return Err(AnisotropyError::DimensionMismatch { expected: self.dim, got: nu.len() });
        }
        if nu.iter().any(|c| !c.is_finite()) {
            return Err(AnisotropyError::NonFinite(nu.to_vec()));
        }
        Ok(self.value(nu))
    }

    /// Unchecked evaluation used on hot paths. `nu` must have length `dim`.
    pub fn value(&self, nu: &[f64]) -> f64 {
        debug_assert_eq!(nu.len(), self.dim);
        match &self.kind {
            AnisotropyKind::PNorm { p } => pnorm_value(*p, nu),
            AnisotropyKind::WeightedNorm { matrix } => {
                matrix.iter().map(|row| dot(row, nu).powi(2)).sum::<f64>().sqrt()
            }
            AnisotropyKind::SupportOfPolytope { vertices: pts }
            | AnisotropyKind::CrystallineMax { generators: pts } => {
                if nu.iter().all(|&c| c == 0.0) {
                    return 0.0;
                }
                pts.iter().map(|v| dot(v, nu)).fold(f64::NEG_INFINITY, f64::max)
            }
            AnisotropyKind::Modified { base, modification } => match modification {
                Modification::Lambda { lambda } => match is_downward_ray(nu) {
                    Some(t) => lambda * t,
                    None => base.value(nu),
                },
                Modification::Shifted { x0 } => base.value(nu) - dot(x0, nu),
                Modification::Both { lambda, x0 } => match is_downward_ray(nu) {
                    Some(t) => lambda * t,
                    None => base.value(nu) - dot(x0, nu),
                },
            },
        }
    }

    /// `phi(e_d)` and `phi(-e_d)`.
    pub fn vertical_values(&self) -> (f64, f64) {
        let mut up = vec![0.0; self.dim];
        up[self.dim - 1] = 1.0;
        let down: Vec<f64> = up.iter().map(|c| -c).collect();
        (self.value(&up), self.value(&down))
    }

    pub fn gradient(&self, nu: &[f64]) -> Result<Vec<f64>, AnisotropyError> {
        self.eval(nu)?;
        let not_diff = || AnisotropyError::NotDifferentiable(nu.to_vec());
        if nu.iter().all(|&c| c == 0.0) {
            return Err(not_diff());
        }
        match &self.kind {
            AnisotropyKind::PNorm { p } => {
                let p = *p;
                if p == 1.0 || p.is_infinite() {
                    return Err(not_diff());
                }
                let norm = pnorm_value(p, nu);
                Ok(nu
                    .iter()
                    .map(|&c| {
                        if p == 2.0 {
                            c / norm
                        } else {
                            c.signum() * (c.abs() / norm).powf(p - 1.0)
                        }
                    })
                    .collect())
            }
            AnisotropyKind::WeightedNorm { matrix } => {
                let a_nu: Vec<f64> = matrix.iter().map(|row| dot(row, nu)).collect();
                let norm = a_nu.iter().map(|c| c * c).sum::<f64>().sqrt();
                Ok((0..self.dim)
                    .map(|j| (0..self.dim).map(|i| matrix[i][j] * a_nu[i]).sum::<f64>() / norm)
                    .collect())
            }
            AnisotropyKind::SupportOfPolytope { vertices: pts }
            | AnisotropyKind::CrystallineMax { generators: pts } => {
                let best = self.value(nu);
                let scale = nu.iter().map(|c| c * c).sum::<f64>().sqrt();
                let active: Vec<&Vec<f64>> =
                    pts.iter().filter(|v| best - dot(v, nu) <= 1e-12 * scale).collect();
                let first = active[0];
                if active.iter().all(|v| v.iter().zip(first).all(|(a, b)| (a - b).abs() <= 1e-12)) {
                    Ok(first.clone())
                } else {
                    Err(not_diff())
                }
            }
            AnisotropyKind::Modified { base, modification } => {
                if modification.lambda().is_some() && is_downward_ray(nu).is_some() {
                    return Err(not_diff());
                }
                let mut g = base.gradient(nu)?;
                if let Some(x0) = modification.x0() {
                    g.iter_mut().zip(x0).for_each(|(gi, xi)| *gi -= xi);
                }
                Ok(g)
            }
        }
    }

    fn modified(base: Anisotropy, modification: Modification) -> Anisotropy {
        let dim = base.dim;
        Anisotropy {
            kind: AnisotropyKind::Modified { base: Box::new(base), modification },
            dim,
            coercivity: 0.0,
        }
    }

    /// Serializable description of this density.
    pub fn to_spec(&self) -> AnisotropySpec {
        let base = match &self.base().kind {
            AnisotropyKind::PNorm { p } => BaseSpec::Pnorm { p: *p, dim: self.dim },
            AnisotropyKind::WeightedNorm { matrix } => BaseSpec::Weighted { a: matrix.clone() },
            AnisotropyKind::SupportOfPolytope { vertices } => {
                BaseSpec::Support { vertices: vertices.clone() }
            }
            AnisotropyKind::CrystallineMax { generators } => {
                BaseSpec::Crystalline { w: generators.clone() }
            }
            AnisotropyKind::Modified { .. } => unreachable!("base is never modified"),
        };
        let m = self.modification();
        AnisotropySpec {
            base,
            lambda_mod: m.and_then(|m| m.lambda()),
            shift: m.and_then(|m| m.x0().map(|x| x.to_vec())),
        }
    }
}

fn pnorm_value(p: f64, nu: &[f64]) -> f64 {
    if p == 1.0 {
        nu.iter().map(|c| c.abs()).sum()
    } else if p == 2.0 {
        if nu.len() == 2 {
            nu[0].hypot(nu[1])
        } else {
            nu.iter().map(|c| c * c).sum::<f64>().sqrt()
        }
    } else if p.is_infinite() {
        nu.iter().map(|c| c.abs()).fold(0.0, f64::max)
    } else {
        let m = nu.iter().map(|c| c.abs()).fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        m * nu.iter().map(|c| (c.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `phi_lambda`: `lambda * t` on the open ray `-t e_d`, `phi` elsewhere.
pub fn make_phi_lambda(phi: &Anisotropy, lambda: f64) -> Anisotropy {
    let base_min = phi.base().sampled_minimum(default_samples(phi.dim));
    let (base, modification) = match phi.modification() {
        None | Some(Modification::Lambda { .. }) => {
            (phi.base().clone(), Modification::Lambda { lambda })
        }
        Some(Modification::Shifted { x0 }) | Some(Modification::Both { x0, .. }) => {
            (phi.base().clone(), Modification::Both { lambda, x0: x0.clone() })
        }
    };
    let mut out = Anisotropy::modified(base, modification);
    out.coercivity = match out.modification() {
        Some(Modification::Lambda { .. }) => base_min.min(lambda),
        _ => out.sampled_minimum(default_samples(out.dim)).min(lambda),
    };
    out
}

/// `phi_x0(nu) = phi(nu) - x0 . nu`; rejects `x0` outside the interior of the Wulff shape.
pub fn make_phi_shifted(phi: &Anisotropy, x0: &[f64]) -> Result<Anisotropy, AnisotropyError> {
    make_phi_shifted_with(phi, x0, default_samples(phi.dim))
}

pub fn make_phi_shifted_with(
    phi: &Anisotropy,
    x0: &[f64],
    samples: usize,
) -> Result<Anisotropy, AnisotropyError> {
    if x0.len() != phi.dim {
        return Err(AnisotropyError::DimensionMismatch { expected: phi.dim, got: x0.len() });
    }
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(AnisotropyError::NonFinite(x0.to_vec()));
    }
    let d = phi.dim;
    let add = |a: &[f64]| -> Vec<f64> { a.iter().zip(x0).map(|(u, v)| u + v).collect() };
    // (phi_lambda)_x0 coincides with (phi_x0)_{lambda + x0_d}
    let modification = match phi.modification() {
        None => Modification::Shifted { x0: x0.to_vec() },
        Some(Modification::Shifted { x0: y }) => Modification::Shifted { x0: add(y) },
        Some(Modification::Lambda { lambda }) => {
            Modification::Both { lambda: lambda + x0[d - 1], x0: x0.to_vec() }
        }
        Some(Modification::Both { lambda, x0: y }) => {
            Modification::Both { lambda: lambda + x0[d - 1], x0: add(y) }
        }
    };
    // interior test is done on the convex part phi_{x0 total}
    let total_x0 = modification.x0().expect("shifted").to_vec();
    let convex_part = Anisotropy::modified(
        phi.base().clone(),
        Modification::Shifted { x0: total_x0 },
    );
    let eps = convex_part.sampled_minimum(samples);
    if !(eps > 0.0) {
        return Err(AnisotropyError::NotInterior(eps));
    }
    let mut out = Anisotropy::modified(phi.base().clone(), modification);
    out.coercivity = match out.modification() {
        Some(Modification::Both { lambda, .. }) => eps.min(*lambda),
        _ => eps,
    };
    Ok(out)
}

/// Finds `x0` in the interior of the Wulff shape such that `lambda' = lambda + x0_d` lies in
/// `(0, phi_x0(-e_d))`, searching along the segment from the origin towards the highest point
/// of the Wulff shape. Returns `x0` and `lambda'`.
pub fn choose_x0(phi: &Anisotropy, lambda: f64) -> Result<(Vec<f64>, f64), AnisotropyError> {
    const MARGIN: f64 = 1e-6;
    let d = phi.dim;
    let (up, down) = phi.vertical_values();
    if !(lambda > -up && lambda < down) {
        return Err(AnisotropyError::Regime { lambda, lower: -up, upper: down });
    }
    let origin = vec![0.0; d];
    if lambda >= MARGIN && down - lambda >= MARGIN {
        return Ok((origin, lambda));
    }
    let n = if d == 2 { 1024 } else { 2048 };
    let wulff = convex::build_wulff(phi.base(), n)
        .map_err(|e| AnisotropyError::Geometry(e.to_string()))?;
    let mut e_d = vec![0.0; d];
    e_d[d - 1] = 1.0;
    let (_, argmax) = wulff.support_function(&e_d);
    let verts = wulff.vertices();
    let mut top = vec![0.0; d];
    for &i in &argmax {
        for k in 0..d {
            top[k] += verts[i][k] / argmax.len() as f64;
        }
    }
    // the polytope top is phi(e_d) up to sampling; use the exact value for the height
    top[d - 1] = up;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let t = 0.5 * (lo + hi);
        let x0: Vec<f64> = top.iter().map(|c| t * c).collect();
        let lambda_p = lambda + x0[d - 1];
        if lambda_p < MARGIN {
            lo = t;
            continue;
        }
        match make_phi_shifted(phi.base(), &x0) {
            Ok(shifted) => {
                let eps = shifted.coercivity();
                let (_, down_p) = shifted.vertical_values();
                if eps >= MARGIN && down_p - lambda_p >= MARGIN {
                    return Ok((x0, lambda_p));
                }
                hi = t;
            }
            Err(_) => hi = t,
        }
    }
    Err(AnisotropyError::Regime { lambda, lower: -up, upper: down })
}

/// Support function of `w` as a density: the convex envelope `phi**` when `w` is the Wulff
/// shape of `phi`.
pub fn convex_envelope(_phi: &Anisotropy, w: &ConvexPolytope) -> Result<Anisotropy, AnisotropyError> {
    if w.is_empty() {
        return Err(AnisotropyError::EmptyPolytope);
    }
    let vertices = w.vertices();
    let dim = w.dim();
    let out = Anisotropy::finish(AnisotropyKind::SupportOfPolytope { vertices }, dim);
    Ok(out)
}

fn ser_p<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

fn de_p<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum PValue {
        Num(f64),
        Str(String),
    }
    match PValue::deserialize(d)? {
        PValue::Num(v) => Ok(v),
        PValue::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(f64::INFINITY),
            other => other.parse().map_err(serde::de::Error::custom),
        },
    }
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseSpec {
    Pnorm {
        #[serde(serialize_with = "ser_p", deserialize_with = "de_p")]
        p: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Weighted {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    Support {
        vertices: Vec<Vec<f64>>,
    },
    Crystalline {
        w: Vec<Vec<f64>>,
    },
}

/// JSON form: `{"kind": "pnorm", "p": 2.0, "dim": 2}` plus optional `lambda_mod` and `shift`.
/// When both are present the shift is applied first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropySpec {
    #[serde(flatten)]
    pub base: BaseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_mod: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
}

impl AnisotropySpec {
    pub fn build(&self) -> Result<Anisotropy, AnisotropyError> {
        let mut phi = match &self.base {
            BaseSpec::Pnorm { p, dim } => Anisotropy::pnorm(*p, *dim)?,
            BaseSpec::Weighted { a } => Anisotropy::weighted(a.clone())?,
            BaseSpec::Support { vertices } => Anisotropy::support(vertices.clone())?,
            BaseSpec::Crystalline { w } => Anisotropy::crystalline(w.clone())?,
        };
        if let Some(x0) = &self.shift {
            phi = make_phi_shifted(&phi, x0)?;
        }
        if let Some(lambda) = self.lambda_mod {
            phi = make_phi_lambda(&phi, lambda);
        }
        Ok(phi)
    }
}

impl Serialize for Anisotropy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Anisotropy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        AnisotropySpec::deserialize(d)?.build().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l1() -> Anisotropy {
        Anisotropy::pnorm(1.0, 2).unwrap()
    }

    fn l2() -> Anisotropy {
        Anisotropy::euclidean(2)
    }

    fn square_generators() -> Vec<Vec<f64>> {
        vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(l1().eval(&[1.0, 1.0]).unwrap(), 2.0);
        let mod_l2 = make_phi_lambda(&l2(), 0.5);
        assert_eq!(mod_l2.eval(&[0.0, -2.0]).unwrap(), 1.0);
        // independent enumeration of the four dot products
        let w = square_generators();
        let brute = w.iter().map(|g| g[0] * 1.0 + g[1] * 0.0).fold(f64::MIN, f64::max);
        let cryst = Anisotropy::crystalline(w).unwrap();
        assert_eq!(cryst.eval(&[1.0, 0.0]).unwrap(), brute);
        assert_eq!(brute, 1.0);
    }

    #[test]
    fn eval_rejects_non_finite_and_zero_is_zero() {
        assert!(matches!(l2().eval(&[f64::NAN, 1.0]), Err(AnisotropyError::NonFinite(_))));
        assert!(matches!(
            l2().eval(&[1.0, 0.0, 0.0]),
            Err(AnisotropyError::DimensionMismatch { .. })
        ));
        assert_eq!(l2().eval(&[0.0, 0.0]).unwrap(), 0.0);
        let cryst = Anisotropy::crystalline(square_generators()).unwrap();
        assert_eq!(cryst.eval(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(l2().gradient(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        let g = l2().gradient(&[3.0, 4.0]).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let w = Anisotropy::weighted(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = w.gradient(&[0.0, 1.0]).unwrap();
        // central finite differences, h = 1e-6
        let h = 1e-6;
        let fd = [
            (w.value(&[h, 1.0]) - w.value(&[-h, 1.0])) / (2.0 * h),
            (w.value(&[0.0, 1.0 + h]) - w.value(&[0.0, 1.0 - h])) / (2.0 * h),
        ];
        assert!((g[0] - fd[0]).abs() < 1e-8 && (g[1] - fd[1]).abs() < 1e-8);
        assert!((g[0] - 0.0).abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_not_differentiable_cases() {
        assert!(matches!(l1().gradient(&[1.0, 2.0]), Err(AnisotropyError::NotDifferentiable(_))));
        let inf = Anisotropy::pnorm(f64::INFINITY, 2).unwrap();
        assert!(inf.gradient(&[1.0, 2.0]).is_err());
        let cryst = Anisotropy::crystalline(square_generators()).unwrap();
        // ridge direction: two generators active
        assert!(cryst.gradient(&[1.0, 0.0]).is_err());
        assert_eq!(cryst.gradient(&[1.0, 0.5]).unwrap(), vec![1.0, 1.0]);
        assert!(l2().gradient(&[0.0, 0.0]).is_err());
        let lam = make_phi_lambda(&l2(), 0.3);
        assert!(lam.gradient(&[0.0, -1.0]).is_err());
        assert!(lam.gradient(&[0.1, -1.0]).is_ok());
    }

    #[test]
    fn lambda_modification_examples() {
        let m = make_phi_lambda(&l2(), 0.5);
        assert_eq!(m.eval(&[0.0, -1.0]).unwrap(), 0.5);
        let off = m.eval(&[1e-9, -1.0]).unwrap();
        assert_eq!(off, (1e-9f64).hypot(1.0));
        let n = make_phi_lambda(&l1(), -0.25);
        assert_eq!(n.eval(&[0.0, -3.0]).unwrap(), -0.75);
        assert!(!n.is_coercive());
        assert!(!n.is_convex());
        assert!((m.coercivity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relambda_replaces_previous_value() {
        let m = make_phi_lambda(&make_phi_lambda(&l2(), 0.5), 0.2);
        assert_eq!(m.value(&[0.0, -1.0]), 0.2);
        assert_eq!(m.base(), &l2());
    }

    #[test]
    fn shift_examples() {
        let unchanged = make_phi_shifted(&l2(), &[0.0, 0.0]).unwrap();
        assert_eq!(unchanged.value(&[0.3, -0.4]), l2().value(&[0.3, -0.4]));
        let s = make_phi_shifted(&l2(), &[0.0, 0.5]).unwrap();
        assert_eq!(s.eval(&[0.0, -1.0]).unwrap(), 1.5);
        // brute-force epsilon over 4096 directions
        let x0 = [0.5, 0.5];
        let brute = (0..4096)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 4096.0;
                let nu = [t.cos(), t.sin()];
                nu[0].abs() + nu[1].abs() - (x0[0] * nu[0] + x0[1] * nu[1])
            })
            .fold(f64::INFINITY, f64::min);
        let s1 = make_phi_shifted(&l1(), &x0).unwrap();
        assert!((s1.coercivity() - brute).abs() < 1e-12);
        assert!((brute - 0.5).abs() < 1e-9);
        assert!(matches!(
            make_phi_shifted(&l2(), &[0.0, 1.0]),
            Err(AnisotropyError::NotInterior(_))
        ));
    }

    #[test]
    fn shift_then_lambda_matches_direct_formula() {
        let x0 = [0.1, 0.3];
        let both = make_phi_lambda(&make_phi_shifted(&l2(), &x0).unwrap(), 0.4);
        assert_eq!(both.value(&[0.0, -2.0]), 0.8);
        let nu = [0.3, -0.7];
        let direct = l2().value(&nu) - (x0[0] * nu[0] + x0[1] * nu[1]);
        assert_eq!(both.value(&nu), direct);
        // shifting a lambda-modified density moves the ray value by x0_d
        let other = make_phi_shifted(&make_phi_lambda(&l2(), 0.1), &x0).unwrap();
        assert!((other.value(&[0.0, -1.0]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn choose_x0_examples() {
        let (x0, lp) = choose_x0(&l2(), 0.5).unwrap();
        assert_eq!(x0, vec![0.0, 0.0]);
        assert_eq!(lp, 0.5);

        let (x0, lp) = choose_x0(&l2(), -0.5).unwrap();
        assert!(x0[0].abs() < 1e-12);
        assert!(x0[1] > 0.5 && x0[1] < 1.0);
        assert!((x0[1] - 0.75).abs() < 1e-12);
        assert!((lp - 0.25).abs() < 1e-12);
        let shifted = make_phi_shifted(&l2(), &x0).unwrap();
        let down = shifted.value(&[0.0, -1.0]);
        assert!(lp > 0.0 && lp < down && (down - (1.0 + x0[1])).abs() < 1e-15);

        let (x0, lp) = choose_x0(&l1(), -0.999).unwrap();
        assert!(x0[0].abs() < 1e-12 && x0[1] > 0.999 && x0[1] < 1.0);
        assert!(lp > 0.0);
        assert!(make_phi_shifted(&l1(), &x0).is_ok());

        assert!(matches!(choose_x0(&l2(), 1.0), Err(AnisotropyError::Regime { .. })));
        assert!(matches!(choose_x0(&l2(), -1.0), Err(AnisotropyError::Regime { .. })));
    }

    #[test]
    fn spec_roundtrip() {
        let json = r#"{"kind":"pnorm","p":"inf","dim":3}"#;
        let phi: Anisotropy = serde_json::from_str(json).unwrap();
        assert_eq!(phi.dim(), 3);
        assert_eq!(phi.value(&[1.0, -3.0, 2.0]), 3.0);
        let json = r#"{"kind":"weighted","A":[[2,0],[0,1]],"shift":[0.1,0.2],"lambda_mod":0.3}"#;
        let phi: Anisotropy = serde_json::from_str(json).unwrap();
        assert_eq!(phi.modification(), Some(&Modification::Both { lambda: 0.3, x0: vec![0.1, 0.2] }));
        let back: Anisotropy = serde_json::from_str(&serde_json::to_string(&phi).unwrap()).unwrap();
        assert_eq!(back.value(&[0.4, 0.5]), phi.value(&[0.4, 0.5]));
        assert_eq!(back.value(&[0.0, -0.5]), phi.value(&[0.0, -0.5]));
        assert!(serde_json::from_str::<Anisotropy>(r#"{"kind":"weighted","A":[[1,1],[1,1]]}"#).is_err());
    }

    #[test]
    fn non_coercive_support_rejected() {
        // origin on the boundary of the polytope
        let r = Anisotropy::support(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(r, Err(AnisotropyError::NotCoercive(_))));
        assert!(Anisotropy::pnorm(0.5, 2).is_err());
        assert!(Anisotropy::pnorm(2.0, 4).is_err());
    }

    fn all_kinds() -> &'static [Anisotropy] {
        static KINDS: std::sync::OnceLock<Vec<Anisotropy>> = std::sync::OnceLock::new();
        KINDS.get_or_init(build_kinds)
    }

    fn build_kinds() -> Vec<Anisotropy> {
        let base = vec![
            l1(),
            l2(),
            Anisotropy::pnorm(3.5, 2).unwrap(),
            Anisotropy::pnorm(f64::INFINITY, 2).unwrap(),
            Anisotropy::weighted(vec![vec![2.0, 0.3], vec![0.1, 1.0]]).unwrap(),
            Anisotropy::crystalline(square_generators()).unwrap(),
            Anisotropy::support(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -0.5]]).unwrap(),
            Anisotropy::pnorm(1.7, 3).unwrap(),
        ];
        let mut out = base.clone();
        out.push(make_phi_lambda(&l2(), 0.4));
        out.push(make_phi_lambda(&l1(), -0.7));
        out.push(make_phi_shifted(&l2(), &[0.2, -0.3]).unwrap());
        out.push(make_phi_lambda(&make_phi_shifted(&l1(), &[0.2, 0.3]).unwrap(), 0.6));
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn homogeneity(k in 0usize..12, a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
                       t in 1e-6f64..10.0, ray in proptest::bool::ANY) {
            let phi = &all_kinds()[k];
            let mut nu = if phi.dim() == 2 { vec![a, b] } else { vec![a, b, c] };
            if ray {
                let d = nu.len();
                nu.iter_mut().take(d - 1).for_each(|x| *x = 0.0);
                nu[d - 1] = -nu[d - 1].abs() - 0.1;
            }
            let scaled: Vec<f64> = nu.iter().map(|x| x * t).collect();
            let lhs = phi.value(&scaled);
            let rhs = t * phi.value(&nu);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn euler_identity(k in 0usize..12, a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let phi = &all_kinds()[k];
            let nu = if phi.dim() == 2 { vec![a, b] } else { vec![a, b, c] };
            if let Ok(g) = phi.gradient(&nu) {
                let lhs: f64 = g.iter().zip(&nu).map(|(x, y)| x * y).sum();
                prop_assert!((lhs - phi.value(&nu)).abs() <= 1e-10 * (1.0 + lhs.abs()));
            }
        }

        #[test]
        fn shift_identity(a in -1.0f64..1.0, b in -1.0f64..1.0, x in -0.4f64..0.4, y in -0.4f64..0.4) {
            let phi = l2();
            let s = make_phi_shifted(&phi, &[x, y]).unwrap();
            let nu = [a, b];
            let lhs = s.value(&nu) + x * a + y * b;
            prop_assert!((lhs - phi.value(&nu)).abs() <= 1e-15 * 4.0);
        }

        #[test]
        fn lambda_locality(a in -5.0f64..5.0, b in -5.0f64..5.0, lambda in -2.0f64..2.0) {
            prop_assume!(a != 0.0 || b >= 0.0);
            let m = make_phi_lambda(&l1(), lambda);
            prop_assert_eq!(m.value(&[a, b]), l1().value(&[a, b]));
        }

        #[test]
        fn midpoint_convexity(k in 0usize..8, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
                              d in -3.0f64..3.0, e in -3.0f64..3.0, f in -3.0f64..3.0) {
            let phi = &all_kinds()[k];
            let (u, v) = if phi.dim() == 2 { (vec![a, b], vec![c, d]) } else { (vec![a, b, c], vec![d, e, f]) };
            let mid: Vec<f64> = u.iter().zip(&v).map(|(x, y)| 0.5 * (x + y)).collect();
            prop_assert!(phi.value(&mid) <= 0.5 * (phi.value(&u) + phi.value(&v)) + 1e-12);
        }

        #[test]
        fn coercivity_lower_bound(k in 0usize..8, t in 0.0f64..std::f64::consts::TAU, z in -1.0f64..1.0) {
            let phi = &all_kinds()[k];
            let nu = if phi.dim() == 2 {
                vec![t.cos(), t.sin()]
            } else {
                let r = (1.0 - z * z).sqrt();
                vec![r * t.cos(), r * t.sin(), z]
            };
            // sampled estimate may overshoot the true minimum slightly
            prop_assert!(phi.value(&nu) >= phi.coercivity() * (1.0 - 1e-3));
        }
    }
}
