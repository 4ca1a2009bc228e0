//! Asymmetry index, energy deficit and empirical stability constants.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anisotropy::Anisotropy;
use crate::convex::{
    build_wulff, classify_regime, winterbottom, winterbottom_with_volume, GeometryError, Regime,
};
use crate::geom::{clip_ring_convex, signed_area, Vec2};
use crate::shape::{energy_f, ShapeError, SubstrateShape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("lambda = {lambda} is outside the partial wetting interval ({lower}, {upper})")]
    Regime { lambda: f64, lower: f64, upper: f64 },
    #[error("volume mismatch: expected {expected}, got {got}")]
    VolumeMismatch { expected: f64, got: f64 },
    #[error("only planar shapes are supported")]
    Unsupported,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum Backend {
    /// Intersection area by clipping against a convex polygon.
    Exact,
    /// Scanline rasterization with row height `h` (exact along each row).
    Raster { h: f64 },
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Raster { h } => write!(f, "raster(h={h:e})"),
        }
    }
}

fn rings_of(e: &SubstrateShape) -> Result<Vec<Vec<Vec2>>, StabilityError> {
    let polys = e.polygons().ok_or(StabilityError::Unsupported)?;
    Ok(polys
        .iter()
        .flat_map(|p| std::iter::once(p.outer().to_vec()).chain(p.holes().iter().cloned()))
        .collect())
}

fn shifted(rings: &[Vec<Vec2>], tau: f64) -> Vec<Vec<Vec2>> {
    rings.iter().map(|r| r.iter().map(|&p| Vec2::new(p.x + tau, p.y)).collect()).collect()
}

fn clipped_area(rings: &[Vec<Vec2>], window: &[Vec2]) -> f64 {
    rings.iter().map(|r| signed_area(&clip_ring_convex(r, window))).sum()
}

/// Even-odd interval decomposition of the rings along the line `y = yc`.
fn row_intervals(rings: &[Vec<Vec2>], yc: f64, xs: &mut Vec<f64>) -> Vec<(f64, f64)> {
    xs.clear();
    for r in rings {
        let n = r.len();
        for i in 0..n {
            let (a, b) = (r[i], r[(i + 1) % n]);
            if (a.y > yc) != (b.y > yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

fn overlap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            s += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    s
}

fn raster_intersection(a: &[Vec<Vec2>], b: &[Vec<Vec2>], h: f64) -> f64 {
    let ys = a.iter().chain(b).flatten().map(|p| p.y);
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), y| (l.min(y), u.max(y)));
    let rows = ((hi - lo) / h).ceil().max(1.0) as usize;
    let hh = (hi - lo) / rows as f64;
    let mut xs = Vec::new();
    let mut total = 0.0;
    for k in 0..rows {
        let yc = lo + (k as f64 + 0.5) * hh;
        let ia = row_intervals(a, yc, &mut xs);
        let ib = row_intervals(b, yc, &mut xs);
        total += overlap(&ia, &ib) * hh;
    }
    total
}

/// `|A| + |B| - 2|A ∩ B|` and the backend used. The intersection is exact when either shape
/// is convex, otherwise rasterized in rows of height `h`; the raster error is at most
/// `4h (per(A) + per(B))`.
pub fn symmetric_difference_area(
    a: &SubstrateShape,
    b: &SubstrateShape,
    h: f64,
) -> Result<(f64, Backend), StabilityError> {
    let (ra, rb) = (rings_of(a)?, rings_of(b)?);
    let (inter, backend) = if b.is_convex() {
        (clipped_area(&ra, b.outer().unwrap()), Backend::Exact)
    } else if a.is_convex() {
        (clipped_area(&rb, a.outer().unwrap()), Backend::Exact)
    } else {
        if !(h > 0.0) {
            return Err(ShapeError::InvalidArgument(format!("resolution must be positive, got {h}")).into());
        }
        (raster_intersection(&ra, &rb, h), Backend::Raster { h })
    };
    Ok(((a.volume() + b.volume() - 2.0 * inter).max(0.0), backend))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymmetry {
    pub value: f64,
    /// Horizontal translation applied to `E` that attains the minimum.
    pub tau_star: f64,
    pub backend: Backend,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    /// Directions used to build the reference Winterbottom polygon.
    pub n_directions: usize,
    /// Raster row height as a fraction of the diameter, when rasterization is needed.
    pub raster_fraction: f64,
    /// Absolute tolerance of the translation search as a fraction of the diameter.
    pub tau_tolerance: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { n_directions: 1024, raster_fraction: 1.0 / 2000.0, tau_tolerance: 1e-9 }
    }
}

/// The Winterbottom shape of volume `v` as a polygon, and its energy.
pub fn reference_shape(
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
    n_directions: usize,
) -> Result<(SubstrateShape, f64), StabilityError> {
    let label = classify_regime(phi, lambda);
    if label.regime != Regime::PartialWetting {
        return Err(StabilityError::Regime { lambda, lower: label.lower, upper: label.upper });
    }
    let w = build_wulff(phi, n_directions)?;
    let wv = winterbottom_with_volume(&winterbottom(&w, lambda), lambda, v)?;
    let shape = SubstrateShape::from_polytope(&wv)?;
    let f = energy_f(&shape, phi, lambda)?.total;
    Ok((shape, f))
}

/// `min_tau |(E + tau) Δ W|` over horizontal `tau`, by a coarse scan followed by golden-section
/// refinement.
pub fn asymmetry_to(
    e: &SubstrateShape,
    reference: &SubstrateShape,
    opts: &StabilityOptions,
) -> Result<Asymmetry, StabilityError> {
    let re = rings_of(e)?;
    let rw = rings_of(reference)?;
    let diam = e.diameter().max(reference.diameter());
    let h = diam * opts.raster_fraction;
    let (window, window_is_ref): (Option<&[Vec2]>, bool) = if reference.is_convex() {
        (reference.outer(), true)
    } else if e.is_convex() {
        (e.outer(), false)
    } else {
        (None, false)
    };
    let total = e.volume() + reference.volume();
    let f = |tau: f64| -> f64 {
        let inter = match window {
            Some(win) if window_is_ref => clipped_area(&shifted(&re, tau), win),
            Some(win) => {
                let moved: Vec<Vec2> = win.iter().map(|&p| Vec2::new(p.x + tau, p.y)).collect();
                clipped_area(&rw, &moved)
            }
            None => raster_intersection(&shifted(&re, tau), &rw, h),
        };
        (total - 2.0 * inter).max(0.0)
    };
    let backend = if window.is_some() { Backend::Exact } else { Backend::Raster { h } };
    let (elo, ehi) = e.bbox();
    let (wlo, whi) = reference.bbox();
    let (a, b) = (wlo[0] - ehi[0], whi[0] - elo[0]);
    const COARSE: usize = 64;
    let step = (b - a) / COARSE as f64;
    let mut best = (f(a), a);
    for k in 1..=COARSE {
        let t = a + step * k as f64;
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let tol = opts.tau_tolerance * diam;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let t = 0.5 * (lo + hi);
    let mut out = (f(t), t);
    if best.0 < out.0 {
        out = best;
    }
    Ok(Asymmetry { value: out.0, tau_star: out.1, backend })
}

/// Asymmetry of `E` with respect to the Winterbottom shape of volume `v`.
pub fn asymmetry(
    e: &SubstrateShape,
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
) -> Result<Asymmetry, StabilityError> {
    if e.dim() != 2 {
        return Err(StabilityError::Unsupported);
    }
    if (e.volume() - v).abs() > 1e-9 * v.max(1.0) {
        return Err(StabilityError::VolumeMismatch { expected: v, got: e.volume() });
    }
    let opts = StabilityOptions::default();
    let (w, _) = reference_shape(phi, lambda, v, opts.n_directions)?;
    asymmetry_to(e, &w, &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub family: String,
    pub param: f64,
    pub asymmetry: f64,
    pub deficit: f64,
    /// `(asymmetry / v)^2 * F(W) / deficit`, absent when the deficit is below 1e-12.
    pub ratio: Option<f64>,
    pub tau_star: f64,
    pub backend: Backend,
}

/// Deficits at or below this are excluded from ratio statistics.
pub const DEFICIT_FLOOR: f64 = 1e-12;

/// Builds a record for `E` against a reference of energy `f_ref`.
pub fn stability_record(
    family: &str,
    param: f64,
    e: &SubstrateShape,
    reference: &SubstrateShape,
    phi: &Anisotropy,
    lambda: f64,
    f_ref: f64,
    opts: &StabilityOptions,
) -> Result<StabilityRecord, StabilityError> {
    let v = reference.volume();
    let a = asymmetry_to(e, reference, opts)?;
    let deficit = energy_f(e, phi, lambda)?.total - f_ref;
    let ratio = if deficit > DEFICIT_FLOOR { Some((a.value / v).powi(2) * f_ref / deficit) } else { None };
    Ok(StabilityRecord {
        family: family.to_string(),
        param,
        asymmetry: a.value,
        deficit,
        ratio,
        tau_star: a.tau_star,
        backend: a.backend,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// `x -> t x`, `y -> y / t` about the contact centre, `t` from `t_min` to `t_max`.
    Rect { t_min: f64, t_max: f64 },
    /// Every vertex moved by `eps` times a fixed random vector; grounded vertices move
    /// horizontally only. `eps` is swept geometrically from `eps_min` to `eps_max`.
    Noise { eps_min: f64, eps_max: f64, seed: u64 },
    /// `x -> x + s y`, `s` from `s_min` to `s_max`.
    Shear { s_min: f64, s_max: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Rect { .. } => "rect",
            Family::Noise { .. } => "noise",
            Family::Shear { .. } => "shear",
        }
    }

    pub fn rect() -> Self {
        Family::Rect { t_min: 1.01, t_max: 2.0 }
    }

    pub fn noise(seed: u64) -> Self {
        Family::Noise { eps_min: 1e-4, eps_max: 5e-2, seed }
    }

    pub fn shear() -> Self {
        Family::Shear { s_min: 0.01, s_max: 1.0 }
    }

    /// Parameter values of an `n`-point sweep, increasing.
    pub fn params(&self, n: usize) -> Vec<f64> {
        let lin = |a: f64, b: f64| -> Vec<f64> {
            if n == 1 {
                return vec![a];
            }
            (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
        };
        match *self {
            Family::Rect { t_min, t_max } => lin(t_min, t_max),
            Family::Shear { s_min, s_max } => lin(s_min, s_max),
            Family::Noise { eps_min, eps_max, .. } => {
                lin(eps_min.ln(), eps_max.ln()).into_iter().map(f64::exp).collect()
            }
        }
    }
}

fn contact_anchor(ring: &[Vec2]) -> f64 {
    let ground: Vec<f64> = ring.iter().filter(|p| p.y == 0.0).map(|p| p.x).collect();
    if ground.is_empty() {
        crate::geom::ring_centroid(ring).x
    } else {
        let lo = ground.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ground.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Applies one member of `family` to the reference polygon; `None` if the result is not a
/// valid shape.
pub fn perturb(reference: &SubstrateShape, family: &Family, param: f64) -> Option<SubstrateShape> {
    let ring = reference.outer()?;
    let x0 = contact_anchor(ring);
    let moved: Vec<Vec2> = match *family {
        Family::Rect { .. } => ring.iter().map(|p| Vec2::new(x0 + (p.x - x0) * param, p.y / param)).collect(),
        Family::Shear { .. } => ring.iter().map(|p| Vec2::new(p.x + param * p.y, p.y)).collect(),
        Family::Noise { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = reference.diameter();
            ring.iter()
                .map(|p| {
                    let dx: f64 = rng.gen_range(-1.0..1.0);
                    let dy: f64 = rng.gen_range(-1.0..1.0);
                    if p.y == 0.0 {
                        Vec2::new(p.x + param * scale * dx, 0.0)
                    } else {
                        Vec2::new(p.x + param * scale * dx, (p.y + param * scale * dy).max(0.0))
                    }
                })
                .collect()
        }
    };
    let e = SubstrateShape::polygon(moved).ok()?;
    let r = (reference.volume() / e.volume()).sqrt();
    crate::shape::rescale(&e, r, &[x0, 0.0]).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<StabilityRecord>,
    /// Largest finite ratio.
    pub sup_ratio: Option<f64>,
    /// Least-squares slope of `log(asymmetry^2)` against `log(deficit)` over the half of the
    /// records with the smallest deficits.
    pub small_slope: Option<f64>,
    pub reference_energy: f64,
}

pub fn stability_sweep(
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
    family: &Family,
    n: usize,
    opts: &StabilityOptions,
) -> Result<SweepResult, StabilityError> {
    let (reference, f_ref) = reference_shape(phi, lambda, v, opts.n_directions)?;
    sweep_against(&reference, f_ref, phi, lambda, family, &family.params(n), opts)
}

/// Sweep with an explicit reference polygon and parameter list; runs in parallel.
pub fn sweep_against(
    reference: &SubstrateShape,
    f_ref: f64,
    phi: &Anisotropy,
    lambda: f64,
    family: &Family,
    params: &[f64],
    opts: &StabilityOptions,
) -> Result<SweepResult, StabilityError> {
    let results: Vec<Option<Result<StabilityRecord, StabilityError>>> = params
        .par_iter()
        .map(|&t| {
            let e = match perturb(reference, family, t) {
                Some(e) => e,
                None => {
                    warn!("{} perturbation at {t} is degenerate, skipped", family.name());
                    return None;
                }
            };
            Some(stability_record(family.name(), t, &e, reference, phi, lambda, f_ref, opts))
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    for r in results.into_iter().flatten() {
        records.push(r?);
    }
    for r in &records {
        debug!("{} {} asym={:e} deficit={:e} ratio={:?}", r.family, r.param, r.asymmetry, r.deficit, r.ratio);
    }
    let sup_ratio = records.iter().filter_map(|r| r.ratio).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    Ok(SweepResult { small_slope: small_half_slope(&records), sup_ratio, records, reference_energy: f_ref })
}

/// Slope of `log(asymmetry^2)` against `log(deficit)` over the smaller-deficit half of the
/// records that have a ratio.
pub fn small_half_slope(records: &[StabilityRecord]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.ratio.is_some() && r.asymmetry > 0.0)
        .map(|r| (r.deficit.ln(), (r.asymmetry * r.asymmetry).ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = &pts[..pts.len().div_ceil(2)];
    if half.len() < 2 {
        return None;
    }
    let n = half.len() as f64;
    let mx = half.iter().map(|p| p.0).sum::<f64>() / n;
    let my = half.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = half.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = half.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> SubstrateShape {
        SubstrateShape::polygon(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
        .unwrap()
    }

    #[test]
    fn symmetric_difference_examples() {
        let a = rect(0.0, 0.0, 1.0, 1.0);
        assert_eq!(symmetric_difference_area(&a, &a, 1e-3).unwrap().0, 0.0);
        let far = rect(5.0, 0.0, 6.0, 1.0);
        assert_eq!(symmetric_difference_area(&a, &far, 1e-3).unwrap().0, 2.0);
        let half = rect(0.5, 0.0, 1.5, 1.0);
        let (s, b) = symmetric_difference_area(&a, &half, 1e-3).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(b, Backend::Exact);
    }

    #[test]
    fn raster_agrees_with_exact_on_concave_shapes() {
        let l = |dx: f64| {
            SubstrateShape::polygon(vec![
                Vec2::new(dx, 0.0),
                Vec2::new(dx + 2.0, 0.0),
                Vec2::new(dx + 2.0, 1.0),
                Vec2::new(dx + 1.0, 1.0),
                Vec2::new(dx + 1.0, 2.0),
                Vec2::new(dx, 2.0),
            ])
            .unwrap()
        };
        let (a, b) = (l(0.0), l(0.3));
        let (s, backend) = symmetric_difference_area(&a, &b, 1e-3).unwrap();
        assert!(matches!(backend, Backend::Raster { .. }));
        // overlap of the two L shapes: 1.7 (bottom bar) + 0.7 (upright)
        let want = 3.0 + 3.0 - 2.0 * (1.7 + 0.7);
        assert!((s - want).abs() < 1e-9, "{s}");
    }

    #[test]
    fn exact_translate_has_zero_asymmetry() {
        let phi = Anisotropy::pnorm(1.0, 2).unwrap();
        let (w, _) = reference_shape(&phi, 0.5, 1.0, 64).unwrap();
        let e = w.translate_horizontal(&[0.7]).unwrap();
        let a = asymmetry(&e, &phi, 0.5, 1.0).unwrap();
        assert!(a.value < 1e-9, "{}", a.value);
        assert!((a.tau_star + 0.7).abs() < 1e-6);
    }

    #[test]
    fn rect_distortion_matches_closed_form() {
        let phi = Anisotropy::pnorm(1.0, 2).unwrap();
        let (w, f_ref) = reference_shape(&phi, 0.5, 1.0, 64).unwrap();
        assert!((f_ref - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        let opts = StabilityOptions::default();
        for &t in &[1.2, 1.5, 2.0] {
            let e = perturb(&w, &Family::rect(), t).unwrap();
            let r = stability_record("rect", t, &e, &w, &phi, 0.5, f_ref, &opts).unwrap();
            assert!((r.asymmetry - 2.0 * (1.0 - 1.0 / t)).abs() < 1e-9, "{t} {}", r.asymmetry);
            assert!((r.deficit - 3f64.sqrt() * (t - 1.0).powi(2) / t).abs() < 1e-12);
            assert!((r.ratio.unwrap() - 8.0 / t).abs() < 1e-8);
        }
        let same = perturb(&w, &Family::rect(), 1.0).unwrap();
        let r = stability_record("rect", 1.0, &same, &w, &phi, 0.5, f_ref, &opts).unwrap();
        assert!(r.deficit.abs() <= 1e-12);
        assert!(r.ratio.is_none());
    }

    #[test]
    fn translation_invariance() {
        let phi = Anisotropy::euclidean(2);
        let (w, _) = reference_shape(&phi, 0.2, 1.0, 256).unwrap();
        let e = perturb(&w, &Family::shear(), 0.3).unwrap();
        let opts = StabilityOptions::default();
        let a = asymmetry_to(&e, &w, &opts).unwrap();
        let moved = e.translate_horizontal(&[1.3]).unwrap();
        let b = asymmetry_to(&moved, &w, &opts).unwrap();
        assert!((a.value - b.value).abs() <= 2e-6 * e.diameter());
        assert!((a.tau_star - 1.3 - b.tau_star).abs() < 1e-4);
    }
}
