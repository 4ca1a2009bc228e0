//! Volume-constrained minimization of the substrate energy over polygons, and an exhaustive
//! polyomino oracle.

use std::collections::HashSet;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anisotropy::{Anisotropy, AnisotropySpec};
use crate::convex::{classify_regime, Regime};
use crate::geom::{is_simple, is_simple_near, ring_centroid, signed_area, Vec2};
use crate::shape::{edge_normal, pixel_energy, random_grounded_polygon, rescale, PixelShape, ShapeError, SubstrateShape};
use crate::stability::{asymmetry_to, reference_shape, StabilityError, StabilityOptions};

/// Largest cell count accepted by the polyomino oracle.
pub const MAX_ORACLE_CELLS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("lambda = {lambda} is outside the partial wetting interval ({lower}, {upper})")]
    Regime { lambda: f64, lower: f64, upper: f64 },
    #[error("need at least 8 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("invalid initial shape: {0}")]
    InvalidInit(String),
    #[error("polygon degenerated: {0}")]
    Degenerate(String),
    #[error("oracle supports 1..={MAX_ORACLE_CELLS} cells, got {0}")]
    CellCount(usize),
    #[error("only planar densities are supported")]
    Unsupported,
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

fn check_regime(phi: &Anisotropy, lambda: f64) -> Result<(), OptimizeError> {
    if phi.dim() != 2 {
        return Err(OptimizeError::Unsupported);
    }
    let label = classify_regime(phi, lambda);
    if label.regime != Regime::PartialWetting {
        return Err(OptimizeError::Regime { lambda, lower: label.lower, upper: label.upper });
    }
    Ok(())
}

fn edge_cost(phi: &Anisotropy, lambda: f64, a: Vec2, b: Vec2) -> f64 {
    let (n, len) = edge_normal(a, b);
    if a.y == 0.0 && b.y == 0.0 {
        lambda * len
    } else {
        phi.value(&n) * len
    }
}

/// A ring with cached edge costs; the objective is the energy the ring would have after
/// rescaling to volume `v`, i.e. `F * sqrt(v / A)`.
struct Ring<'a> {
    phi: &'a Anisotropy,
    lambda: f64,
    v: f64,
    pts: Vec<Vec2>,
    cost: Vec<f64>,
    f: f64,
    area: f64,
}

impl<'a> Ring<'a> {
    fn new(phi: &'a Anisotropy, lambda: f64, v: f64, pts: Vec<Vec2>) -> Self {
        let mut r = Self { phi, lambda, v, pts, cost: Vec::new(), f: 0.0, area: 0.0 };
        r.recompute();
        r
    }

    fn recompute(&mut self) {
        let n = self.pts.len();
        self.cost = (0..n).map(|i| edge_cost(self.phi, self.lambda, self.pts[i], self.pts[(i + 1) % n])).collect();
        self.f = self.cost.iter().sum();
        self.area = signed_area(&self.pts);
    }

    fn objective(&self) -> f64 {
        scaled(self.f, self.area, self.v)
    }

    fn n(&self) -> usize {
        self.pts.len()
    }

    /// Energy and area after moving vertex `i` to `q`.
    fn moved(&self, i: usize, q: Vec2) -> (f64, f64) {
        let n = self.n();
        let (ip, inx) = ((i + n - 1) % n, (i + 1) % n);
        let (a, p, b) = (self.pts[ip], self.pts[i], self.pts[inx]);
        let f = self.f - self.cost[ip] - self.cost[i]
            + edge_cost(self.phi, self.lambda, a, q)
            + edge_cost(self.phi, self.lambda, q, b);
        let area = self.area + 0.5 * (a.cross(q) + q.cross(b) - a.cross(p) - p.cross(b));
        (f, area)
    }

    fn set(&mut self, i: usize, q: Vec2) {
        let n = self.n();
        let ip = (i + n - 1) % n;
        let (f, area) = self.moved(i, q);
        self.pts[i] = q;
        self.cost[ip] = edge_cost(self.phi, self.lambda, self.pts[ip], q);
        self.cost[i] = edge_cost(self.phi, self.lambda, q, self.pts[(i + 1) % n]);
        self.f = f;
        self.area = area;
    }

    /// Rescales about the ground projection of the centroid so the area is exactly `v`.
    fn normalize(&mut self) {
        let c = ring_centroid(&self.pts);
        let anchor = Vec2::new(c.x, 0.0);
        let r = (self.v / self.area).sqrt();
        for p in &mut self.pts {
            *p = Vec2::new(anchor.x + (p.x - anchor.x) * r, p.y * r);
        }
        self.recompute();
    }
}

fn scaled(f: f64, area: f64, v: f64) -> f64 {
    if area > 0.0 {
        f * (v / area).sqrt()
    } else {
        f64::INFINITY
    }
}

fn diameter(pts: &[Vec2]) -> f64 {
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    lo.dist(hi)
}

/// Splits the longest edges until the ring has at least `n` vertices. Midpoints of
/// substrate edges stay on the substrate.
pub fn resample(ring: &[Vec2], n: usize) -> Vec<Vec2> {
    let mut pts = ring.to_vec();
    while pts.len() < n {
        let m = pts.len();
        let k = (0..m)
            .max_by(|&a, &b| pts[a].dist(pts[(a + 1) % m]).total_cmp(&pts[b].dist(pts[(b + 1) % m])))
            .unwrap();
        let (a, b) = (pts[k], pts[(k + 1) % m]);
        let mid = Vec2::new(0.5 * (a.x + b.x), if a.y == 0.0 && b.y == 0.0 { 0.0 } else { 0.5 * (a.y + b.y) });
        pts.insert(k + 1, mid);
    }
    pts
}

/// Like [`resample`] but never splits substrate edges.
fn resample_free(ring: &[Vec2], n: usize) -> Vec<Vec2> {
    let mut pts = ring.to_vec();
    while pts.len() < n {
        let m = pts.len();
        let len = |k: usize| {
            let (a, b) = (pts[k], pts[(k + 1) % m]);
            if a.y == 0.0 && b.y == 0.0 {
                -1.0
            } else {
                a.dist(b)
            }
        };
        let k = (0..m).max_by(|&a, &b| len(a).total_cmp(&len(b))).unwrap();
        let (a, b) = (pts[k], pts[(k + 1) % m]);
        pts.insert(k + 1, Vec2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
    }
    pts
}

/// Drops interior vertices of every run of three or more consecutive substrate vertices.
fn merge_ground_runs(ring: &[Vec2]) -> Vec<Vec2> {
    let n = ring.len();
    let ground = |k: usize| ring[k % n].y == 0.0;
    if (0..n).all(ground) {
        return ring.to_vec();
    }
    (0..n).filter(|&k| !(ground(k) && ground(k + n - 1) && ground(k + 1))).map(|k| ring[k]).collect()
}

/// Removes free vertices whose outgoing edge is shorter than `frac` times the mean edge length.
fn merge_short_edges(ring: &[Vec2], frac: f64) -> Vec<Vec2> {
    let n = ring.len();
    let mean = crate::geom::ring_perimeter(ring) / n as f64;
    let mut out: Vec<Vec2> = Vec::with_capacity(n);
    for k in 0..n {
        let p = ring[k];
        let short = out.last().is_some_and(|q: &Vec2| q.dist(p) < frac * mean);
        if short && p.y != 0.0 {
            continue;
        }
        if short && out.last().unwrap().y != 0.0 {
            out.pop();
        }
        out.push(p);
    }
    if out.len() > 3 && out[0].dist(*out.last().unwrap()) < frac * mean && out.last().unwrap().y != 0.0 {
        out.pop();
    }
    out
}

/// A random star-shaped octagon with one contact edge, resampled to `n_vertices` vertices and
/// rescaled to volume `v`.
pub fn random_init(rng: &mut impl Rng, n_vertices: usize, v: f64) -> SubstrateShape {
    let e = random_grounded_polygon(rng, 8);
    let ring = resample_free(e.outer().expect("single polygon"), n_vertices);
    let e = SubstrateShape::polygon(ring).expect("resampling keeps the ring simple");
    let r = (v / e.volume()).sqrt();
    rescale(&e, r, &[0.0, 0.0]).expect("positive scale")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Finite-difference step as a fraction of the diameter.
    pub fd_step: f64,
    pub armijo_c: f64,
    /// Stop when the relative decrease over this many iterations falls below `stall_tol`.
    pub stall_window: usize,
    pub stall_tol: f64,
    pub max_retries: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iters: 100_000, fd_step: 1e-6, armijo_c: 1e-4, stall_window: 10, stall_tol: 1e-9, max_retries: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentResult {
    pub shape: SubstrateShape,
    /// Energy after every accepted step, starting with the initial energy.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub retries: usize,
    pub converged: bool,
}

fn validate_ring(phi: &Anisotropy, lambda: f64, v: f64, pts: Vec<Vec2>) -> Result<Ring<'_>, String> {
    if !is_simple(&pts) {
        return Err("ring is not simple".into());
    }
    if pts.iter().any(|p| p.y < 0.0) {
        return Err("vertex below the substrate".into());
    }
    let mut r = Ring::new(phi, lambda, v, pts);
    if !(r.area > 0.0) {
        return Err("ring is not counter-clockwise with positive area".into());
    }
    r.normalize();
    Ok(r)
}

fn perturbed(pts: &[Vec2], rng: &mut ChaCha8Rng, amp: f64) -> Vec<Vec2> {
    pts.iter()
        .map(|p| {
            let dx = amp * rng.gen_range(-1.0..1.0);
            if p.y == 0.0 {
                Vec2::new(p.x + dx, 0.0)
            } else {
                Vec2::new(p.x + dx, (p.y + amp * rng.gen_range(-1.0..1.0)).max(0.0))
            }
        })
        .collect()
}

/// Projected steepest descent on the vertex coordinates with a finite-difference gradient,
/// Armijo backtracking and exact rescaling to volume `v` after every step. Substrate vertices
/// slide horizontally; free vertices that reach the substrate land on it.
pub fn optimize_polygon(
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
    n_vertices: usize,
    init: &SubstrateShape,
    seed: u64,
    opts: &DescentOptions,
) -> Result<DescentResult, OptimizeError> {
    check_regime(phi, lambda)?;
    if n_vertices < 8 {
        return Err(OptimizeError::TooFewVertices(n_vertices));
    }
    let outer = init.outer().ok_or_else(|| OptimizeError::InvalidInit("expected a single polygon".into()))?;
    if init.polygons().is_some_and(|p| !p[0].holes().is_empty()) {
        return Err(OptimizeError::InvalidInit("holes are not supported".into()));
    }
    if (init.volume() - v).abs() > 1e-9 * v.max(1.0) {
        return Err(OptimizeError::InvalidInit(format!("volume {} differs from {v}", init.volume())));
    }
    let base = resample_free(&merge_ground_runs(outer), n_vertices);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retries = 0;
    let mut pts = base.clone();
    loop {
        match validate_ring(phi, lambda, v, pts.clone()).map(|ring| descend(ring, opts)) {
            Ok(Ok(res)) => return Ok(DescentResult { retries, ..res }),
            Ok(Err(msg)) | Err(msg) => {
                if retries >= opts.max_retries {
                    return Err(OptimizeError::Degenerate(msg));
                }
                retries += 1;
                debug!("retry {retries}: {msg}");
                pts = perturbed(&base, &mut rng, 1e-3 * diameter(&base) * retries as f64);
            }
        }
    }
}

fn descend(mut ring: Ring<'_>, opts: &DescentOptions) -> Result<DescentResult, String> {
    let n = ring.n();
    let mut trace = vec![ring.f];
    let mut grad = vec![Vec2::default(); n];
    let mut alpha = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let g0 = ring.objective();
        let h = opts.fd_step * diameter(&ring.pts);
        let mut gmax = 0.0f64;
        let mut gnorm2 = 0.0;
        for i in 0..n {
            let p = ring.pts[i];
            let fx = |q: Vec2| {
                let (f, a) = ring.moved(i, q);
                scaled(f, a, ring.v)
            };
            let gx = (fx(Vec2::new(p.x + h, p.y)) - fx(Vec2::new(p.x - h, p.y))) / (2.0 * h);
            let gy = if p.y == 0.0 { 0.0 } else { (fx(Vec2::new(p.x, p.y + h)) - fx(Vec2::new(p.x, p.y - h))) / (2.0 * h) };
            grad[i] = Vec2::new(gx, gy);
            gmax = gmax.max(gx.abs()).max(gy.abs());
            gnorm2 += gx * gx + gy * gy;
        }
        if !gnorm2.is_finite() {
            return Err("non-finite gradient".into());
        }
        if gmax == 0.0 {
            converged = true;
            break;
        }
        let diam = diameter(&ring.pts);
        if !alpha.is_finite() {
            alpha = 0.05 * diam / gmax;
        } else {
            alpha = (alpha * 2.0).min(0.25 * diam / gmax);
        }
        let mut accepted = None;
        while alpha * gmax > 1e-15 * diam {
            let cand: Vec<Vec2> = ring
                .pts
                .iter()
                .zip(&grad)
                .map(|(&p, &g)| {
                    let q = p - g * alpha;
                    Vec2::new(q.x, if p.y == 0.0 { 0.0 } else { q.y.max(0.0) })
                })
                .collect();
            let pred: f64 = ring.pts.iter().zip(&cand).zip(&grad).map(|((&p, &q), &g)| g.dot(p - q)).sum();
            let cand = resample_free(&merge_short_edges(&merge_ground_runs(&cand), 0.1), n);
            let mut trial = Ring::new(ring.phi, ring.lambda, ring.v, cand);
            let g1 = trial.objective();
            if g1 <= g0 - opts.armijo_c * pred && g1 < g0 && trial.area > 0.0 && is_simple(&trial.pts) {
                trial.normalize();
                if trial.f < *trace.last().unwrap() {
                    accepted = Some(trial);
                }
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(t) => {
                ring = t;
                trace.push(ring.f);
            }
            None => {
                converged = true;
                break;
            }
        }
        let k = trace.len();
        if k > opts.stall_window {
            let old = trace[k - 1 - opts.stall_window];
            if (old - trace[k - 1]) / trace[k - 1].abs().max(1e-300) < opts.stall_tol {
                converged = true;
                break;
            }
        }
    }
    let shape = SubstrateShape::polygon(ring.pts.clone()).map_err(|e| e.to_string())?;
    Ok(DescentResult { shape, trace, iterations, retries: 0, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t0: f64,
    /// Temperature multiplier per step.
    pub cooling: f64,
    pub steps: usize,
}

impl Schedule {
    /// Geometric cooling from `t0` to `t_end` over `steps` steps.
    pub fn geometric(t0: f64, t_end: f64, steps: usize) -> Self {
        let cooling = if t0 > 0.0 && steps > 0 { (t_end / t0).powf(1.0 / steps as f64) } else { 1.0 };
        Self { t0, cooling, steps }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::geometric(1e-2, 1e-10, 2_000_000)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult {
    pub shape: SubstrateShape,
    pub energy: f64,
    /// Current energy sampled every `TRACE_EVERY` steps.
    pub trace: Vec<f64>,
    pub accepted: usize,
}

const TRACE_EVERY: usize = 1000;

/// Metropolis annealing over single-vertex Gaussian moves, rescaling to volume `v` after each
/// accepted move. The proposal width adapts to keep the acceptance rate moderate. Returns the
/// best shape seen.
pub fn anneal_polygon(
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
    n_vertices: usize,
    schedule: &Schedule,
    seed: u64,
) -> Result<AnnealResult, OptimizeError> {
    check_regime(phi, lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = random_init(&mut rng, n_vertices, v);
    anneal_from(phi, lambda, v, &init, schedule, seed)
}

pub fn anneal_from(
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
    init: &SubstrateShape,
    schedule: &Schedule,
    seed: u64,
) -> Result<AnnealResult, OptimizeError> {
    check_regime(phi, lambda)?;
    let outer = init.outer().ok_or_else(|| OptimizeError::InvalidInit("expected a single polygon".into()))?;
    let mut ring = validate_ring(phi, lambda, v, outer.to_vec()).map_err(OptimizeError::InvalidInit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = ring.n();
    let mut best = (ring.f, ring.pts.clone());
    let mut sigma = 0.02 * diameter(&ring.pts);
    let mut temp = schedule.t0;
    let (mut accepted, mut window_acc) = (0usize, 0usize);
    const ADAPT: usize = 200;
    let mut trace = vec![ring.f];
    for step in 1..=schedule.steps {
        let i = rng.gen_range(0..n);
        let p = ring.pts[i];
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let q = if p.y == 0.0 {
            Vec2::new(p.x + sigma * dx, 0.0)
        } else {
            Vec2::new(p.x + sigma * dx, (p.y + sigma * dy).max(0.0))
        };
        let (f1, a1) = ring.moved(i, q);
        let g0 = ring.objective();
        let g1 = scaled(f1, a1, v);
        let ok = a1 > 0.0
            && (g1 <= g0 || (temp > 0.0 && rng.gen::<f64>() < (-(g1 - g0) / temp).exp()));
        if ok {
            let old = ring.pts[i];
            ring.pts[i] = q;
            let simple = is_simple_near(&ring.pts, i);
            ring.pts[i] = old;
            if simple {
                ring.set(i, q);
                let r = (v / ring.area).sqrt();
                let cx = ring_centroid(&ring.pts).x;
                for pt in &mut ring.pts {
                    *pt = Vec2::new(cx + (pt.x - cx) * r, pt.y * r);
                }
                for c in &mut ring.cost {
                    *c *= r;
                }
                ring.f *= r;
                ring.area = v;
                accepted += 1;
                window_acc += 1;
                if ring.f < best.0 {
                    best = (ring.f, ring.pts.clone());
                }
            }
        }
        temp *= schedule.cooling;
        if step % ADAPT == 0 {
            let rate = window_acc as f64 / ADAPT as f64;
            let diam = diameter(&ring.pts);
            if rate > 0.4 {
                sigma = (sigma * 1.5).min(0.2 * diam);
            } else if rate < 0.2 {
                sigma = (sigma * 0.7).max(1e-12 * diam);
            }
            window_acc = 0;
        }
        if step % TRACE_EVERY == 0 {
            ring.recompute();
            trace.push(ring.f);
        }
    }
    let mut fin = Ring::new(phi, lambda, v, best.1);
    fin.normalize();
    let shape = SubstrateShape::polygon(fin.pts.clone())?;
    Ok(AnnealResult { shape, energy: fin.f, trace, accepted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub n_vertices: usize,
    /// Vertices of the annealed polygons (non-smooth densities).
    pub anneal_vertices: usize,
    pub descent: DescentOptions,
    pub schedule: Schedule,
    /// Directions used for the reference Winterbottom polygon.
    pub n_directions: usize,
    pub energy_factor: f64,
    pub asymmetry_fraction: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_vertices: 64,
            anneal_vertices: 12,
            descent: DescentOptions::default(),
            schedule: Schedule::default(),
            n_directions: 1024,
            energy_factor: 1.01,
            asymmetry_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub energy: f64,
    pub asymmetry: f64,
    pub tau_star: f64,
    pub iterations: usize,
    pub shape: SubstrateShape,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub phi: AnisotropySpec,
    pub lambda: f64,
    pub volume: f64,
    pub method: String,
    pub reference_energy: f64,
    pub min_energy: f64,
    pub median_energy: f64,
    pub best_asymmetry: f64,
    pub energy_ok: bool,
    pub asymmetry_ok: bool,
    pub pass: bool,
    pub trials: Vec<TrialOutcome>,
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

/// Minimizes from `trials` random starts (gradient descent for smooth densities, annealing
/// otherwise) and compares the results with the Winterbottom shape. Trial `k` uses seed
/// `seed + k`; trials run in parallel on the current rayon pool.
pub fn verify_theorem_main(
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
    trials: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerifyReport, OptimizeError> {
    check_regime(phi, lambda)?;
    if trials == 0 {
        return Err(OptimizeError::InvalidInit("need at least one trial".into()));
    }
    let (reference, f_ref) = reference_shape(phi, lambda, v, opts.n_directions)?;
    let smooth = phi.is_smooth();
    let stab = StabilityOptions::default();
    let outcomes: Vec<Result<TrialOutcome, OptimizeError>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let (shape, energy, iterations, trace) = if smooth {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let init = random_init(&mut rng, opts.n_vertices, v);
                let r = optimize_polygon(phi, lambda, v, opts.n_vertices, &init, s, &opts.descent)?;
                let e = *r.trace.last().unwrap();
                (r.shape, e, r.iterations, r.trace)
            } else {
                let r = anneal_polygon(phi, lambda, v, opts.anneal_vertices, &opts.schedule, s)?;
                (r.shape, r.energy, opts.schedule.steps, r.trace)
            };
            let a = asymmetry_to(&shape, &reference, &stab)?;
            info!("trial {k}: energy {energy:.9} asymmetry {:.3e}", a.value);
            Ok(TrialOutcome { seed: s, energy, asymmetry: a.value, tau_star: a.tau_star, iterations, shape, trace })
        })
        .collect();
    let trials: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let energies: Vec<f64> = trials.iter().map(|t| t.energy).collect();
    let min_energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let median_energy = median(&energies);
    let best_asymmetry = trials.iter().map(|t| t.asymmetry).fold(f64::INFINITY, f64::min);
    let energy_ok = median_energy <= opts.energy_factor * f_ref;
    let asymmetry_ok = best_asymmetry <= opts.asymmetry_fraction * v;
    Ok(VerifyReport {
        phi: phi.to_spec(),
        lambda,
        volume: v,
        method: if smooth { "descent" } else { "anneal" }.to_string(),
        reference_energy: f_ref,
        min_energy,
        median_energy,
        best_asymmetry,
        energy_ok,
        asymmetry_ok,
        pass: energy_ok && asymmetry_ok,
        trials,
    })
}

/// All fixed polyominoes with `n` cells, translated so the minimum column and row are zero,
/// cells sorted.
pub fn fixed_polyominoes(n: usize) -> Vec<Vec<(i32, i32)>> {
    if n == 0 {
        return Vec::new();
    }
    let normalize = |cells: &mut Vec<(i32, i32)>| {
        let x0 = cells.iter().map(|c| c.0).min().unwrap();
        let y0 = cells.iter().map(|c| c.1).min().unwrap();
        for c in cells.iter_mut() {
            c.0 -= x0;
            c.1 -= y0;
        }
        cells.sort_unstable();
    };
    let mut level: HashSet<Vec<(i32, i32)>> = HashSet::from([vec![(0, 0)]]);
    for _ in 1..n {
        let mut next = HashSet::with_capacity(level.len() * 4);
        for poly in &level {
            for &(x, y) in poly {
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let c = (x + dx, y + dy);
                    if poly.binary_search(&c).is_ok() {
                        continue;
                    }
                    let mut q = poly.clone();
                    q.push(c);
                    normalize(&mut q);
                    next.insert(q);
                }
            }
        }
        level = next;
    }
    let mut out: Vec<Vec<(i32, i32)>> = level.into_iter().collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub min_energy: f64,
    pub minimizers: Vec<PixelShape>,
    /// Number of (polyomino, placement) pairs evaluated.
    pub evaluated: usize,
}

/// Exhaustive minimum of the pixel energy over fixed polyominoes with `n_cells` cells, each
/// placed on the substrate and one row above it (all lifted placements have equal energy).
/// Ties within 1e-12 are all reported.
pub fn brute_force_pixels(phi: &Anisotropy, lambda: f64, n_cells: usize) -> Result<OracleResult, OptimizeError> {
    if n_cells == 0 || n_cells > MAX_ORACLE_CELLS {
        return Err(OptimizeError::CellCount(n_cells));
    }
    if phi.dim() != 2 {
        return Err(OptimizeError::Unsupported);
    }
    let polys = fixed_polyominoes(n_cells);
    let scored: Vec<(f64, PixelShape)> = polys
        .par_iter()
        .flat_map_iter(|cells| {
            [0usize, 1].into_iter().map(move |lift| {
                let p = PixelShape::from_cells(cells, lift).expect("enumerated polyominoes are connected");
                let e = pixel_energy(&p, phi, lambda).expect("planar density").total;
                (e, p)
            })
        })
        .collect();
    let min_energy = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let mut minimizers: Vec<PixelShape> =
        scored.iter().filter(|s| s.0 - min_energy <= 1e-12).map(|s| s.1.clone()).collect();
    minimizers.sort_by(|a, b| (a.lift(), a.width(), a.rows()).cmp(&(b.lift(), b.width(), b.rows())));
    Ok(OracleResult { min_energy, minimizers, evaluated: scored.len() })
}
