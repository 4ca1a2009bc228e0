use serde::{Deserialize, Serialize};

use crate::anisotropy::{fibonacci_sphere, Anisotropy, AnisotropyKind};
use crate::geom::{Vec2, Vec3};

use super::{intersect_halfplanes, ConvexPolygon, ConvexPolyhedron, ConvexPolytope, GeometryError, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WulffOptions {
    pub n_directions: usize,
    /// Rotation of the uniform 2D angle grid, as a fraction of one angular step.
    pub angle_offset: f64,
    pub tol: Tolerances,
}

impl WulffOptions {
    pub fn new(n_directions: usize) -> Self {
        Self { n_directions, angle_offset: 0.0, tol: Tolerances::default() }
    }
}

/// The Wulff set `{x : x . nu <= phi(nu)}` over a finite direction set.
pub fn build_wulff(phi: &Anisotropy, n_directions: usize) -> Result<ConvexPolytope, GeometryError> {
    build_wulff_with(phi, &WulffOptions::new(n_directions))
}

pub fn build_wulff_with(phi: &Anisotropy, opts: &WulffOptions) -> Result<ConvexPolytope, GeometryError> {
    let d = phi.dim();
    let min_n = if d == 2 { 8 } else { 32 };
    if opts.n_directions < min_n {
        return Err(GeometryError::InvalidArgument(format!(
            "need at least {min_n} directions in dimension {d}, got {}",
            opts.n_directions
        )));
    }
    if !phi.is_coercive() {
        return Err(GeometryError::Unbounded);
    }
    if let Some(m) = phi.modification() {
        // both modifications act on the Wulff set directly: a shift translates it and the
        // lambda modification truncates it from below
        let mut w = build_wulff_with(phi.base(), opts)?;
        if let Some(x0) = m.x0() {
            let t: Vec<f64> = x0.iter().map(|c| -c).collect();
            w = w.translate(&t);
        }
        if let Some(lambda) = m.lambda() {
            w = winterbottom(&w, lambda);
        }
        if w.is_empty() {
            return Err(GeometryError::EmptyPolytope);
        }
        return Ok(w);
    }
    if d == 2 {
        build_2d(phi, opts)
    } else {
        build_3d(phi, opts)
    }
}

fn polytope_points(phi: &Anisotropy) -> Option<&[Vec<f64>]> {
    match phi.kind() {
        AnisotropyKind::SupportOfPolytope { vertices } => Some(vertices),
        AnisotropyKind::CrystallineMax { generators } => Some(generators),
        _ => None,
    }
}

fn build_2d(phi: &Anisotropy, opts: &WulffOptions) -> Result<ConvexPolytope, GeometryError> {
    let mut dirs: Vec<Vec2> = Vec::new();
    if let Some(pts) = polytope_points(phi) {
        let pts: Vec<Vec2> = pts.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        let hull = ConvexPolygon::hull(&pts, opts.tol.dedup);
        dirs.extend_from_slice(hull.normals());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    dirs.extend([
        Vec2::new(1.0, 0.0),
        Vec2::new(0.0, 1.0),
        Vec2::new(-1.0, 0.0),
        Vec2::new(0.0, -1.0),
        Vec2::new(s, s),
        Vec2::new(-s, s),
        Vec2::new(-s, -s),
        Vec2::new(s, -s),
    ]);
    let n = opts.n_directions;
    for k in 0..n {
        let t = std::f64::consts::TAU * (k as f64 + opts.angle_offset) / n as f64;
        dirs.push(Vec2::new(t.cos(), t.sin()));
    }
    let offsets: Vec<f64> = dirs.iter().map(|v| phi.value(&[v.x, v.y])).collect();
    let poly = intersect_halfplanes(&dirs, &offsets, &opts.tol)?;
    Ok(ConvexPolytope::Polygon(poly))
}

fn build_3d(phi: &Anisotropy, opts: &WulffOptions) -> Result<ConvexPolytope, GeometryError> {
    if let Some(pts) = polytope_points(phi) {
        let pts: Vec<Vec3> = pts.iter().map(|p| Vec3::from_slice(p)).collect();
        return Ok(ConvexPolytope::Polyhedron(ConvexPolyhedron::from_points(&pts, opts.tol.dedup)?));
    }
    let mut dirs: Vec<Vec3> = Vec::new();
    for k in 0..3 {
        for s in [1.0, -1.0] {
            let mut e = [0.0; 3];
            e[k] = s;
            dirs.push(Vec3::new(e[0], e[1], e[2]));
        }
    }
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                dirs.push(Vec3::new(sx, sy, sz).normalized());
            }
        }
    }
    dirs.extend(fibonacci_sphere(opts.n_directions).iter().map(|v| Vec3::from_slice(v)));
    // polar dual: W = {x : x . nu <= phi(nu)} has the hull of nu / phi(nu) as its polar body
    let dual: Vec<Vec3> = dirs.iter().map(|&v| v * (1.0 / phi.value(&v.to_array()))).collect();
    let hull = ConvexPolyhedron::from_points(&dual, opts.tol.dedup)?;
    let verts: Vec<Vec3> = hull
        .facets()
        .iter()
        .map(|f| {
            if !(f.offset > 0.0) {
                Err(GeometryError::NumericalDegeneracy("origin not interior to dual hull".into()))
            } else {
                Ok(f.normal * (1.0 / f.offset))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(ConvexPolytope::Polyhedron(ConvexPolyhedron::from_points(&verts, opts.tol.dedup)?))
}

/// `W` intersected with `{x_d >= -lambda}`; the result may be empty.
pub fn winterbottom(w: &ConvexPolytope, lambda: f64) -> ConvexPolytope {
    let tol = Tolerances::default().dedup;
    match w {
        ConvexPolytope::Polygon(p) => ConvexPolytope::Polygon(p.clip(
            Vec2::new(0.0, -1.0),
            lambda,
            tol,
            |q| Vec2::new(q.x, -lambda),
        )),
        ConvexPolytope::Polyhedron(p) => ConvexPolytope::Polyhedron(
            p.clip(Vec3::new(0.0, 0.0, -1.0), lambda, tol, |q| Vec3::new(q.x, q.y, -lambda))
                .unwrap_or_else(|_| ConvexPolyhedron::empty()),
        ),
    }
}

/// `(v / |W|)^{1/d} (W + lambda e_d)`: the truncated Wulff set lifted onto the substrate and
/// scaled to volume `v`.
pub fn winterbottom_with_volume(
    w_lambda: &ConvexPolytope,
    lambda: f64,
    v: f64,
) -> Result<ConvexPolytope, GeometryError> {
    if w_lambda.is_empty() || !(w_lambda.volume() > 0.0) {
        return Err(GeometryError::EmptyPolytope);
    }
    if !(v > 0.0) || !v.is_finite() {
        return Err(GeometryError::InvalidArgument(format!("volume must be positive, got {v}")));
    }
    let d = w_lambda.dim() as f64;
    let s = (v / w_lambda.volume()).powf(1.0 / d);
    match w_lambda {
        ConvexPolytope::Polygon(p) => Ok(ConvexPolytope::Polygon(p.map(
            |q| Vec2::new(s * q.x, s * (q.y + lambda)),
            |n, b| s * (b + lambda * n.y),
        ))),
        ConvexPolytope::Polyhedron(p) => Ok(ConvexPolytope::Polyhedron(p.map_points(
            |q| Vec3::new(s * q.x, s * q.y, s * (q.z + lambda)),
            Tolerances::default().dedup,
        )?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    CompleteDrying,
    PartialWetting,
    CompleteWetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    /// `-phi(e_d)`
    pub lower: f64,
    /// `phi(-e_d)`
    pub upper: f64,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::CompleteDrying => "complete drying",
            Regime::PartialWetting => "partial wetting",
            Regime::CompleteWetting => "complete wetting",
        })
    }
}

pub fn classify_regime(phi: &Anisotropy, lambda: f64) -> RegimeLabel {
    let (up, down) = phi.vertical_values();
    let regime = if lambda >= down {
        Regime::CompleteDrying
    } else if lambda <= -up {
        Regime::CompleteWetting
    } else {
        Regime::PartialWetting
    };
    RegimeLabel { regime, lower: -up, upper: down }
}

/// Largest deviation from `grad phi(nu) . (-e_d) = lambda` over the free facets adjacent to
/// the contact facet of `w_v`.
pub fn young_law_check(phi: &Anisotropy, w_v: &ConvexPolytope, lambda: f64) -> Result<f64, GeometryError> {
    const FLAT: f64 = 1e-12;
    let d = phi.dim();
    if d != w_v.dim() {
        return Err(GeometryError::InvalidArgument("dimension mismatch".into()));
    }
    let residual = |nu: &[f64]| -> Result<f64, GeometryError> {
        let g = phi.gradient(nu)?;
        Ok((-g[d - 1] - lambda).abs())
    };
    let mut worst: Option<f64> = None;
    match w_v {
        ConvexPolytope::Polygon(p) => {
            let m = p.normals().len();
            for k in 0..m {
                let n = p.normals()[k];
                if n.x.abs() <= FLAT && n.y < 0.0 {
                    for j in [(k + m - 1) % m, (k + 1) % m] {
                        let nu = p.normals()[j];
                        let r = residual(&[nu.x, nu.y])?;
                        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
                    }
                }
            }
        }
        ConvexPolytope::Polyhedron(p) => {
            let facets = p.facets();
            for f in facets {
                if !(f.normal.x.abs() <= FLAT * 1e3 && f.normal.y.abs() <= FLAT * 1e3 && f.normal.z < 0.0) {
                    continue;
                }
                let m = f.vertices.len();
                for k in 0..m {
                    let (a, b) = (f.vertices[k], f.vertices[(k + 1) % m]);
                    let nb = facets.iter().find(|g| {
                        !std::ptr::eq(*g, f) && g.vertices.contains(&a) && g.vertices.contains(&b)
                    });
                    if let Some(g) = nb {
                        let r = residual(&g.normal.to_array())?;
                        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
                    }
                }
            }
        }
    }
    worst.ok_or(GeometryError::NoContactFacet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::{make_phi_lambda, sample_unit_directions};

    fn l1() -> Anisotropy {
        Anisotropy::pnorm(1.0, 2).unwrap()
    }

    #[test]
    fn l1_square_is_exact() {
        let w = build_wulff(&l1(), 8).unwrap();
        assert_eq!(w.vertices().len(), 4);
        assert!((w.volume() - 4.0).abs() <= 1e-12);
        for v in w.vertices() {
            assert!((v[0].abs() - 1.0).abs() <= 1e-15 && (v[1].abs() - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn l1_square_matches_halfplane_oracle_on_360_directions() {
        let w = build_wulff(&l1(), 360).unwrap();
        assert_eq!(w.vertices().len(), 4);
        assert!((w.volume() - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn disk_and_ellipse_areas() {
        let disk = build_wulff(&Anisotropy::euclidean(2), 256).unwrap();
        assert_eq!(disk.vertices().len(), 256);
        assert!((disk.volume() - std::f64::consts::PI).abs() / std::f64::consts::PI < 1e-3);
        let ell = build_wulff(&Anisotropy::weighted(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap(), 256)
            .unwrap();
        let target = 2.0 * std::f64::consts::PI;
        assert!((ell.volume() - target).abs() / target < 5e-3);
        // boundary of the ellipse x1^2/4 + x2^2 = 1 up to the sampling error
        for v in ell.vertices() {
            let r = (v[0] * v[0] / 4.0 + v[1] * v[1]).sqrt();
            assert!((r - 1.0).abs() < 2e-3, "{r}");
        }
        assert!(ell.consistency_residual() < 1e-9);
    }

    #[test]
    fn duality_roundtrip_at_construction_directions() {
        let phi = Anisotropy::weighted(vec![vec![2.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let w = build_wulff(&phi, 512).unwrap();
        for nu in sample_unit_directions(2, 512) {
            let (h, _) = w.support_function(&nu);
            let f = phi.value(&nu);
            assert!(h <= f + 1e-9);
            assert!((h - f).abs() <= 1e-9);
        }
    }

    #[test]
    fn crystalline_is_exact_hull() {
        let phi = Anisotropy::crystalline(vec![
            vec![2.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.5],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
        ])
        .unwrap();
        let w = build_wulff(&phi, 64).unwrap();
        assert_eq!(w.vertices().len(), 5);
        let exact = ConvexPolytope::from_points(&[
            vec![2.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.5],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
        ])
        .unwrap();
        assert!((w.volume() - exact.volume()).abs() < 1e-12);
    }

    #[test]
    fn non_coercive_is_unbounded() {
        let phi = make_phi_lambda(&Anisotropy::euclidean(2), -0.2);
        assert_eq!(build_wulff(&phi, 64).unwrap_err(), GeometryError::Unbounded);
        assert!(matches!(build_wulff(&Anisotropy::euclidean(2), 4), Err(GeometryError::InvalidArgument(_))));
    }

    #[test]
    fn winterbottom_fixtures() {
        let sq = build_wulff(&l1(), 8).unwrap();
        assert!((winterbottom(&sq, 0.5).volume() - 3.0).abs() < 1e-15);
        assert_eq!(winterbottom(&sq, 1.0).volume(), 4.0);
        assert_eq!(winterbottom(&sq, 7.0), sq);
        assert!(winterbottom(&sq, -1.0).is_empty());
        let disk = build_wulff(&Anisotropy::euclidean(2), 1024).unwrap();
        let half = winterbottom(&disk, 0.0);
        assert!((half.volume() - disk.volume() / 2.0).abs() < 1e-12);

        let wv = winterbottom_with_volume(&winterbottom(&sq, 0.5), 0.5, 1.0).unwrap();
        assert!((wv.volume() - 1.0).abs() < 1e-14);
        let a = 1.0 / 3f64.sqrt();
        let h = 3f64.sqrt() / 2.0;
        let mut got = wv.vertices();
        got.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
        let want = [[-a, 0.0], [-a, h], [a, 0.0], [a, h]];
        for (g, w) in got.iter().zip(want) {
            assert!((g[0] - w[0]).abs() < 1e-14 && (g[1] - w[1]).abs() < 1e-14, "{g:?}");
        }
        assert!(wv.vertices().iter().any(|v| v[1] == 0.0));
        assert!(wv.consistency_residual() < 1e-14);
    }

    #[test]
    fn winterbottom_volume_identity_when_already_on_h() {
        let half = winterbottom(&build_wulff(&Anisotropy::euclidean(2), 128).unwrap(), 0.0);
        let same = winterbottom_with_volume(&half, 0.0, half.volume()).unwrap();
        for (a, b) in half.vertices().iter().zip(same.vertices()) {
            assert!((a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn support_function_examples() {
        let sq = build_wulff(&l1(), 8).unwrap();
        let (h, arg) = sq.support_function(&[0.0, -1.0]);
        assert_eq!(h, 1.0);
        let mut pts: Vec<Vec<f64>> = arg.iter().map(|&i| sq.vertices()[i].clone()).collect();
        pts.sort_by(|p, q| p[0].total_cmp(&q[0]));
        assert_eq!(pts, vec![vec![-1.0, -1.0], vec![1.0, -1.0]]);
        let w = winterbottom(&build_wulff(&Anisotropy::euclidean(2), 256).unwrap(), 0.5);
        assert!((w.support_function(&[0.0, -1.0]).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&l1(), 1.2).regime, Regime::CompleteDrying);
        assert_eq!(classify_regime(&l1(), 1.0).regime, Regime::CompleteDrying);
        assert_eq!(classify_regime(&l1(), -1.0).regime, Regime::CompleteWetting);
        let l2 = Anisotropy::euclidean(2);
        assert_eq!(classify_regime(&l2, 0.0).regime, Regime::PartialWetting);
        assert_eq!(classify_regime(&l2, -1.0).regime, Regime::CompleteWetting);
    }

    #[test]
    fn young_residuals() {
        let l2 = Anisotropy::euclidean(2);
        for &lambda in &[0.0, 0.5] {
            let w = winterbottom(&build_wulff(&l2, 1024).unwrap(), lambda);
            let wv = winterbottom_with_volume(&w, lambda, 1.0).unwrap();
            assert!(young_law_check(&l2, &wv, lambda).unwrap() <= 5e-3);
        }
        let sq = winterbottom(&build_wulff(&l1(), 8).unwrap(), 0.5);
        assert!(matches!(young_law_check(&l1(), &sq, 0.5), Err(GeometryError::Anisotropy(_))));
    }

    #[test]
    fn three_d_constructions() {
        let ball = build_wulff(&Anisotropy::euclidean(3), 2048).unwrap();
        let v = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((ball.volume() - v).abs() / v < 1e-2, "{}", ball.volume());
        assert!(ball.consistency_residual() < 1e-9);
        let cube = build_wulff(&Anisotropy::pnorm(1.0, 3).unwrap(), 64).unwrap();
        assert!((cube.volume() - 8.0).abs() < 1e-9, "{}", cube.volume());
        let cut = winterbottom(&cube, 0.5);
        assert!((cut.volume() - 6.0).abs() < 1e-9);
        assert!((cut.bottom_facet_measure() - 4.0).abs() < 1e-9);
        let wv = winterbottom_with_volume(&cut, 0.5, 1.0).unwrap();
        assert!((wv.volume() - 1.0).abs() < 1e-10);
        let l2 = Anisotropy::euclidean(3);
        let w = winterbottom(&ball, 0.3);
        let r = young_law_check(&l2, &winterbottom_with_volume(&w, 0.3, 1.0).unwrap(), 0.3).unwrap();
        assert!(r < 0.1, "{r}");
    }
}
