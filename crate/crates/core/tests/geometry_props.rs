use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use winterbottom::anisotropy::Anisotropy;
use winterbottom::convex::{build_wulff, winterbottom, ConvexPolytope};

const N: usize = 256;

struct Case {
    phi: Anisotropy,
    wulff: ConvexPolytope,
    polytopal: bool,
}

fn cases() -> &'static [Case] {
    static CASES: OnceLock<Vec<Case>> = OnceLock::new();
    CASES.get_or_init(|| {
        let hex: Vec<Vec<f64>> = (0..6).map(|k| k as f64 * PI / 3.0).map(|t| vec![t.cos(), t.sin()]).collect();
        let kinds = vec![
            (Anisotropy::pnorm(1.0, 2).unwrap(), true),
            (Anisotropy::pnorm(f64::INFINITY, 2).unwrap(), true),
            (Anisotropy::crystalline(hex.clone()).unwrap(), true),
            (Anisotropy::support(hex).unwrap(), true),
            (Anisotropy::euclidean(2), false),
            (Anisotropy::pnorm(3.0, 2).unwrap(), false),
            (Anisotropy::weighted(vec![vec![2.0, 0.5], vec![0.0, 1.0]]).unwrap(), false),
        ];
        kinds
            .into_iter()
            .map(|(phi, polytopal)| {
                let wulff = build_wulff(&phi, N).unwrap();
                Case { phi, wulff, polytopal }
            })
            .collect()
    })
}

fn unit(t: f64) -> [f64; 2] {
    [t.cos(), t.sin()]
}

/// Upper bound on the support function of the Wulff polygon at angle `t`: the sampled
/// polygon lies inside the halfplanes of the uniform direction grid, so its support is at
/// most the conic interpolation of the two bracketing grid values. Exact densities are also
/// bounded by `phi` itself.
fn support_bound(c: &Case, t: f64) -> f64 {
    let nu = unit(t);
    if c.polytopal {
        return c.phi.value(&nu) + 1e-9;
    }
    let step = 2.0 * PI / N as f64;
    let i = (t / step).floor();
    let (a, b) = (unit(i * step), unit((i + 1.0) * step));
    let det = a[0] * b[1] - a[1] * b[0];
    let ca = (nu[0] * b[1] - nu[1] * b[0]) / det;
    let cb = (a[0] * nu[1] - a[1] * nu[0]) / det;
    ca * c.phi.value(&a) + cb * c.phi.value(&b) + 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn wulff_containment(k in 0usize..7, pick in any::<prop::sample::Index>(), t in 0.0..2.0 * PI) {
        let c = &cases()[k];
        let verts = c.wulff.vertices();
        let x = &verts[pick.index(verts.len())];
        let nu = unit(t);
        let phi = c.phi.value(&nu);
        prop_assert!(x[0] * nu[0] + x[1] * nu[1] <= support_bound(c, t));
        if c.polytopal {
            prop_assert!(x[0] * nu[0] + x[1] * nu[1] <= phi + 1e-9);
        }
    }

    #[test]
    fn support_is_dominated_by_density(k in 0usize..7, t in 0.0..2.0 * PI) {
        let c = &cases()[k];
        let nu = unit(t);
        let (h, argmax) = c.wulff.support_function(&nu);
        prop_assert!(!argmax.is_empty());
        prop_assert!(h <= support_bound(c, t));
        prop_assert!(h >= c.phi.value(&nu) - 1e-9);
    }

    #[test]
    fn monotone_truncation(k in 0usize..7, a in -0.99f64..0.99, b in -0.99f64..0.99) {
        let c = &cases()[k];
        let (l1, l2) = if a <= b { (a, b) } else { (b, a) };
        let w1 = winterbottom(&c.wulff, l1);
        let w2 = winterbottom(&c.wulff, l2);
        prop_assume!(!w1.is_empty());
        for x in w1.vertices() {
            for h in w2.halfspaces() {
                prop_assert!(x[0] * h.normal[0] + x[1] * h.normal[1] <= h.offset + 1e-12 * (1.0 + h.offset.abs()));
            }
        }
        prop_assert!(w1.volume() <= w2.volume() + 1e-12);
    }
}

#[test]
fn nonemptiness_threshold() {
    for c in cases() {
        let (up, _) = c.phi.vertical_values();
        let top = c.wulff.support_function(&[0.0, 1.0]).0;
        assert!((top - up).abs() < 1e-12, "top of Wulff shape {top} vs phi(e_2) {up}");
        for k in -20..=20 {
            let lambda = -up + k as f64 * 1e-3;
            let area = winterbottom(&c.wulff, lambda).volume();
            assert_eq!(area > 1e-9, lambda > -up, "lambda {lambda}: area {area}");
        }
    }
}

#[test]
fn normal_cone_identity() {
    for c in cases() {
        let verts = c.wulff.vertices();
        for h in c.wulff.halfspaces() {
            let (s, argmax) = c.wulff.support_function(&h.normal);
            assert!((s - h.offset).abs() <= 1e-9, "facet offset {} vs support {s}", h.offset);
            for i in argmax {
                let x = &verts[i];
                assert!((x[0] * h.normal[0] + x[1] * h.normal[1] - s).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn polytopal_densities_are_reproduced_exactly() {
    for c in cases().iter().filter(|c| c.polytopal) {
        for k in 0..720 {
            let nu = unit(k as f64 * PI / 360.0);
            let (h, _) = c.wulff.support_function(&nu);
            assert!((h - c.phi.value(&nu)).abs() <= 1e-9);
        }
    }
}
