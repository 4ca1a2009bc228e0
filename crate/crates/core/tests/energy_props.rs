use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use winterbottom::anisotropy::Anisotropy;
use winterbottom::optimizer::fixed_polyominoes;
use winterbottom::shape::{
    energy_f, jensen_lower_bound, pixel_energy, random_floating_polygon, random_grounded_polygon, PixelShape,
    SubstrateShape,
};

fn densities() -> Vec<Anisotropy> {
    vec![
        Anisotropy::euclidean(2),
        Anisotropy::pnorm(1.0, 2).unwrap(),
        Anisotropy::pnorm(f64::INFINITY, 2).unwrap(),
        Anisotropy::pnorm(3.0, 2).unwrap(),
        Anisotropy::weighted(vec![vec![2.0, 0.5], vec![0.0, 1.0]]).unwrap(),
    ]
}

fn shape(seed: u64, n: usize, floating: bool) -> SubstrateShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if floating {
        random_floating_polygon(&mut rng, n)
    } else {
        random_grounded_polygon(&mut rng, n)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn closed_boundary(seed in any::<u64>(), n in 3usize..40, floating in any::<bool>()) {
        let e = shape(seed, n, floating);
        prop_assert!(e.gauss_green_residual() <= 1e-9 * e.perimeter());
    }

    #[test]
    fn energy_is_positive_above_threshold(
        seed in any::<u64>(),
        n in 3usize..40,
        floating in any::<bool>(),
        k in 0usize..5,
        frac in 0.0f64..1.0,
    ) {
        let phi = &densities()[k];
        let (up, _) = phi.vertical_values();
        let lambda = -up + frac * 3.0 * up + 1e-6;
        let e = shape(seed, n, floating);
        let b = energy_f(&e, phi, lambda).unwrap();
        prop_assert!(b.total > 0.0);
        let (free, bound) = jensen_lower_bound(&e, phi).unwrap();
        prop_assert!(free >= bound - 1e-12 * free.max(1.0));
        if floating {
            prop_assert_eq!(b.contact_measure, 0.0);
        }
    }

    #[test]
    fn horizontal_translation_keeps_energy(
        seed in any::<u64>(),
        n in 3usize..40,
        tau in -10.0f64..10.0,
        k in 0usize..5,
        lambda in -0.5f64..1.0,
    ) {
        let phi = &densities()[k];
        let e = shape(seed, n, false);
        let f0 = energy_f(&e, phi, lambda).unwrap().total;
        let f1 = energy_f(&e.translate_horizontal(&[tau]).unwrap(), phi, lambda).unwrap().total;
        prop_assert!((f0 - f1).abs() <= 1e-12 * f0.abs().max(1.0));
    }

    #[test]
    fn floating_translation_keeps_energy(
        seed in any::<u64>(),
        n in 3usize..40,
        dx in -10.0f64..10.0,
        dy in 0.0f64..5.0,
        k in 0usize..5,
        lambda in -0.5f64..1.0,
    ) {
        let phi = &densities()[k];
        let e = shape(seed, n, true);
        let f0 = energy_f(&e, phi, lambda).unwrap().total;
        let f1 = energy_f(&e.translate(&[dx, dy]).unwrap(), phi, lambda).unwrap().total;
        prop_assert!((f0 - f1).abs() <= 1e-12 * f0.abs().max(1.0));
    }
}

#[test]
fn pixel_and_polygon_energies_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut polys: Vec<Vec<(i32, i32)>> = Vec::new();
    for n in [1, 3, 5, 7, 8] {
        let all = fixed_polyominoes(n);
        for _ in 0..10 {
            polys.push(all[rand::Rng::gen_range(&mut rng, 0..all.len())].clone());
        }
    }
    assert_eq!(polys.len(), 50);
    for (i, cells) in polys.iter().enumerate() {
        let p = PixelShape::from_cells(cells, i % 3).unwrap();
        let e = p.to_shape().unwrap();
        assert_eq!(e.volume(), cells.len() as f64);
        for phi in densities() {
            for lambda in [-0.9, -0.3, 0.0, 0.4, 1.0] {
                let a = pixel_energy(&p, &phi, lambda).unwrap();
                let b = energy_f(&e, &phi, lambda).unwrap();
                assert!((a.total - b.total).abs() <= 1e-12 * a.total.abs().max(1.0), "{:?} {lambda}", p.rows());
                assert_eq!(a.contact_measure, b.contact_measure);
            }
        }
    }
}

#[test]
fn unit_lambda_pixel_energy_is_lattice_perimeter() {
    let phi = Anisotropy::pnorm(1.0, 2).unwrap();
    for cells in fixed_polyominoes(6) {
        let p = PixelShape::from_cells(&cells, 0).unwrap();
        let e = p.to_shape().unwrap();
        let f = pixel_energy(&p, &phi, 1.0).unwrap().total;
        assert!((f - e.perimeter()).abs() <= 1e-12);
    }
}
