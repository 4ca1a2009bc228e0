use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use winterbottom::anisotropy::Anisotropy;
use winterbottom::shape::{energy_f, random_grounded_polygon, rescale, SubstrateShape};
use winterbottom::stability::{asymmetry_to, reference_shape, stability_record, StabilityOptions};

fn densities() -> Vec<Anisotropy> {
    vec![
        Anisotropy::euclidean(2),
        Anisotropy::pnorm(1.0, 2).unwrap(),
        Anisotropy::weighted(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap(),
    ]
}

fn opts() -> StabilityOptions {
    StabilityOptions { n_directions: 256, ..StabilityOptions::default() }
}

fn shape_with_volume(seed: u64, n: usize, v: f64) -> SubstrateShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = random_grounded_polygon(&mut rng, n);
    rescale(&e, (v / e.volume()).sqrt(), &[0.0, 0.0]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deficit_is_nonnegative(seed in any::<u64>(), n in 3usize..30, k in 0usize..3, lambda in -0.8f64..0.8, v in 0.1f64..10.0) {
        let phi = &densities()[k];
        let (w, f) = reference_shape(phi, lambda, v, 256).unwrap();
        let e = shape_with_volume(seed, n, v);
        let r = stability_record("random", 0.0, &e, &w, phi, lambda, f, &opts()).unwrap();
        prop_assert!(r.deficit >= -1e-12 * f);
        prop_assert!(r.asymmetry >= 0.0 && r.asymmetry <= 2.0 * v * (1.0 + 1e-12));
    }

    #[test]
    fn translates_have_zero_asymmetry_and_deficit(k in 0usize..3, lambda in -0.8f64..0.8, tau in -5.0f64..5.0) {
        let phi = &densities()[k];
        let (w, f) = reference_shape(phi, lambda, 1.0, 256).unwrap();
        let e = w.translate_horizontal(&[tau]).unwrap();
        let r = stability_record("translate", tau, &e, &w, phi, lambda, f, &opts()).unwrap();
        prop_assert!(r.asymmetry <= 1e-7, "asymmetry {}", r.asymmetry);
        prop_assert!(r.deficit.abs() <= 1e-12 * f);
        prop_assert!(r.ratio.is_none());
        prop_assert!((r.tau_star + tau).abs() <= 1e-6);
    }

    #[test]
    fn non_translates_have_positive_asymmetry(seed in any::<u64>(), n in 3usize..30, k in 0usize..3, lambda in -0.8f64..0.8) {
        let phi = &densities()[k];
        let (w, f) = reference_shape(phi, lambda, 1.0, 256).unwrap();
        let e = shape_with_volume(seed, n, 1.0);
        let r = stability_record("random", 0.0, &e, &w, phi, lambda, f, &opts()).unwrap();
        prop_assert!(r.asymmetry > 1e-6);
        prop_assert!(r.deficit > 0.0);
    }

    #[test]
    fn ratio_is_scale_invariant(seed in any::<u64>(), n in 3usize..30, k in 0usize..3, lambda in -0.8f64..0.8, s in 0.2f64..5.0) {
        let phi = &densities()[k];
        let (w, f) = reference_shape(phi, lambda, 1.0, 256).unwrap();
        let e = shape_with_volume(seed, n, 1.0);
        let r1 = stability_record("random", 0.0, &e, &w, phi, lambda, f, &opts()).unwrap();
        let es = rescale(&e, s, &[0.0, 0.0]).unwrap();
        let ws = rescale(&w, s, &[0.0, 0.0]).unwrap();
        let fs = energy_f(&ws, phi, lambda).unwrap().total;
        let r2 = stability_record("random", 0.0, &es, &ws, phi, lambda, fs, &opts()).unwrap();
        let (a, b) = (r1.ratio.unwrap(), r2.ratio.unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0), "{a} vs {b}");
        prop_assert!((r2.deficit - s * r1.deficit).abs() <= 1e-9 * f * s);
    }

    #[test]
    fn asymmetry_is_translation_invariant(seed in any::<u64>(), n in 3usize..30, k in 0usize..3, lambda in -0.8f64..0.8, tau in -5.0f64..5.0) {
        let phi = &densities()[k];
        let (w, _) = reference_shape(phi, lambda, 1.0, 256).unwrap();
        let e = shape_with_volume(seed, n, 1.0);
        let a1 = asymmetry_to(&e, &w, &opts()).unwrap();
        let a2 = asymmetry_to(&e.translate_horizontal(&[tau]).unwrap(), &w, &opts()).unwrap();
        prop_assert!((a1.value - a2.value).abs() <= 1e-8, "{} vs {}", a1.value, a2.value);
        let f1 = energy_f(&e, phi, lambda).unwrap().total;
        let f2 = energy_f(&e.translate_horizontal(&[tau]).unwrap(), phi, lambda).unwrap().total;
        prop_assert!((f1 - f2).abs() <= 1e-12 * f1);
    }
}
