use lff_lab::experiments::ExperimentConfig;
use lff_lab::mdp::srank_from_singular_values;
use lff_lab::ntk::circulant_spectrum;
use lff_lab::numerics::{jacobi_eig, Matrix};
use proptest::prelude::*;

/// Symmetric circulant matrix from the free half of its first row.
fn symmetric_circulant(half: &[f64], n: usize) -> Matrix {
    let first: Vec<f64> = (0..n).map(|j| half[j.min(n - j)]).collect();
    Matrix::from_fn(n, n, |i, j| first[(j + n - i) % n])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn circulant_dft_eigenvalues_match_jacobi(
        n in 2usize..40,
        half in prop::collection::vec(-1.0f64..1.0, 21),
    ) {
        let k = symmetric_circulant(&half, n);
        let mut dft = circulant_spectrum(&k).unwrap().eigenvalues;
        let mut jac = jacobi_eig(&k).unwrap().eigenvalues;
        dft.sort_by(|a, b| a.total_cmp(b));
        jac.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in dft.iter().zip(&jac) {
            prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn srank_is_monotone_in_delta(
        mut sv in prop::collection::vec(0.0f64..10.0, 1..30),
        d1 in 0.001f64..0.999,
        d2 in 0.001f64..0.999,
    ) {
        sv.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sv[0] > 0.0);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = srank_from_singular_values(&sv, lo).unwrap();
        let b = srank_from_singular_values(&sv, hi).unwrap();
        prop_assert!(a >= b, "srank({lo}) = {a} < srank({hi}) = {b}");
    }

    #[test]
    fn resolved_configs_round_trip_through_toml(
        steps in 1usize..5000,
        seeds in prop::collection::btree_set(0u64..1000, 1..6),
        noise in 0.0f64..10.0,
    ) {
        let seeds: Vec<u64> = seeds.into_iter().collect();
        let text = format!(
            "experiment = \"noise-filter\"\nseeds = {seeds:?}\n[fit]\nsteps = {steps}\n[env]\nnoise_std = {noise:?}\n"
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(cfg.fit.steps, steps);
        prop_assert_eq!(&cfg.seeds, &seeds);
        prop_assert_eq!(cfg.env.noise_std, noise);
        let echoed = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(echoed, cfg);
    }
}
