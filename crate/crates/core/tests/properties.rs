use bae_oed::config::RunConfig;
use bae_oed::forward_bae::{repair_psd, ErrorModel};
use bae_oed::inversion::Design;
use bae_oed::linear_sandbox::{random_matrix, random_spd};
use bae_oed::numkit::{
    cg_iterate, gaussian_vector, lanczos_eigs, stream, CgOptions, CsrMatrix, Euclidean,
    LanczosOptions, SparseCholesky,
};
use nalgebra::{DVector, SymmetricEigen};
use proptest::prelude::*;

fn subset() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (1usize..40).prop_flat_map(|n| (Just(n), proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn design_text_round_trip((n, act) in subset()) {
        let d = Design::from_active(n, &act).unwrap();
        prop_assert_eq!(d.n_act(), act.len());
        prop_assert_eq!(d.weights().iter().filter(|w| **w).count(), act.len());
        let back = Design::parse(&d.to_text(), n).unwrap();
        prop_assert_eq!(&back, &d);
        for j in 0..n {
            prop_assert_eq!(d.contains(j), act.contains(&j));
            if !d.contains(j) {
                let bigger = d.with(j).unwrap();
                prop_assert!(d.is_subset_of(&bigger));
                prop_assert_eq!(bigger.n_act(), d.n_act() + 1);
            } else {
                prop_assert_eq!(&d.with(j).unwrap(), &d);
            }
        }
    }

    #[test]
    fn sparse_cholesky_matches_dense_solve(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = stream(seed, "prop-chol", 0);
        let a = random_spd(n, &mut rng);
        let b = gaussian_vector(&mut rng, n);
        let chol = SparseCholesky::factor(&CsrMatrix::from_dense(&a, "test"), None).unwrap();
        let x = DVector::from_vec(chol.solve(&b));
        let r = &a * &x - DVector::from_column_slice(&b);
        // Spectrum lies in [1e-3, 1].
        prop_assert!(r.norm() <= 1e-9 * DVector::from_column_slice(&b).norm());
    }

    #[test]
    fn cg_reaches_requested_residual(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = stream(seed, "prop-cg", 0);
        let a = CsrMatrix::from_dense(&random_spd(n, &mut rng), "test");
        let b = gaussian_vector(&mut rng, n);
        let opts = CgOptions { rtol: 1e-10, maxiter: 10 * n + 10, ..CgOptions::default() };
        let sol = cg_iterate(&a, None, &b, &opts);
        prop_assert!(sol.converged);
        let r: f64 = a.matvec(&sol.x).iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-10 * nb * (1.0 + 1e-6));
    }

    #[test]
    fn lanczos_leading_eigenvalues_match_dense(n in 2usize..12, seed in any::<u64>()) {
        let mut rng = stream(seed, "prop-lanczos", 0);
        let a = random_spd(n, &mut rng);
        let k = 1 + (seed as usize) % n;
        let opts = LanczosOptions { seed, ..LanczosOptions::default() };
        let pairs = lanczos_eigs(&CsrMatrix::from_dense(&a, "test"), &Euclidean, k, &opts).unwrap();
        let mut dense: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        dense.sort_by(|x, y| y.total_cmp(x));
        prop_assert_eq!(pairs.len(), k);
        for (l, d) in pairs.values.iter().zip(&dense) {
            prop_assert!((l - d).abs() <= 1e-8 * dense[0]);
        }
    }

    #[test]
    fn psd_repair_is_symmetric_and_nonnegative(n in 1usize..10, rank in 0usize..10, seed in any::<u64>()) {
        let mut rng = stream(seed, "prop-psd", 0);
        let g = random_matrix(n, rank.min(n), &mut rng);
        let noise = random_matrix(n, n, &mut rng) * 1e-3;
        let c = repair_psd(&g * g.transpose() + noise);
        prop_assert_eq!(&c, &c.transpose());
        let tr = c.trace().abs().max(f64::MIN_POSITIVE);
        prop_assert!(SymmetricEigen::new(c).eigenvalues.iter().all(|l| *l >= -1e-10 * tr));
    }

    #[test]
    fn error_model_text_round_trip(n in 1usize..8, n_mc in 2usize..20, seed in any::<u64>()) {
        let samples: Vec<Vec<f64>> = (0..n_mc).map(|i| gaussian_vector(&mut stream(seed, "prop-em", i as u64), n)).collect();
        let em = ErrorModel::from_samples(&samples, 1e-3, Some(seed)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        em.write_dir(dir.path()).unwrap();
        prop_assert_eq!(ErrorModel::read_dir(dir.path()).unwrap(), em);
    }

    #[test]
    fn config_round_trip(nx in 2usize..30, per_side in 1usize..12, n_mc in 2usize..5000, k in 1usize..5, sigma in 1e-6f64..1.0) {
        let mut cfg = RunConfig::default();
        cfg.mesh.nx = nx;
        cfg.sensors.per_side = per_side;
        cfg.bae.n_mc = n_mc;
        cfg.oed.k = k.min(per_side * per_side);
        cfg.sigma = sigma;
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn streams_are_reproducible_and_separated(seed in any::<u64>(), index in 0u64..1000) {
        let a = gaussian_vector(&mut stream(seed, "p", index), 8);
        prop_assert_eq!(&a, &gaussian_vector(&mut stream(seed, "p", index), 8));
        prop_assert_ne!(&a, &gaussian_vector(&mut stream(seed, "p", index + 1), 8));
        prop_assert_ne!(&a, &gaussian_vector(&mut stream(seed, "q", index), 8));
    }
}

#[test]
fn repaired_rank_deficient_covariance_keeps_its_range() {
    let mut rng = stream(3, "range", 0);
    let g = random_matrix(6, 2, &mut rng);
    let c = &g * g.transpose();
    let r = repair_psd(c.clone());
    assert!((&r - &c).norm() <= 1e-12 * c.norm());
}
