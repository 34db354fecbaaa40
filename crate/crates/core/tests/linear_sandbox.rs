use bae_oed::forward_bae::estimate_bae;
use bae_oed::inversion::MapOptions;
use bae_oed::linear_sandbox::*;
use bae_oed::numkit::stream;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

fn instance(k: u64) -> LinearModel {
    let mut rng = stream(11, "sandbox", k);
    let d = rng.random_range(2..=12);
    let n = rng.random_range(1..=12);
    let p = rng.random_range(1..=12);
    LinearModel::random(d, n, p, 0.05, &mut rng)
}

fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn marginal_posterior_equals_total_error_posterior() {
    for k in 0..20 {
        let lm = instance(k);
        let a = lm.analytic_posterior_cov().unwrap();
        let b = lm.marginal_posterior_cov().unwrap();
        assert!((&a - &b).norm() <= 1e-10, "instance {k}: {}", (&a - &b).norm());
    }
}

#[test]
fn woodbury_identity_holds() {
    for k in 0..20 {
        let mut lm = instance(k);
        assert!(lm.smw_check().unwrap() <= 1e-10, "instance {k}");
        lm.c_xi *= 37.5;
        assert!(lm.smw_check().unwrap() <= 1e-10, "scaled instance {k}");
    }
}

#[test]
fn degenerate_instances() {
    let mut rng = stream(12, "degenerate", 0);
    let base = LinearModel::random(6, 4, 3, 0.05, &mut rng);
    let standard = |lm: &LinearModel| {
        let h = lm.s.transpose() * &lm.s / lm.sigma2 + lm.c_pr.clone().try_inverse().unwrap();
        h.try_inverse().unwrap()
    };

    let mut no_t = base.clone();
    no_t.t = DMatrix::zeros(6, 3);
    assert!(frob_rel(&no_t.analytic_posterior_cov().unwrap(), &standard(&no_t)) <= 1e-10);
    assert!(frob_rel(&no_t.marginal_posterior_cov().unwrap(), &standard(&no_t)) <= 1e-10);
    assert_eq!(no_t.smw_check().unwrap(), 0.0);

    let mut no_s = base.clone();
    no_s.s = DMatrix::zeros(6, 4);
    assert!(frob_rel(&no_s.analytic_posterior_cov().unwrap(), &base.c_pr) <= 1e-10);

    let no_xi = LinearModel::new(
        base.s.clone(),
        DMatrix::zeros(6, 0),
        base.c_pr.clone(),
        DMatrix::zeros(0, 0),
        DVector::zeros(4),
        DVector::zeros(0),
        DVector::zeros(0),
        base.sigma2,
    )
    .unwrap();
    assert!(frob_rel(&no_xi.marginal_posterior_cov().unwrap(), &standard(&no_xi)) <= 1e-10);
    assert!(frob_rel(&no_xi.analytic_posterior_cov().unwrap(), &standard(&no_xi)) <= 1e-10);
    assert_eq!(no_xi.smw_check().unwrap(), 0.0);
}

#[test]
fn inconsistent_dimensions_rejected() {
    let mut rng = stream(12, "bad", 0);
    let lm = LinearModel::random(6, 4, 3, 0.05, &mut rng);
    let bad = LinearModel::new(
        lm.s.clone(),
        DMatrix::zeros(5, 3),
        lm.c_pr.clone(),
        lm.c_xi.clone(),
        lm.m_pr.clone(),
        lm.xi_mean.clone(),
        lm.xi_bar.clone(),
        lm.sigma2,
    );
    assert!(bad.is_err());
    let neg = LinearModel::new(
        lm.s.clone(),
        lm.t.clone(),
        lm.c_pr.clone(),
        lm.c_xi.clone(),
        lm.m_pr.clone(),
        lm.xi_mean.clone(),
        lm.xi_bar.clone(),
        0.0,
    );
    assert!(neg.is_err());
}

#[test]
fn posterior_covariance_matches_conditional_sampling() {
    let mut rng = stream(13, "mc-posterior", 0);
    let lm = LinearModel::random(6, 4, 3, 0.05, &mut rng);
    let n = 20_000;
    let mut cov = DMatrix::zeros(4, 4);
    for _ in 0..n {
        let (m, _, y) = lm.draw(&mut rng);
        let e = m - lm.posterior_mean(&y).unwrap();
        cov += &e * e.transpose();
    }
    cov /= n as f64;
    let exact = lm.analytic_posterior_cov().unwrap();
    assert!(frob_rel(&cov, &exact) <= 0.05, "{}", frob_rel(&cov, &exact));
}

#[test]
fn error_spectrum_identities() {
    for k in 0..20 {
        let lm = instance(k);
        let (d, _, _) = lm.dims();
        let rep = lm.error_spectrum_report();
        let g = lm.gamma_eps();
        let total: f64 = rep.variances.iter().sum();
        let expect = g.trace() + d as f64 * lm.sigma2;
        assert!((total - expect).abs() <= 1e-12 * expect.max(1.0));
        let nu = lm.gamma_nu();
        for i in 0..d {
            assert!((rep.variances[i] - nu[(i, i)]).abs() <= 1e-12 * nu[(i, i)].max(1.0));
        }
        assert!(rep.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    let mut rng = stream(14, "rank-one", 0);
    let mut lm = LinearModel::random(8, 3, 5, 0.05, &mut rng);
    let u = random_matrix(8, 1, &mut rng);
    let v = random_matrix(1, 5, &mut rng);
    lm.t = u * v;
    let rep = lm.error_spectrum_report();
    assert_eq!(rep.eigenvalues.iter().filter(|l| **l != 0.0).count(), 1);
    assert!(rep.eigenvalues[0] > 0.0);
}

#[test]
fn sampled_error_statistics_converge_to_analytic() {
    let mut rng = stream(15, "bridge", 0);
    let lm = LinearModel::random(8, 4, 5, 0.05, &mut rng);
    let exact = lm.gamma_eps();
    for n_mc in [100usize, 1000, 10_000] {
        let em = estimate_bae(&LinearErrorSampler(&lm), n_mc, 3, lm.sigma2.sqrt()).unwrap();
        let dev = frob_rel(&em.gamma_eps, &exact);
        assert!(dev <= 4.0 / (n_mc as f64).sqrt(), "n_mc {n_mc}: {dev}");
        let eps0 = DVector::from_column_slice(&em.eps0);
        let scale = exact.diagonal().map(f64::sqrt).norm();
        assert!(eps0.norm() <= 4.0 * scale / (n_mc as f64).sqrt());
    }
}

#[test]
fn nonzero_offset_fixture() {
    let mut rng = stream(16, "offset", 0);
    let mut lm = LinearModel::random(7, 4, 3, 0.05, &mut rng);
    lm.xi_mean = DVector::from_vec(vec![0.5, -1.0, 2.0]);
    lm.m_pr = DVector::from_vec(vec![0.3, 0.0, -0.2, 0.1]);
    let expect = &lm.t * &lm.xi_mean;
    assert!((lm.eps0() - &expect).norm() <= 1e-14 * expect.norm());

    let n_mc = 10_000;
    let em = estimate_bae(&LinearErrorSampler(&lm), n_mc, 8, lm.sigma2.sqrt()).unwrap();
    let scale = lm.gamma_eps().diagonal().map(f64::sqrt).norm();
    let got = DVector::from_column_slice(&em.eps0);
    assert!((got - &expect).norm() <= 4.0 * scale / (n_mc as f64).sqrt());

    let (_, _, y) = lm.draw(&mut rng);
    let exact = lm.posterior_mean(&y).unwrap();
    let opts = MapOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..MapOptions::default()
    };
    let map = LinearInverse::new(&lm, &y).unwrap().solve_map(&opts).unwrap();
    assert!((&map - &exact).norm() <= 1e-6 * exact.norm().max(1.0));

    // Ignoring the offset moves the estimate.
    let mut shifted = lm.clone();
    shifted.xi_mean = shifted.xi_bar.clone();
    let biased = shifted.posterior_mean(&y).unwrap();
    assert!((&biased - &exact).norm() > 1e-3);
}

#[test]
fn doubling_samples_tightens_independent_estimates() {
    let mut rng = stream(17, "doubling", 0);
    let lm = LinearModel::random(8, 4, 5, 0.05, &mut rng);
    let sampler = LinearErrorSampler(&lm);
    let dev = |n_mc: usize, rep: u64| {
        let a = estimate_bae(&sampler, n_mc, 1000 + 2 * rep, 0.1).unwrap();
        let b = estimate_bae(&sampler, n_mc, 1001 + 2 * rep, 0.1).unwrap();
        (&a.gamma_eps - &b.gamma_eps).norm()
    };
    let median = |n_mc: usize| {
        let mut v: Vec<f64> = (0..5).map(|r| dev(n_mc, r + n_mc as u64 * 10)).collect();
        v.sort_by(f64::total_cmp);
        v[2]
    };
    let (small, large) = (median(100), median(200));
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn trace_identities_and_estimator() {
    for k in 0..20 {
        let mut rng = stream(18, "trace", k);
        let n = rng.random_range(2..=12);
        let c = random_spd(n, &mut rng);
        let g = random_matrix(n, n, &mut rng);
        let kk = &g * g.transpose();
        let (a, b) = trace_pair(&c, &kk);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "instance {k}");
        let (direct, update) = lowrank_trace_pair(&c, &kk).unwrap();
        assert!((direct - update).abs() <= 1e-10 * direct.abs().max(1.0), "instance {k}");
    }

    let mut rng = stream(19, "hutchinson", 0);
    let c = random_spd(8, &mut rng);
    let g = random_matrix(8, 8, &mut rng);
    let kk = &g * g.transpose();
    let truth = (&c * &kk).trace();
    for n_tr in [10, 100] {
        let samples = quadratic_form_samples(&c, &kk, n_tr, &mut rng);
        let (mean, se) = mean_and_se(&samples);
        assert!((mean - truth).abs() <= 3.0 * se, "n_tr {n_tr}: {mean} vs {truth}");
    }
}

#[test]
fn low_rank_update_matches_prior_preconditioned_form() {
    // tr((H + C^{-1})^{-1}) through the spectrum of C^{1/2} H C^{1/2}.
    let mut rng = stream(20, "precond", 0);
    let c = random_spd(7, &mut rng);
    let j = random_matrix(3, 7, &mut rng);
    let h = j.transpose() * &j * 10.0;
    let half = sqrt_spd(&c);
    let ht = &half * &h * &half;
    let (direct, update) = lowrank_trace_pair(&c, &ht).unwrap();
    let post = (&h + c.clone().try_inverse().unwrap()).try_inverse().unwrap();
    assert!((post.trace() - direct).abs() <= 1e-10 * direct);
    assert!((direct - update).abs() <= 1e-10 * direct);
    let eig = SymmetricEigen::new(ht);
    assert_eq!(eig.eigenvalues.iter().filter(|l| **l > 1e-10).count(), 3);
}
