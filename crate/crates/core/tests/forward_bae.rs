mod common;

use bae_oed::forward_bae::{draw_sample, ErrorSampler, TRAINING_STREAMS};
use bae_oed::mesh_fem::{Field, Support};
use bae_oed::numkit::stream;
use bae_oed::problem::Problem;
use common::*;
use nalgebra::SymmetricEigen;

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[test]
fn condensed_map_matches_full_solve() {
    let p = small_problem(6, 6, 3, 4);
    let xi0 = Field::constant(&p.mesh, Support::Volume, 0.0);
    let mean = p.m_prior.mean().clone();
    let full = p.model.forward_full(&mean, p.model.xi_bar()).unwrap();
    let approx = p.model.forward_approx(&mean).unwrap();
    assert!(max_rel(&approx, &full) <= 1e-10);
    for k in 0..3 {
        let m = p.m_prior.sample(&mut stream(5, "m", k));
        let approx = p.model.forward_approx(&m).unwrap();
        let zero = p.model.forward_full(&m, &xi0).unwrap();
        assert!(max_rel(&approx, &zero) <= 1e-10);
        assert_eq!(approx, p.model.forward_approx(&m).unwrap());
    }
}

#[test]
fn forward_map_is_nonlinear_in_m() {
    let p = small_problem(6, 6, 3, 4);
    let m = p.m_prior.sample(&mut stream(6, "m", 0)).into_values();
    let d = p.m_prior.sample(&mut stream(6, "d", 0)).into_values();
    let at = |t: f64| {
        let v: Vec<f64> = m.iter().zip(&d).map(|(a, b)| a + t * b).collect();
        forward_full_nominal(&p, &v)
    };
    let (f0, f1, f2) = (at(0.0), at(1.0), at(2.0));
    let second: Vec<f64> = (0..f0.len()).map(|i| f2[i] - 2.0 * f1[i] + f0[i]).collect();
    let size = second.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = f0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(size > 1e-6 * scale, "{size} vs {scale}");
}

#[test]
fn stronger_robin_sink_lowers_top_state() {
    let p = small_problem(6, 6, 3, 4);
    let xi = p.model.xi_bar().clone();
    let high = Field::constant(&p.mesh, Support::Bottom, 10.0);
    let low = Field::constant(&p.mesh, Support::Bottom, -10.0);
    let uh = p.model.solve_state(&high, &xi).unwrap();
    let ul = p.model.solve_state(&low, &xi).unwrap();
    let dirichlet = p.mesh.dirichlet_nodes();
    let mut checked = 0;
    for n in p.mesh.top_nodes() {
        if dirichlet.contains(&n) {
            continue;
        }
        assert!(uh.values()[n] < ul.values()[n], "node {n}");
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn approximation_error_exceeds_noise_at_reference_settings() {
    let p = Problem::reference().unwrap();
    let m = p.m_prior.sample(&mut stream(7, "m", 0));
    let xi = p.xi_prior.sample(&mut stream(7, "xi", 0));
    let full = p.model.forward_full(&m, &xi).unwrap();
    let approx = p.model.forward_approx(&m).unwrap();
    let eps = full.iter().zip(&approx).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(eps > p.sigma, "{eps}");
}

#[test]
fn error_model_estimation() {
    let p = small_problem(5, 5, 2, 4);
    let a = p.estimate_bae(30, 4).unwrap();
    let b = p.estimate_bae(30, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_mc_used, 30);
    assert_eq!(a.gamma_eps, a.gamma_eps.transpose());
    let tr = a.gamma_eps.trace();
    let eig = SymmetricEigen::new(a.gamma_eps.clone());
    assert!(eig.eigenvalues.iter().all(|l| *l >= -1e-10 * tr));
    let nu = SymmetricEigen::new(a.gamma_nu().clone());
    assert!(nu.eigenvalues.min() >= p.sigma * p.sigma * (1.0 - 1e-8));
    assert!(p.estimate_bae(1, 4).is_err());

    // Each draw is the difference of the two maps at prior samples.
    let sampler = p.error_sampler();
    let mut mean = vec![0.0; p.n_s()];
    for i in 0..30u64 {
        let m = p.m_prior.sample(&mut stream(4, "bae-m", i));
        let xi = p.xi_prior.sample(&mut stream(4, "bae-xi", i));
        let full = p.model.forward_full(&m, &xi).unwrap();
        let approx = p.model.forward_approx(&m).unwrap();
        let e: Vec<f64> = full.iter().zip(&approx).map(|(x, y)| x - y).collect();
        assert_eq!(e, sampler.error_sample(4, i).unwrap());
        for (s, v) in mean.iter_mut().zip(&e) {
            *s += v / 30.0;
        }
    }
    assert!(max_rel(&a.eps0, &mean) <= 1e-12);
}

#[test]
fn training_samples_are_consistent() {
    let p = small_problem(5, 5, 2, 4);
    let set = p.training_set(4, 9, false).unwrap();
    assert_eq!(set.len(), 4);
    for s in &set.samples {
        let g = p.model.forward_full(&s.m, &s.xi).unwrap();
        let y: Vec<f64> = g.iter().zip(&s.eta).map(|(a, b)| a + b).collect();
        assert_eq!(y, s.y);
        let again = draw_sample(&p.model, &p.m_prior, &p.xi_prior, p.sigma, 9, TRAINING_STREAMS, s.index).unwrap();
        assert_eq!(&again, s);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            assert_ne!(set.samples[i].eta, set.samples[j].eta);
        }
    }
    assert!(p.training_set(0, 9, false).is_err());

    let fresh = p.training_set(2, 4, false).unwrap();
    let reused = p.training_set(2, 4, true).unwrap();
    let bae_m = p.m_prior.sample(&mut stream(4, "bae-m", 1));
    assert_eq!(reused.samples[1].m, bae_m);
    assert_ne!(fresh.samples[1].m, bae_m);
}

#[test]
fn validation_set_is_disjoint_from_training() {
    let p = small_problem(5, 5, 2, 4);
    let t = p.training_set(3, 9, false).unwrap();
    let v = p.validation_set(3, 9).unwrap();
    for (a, b) in t.samples.iter().zip(&v.samples) {
        assert_ne!(a.m, b.m);
    }
    assert_eq!(v, p.validation_set(3, 9).unwrap());
}
