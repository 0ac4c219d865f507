//! Incremental posterior vs an independent dense direct solve.

mod common;

use chaining_ucb::gp::{init_posterior, log_marginal_likelihood};
use common::{dense_log_marginal_likelihood, dense_posterior, random_se_space};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn incremental_posterior_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for seed in 0..3u64 {
        let space = random_se_space(seed, 25, 6.0, 1.0);
        let noise_var = 0.0025;
        let mut state = init_posterior(&space, noise_var).unwrap();
        for step in 0..20 {
            let x = rng.random_range(0..space.len());
            let y: f64 = rng.random_range(-2.0..2.0);
            state.extend(x, y).unwrap();

            if step % 4 != 3 {
                continue;
            }
            let oracle = dense_posterior(
                &space,
                state.queried(),
                state.observations(),
                noise_var,
            );
            for i in 0..space.len() {
                assert!(
                    (state.mu()[i] - oracle.mu[i]).abs() < 1e-8,
                    "mu[{i}] diverged at step {step}"
                );
                assert!(
                    (state.sigma2()[i] - oracle.sigma2[i]).abs() < 1e-8,
                    "sigma2[{i}] diverged at step {step}"
                );
            }
            for _ in 0..50 {
                let i = rng.random_range(0..space.len());
                let j = rng.random_range(0..space.len());
                assert!(
                    (state.posterior_cov(i, j) - oracle.posterior_cov(i, j)).abs() < 1e-8
                );
                assert!(
                    (state.pseudo_distance(i, j) - oracle.pseudo_distance(i, j)).abs() < 1e-8
                );
            }
        }
    }
}

#[test]
fn alpha_solves_the_normal_equations() {
    let space = random_se_space(9, 15, 4.0, 1.0);
    let noise_var = 0.01;
    let mut state = init_posterior(&space, noise_var).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x = rng.random_range(0..space.len());
        state.extend(x, rng.random_range(-1.0..1.0)).unwrap();
    }
    // C alpha = Y
    let alpha = state.alpha();
    let queried = state.queried();
    for (a, &qa) in queried.iter().enumerate() {
        let mut lhs = 0.0;
        for (b, &qb) in queried.iter().enumerate() {
            let mut c = space.k(qa, qb);
            if a == b {
                c += noise_var;
            }
            lhs += c * alpha[b];
        }
        assert!((lhs - state.observations()[a]).abs() < 1e-8);
    }
}

#[test]
fn marginal_likelihood_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for seed in 10..14u64 {
        let space = random_se_space(seed, 30, 8.0, 1.0);
        let n = rng.random_range(1..=20usize);
        let queried: Vec<usize> = (0..n).map(|_| rng.random_range(0..space.len())).collect();
        let obs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let fast = log_marginal_likelihood(&space, &queried, &obs, 0.0025).unwrap();
        let oracle = dense_log_marginal_likelihood(&space, &queried, &obs, 0.0025);
        assert!(
            (fast - oracle).abs() < 1e-8,
            "lml {fast} vs oracle {oracle} (seed {seed}, n {n})"
        );
    }
}
