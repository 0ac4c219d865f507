//! Shared test support: independent dense-solve posterior oracle and random
//! space construction.

#![allow(dead_code)]

use chaining_ucb::gp::SearchSpace;
use chaining_ucb::kernel::{kernel_matrix, KernelSpec, Point};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Posterior quantities recomputed from scratch with a dense direct solve
/// (nalgebra), fully independent of the incremental implementation.
pub struct DenseOracle {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    cov: DMatrix<f64>,
}

impl DenseOracle {
    pub fn posterior_cov(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)]
    }

    pub fn pseudo_distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        (self.cov[(i, i)] + self.cov[(j, j)] - 2.0 * self.cov[(i, j)])
            .max(0.0)
            .sqrt()
    }
}

pub fn dense_posterior(
    space: &SearchSpace,
    queried: &[usize],
    observations: &[f64],
    noise_var: f64,
) -> DenseOracle {
    let n = queried.len();
    let m = space.len();
    let prior = DMatrix::from_fn(m, m, |i, j| space.k(i, j));
    if n == 0 {
        let sigma2 = (0..m).map(|i| prior[(i, i)]).collect();
        return DenseOracle {
            mu: vec![0.0; m],
            sigma2,
            cov: prior,
        };
    }
    let c = DMatrix::from_fn(n, n, |a, b| {
        space.k(queried[a], queried[b]) + if a == b { noise_var } else { 0.0 }
    });
    let cross = DMatrix::from_fn(n, m, |a, j| space.k(queried[a], j));
    let y = DVector::from_column_slice(observations);
    let chol = Cholesky::new(c).expect("test covariance must be positive definite");
    let alpha = chol.solve(&y);
    let solved_cross = chol.solve(&cross);
    let mu_vec = cross.transpose() * alpha;
    let cov = &prior - cross.transpose() * solved_cross;
    let mu = mu_vec.iter().copied().collect();
    let sigma2 = (0..m).map(|i| cov[(i, i)].max(0.0)).collect();
    DenseOracle { mu, sigma2, cov }
}

/// Gaussian log evidence from a dense direct solve.
pub fn dense_log_marginal_likelihood(
    space: &SearchSpace,
    queried: &[usize],
    observations: &[f64],
    noise_var: f64,
) -> f64 {
    let n = queried.len();
    let c = DMatrix::from_fn(n, n, |a, b| {
        space.k(queried[a], queried[b]) + if a == b { noise_var } else { 0.0 }
    });
    let y = DVector::from_column_slice(observations);
    let chol = Cholesky::new(c).expect("test covariance must be positive definite");
    let alpha = chol.solve(&y);
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Random SE space over `[0, side]^2`.
pub fn random_se_space(seed: u64, size: usize, side: f64, bandwidth: f64) -> SearchSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..size)
        .map(|_| {
            Point::Vector(vec![
                rng.random_range(0.0..side),
                rng.random_range(0.0..side),
            ])
        })
        .collect();
    let k = kernel_matrix(&points, &KernelSpec::se(bandwidth).unwrap()).unwrap();
    SearchSpace::from_dense(points, k).unwrap()
}
