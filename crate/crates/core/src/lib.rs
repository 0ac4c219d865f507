//! Gaussian-process bandit optimization over finite search spaces.
//!
//! The library implements a UCB-style acquisition whose exploration bonus is
//! assembled from hierarchical ε-covers of the search space under the
//! posterior pseudo-distance, together with a GP-UCB baseline, a random
//! baseline, and a benchmark harness that tracks simple and cumulative regret
//! and can validate the high-probability bound on the instantaneous regret.
//!
//! Modules:
//! - [`kernel`]: squared-exponential and normalized shortest-path kernels,
//!   Floyd–Warshall preprocessing, kernel-matrix construction.
//! - [`gp`]: incremental GP posterior (mean, variance, covariance,
//!   pseudo-distance), prior sampling, marginal likelihood.
//! - [`cover`]: greedy ε-covers via dominating sets and the nested cover
//!   hierarchy used by the acquisition.
//! - [`policy`]: the chaining acquisition, GP-UCB, random search, and the
//!   regret-bound calculator.
//! - [`bench`]: objectives, the seeded experiment runner, regret traces and
//!   aggregation.

pub mod bench;
pub mod cover;
pub mod gp;
pub mod kernel;
mod linalg;
pub mod matrix;
pub mod policy;

pub use matrix::SquareMatrix;
