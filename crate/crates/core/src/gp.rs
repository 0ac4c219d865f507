//! Incremental Gaussian-process posterior over a finite search space.
//!
//! Observations arrive one at a time; the Cholesky factor of
//! `C_n = K_n + eta^2 I` is extended by a single bordered row per observation
//! (O(n^2) per step instead of an O(n^3) refactorization) and a cross matrix
//! `V = L^{-1} K(queried, .)` is kept so that posterior means, variances,
//! covariances and pseudo-distances over all candidates cost O(n) each:
//!
//! - `mu_n(x)    = V[:,x]' beta` with `beta = L^{-1} Y`
//! - `sigma_n^2(x) = k(x,x) - ||V[:,x]||^2`
//! - `k_n(x,x')  = k(x,x') - V[:,x]' V[:,x']`
//! - `d_n(x,x')  = sqrt(sigma_n^2(x) - 2 k_n(x,x') + sigma_n^2(x'))`
//!
//! Negative radicands produced by floating-point cancellation are clamped to
//! zero: both quantities are variances of Gaussian variables.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::cover::PairDistance;
use crate::kernel::{se_kernel_unchecked, Point};
use crate::linalg;
use crate::matrix::SquareMatrix;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("noise variance must be positive, got {0}")]
    InvalidNoiseVariance(f64),
    #[error("jitter must be positive, got {0}")]
    InvalidJitter(f64),
    #[error("observation is not finite: {0}")]
    NonFiniteObservation(f64),
    #[error("candidate index {index} out of range for space of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("Cholesky breakdown while extending the posterior: squared pivot {pivot:e} is not positive")]
    CholeskyBreakdown { pivot: f64 },
    #[error("factorization failed (squared pivot {pivot:e}); try a larger jitter")]
    Factorization { pivot: f64 },
    #[error("at least one observation is required")]
    EmptyObservations,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid kernel matrix: {reason}")]
    InvalidKernelMatrix { reason: String },
    #[error("space must contain at least one point")]
    EmptySpace,
    #[error("on-demand kernels require vector points of equal dimension")]
    InvalidPoints,
}

/// How a space serves prior kernel values.
#[derive(Debug, Clone)]
enum KernelSource {
    /// Precomputed dense matrix (required for prior sampling and for graph
    /// spaces).
    Dense(SquareMatrix),
    /// Squared-exponential values computed on demand from the points. Avoids
    /// the O(|X|^2) matrix on large grids.
    SeOnDemand { bandwidth: f64 },
}

/// A finite indexed set of candidate points plus its prior kernel.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    points: Vec<Point>,
    kernel: KernelSource,
}

impl SearchSpace {
    /// Space backed by a precomputed kernel matrix. The matrix must be
    /// square of matching size, symmetric to 1e-12, with unit diagonal and
    /// entries in `[0, 1]` (up to 1e-12).
    pub fn from_dense(points: Vec<Point>, kernel: SquareMatrix) -> Result<Self, GpError> {
        if points.is_empty() {
            return Err(GpError::EmptySpace);
        }
        if kernel.size() != points.len() {
            return Err(GpError::InvalidKernelMatrix {
                reason: format!(
                    "matrix size {} does not match {} points",
                    kernel.size(),
                    points.len()
                ),
            });
        }
        let tol = 1e-12;
        for i in 0..kernel.size() {
            if (kernel.get(i, i) - 1.0).abs() > tol {
                return Err(GpError::InvalidKernelMatrix {
                    reason: format!("diagonal entry {i} is {} (need 1)", kernel.get(i, i)),
                });
            }
            for j in 0..kernel.size() {
                let v = kernel.get(i, j);
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(GpError::InvalidKernelMatrix {
                        reason: format!("entry ({i},{j}) = {v} outside [0, 1]"),
                    });
                }
            }
        }
        if kernel.max_asymmetry() > tol {
            return Err(GpError::InvalidKernelMatrix {
                reason: format!("asymmetry {} exceeds 1e-12", kernel.max_asymmetry()),
            });
        }
        Ok(Self {
            points,
            kernel: KernelSource::Dense(kernel),
        })
    }

    /// Space over vector points whose SE kernel values are computed on
    /// demand instead of being materialized.
    pub fn se_on_demand(points: Vec<Point>, bandwidth: f64) -> Result<Self, GpError> {
        if points.is_empty() {
            return Err(GpError::EmptySpace);
        }
        if !(bandwidth > 0.0) {
            return Err(GpError::InvalidKernelMatrix {
                reason: format!("bandwidth must be positive, got {bandwidth}"),
            });
        }
        let dim = match &points[0] {
            Point::Vector(v) => v.len(),
            Point::Graph(_) => return Err(GpError::InvalidPoints),
        };
        if !points
            .iter()
            .all(|p| p.as_vector().map(|v| v.len() == dim).unwrap_or(false))
        {
            return Err(GpError::InvalidPoints);
        }
        Ok(Self {
            points,
            kernel: KernelSource::SeOnDemand { bandwidth },
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &Point {
        &self.points[index]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Prior kernel value `k(i, j)`.
    #[inline]
    pub fn k(&self, i: usize, j: usize) -> f64 {
        match &self.kernel {
            KernelSource::Dense(m) => m.get(i, j),
            KernelSource::SeOnDemand { bandwidth } => {
                if i == j {
                    1.0
                } else {
                    se_kernel_unchecked(
                        self.points[i].as_vector().unwrap(),
                        self.points[j].as_vector().unwrap(),
                        *bandwidth,
                    )
                }
            }
        }
    }

    /// Fills `out[j] = k(i, j)` for every candidate `j`.
    pub fn kernel_row_into(&self, i: usize, out: &mut [f64]) {
        match &self.kernel {
            KernelSource::Dense(m) => out.copy_from_slice(m.row(i)),
            KernelSource::SeOnDemand { bandwidth } => {
                let xi = self.points[i].as_vector().unwrap();
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = se_kernel_unchecked(xi, self.points[j].as_vector().unwrap(), *bandwidth);
                }
                out[i] = 1.0;
            }
        }
    }

    /// The dense prior kernel matrix, when one is materialized.
    pub fn dense_kernel(&self) -> Option<&SquareMatrix> {
        match &self.kernel {
            KernelSource::Dense(m) => Some(m),
            KernelSource::SeOnDemand { .. } => None,
        }
    }

    fn materialize_kernel(&self) -> SquareMatrix {
        match &self.kernel {
            KernelSource::Dense(m) => m.clone(),
            KernelSource::SeOnDemand { .. } => {
                let n = self.len();
                let mut m = SquareMatrix::zeros(n);
                for i in 0..n {
                    let row = m.row_mut(i);
                    // borrow checker: fill via temporary
                    let mut tmp = vec![0.0; n];
                    self.kernel_row_into(i, &mut tmp);
                    row.copy_from_slice(&tmp);
                }
                m
            }
        }
    }
}

/// Growing GP posterior: queried points, observations, the bordered Cholesky
/// factor of `C_n`, and per-candidate solved columns.
#[derive(Debug, Clone)]
pub struct PosteriorState<'s> {
    space: &'s SearchSpace,
    noise_var: f64,
    queried: Vec<usize>,
    observations: Vec<f64>,
    /// Row r holds L[r][0..=r] of the Cholesky factor of C_n.
    chol_rows: Vec<Vec<f64>>,
    /// beta = L^{-1} Y, extended in place as observations arrive.
    beta: Vec<f64>,
    /// cross[r] = row r of V = L^{-1} K(queried, .), each of length |X|.
    cross: Vec<Vec<f64>>,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

/// Initial posterior with zero observations: centered prior with unit
/// variances.
pub fn init_posterior(space: &SearchSpace, noise_var: f64) -> Result<PosteriorState<'_>, GpError> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(GpError::InvalidNoiseVariance(noise_var));
    }
    let n = space.len();
    Ok(PosteriorState {
        space,
        noise_var,
        queried: Vec::new(),
        observations: Vec::new(),
        chol_rows: Vec::new(),
        beta: Vec::new(),
        cross: Vec::new(),
        mu: vec![0.0; n],
        sigma2: (0..n).map(|i| space.k(i, i)).collect(),
    })
}

impl<'s> PosteriorState<'s> {
    pub fn space(&self) -> &'s SearchSpace {
        self.space
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn n_observations(&self) -> usize {
        self.queried.len()
    }

    pub fn queried(&self) -> &[usize] {
        &self.queried
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    /// `min_x sigma_n(x)` over all candidates.
    pub fn sigma_min(&self) -> f64 {
        self.sigma2
            .iter()
            .fold(f64::INFINITY, |acc, &s| acc.min(s))
            .sqrt()
    }

    /// Row `r` of the cross matrix `V = L^{-1} K(queried, .)`.
    pub fn cross_row(&self, r: usize) -> &[f64] {
        &self.cross[r]
    }

    /// Absorbs one observation `y` at candidate `x` by bordering the
    /// Cholesky factor; no refactorization. Repeated queries of the same
    /// index are allowed (the noise keeps `C_n` nonsingular).
    pub fn extend(&mut self, x: usize, y: f64) -> Result<(), GpError> {
        let n_points = self.space.len();
        if x >= n_points {
            return Err(GpError::IndexOutOfRange {
                index: x,
                size: n_points,
            });
        }
        if !y.is_finite() {
            return Err(GpError::NonFiniteObservation(y));
        }
        let n = self.queried.len();

        // w = L^{-1} k_n(x_new) over previously queried points: exactly the
        // already-solved column x of the cross matrix.
        let w: Vec<f64> = (0..n).map(|r| self.cross[r][x]).collect();
        let w_norm2: f64 = w.iter().map(|v| v * v).sum();
        let pivot2 = self.space.k(x, x) + self.noise_var - w_norm2;
        if pivot2 <= 0.0 {
            return Err(GpError::CholeskyBreakdown { pivot: pivot2 });
        }
        let pivot = pivot2.sqrt();

        let beta_new = {
            let dot: f64 = w.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
            (y - dot) / pivot
        };

        // New cross row: (k(x, .) - sum_r w_r V[r, .]) / pivot.
        let mut row = vec![0.0; n_points];
        self.space.kernel_row_into(x, &mut row);
        for (r, &wr) in w.iter().enumerate() {
            let cr = &self.cross[r];
            for (slot, &c) in row.iter_mut().zip(cr) {
                *slot -= wr * c;
            }
        }
        let inv_pivot = 1.0 / pivot;
        for slot in row.iter_mut() {
            *slot *= inv_pivot;
        }

        for j in 0..n_points {
            let v = row[j];
            self.mu[j] += beta_new * v;
            self.sigma2[j] = (self.sigma2[j] - v * v).max(0.0);
        }

        let mut chol_row = w;
        chol_row.push(pivot);
        self.chol_rows.push(chol_row);
        self.beta.push(beta_new);
        self.cross.push(row);
        self.queried.push(x);
        self.observations.push(y);
        Ok(())
    }

    /// Per-candidate posterior means and standard deviations.
    pub fn posterior_summary(&self) -> (Vec<f64>, Vec<f64>) {
        let sigma = self.sigma2.iter().map(|s| s.sqrt()).collect();
        (self.mu.clone(), sigma)
    }

    /// Posterior covariance `k_n(i, j)`.
    pub fn posterior_cov(&self, i: usize, j: usize) -> f64 {
        let mut dot = 0.0;
        for row in &self.cross {
            dot += row[i] * row[j];
        }
        self.space.k(i, j) - dot
    }

    /// Pseudo-distance `d_n(i, j) = sqrt(Var[f(i) - f(j) | data])`.
    ///
    /// Zero on the diagonal by definition; the radicand is clamped at zero
    /// before the square root.
    pub fn pseudo_distance(&self, i: usize, j: usize) -> f64 {
        self.pseudo_distance_sq(i, j).sqrt()
    }

    pub(crate) fn pseudo_distance_sq(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let d2 = self.sigma2[i] + self.sigma2[j] - 2.0 * self.posterior_cov(i, j);
        d2.max(0.0)
    }

    /// `alpha = C_n^{-1} Y_n`, recovered from `beta` by a transposed
    /// triangular solve over the bordered rows.
    pub fn alpha(&self) -> Vec<f64> {
        let n = self.beta.len();
        let mut alpha = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = self.beta[i];
            for j in (i + 1)..n {
                sum -= self.chol_rows[j][i] * alpha[j];
            }
            alpha[i] = sum / self.chol_rows[i][i];
        }
        alpha
    }
}

impl PairDistance for PosteriorState<'_> {
    fn len(&self) -> usize {
        self.space.len()
    }

    fn d2(&self, i: usize, j: usize) -> f64 {
        self.pseudo_distance_sq(i, j)
    }
}

/// All pairwise squared posterior pseudo-distances, maintained across
/// observations.
///
/// Appending one observation changes every squared distance by
/// `d^2 -> d^2 - (v_i - v_j)^2` where `v` is the newly solved cross row, so
/// one O(|X|^2) pass per observation keeps the full table current. Spaces
/// with at least [`PairwiseDistances::F32_THRESHOLD`] points store the table
/// in `f32` to halve the footprint; threshold comparisons stay exact for the
/// cover radii because powers of two convert to f32 without rounding.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    n: usize,
    storage: DistStorage,
    cache: std::cell::RefCell<BallCache>,
}

#[derive(Debug, Clone)]
enum DistStorage {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

/// Per-point neighbor lists, kept once a point's ball (over all points)
/// fits under the build cap. A list built at radius `r` serves any query at
/// radius `<= r`. Distances only shrink, so a pair enters a ball exactly
/// once; [`PairwiseDistances::update`] watches for those crossings and
/// appends them, which keeps lists exact across iterations. Lists that grow
/// past the drop threshold are discarded and rebuilt later at a smaller
/// radius.
#[derive(Debug, Clone)]
struct BallCache {
    entries: Vec<BallEntry>,
}

#[derive(Debug, Clone, Default)]
struct BallEntry {
    active: bool,
    radius2: f64,
    list: Vec<u32>,
}

const BALL_CACHE_CAP: usize = 64;
const BALL_CACHE_DROP: usize = 512;

impl BallCache {
    fn new(n: usize) -> Self {
        Self {
            entries: vec![BallEntry::default(); n],
        }
    }

    fn valid(&self, i: usize, eps2: f64) -> bool {
        let e = &self.entries[i];
        e.active && eps2 <= e.radius2
    }
}

impl PairwiseDistances {
    pub const F32_THRESHOLD: usize = 4096;

    /// Table of prior distances `d_0^2(i, j) = 2 - 2 k(i, j)` (exact zeros on
    /// the diagonal). The upper triangle is computed and mirrored.
    pub fn from_space(space: &SearchSpace) -> Self {
        let n = space.len();
        let storage = if n >= Self::F32_THRESHOLD {
            let mut data = vec![0.0f32; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = (2.0 - 2.0 * space.k(i, j)).max(0.0) as f32;
                    data[i * n + j] = d;
                    data[j * n + i] = d;
                }
            }
            DistStorage::F32(data)
        } else {
            let mut data = vec![0.0f64; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = (2.0 - 2.0 * space.k(i, j)).max(0.0);
                    data[i * n + j] = d;
                    data[j * n + i] = d;
                }
            }
            DistStorage::F64(data)
        };
        Self {
            n,
            storage,
            cache: std::cell::RefCell::new(BallCache::new(n)),
        }
    }

    /// Applies the rank-one downdate for a newly absorbed observation whose
    /// solved cross row is `cross_row`, appending any pair that crossed a
    /// cached ball radius to the affected list.
    pub fn update(&mut self, cross_row: &[f64]) {
        assert_eq!(cross_row.len(), self.n, "cross row length mismatch");
        let n = self.n;
        let cache = self.cache.get_mut();
        match &mut self.storage {
            DistStorage::F64(data) => {
                for i in 0..n {
                    let vi = cross_row[i];
                    let dst = &mut data[i * n..(i + 1) * n];
                    let entry = &mut cache.entries[i];
                    if entry.active {
                        update_row_tracked_f64(dst, cross_row, vi, entry.radius2, &mut entry.list);
                        if entry.list.len() > BALL_CACHE_DROP {
                            entry.active = false;
                            entry.list = Vec::new();
                        }
                    } else {
                        for (slot, &vj) in dst.iter_mut().zip(cross_row) {
                            let delta = vi - vj;
                            *slot = (*slot - delta * delta).max(0.0);
                        }
                    }
                }
            }
            DistStorage::F32(data) => {
                let row32: Vec<f32> = cross_row.iter().map(|&v| v as f32).collect();
                for i in 0..n {
                    let vi = row32[i];
                    let dst = &mut data[i * n..(i + 1) * n];
                    let entry = &mut cache.entries[i];
                    if entry.active {
                        update_row_tracked_f32(
                            dst,
                            &row32,
                            vi,
                            entry.radius2 as f32,
                            &mut entry.list,
                        );
                        if entry.list.len() > BALL_CACHE_DROP {
                            entry.active = false;
                            entry.list = Vec::new();
                        }
                    } else {
                        for (slot, &vj) in dst.iter_mut().zip(&row32) {
                            let delta = vi - vj;
                            *slot = (*slot - delta * delta).max(0.0);
                        }
                    }
                }
            }
        }
    }
}

// Chunked row scans. The count passes accumulate compare results sixteen
// entries at a time so the compiler can vectorize them; the collect pass
// tests eight entries for any match before entering the scalar path, which
// skips quickly through sparse rows.
macro_rules! row_scan_impls {
    ($count:ident, $count_dual:ident, $collect:ident, $ty:ty) => {
        fn $count(row: &[$ty], mask: &[bool], eps2: $ty) -> usize {
            let mut total = 0u32;
            let mut chunks = row.chunks_exact(16).zip(mask.chunks_exact(16));
            for (cd, cm) in &mut chunks {
                let mut local = 0u32;
                for k in 0..16 {
                    local += (cd[k] <= eps2) as u32 & cm[k] as u32;
                }
                total += local;
            }
            let tail = row.len() - row.len() % 16;
            for (j, &d) in row[tail..].iter().enumerate() {
                total += (d <= eps2) as u32 & mask[tail + j] as u32;
            }
            total as usize
        }

        /// Counts matches against the mask and against all points at once.
        fn $count_dual(row: &[$ty], mask: &[bool], eps2: $ty) -> (usize, usize) {
            let mut masked = 0u32;
            let mut all = 0u32;
            let mut chunks = row.chunks_exact(16).zip(mask.chunks_exact(16));
            for (cd, cm) in &mut chunks {
                let mut lm = 0u32;
                let mut la = 0u32;
                for k in 0..16 {
                    let hit = (cd[k] <= eps2) as u32;
                    la += hit;
                    lm += hit & cm[k] as u32;
                }
                masked += lm;
                all += la;
            }
            let tail = row.len() - row.len() % 16;
            for (j, &d) in row[tail..].iter().enumerate() {
                let hit = (d <= eps2) as u32;
                all += hit;
                masked += hit & mask[tail + j] as u32;
            }
            (masked as usize, all as usize)
        }

        fn $collect(row: &[$ty], mask: &[bool], eps2: $ty, out: &mut Vec<usize>) {
            let n = row.len();
            let mut j = 0;
            while j + 8 <= n {
                let c = &row[j..j + 8];
                let mk = &mask[j..j + 8];
                let mut any = false;
                for k in 0..8 {
                    any |= mk[k] & (c[k] <= eps2);
                }
                if any {
                    for k in 0..8 {
                        if mk[k] && c[k] <= eps2 {
                            out.push(j + k);
                        }
                    }
                }
                j += 8;
            }
            while j < n {
                if mask[j] && row[j] <= eps2 {
                    out.push(j);
                }
                j += 1;
            }
        }
    };
}

row_scan_impls!(count_row_f64, count_dual_row_f64, collect_row_f64, f64);
row_scan_impls!(count_row_f32, count_dual_row_f32, collect_row_f32, f32);

/// Appends every `j` with `row[j] <= eps2` (no mask).
macro_rules! collect_all_impls {
    ($name:ident, $ty:ty) => {
        fn $name(row: &[$ty], eps2: $ty, out: &mut Vec<u32>) {
            let n = row.len();
            let mut j = 0;
            while j + 8 <= n {
                let c = &row[j..j + 8];
                let mut any = false;
                for k in 0..8 {
                    any |= c[k] <= eps2;
                }
                if any {
                    for k in 0..8 {
                        if c[k] <= eps2 {
                            out.push((j + k) as u32);
                        }
                    }
                }
                j += 8;
            }
            while j < n {
                if row[j] <= eps2 {
                    out.push(j as u32);
                }
                j += 1;
            }
        }
    };
}

collect_all_impls!(collect_all_row_f64, f64);
collect_all_impls!(collect_all_row_f32, f32);

/// Row downdate that also records which entries crossed `radius2` from
/// above, i.e. newly entered the cached ball.
macro_rules! update_tracked_impls {
    ($name:ident, $ty:ty) => {
        fn $name(dst: &mut [$ty], v: &[$ty], vi: $ty, radius2: $ty, list: &mut Vec<u32>) {
            let n = dst.len();
            let mut j = 0;
            while j + 8 <= n {
                let mut any = false;
                for k in 0..8 {
                    let old = dst[j + k];
                    let delta = vi - v[j + k];
                    let new = (old - delta * delta).max(0.0);
                    dst[j + k] = new;
                    any |= (old > radius2) & (new <= radius2);
                }
                if any {
                    // Recover the crossers: a stored value inside the radius
                    // whose pre-update value was outside it.
                    for k in 0..8 {
                        let new = dst[j + k];
                        let delta = vi - v[j + k];
                        let old = new + delta * delta;
                        if new <= radius2 && (old > radius2 || (new == 0.0 && delta * delta > radius2)) {
                            list.push((j + k) as u32);
                        }
                    }
                }
                j += 8;
            }
            while j < n {
                let old = dst[j];
                let delta = vi - v[j];
                let new = (old - delta * delta).max(0.0);
                dst[j] = new;
                if (old > radius2) && (new <= radius2) {
                    list.push(j as u32);
                }
            }
        }
    };
}

update_tracked_impls!(update_row_tracked_f64, f64);
update_tracked_impls!(update_row_tracked_f32, f32);

impl PairDistance for PairwiseDistances {
    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn d2(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            DistStorage::F64(data) => data[i * self.n + j],
            DistStorage::F32(data) => data[i * self.n + j] as f64,
        }
    }

    fn count_within(&self, i: usize, eps2: f64, mask: &[bool]) -> usize {
        {
            let cache = self.cache.borrow();
            if cache.valid(i, eps2) {
                return cache.entries[i]
                    .list
                    .iter()
                    .filter(|&&j| mask[j as usize] && self.d2(i, j as usize) <= eps2)
                    .count();
            }
        }
        // Full scan; if the unmasked ball fits the cap, keep it so deeper
        // radii get served from the list.
        let (masked, all) = match &self.storage {
            DistStorage::F64(data) => {
                count_dual_row_f64(&data[i * self.n..(i + 1) * self.n], mask, eps2)
            }
            DistStorage::F32(data) => {
                count_dual_row_f32(&data[i * self.n..(i + 1) * self.n], mask, eps2 as f32)
            }
        };
        if all <= BALL_CACHE_CAP {
            let mut cache = self.cache.borrow_mut();
            let generation = cache.generation;
            let entry = &mut cache.entries[i];
            entry.list.clear();
            match &self.storage {
                DistStorage::F64(data) => {
                    collect_all_row_f64(&data[i * self.n..(i + 1) * self.n], eps2, &mut entry.list)
                }
                DistStorage::F32(data) => collect_all_row_f32(
                    &data[i * self.n..(i + 1) * self.n],
                    eps2 as f32,
                    &mut entry.list,
                ),
            }
            entry.generation = generation;
            entry.radius2 = eps2;
        }
        masked
    }

    fn collect_within(&self, i: usize, eps2: f64, mask: &[bool], out: &mut Vec<usize>) {
        {
            let cache = self.cache.borrow();
            if cache.valid(i, eps2) {
                for &j in &cache.entries[i].list {
                    let j = j as usize;
                    if mask[j] && self.d2(i, j) <= eps2 {
                        out.push(j);
                    }
                }
                return;
            }
        }
        match &self.storage {
            DistStorage::F64(data) => {
                collect_row_f64(&data[i * self.n..(i + 1) * self.n], mask, eps2, out)
            }
            DistStorage::F32(data) => {
                collect_row_f32(&data[i * self.n..(i + 1) * self.n], mask, eps2 as f32, out)
            }
        }
    }

    fn fold_min_row(&self, i: usize, acc: &mut [f64]) {
        match &self.storage {
            DistStorage::F64(data) => {
                let row = &data[i * self.n..(i + 1) * self.n];
                for (slot, &d) in acc.iter_mut().zip(row) {
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
            DistStorage::F32(data) => {
                let row = &data[i * self.n..(i + 1) * self.n];
                for (slot, &d) in acc.iter_mut().zip(row) {
                    let d = d as f64;
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        }
    }

}

/// Caches the Cholesky factor of `K + jitter I` so that many prior draws on
/// one space pay the O(|X|^3) factorization once.
#[derive(Debug, Clone)]
pub struct PriorSampler {
    chol: SquareMatrix,
}

impl PriorSampler {
    pub fn new(space: &SearchSpace, jitter: f64) -> Result<Self, GpError> {
        if !(jitter > 0.0) {
            return Err(GpError::InvalidJitter(jitter));
        }
        let kernel = space.materialize_kernel();
        let chol = linalg::cholesky_lower(&kernel, jitter)
            .map_err(|pivot| GpError::Factorization { pivot })?;
        Ok(Self { chol })
    }

    /// One centered draw `L z` with `z` standard normal; deterministic given
    /// the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.chol.size();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = self.chol.row(i);
            let mut sum = 0.0;
            for k in 0..=i {
                sum += row[k] * z[k];
            }
            out[i] = sum;
        }
        out
    }
}

/// Single prior draw over a space. Use [`PriorSampler`] directly when many
/// draws share one space.
pub fn sample_prior<R: Rng + ?Sized>(
    space: &SearchSpace,
    rng: &mut R,
    jitter: f64,
) -> Result<Vec<f64>, GpError> {
    Ok(PriorSampler::new(space, jitter)?.sample(rng))
}

/// Gaussian log evidence of the observations at the given queried indices:
/// `-1/2 Y' C_n^{-1} Y - 1/2 log det C_n - n/2 log(2 pi)`.
pub fn log_marginal_likelihood(
    space: &SearchSpace,
    queried: &[usize],
    observations: &[f64],
    noise_var: f64,
) -> Result<f64, GpError> {
    if queried.is_empty() {
        return Err(GpError::EmptyObservations);
    }
    if queried.len() != observations.len() {
        return Err(GpError::LengthMismatch {
            left: queried.len(),
            right: observations.len(),
        });
    }
    if !(noise_var > 0.0) {
        return Err(GpError::InvalidNoiseVariance(noise_var));
    }
    let n = queried.len();
    let mut c = SquareMatrix::zeros(n);
    for (a, &qa) in queried.iter().enumerate() {
        for (b, &qb) in queried.iter().enumerate() {
            let mut v = space.k(qa, qb);
            if a == b {
                v += noise_var;
            }
            c.set(a, b, v);
        }
    }
    let l = linalg::cholesky_lower(&c, 0.0).map_err(|pivot| GpError::Factorization { pivot })?;
    let half_y = linalg::forward_solve(&l, observations);
    let quad: f64 = half_y.iter().map(|v| v * v).sum();
    let log_det: f64 = (0..n).map(|i| l.get(i, i).ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}
