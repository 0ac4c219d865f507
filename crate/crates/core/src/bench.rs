//! Objective construction, the seeded experiment runner, regret accounting
//! and bound-violation statistics.
//!
//! A run is fully determined by `(config, base_seed)`: the design (and graph
//! set) comes from an experiment-level stream, each run draws its own truth
//! and initial design, and every `(run, policy, purpose)` triple gets an
//! independent named substream so that adding a policy never perturbs
//! another policy's draws. Within one run all policies see the same initial
//! design and the same initial observation noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::cover::build_hierarchy_with;
use crate::gp::{
    init_posterior, log_marginal_likelihood, GpError, PairwiseDistances, PriorSampler, SearchSpace,
};
use crate::kernel::{kernel_matrix, KernelError, KernelSpec, DirectedGraph, Point};
use crate::policy::{
    chaining_select, gp_ucb_select, random_select, theorem1_bound, PolicyKind,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run {run} (seed {seed}) failed: {message}")]
    RunFailed { run: usize, seed: u64, message: String },
    #[error("trace list is empty")]
    EmptyTraces,
    #[error("traces have unequal lengths: {left} vs {right}")]
    UnequalTraceLengths { left: usize, right: usize },
    #[error("trace is missing bound values (run {run}, iteration {t})")]
    MissingBound { run: usize, t: usize },
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which ground truth the experiment optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Truth sampled from the prior over a stratified design.
    SampledGp,
    /// Negated Himmelblau polynomial with a linear trend on a uniform grid.
    Himmelblau,
    /// Truth sampled from the prior over random digraphs under the
    /// normalized shortest-path kernel.
    GraphSpace,
}

impl ObjectiveKind {
    pub fn label(self) -> &'static str {
        match self {
            ObjectiveKind::SampledGp => "sampled-gp",
            ObjectiveKind::Himmelblau => "himmelblau",
            ObjectiveKind::GraphSpace => "graph-space",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "sampled-gp" => Ok(ObjectiveKind::SampledGp),
            "himmelblau" => Ok(ObjectiveKind::Himmelblau),
            "graph-space" => Ok(ObjectiveKind::GraphSpace),
            other => Err(format!(
                "unknown objective kind {other:?} (expected sampled-gp, himmelblau or graph-space)"
            )),
        }
    }
}

/// SE bandwidth: fixed, or selected per run by maximizing the marginal
/// likelihood of the initial design over a log-spaced grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    MarginalLikelihood,
}

/// Himmelblau constants: `truth = -((x^2+y-11)^2 + (x+y^2-7)^2)/scale
/// + trend.0 x + trend.1 y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HimmelblauParams {
    pub scale: f64,
    pub trend: (f64, f64),
}

impl Default for HimmelblauParams {
    fn default() -> Self {
        Self {
            scale: 100.0,
            trend: (1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ObjectiveKind,
    /// Number of candidate points (a perfect square for grid objectives).
    pub size: usize,
    pub dim: usize,
    pub noise_sd: f64,
    pub delta: f64,
    pub n_init: usize,
    pub n_iters: usize,
    pub n_runs: usize,
    pub base_seed: u64,
    pub bandwidth: Bandwidth,
    pub box_lo: f64,
    pub box_hi: f64,
    pub jitter: f64,
    pub himmelblau: HimmelblauParams,
    /// Largest size accepted for objectives that require an O(|X|^3) prior
    /// factorization.
    pub max_sampled_size: usize,
    pub compute_bound: bool,
    pub policies: Vec<PolicyKind>,
}

impl ExperimentConfig {
    /// Config with the benchmark defaults for the given objective kind.
    pub fn new(kind: ObjectiveKind, size: usize, n_iters: usize) -> Self {
        let (box_lo, box_hi) = match kind {
            ObjectiveKind::Himmelblau => (-6.0, 6.0),
            _ => (0.0, 20.0),
        };
        let bandwidth = match kind {
            ObjectiveKind::Himmelblau => Bandwidth::MarginalLikelihood,
            _ => Bandwidth::Fixed(1.0),
        };
        Self {
            kind,
            size,
            dim: 2,
            noise_sd: 0.05,
            delta: 0.05,
            n_init: 10,
            n_iters,
            n_runs: 32,
            base_seed: 0,
            bandwidth,
            box_lo,
            box_hi,
            jitter: 1e-10,
            himmelblau: HimmelblauParams::default(),
            max_sampled_size: 4096,
            compute_bound: false,
            policies: PolicyKind::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let err = |msg: String| Err(BenchError::Config(msg));
        if self.size == 0 {
            return err("size must be at least 1".into());
        }
        if self.n_iters == 0 {
            return err("n_iters must be at least 1".into());
        }
        if self.n_runs == 0 {
            return err("n_runs must be at least 1".into());
        }
        if !(self.noise_sd > 0.0) {
            return err(format!("noise_sd must be positive, got {}", self.noise_sd));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return err(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.n_init > self.size {
            return err(format!(
                "n_init {} exceeds the design size {}",
                self.n_init, self.size
            ));
        }
        if !(self.jitter > 0.0) {
            return err(format!("jitter must be positive, got {}", self.jitter));
        }
        if self.policies.is_empty() {
            return err("at least one policy is required".into());
        }
        match self.kind {
            ObjectiveKind::SampledGp | ObjectiveKind::Himmelblau => {
                if self.dim == 0 {
                    return err("dim must be at least 1".into());
                }
                if !(self.box_hi > self.box_lo) {
                    return err(format!(
                        "domain box [{}, {}] is empty",
                        self.box_lo, self.box_hi
                    ));
                }
            }
            ObjectiveKind::GraphSpace => {}
        }
        match self.kind {
            ObjectiveKind::SampledGp | ObjectiveKind::GraphSpace => {
                if self.size > self.max_sampled_size {
                    return err(format!(
                        "size {} exceeds max_sampled_size {}: sampled objectives pay an \
                         O(|X|^3) prior factorization; raise max_sampled_size explicitly \
                         to accept the cost",
                        self.size, self.max_sampled_size
                    ));
                }
            }
            ObjectiveKind::Himmelblau => {
                if self.dim != 2 {
                    return err("the himmelblau objective is two-dimensional".into());
                }
                let g = grid_side(self.size);
                if g * g != self.size {
                    return err(format!(
                        "himmelblau grids need a perfect-square size, got {}",
                        self.size
                    ));
                }
            }
        }
        if matches!(self.bandwidth, Bandwidth::Fixed(b) if !(b > 0.0)) {
            return err("bandwidth must be positive".into());
        }
        if matches!(self.bandwidth, Bandwidth::MarginalLikelihood) {
            if self.kind != ObjectiveKind::Himmelblau {
                return err(
                    "marginal-likelihood bandwidth selection is only supported for the \
                     himmelblau objective (sampled objectives use their known kernel)"
                        .into(),
                );
            }
            if self.n_init == 0 {
                return err("bandwidth selection needs n_init >= 1".into());
            }
        }
        Ok(())
    }
}

fn grid_side(size: usize) -> usize {
    (size as f64).sqrt().round() as usize
}

/// Ground truth over a space: per-point values and the maximizer.
#[derive(Debug, Clone)]
pub struct Objective {
    pub truth: Vec<f64>,
    pub opt_value: f64,
    pub opt_index: usize,
}

impl Objective {
    /// Lowest index wins ties for the maximizer.
    pub fn new(truth: Vec<f64>) -> Result<Self, BenchError> {
        if truth.is_empty() {
            return Err(BenchError::Config("objective over an empty space".into()));
        }
        let mut opt_value = f64::NEG_INFINITY;
        let mut opt_index = 0;
        for (i, &v) in truth.iter().enumerate() {
            if v > opt_value {
                opt_value = v;
                opt_index = i;
            }
        }
        Ok(Self {
            truth,
            opt_value,
            opt_index,
        })
    }
}

// ---------------------------------------------------------------------------
// Seed streams

const TAG_DESIGN: u64 = 1;
const TAG_GRAPHS: u64 = 2;
const TAG_TRUTH: u64 = 3;
const TAG_INIT_IDX: u64 = 4;
const TAG_INIT_NOISE: u64 = 5;
const TAG_POLICY_NOISE: u64 = 6;
const TAG_POLICY_RNG: u64 = 7;

fn policy_tag(policy: PolicyKind) -> u64 {
    match policy {
        PolicyKind::Chaining => 1,
        PolicyKind::GpUcb => 2,
        PolicyKind::Random => 3,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(seed ^ 0x5157_93C2_A6B1_37D4);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

// ---------------------------------------------------------------------------
// Objective construction

/// Stratified (Latin-hypercube-style) design over the box: each axis is
/// split into `m` strata, every stratum holds exactly one coordinate, and
/// the axis-wise stratum orders are independent random permutations.
fn latin_hypercube<R: Rng + ?Sized>(
    m: usize,
    dim: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<Point> {
    use rand::seq::SliceRandom;
    let step = (hi - lo) / m as f64;
    let mut coords = vec![vec![0.0f64; dim]; m];
    for axis in 0..dim {
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(rng);
        for (j, &stratum) in perm.iter().enumerate() {
            let u: f64 = rng.random_range(0.0..1.0);
            coords[j][axis] = lo + (stratum as f64 + u) * step;
        }
    }
    coords.into_iter().map(Point::Vector).collect()
}

fn fixed_bandwidth(cfg: &ExperimentConfig) -> f64 {
    match cfg.bandwidth {
        Bandwidth::Fixed(b) => b,
        Bandwidth::MarginalLikelihood => 1.0,
    }
}

/// Design plus prior-sampled truth for the SE experiment. The design and the
/// draw both come from `rng`, so a fixed seed pins the whole objective.
pub fn make_gp_objective<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<(SearchSpace, Objective), BenchError> {
    cfg.validate()?;
    let points = latin_hypercube(cfg.size, cfg.dim, cfg.box_lo, cfg.box_hi, rng);
    let spec = KernelSpec::se(fixed_bandwidth(cfg)).map_err(BenchError::Kernel)?;
    let k = kernel_matrix(&points, &spec)?;
    let space = SearchSpace::from_dense(points, k)?;
    let sampler = PriorSampler::new(&space, cfg.jitter)?;
    let objective = Objective::new(sampler.sample(rng))?;
    Ok((space, objective))
}

pub fn himmelblau_truth(x: f64, y: f64, params: &HimmelblauParams) -> f64 {
    let a = x * x + y - 11.0;
    let b = x + y * y - 7.0;
    -((a * a + b * b) / params.scale) + params.trend.0 * x + params.trend.1 * y
}

fn himmelblau_grid(cfg: &ExperimentConfig) -> Vec<Point> {
    let g = grid_side(cfg.size);
    let step = if g > 1 {
        (cfg.box_hi - cfg.box_lo) / (g - 1) as f64
    } else {
        0.0
    };
    let mut points = Vec::with_capacity(g * g);
    for iy in 0..g {
        for ix in 0..g {
            let x = cfg.box_lo + ix as f64 * step;
            let y = cfg.box_lo + iy as f64 * step;
            points.push(Point::Vector(vec![x, y]));
        }
    }
    points
}

/// Deterministic grid objective for the Himmelblau experiment. When the
/// config defers bandwidth selection to run time, the returned space carries
/// bandwidth 1.
pub fn make_himmelblau_objective(
    cfg: &ExperimentConfig,
) -> Result<(SearchSpace, Objective), BenchError> {
    cfg.validate()?;
    let points = himmelblau_grid(cfg);
    let truth: Vec<f64> = points
        .iter()
        .map(|p| {
            let v = p.as_vector().unwrap();
            himmelblau_truth(v[0], v[1], &cfg.himmelblau)
        })
        .collect();
    let space = SearchSpace::se_on_demand(points, fixed_bandwidth(cfg))?;
    let objective = Objective::new(truth)?;
    Ok((space, objective))
}

const GRAPH_MIN_NODES: usize = 2;
const GRAPH_MAX_NODES: usize = 19;
const GRAPH_RETRIES: usize = 100;

/// One random digraph: node count uniform in `[2, 19]`, each ordered pair an
/// edge independently with probability `2 / node_count`. Graphs without any
/// edge have no reachable pair and are redrawn (bounded retries).
fn random_graph<R: Rng + ?Sized>(rng: &mut R) -> Result<DirectedGraph, BenchError> {
    for _ in 0..GRAPH_RETRIES {
        let n = rng.random_range(GRAPH_MIN_NODES..=GRAPH_MAX_NODES);
        let p = (2.0 / n as f64).min(1.0);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        return DirectedGraph::new(n, edges).map_err(BenchError::Kernel);
    }
    Err(BenchError::Config(format!(
        "failed to draw a graph with a reachable pair in {GRAPH_RETRIES} attempts"
    )))
}

/// Random digraph space plus prior-sampled truth under the normalized
/// shortest-path kernel.
pub fn make_graph_objective<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<(SearchSpace, Objective), BenchError> {
    cfg.validate()?;
    let points: Vec<Point> = (0..cfg.size)
        .map(|_| random_graph(rng).map(Point::Graph))
        .collect::<Result<_, _>>()?;
    let k = kernel_matrix(&points, &KernelSpec::ShortestPath)?;
    let space = SearchSpace::from_dense(points, k)?;
    let sampler = PriorSampler::new(&space, cfg.jitter)?;
    let objective = Objective::new(sampler.sample(rng))?;
    Ok((space, objective))
}

/// Bandwidth grid for evidence-based selection: 15 log-spaced values in
/// `[0.1, 10]`.
pub fn bandwidth_grid() -> Vec<f64> {
    (0..15)
        .map(|k| 0.1 * 100f64.powf(k as f64 / 14.0))
        .collect()
}

/// Selects the grid bandwidth maximizing the marginal likelihood of the
/// given observations (first maximum wins).
pub fn select_bandwidth_mll(
    points: &[Point],
    queried: &[usize],
    observations: &[f64],
    noise_var: f64,
) -> Result<f64, BenchError> {
    let mut best = f64::NEG_INFINITY;
    let mut best_bw = 1.0;
    for bw in bandwidth_grid() {
        let space = SearchSpace::se_on_demand(points.to_vec(), bw)?;
        let lml = log_marginal_likelihood(&space, queried, observations, noise_var)?;
        if lml > best {
            best = lml;
            best_bw = bw;
        }
    }
    Ok(best_bw)
}

// ---------------------------------------------------------------------------
// Experiment runner

/// One iteration of a policy's trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub chosen: usize,
    pub y: f64,
    pub inst_regret: f64,
    pub simple_regret: f64,
    pub cum_regret: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct PolicyResult {
    pub policy: PolicyKind,
    pub traces: Vec<RegretTrace>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Vec<PolicyResult>,
}

impl ExperimentOutput {
    pub fn for_policy(&self, policy: PolicyKind) -> Option<&PolicyResult> {
        self.results.iter().find(|r| r.policy == policy)
    }
}

enum SharedSpace {
    /// One space (and prior factor) for every run.
    Fixed(SearchSpace, PriorSampler),
    /// Grid points shared; the space is rebuilt per run so the bandwidth can
    /// differ, and the truth is common to all runs.
    PerRun { points: Vec<Point>, truth: Vec<f64> },
}

fn build_shared(cfg: &ExperimentConfig) -> Result<SharedSpace, BenchError> {
    match cfg.kind {
        ObjectiveKind::SampledGp => {
            let mut rng = stream(cfg.base_seed, &[TAG_DESIGN]);
            let points = latin_hypercube(cfg.size, cfg.dim, cfg.box_lo, cfg.box_hi, &mut rng);
            let spec = KernelSpec::se(fixed_bandwidth(cfg)).map_err(BenchError::Kernel)?;
            let k = kernel_matrix(&points, &spec)?;
            let space = SearchSpace::from_dense(points, k)?;
            let sampler = PriorSampler::new(&space, cfg.jitter)?;
            Ok(SharedSpace::Fixed(space, sampler))
        }
        ObjectiveKind::GraphSpace => {
            let mut rng = stream(cfg.base_seed, &[TAG_GRAPHS]);
            let points: Vec<Point> = (0..cfg.size)
                .map(|_| random_graph(&mut rng).map(Point::Graph))
                .collect::<Result<_, _>>()?;
            let k = kernel_matrix(&points, &KernelSpec::ShortestPath)?;
            let space = SearchSpace::from_dense(points, k)?;
            let sampler = PriorSampler::new(&space, cfg.jitter)?;
            Ok(SharedSpace::Fixed(space, sampler))
        }
        ObjectiveKind::Himmelblau => {
            let points = himmelblau_grid(cfg);
            let truth: Vec<f64> = points
                .iter()
                .map(|p| {
                    let v = p.as_vector().unwrap();
                    himmelblau_truth(v[0], v[1], &cfg.himmelblau)
                })
                .collect();
            Ok(SharedSpace::PerRun { points, truth })
        }
    }
}

/// Runs every configured policy for `n_runs` independent seeded runs and
/// returns one trace per `(policy, run)`. Runs execute in parallel on the
/// ambient rayon pool; the output ordering is independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    cfg.validate()?;
    let shared = build_shared(cfg)?;

    let per_run: Vec<Vec<RegretTrace>> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| single_run(cfg, &shared, run))
        .collect::<Result<_, _>>()?;

    let results = cfg
        .policies
        .iter()
        .enumerate()
        .map(|(pi, &policy)| PolicyResult {
            policy,
            traces: per_run.iter().map(|run| run[pi].clone()).collect(),
        })
        .collect();
    Ok(ExperimentOutput { results })
}

fn single_run(
    cfg: &ExperimentConfig,
    shared: &SharedSpace,
    run: usize,
) -> Result<Vec<RegretTrace>, BenchError> {
    let run_seed = cfg.base_seed.wrapping_add(run as u64);
    let fail = |message: String| BenchError::RunFailed {
        run,
        seed: run_seed,
        message,
    };

    let truth: Vec<f64> = match shared {
        SharedSpace::Fixed(_, sampler) => {
            let mut rng = stream(run_seed, &[TAG_TRUTH]);
            sampler.sample(&mut rng)
        }
        SharedSpace::PerRun { truth, .. } => truth.clone(),
    };
    let objective = Objective::new(truth).map_err(|e| fail(e.to_string()))?;

    let init_idx: Vec<usize> = {
        let mut rng = stream(run_seed, &[TAG_INIT_IDX]);
        rand::seq::index::sample(&mut rng, cfg.size, cfg.n_init).into_vec()
    };
    let init_y: Vec<f64> = {
        let mut rng = stream(run_seed, &[TAG_INIT_NOISE]);
        init_idx
            .iter()
            .map(|&i| objective.truth[i] + cfg.noise_sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };

    // Space for this run: shared for fixed-kernel objectives, rebuilt for
    // grid objectives whose bandwidth comes from the initial evidence.
    let owned_space: Option<SearchSpace> = match shared {
        SharedSpace::Fixed(..) => None,
        SharedSpace::PerRun { points, .. } => {
            let bw = match cfg.bandwidth {
                Bandwidth::Fixed(b) => b,
                Bandwidth::MarginalLikelihood => {
                    select_bandwidth_mll(points, &init_idx, &init_y, cfg.noise_sd * cfg.noise_sd)
                        .map_err(|e| fail(e.to_string()))?
                }
            };
            Some(SearchSpace::se_on_demand(points.clone(), bw).map_err(|e| fail(e.to_string()))?)
        }
    };
    let space: &SearchSpace = match (&owned_space, shared) {
        (Some(s), _) => s,
        (None, SharedSpace::Fixed(space, _)) => space,
        (None, SharedSpace::PerRun { .. }) => unreachable!("per-run spaces are always built"),
    };

    let mut traces = Vec::with_capacity(cfg.policies.len());
    for &policy in &cfg.policies {
        let trace = run_policy(cfg, space, &objective, &init_idx, &init_y, run_seed, policy)
            .map_err(|e| fail(e.to_string()))?;
        traces.push(trace);
    }
    Ok(traces)
}

fn run_policy(
    cfg: &ExperimentConfig,
    space: &SearchSpace,
    objective: &Objective,
    init_idx: &[usize],
    init_y: &[f64],
    run_seed: u64,
    policy: PolicyKind,
) -> Result<RegretTrace, BenchError> {
    let noise_var = cfg.noise_sd * cfg.noise_sd;
    let mut state = init_posterior(space, noise_var)?;
    let mut table = (policy == PolicyKind::Chaining).then(|| PairwiseDistances::from_space(space));
    for (&idx, &y) in init_idx.iter().zip(init_y) {
        state.extend(idx, y)?;
        if let Some(tbl) = table.as_mut() {
            tbl.update(state.cross_row(state.n_observations() - 1));
        }
    }

    let ptag = policy_tag(policy);
    let mut noise_rng = stream(run_seed, &[TAG_POLICY_NOISE, ptag]);
    let mut select_rng = stream(run_seed, &[TAG_POLICY_RNG, ptag]);

    let mut rows = Vec::with_capacity(cfg.n_iters);
    let mut best_truth = f64::NEG_INFINITY;
    let mut cum = 0.0;
    for t in 1..=cfg.n_iters {
        let (chosen, bound) = match policy {
            PolicyKind::Chaining => {
                let tbl = table.as_ref().expect("chaining keeps a distance table");
                let hierarchy = build_hierarchy_with(state.sigma_min(), tbl);
                let decision = chaining_select(&state, &hierarchy, t, cfg.delta, false);
                let bound = cfg
                    .compute_bound
                    .then(|| theorem1_bound(&state, decision.chosen, t, cfg.delta, &hierarchy, tbl));
                (decision.chosen, bound)
            }
            PolicyKind::GpUcb => (gp_ucb_select(&state, t, cfg.delta).chosen, None),
            PolicyKind::Random => (random_select(&state, &mut select_rng).chosen, None),
        };

        let noise: f64 = noise_rng.sample(StandardNormal);
        let y = objective.truth[chosen] + cfg.noise_sd * noise;
        let f_chosen = objective.truth[chosen];
        if f_chosen > best_truth {
            best_truth = f_chosen;
        }
        let inst = objective.opt_value - f_chosen;
        cum += inst;
        rows.push(TraceRow {
            t,
            chosen,
            y,
            inst_regret: inst,
            simple_regret: objective.opt_value - best_truth,
            cum_regret: cum,
            bound,
        });

        state.extend(chosen, y)?;
        if let Some(tbl) = table.as_mut() {
            tbl.update(state.cross_row(state.n_observations() - 1));
        }
    }
    Ok(RegretTrace { rows })
}

/// Per-iteration mean and sample standard deviation (n-1 denominator; zero
/// for a single run) of the simple and cumulative regrets.
#[derive(Debug, Clone)]
pub struct AggregateTrace {
    pub mean_simple: Vec<f64>,
    pub sd_simple: Vec<f64>,
    pub mean_cum: Vec<f64>,
    pub sd_cum: Vec<f64>,
}

pub fn aggregate(traces: &[RegretTrace]) -> Result<AggregateTrace, BenchError> {
    if traces.is_empty() {
        return Err(BenchError::EmptyTraces);
    }
    let len = traces[0].rows.len();
    for tr in traces {
        if tr.rows.len() != len {
            return Err(BenchError::UnequalTraceLengths {
                left: len,
                right: tr.rows.len(),
            });
        }
    }
    let n = traces.len() as f64;
    let mut out = AggregateTrace {
        mean_simple: vec![0.0; len],
        sd_simple: vec![0.0; len],
        mean_cum: vec![0.0; len],
        sd_cum: vec![0.0; len],
    };
    for t in 0..len {
        let simple: Vec<f64> = traces.iter().map(|tr| tr.rows[t].simple_regret).collect();
        let cum: Vec<f64> = traces.iter().map(|tr| tr.rows[t].cum_regret).collect();
        let mean_s = simple.iter().sum::<f64>() / n;
        let mean_c = cum.iter().sum::<f64>() / n;
        out.mean_simple[t] = mean_s;
        out.mean_cum[t] = mean_c;
        if traces.len() > 1 {
            let var_s =
                simple.iter().map(|v| (v - mean_s).powi(2)).sum::<f64>() / (n - 1.0);
            let var_c = cum.iter().map(|v| (v - mean_c).powi(2)).sum::<f64>() / (n - 1.0);
            out.sd_simple[t] = var_s.sqrt();
            out.sd_cum[t] = var_c.sqrt();
        }
    }
    Ok(out)
}

/// Fraction of runs containing at least one iteration whose instantaneous
/// regret exceeds its bound value. Every row must carry a bound.
pub fn bound_violation_stats(traces: &[RegretTrace]) -> Result<f64, BenchError> {
    if traces.is_empty() {
        return Err(BenchError::EmptyTraces);
    }
    let mut violating = 0usize;
    for (run, tr) in traces.iter().enumerate() {
        let mut violated = false;
        for row in &tr.rows {
            let bound = row.bound.ok_or(BenchError::MissingBound { run, t: row.t })?;
            if row.inst_regret > bound {
                violated = true;
            }
        }
        if violated {
            violating += 1;
        }
    }
    Ok(violating as f64 / traces.len() as f64)
}
