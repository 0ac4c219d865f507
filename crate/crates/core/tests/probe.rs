//! Temporary scale probes (not part of the suite).

use chaining_ucb::bench::*;
use chaining_ucb::policy::PolicyKind;
use std::time::Instant;

#[test]
#[ignore]
fn probe_se_2000_factorization() {
    let mut cfg = ExperimentConfig::new(ObjectiveKind::SampledGp, 2000, 1);
    cfg.n_runs = 1;
    cfg.policies = vec![PolicyKind::Random];
    let t0 = Instant::now();
    let out = run_experiment(&cfg);
    println!("se-2000 factor+run: {:?} -> {:?}", t0.elapsed(), out.as_ref().map(|_| "ok").map_err(|e| e.to_string()));
    out.unwrap();
}

#[test]
#[ignore]
fn probe_graph_2000_factorization() {
    let mut cfg = ExperimentConfig::new(ObjectiveKind::GraphSpace, 2000, 1);
    cfg.n_runs = 1;
    cfg.policies = vec![PolicyKind::Random];
    let t0 = Instant::now();
    let out = run_experiment(&cfg);
    println!("graph-2000 factor+run: {:?} -> {:?}", t0.elapsed(), out.as_ref().map(|_| "ok").map_err(|e| e.to_string()));
    out.unwrap();
}

#[test]
#[ignore]
fn probe_chaining_se_2000_run() {
    let mut cfg = ExperimentConfig::new(ObjectiveKind::SampledGp, 2000, 100);
    cfg.n_runs = 1;
    cfg.policies = vec![PolicyKind::Chaining];
    let t0 = Instant::now();
    let out = run_experiment(&cfg).unwrap();
    let trace = &out.results[0].traces[0];
    println!(
        "chaining se-2000, 100 iters: {:?}; final S = {}",
        t0.elapsed(),
        trace.rows.last().unwrap().simple_regret
    );
}

#[test]
#[ignore]
fn probe_chaining_himmelblau_10000_run() {
    let mut cfg = ExperimentConfig::new(ObjectiveKind::Himmelblau, 10_000, 100);
    cfg.n_runs = 1;
    cfg.policies = vec![PolicyKind::Chaining];
    let t0 = Instant::now();
    let out = run_experiment(&cfg).unwrap();
    let trace = &out.results[0].traces[0];
    println!(
        "chaining himmelblau-10000, 100 iters: {:?}; final S = {}",
        t0.elapsed(),
        trace.rows.last().unwrap().simple_regret
    );
}

#[test]
#[ignore]
fn probe_phase_timings_himmelblau() {
    use chaining_ucb::cover::build_hierarchy_with;
    use chaining_ucb::gp::{init_posterior, PairwiseDistances, SearchSpace};
    use chaining_ucb::policy::chaining_select;
    use rand::{Rng, SeedableRng};
    use std::time::Duration;

    let cfg = ExperimentConfig::new(ObjectiveKind::Himmelblau, 10_000, 1);
    let (grid_space, objective) = make_himmelblau_objective(&cfg).unwrap();
    let space = SearchSpace::se_on_demand(grid_space.points().to_vec(), 1.9).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut state = init_posterior(&space, 0.0025).unwrap();
    let t0 = Instant::now();
    let mut table = PairwiseDistances::from_space(&space);
    println!("table init: {:?}", t0.elapsed());

    let (mut t_update, mut t_hier, mut t_select, mut t_extend) =
        (Duration::ZERO, Duration::ZERO, Duration::ZERO, Duration::ZERO);
    for i in 0..10 {
        state.extend(rng.random_range(0..10_000), rng.random_range(-5.0..5.0)).unwrap();
        table.update(state.cross_row(state.n_observations() - 1));
    }
    for t in 1..=40 {
        let c0 = Instant::now();
        let hierarchy = build_hierarchy_with(state.sigma_min(), &table);
        t_hier += c0.elapsed();
        if t % 10 == 0 {
            let sizes: Vec<usize> = hierarchy.levels.iter().map(|l| l.members.len()).collect();
            println!("t={t} sigma_min={:.4} level sizes {:?}", state.sigma_min(), sizes);
        }
        let c1 = Instant::now();
        let d = chaining_select(&state, &hierarchy, t, 0.05, false);
        t_select += c1.elapsed();
        let c2 = Instant::now();
        state.extend(d.chosen, objective.truth[d.chosen] + 0.05 * rng.random_range(-1.0..1.0)).unwrap();
        t_extend += c2.elapsed();
        let c3 = Instant::now();
        table.update(state.cross_row(state.n_observations() - 1));
        t_update += c3.elapsed();
    }
    println!("hier {t_hier:?}  select {t_select:?}  extend {t_extend:?}  update {t_update:?}");
}

#[test]
#[ignore]
fn probe_hierarchy_level_costs() {
    use chaining_ucb::cover::{greedy_cover, level_count, PairDistance};
    use chaining_ucb::gp::{init_posterior, PairwiseDistances, SearchSpace};
    use rand::{Rng, SeedableRng};

    let cfg = ExperimentConfig::new(ObjectiveKind::Himmelblau, 10_000, 1);
    let (grid_space, _objective) = make_himmelblau_objective(&cfg).unwrap();
    let space = SearchSpace::se_on_demand(grid_space.points().to_vec(), 1.9).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut state = init_posterior(&space, 0.0025).unwrap();
    let mut table = PairwiseDistances::from_space(&space);
    for _ in 0..40 {
        state.extend(rng.random_range(0..10_000), rng.random_range(-5.0..5.0)).unwrap();
        table.update(state.cross_row(state.n_observations() - 1));
    }
    // replicate build_hierarchy_with, timed per level
    let n = table.len();
    let sigma_min = state.sigma_min();
    let i_max = level_count(sigma_min);
    let mut d2_to_cover = vec![f64::INFINITY; n];
    println!("sigma_min {sigma_min:.5}, {i_max} levels");
    for i in 1..=i_max {
        let radius = 2.0f64.powi(1 - i as i32);
        let eps2 = radius * radius;
        let t0 = Instant::now();
        let xbar: Vec<usize> = (0..n).filter(|&x| d2_to_cover[x] > eps2).collect();
        let t_xbar = t0.elapsed();
        let t1 = Instant::now();
        let added = greedy_cover(&xbar, &table, radius);
        let t_greedy = t1.elapsed();
        let t2 = Instant::now();
        for &c in &added {
            table.fold_min_row(c, &mut d2_to_cover);
        }
        let t_fold = t2.elapsed();
        println!(
            "level {i}: eps {radius:.5} |xbar| {} |new| {} xbar {t_xbar:?} greedy {t_greedy:?} fold {t_fold:?}",
            xbar.len(),
            added.len()
        );
    }
}

#[test]
#[ignore]
fn probe_count_variants() {
    use std::hint::black_box;
    let n = 10_000usize;
    let rows = 2_000usize;
    let mut data = vec![0.0f32; n];
    let mut mask = vec![false; n];
    let mut st = 1u64;
    for j in 0..n {
        st = st.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        data[j] = ((st >> 33) as f32) / (u32::MAX as f32) * 2.0;
        mask[j] = (st >> 7) & 1 == 1;
    }
    let eps2 = 0.3f32;

    let t = Instant::now();
    let mut acc = 0usize;
    for _ in 0..rows {
        acc += data.iter().zip(&mask).map(|(&d, &m)| usize::from(m & (d <= eps2))).sum::<usize>();
        black_box(&data);
    }
    println!("iter-sum     : {:?} (acc {acc})", t.elapsed());

    let t = Instant::now();
    let mut acc2 = 0u64;
    for _ in 0..rows {
        let mut c = 0u32;
        for (&d, &m) in data.iter().zip(&mask) {
            c += (d <= eps2) as u32 & m as u32;
        }
        acc2 += c as u64;
        black_box(&data);
    }
    println!("u32-accum    : {:?} (acc {acc2})", t.elapsed());

    let t = Instant::now();
    let mut acc3 = 0u64;
    for _ in 0..rows {
        let mut c = 0u32;
        for (ch_d, ch_m) in data.chunks_exact(16).zip(mask.chunks_exact(16)) {
            let mut local = 0u32;
            for k in 0..16 {
                local += (ch_d[k] <= eps2) as u32 & ch_m[k] as u32;
            }
            c += local;
        }
        acc3 += c as u64;
        black_box(&data);
    }
    println!("chunk16-accum: {:?} (acc {acc3})", t.elapsed());

    // mask folded into the data: masked-out entries become +inf once
    let t = Instant::now();
    let mut masked = data.clone();
    for j in 0..n { if !mask[j] { masked[j] = f32::INFINITY; } }
    let mut acc4 = 0u64;
    for _ in 0..rows {
        let mut c = 0u32;
        for &d in &masked {
            c += (d <= eps2) as u32;
        }
        acc4 += c as u64;
        black_box(&masked);
    }
    println!("pure-f32     : {:?} (acc {acc4})", t.elapsed());
}
