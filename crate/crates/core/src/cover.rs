//! Greedy ε-covers via dominating sets and the nested cover hierarchy.
//!
//! An ε-cover of a candidate set is computed as a dominating set of the
//! threshold graph `G[x,x'] = 1{d(x,x') <= eps}`: repeatedly select the
//! uncovered point adjacent to the most uncovered points (lowest index on
//! ties), then drop its neighborhood. The greedy set is within a factor
//! `1 + ln d_max(G)` of the optimal dominating set.
//!
//! The hierarchy stacks covers at radii `eps_i = 2^(1-i)` down to the level
//! where `eps` falls below the smallest posterior deviation, re-covering at
//! each level only the points left uncovered by the previous one.

use std::collections::BTreeSet;

/// Squared-distance access over an indexed point set.
///
/// All cover construction compares squared distances against squared radii;
/// `d(x,x') <= eps` and `d2(x,x') <= eps*eps` agree exactly for the dyadic
/// radii used here. Implementations may override the bulk scans with
/// layout-aware versions; the defaults route everything through [`d2`].
///
/// [`d2`]: PairDistance::d2
pub trait PairDistance {
    /// Number of points indexed.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Squared distance between points `i` and `j`. Must be symmetric with a
    /// zero diagonal.
    fn d2(&self, i: usize, j: usize) -> f64;

    /// Number of `j` with `mask[j]` and `d2(i, j) <= eps2`.
    fn count_within(&self, i: usize, eps2: f64, mask: &[bool]) -> usize {
        (0..self.len())
            .filter(|&j| mask[j] && self.d2(i, j) <= eps2)
            .count()
    }

    /// Appends every `j` with `mask[j]` and `d2(i, j) <= eps2` to `out`, in
    /// increasing index order.
    fn collect_within(&self, i: usize, eps2: f64, mask: &[bool], out: &mut Vec<usize>) {
        for j in 0..self.len() {
            if mask[j] && self.d2(i, j) <= eps2 {
                out.push(j);
            }
        }
    }

    /// Counts matches like [`count_within`]; when they number at most `cap`
    /// they are also appended to `out`. Returns `(count, complete)` where
    /// `complete` says the matches were appended.
    ///
    /// [`count_within`]: PairDistance::count_within
    fn scan_within(
        &self,
        i: usize,
        eps2: f64,
        mask: &[bool],
        cap: usize,
        out: &mut Vec<usize>,
    ) -> (usize, bool) {
        let count = self.count_within(i, eps2, mask);
        if count > cap {
            return (count, false);
        }
        self.collect_within(i, eps2, mask, out);
        (count, true)
    }

    /// Lowers `acc[j]` to `min(acc[j], d2(i, j))` for every `j`.
    fn fold_min_row(&self, i: usize, acc: &mut [f64]) {
        for (j, slot) in acc.iter_mut().enumerate() {
            let d = self.d2(i, j);
            if d < *slot {
                *slot = d;
            }
        }
    }
}

/// Distances served from a precomputed row-major table of squared values.
pub struct SliceDist<'a> {
    n: usize,
    d2: &'a [f64],
}

impl<'a> SliceDist<'a> {
    /// `d2` must hold `n * n` squared distances row-major.
    pub fn new(n: usize, d2: &'a [f64]) -> Self {
        assert_eq!(d2.len(), n * n, "squared-distance table length mismatch");
        Self { n, d2 }
    }
}

impl PairDistance for SliceDist<'_> {
    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    fn count_within(&self, i: usize, eps2: f64, mask: &[bool]) -> usize {
        self.d2[i * self.n..(i + 1) * self.n]
            .iter()
            .zip(mask)
            .filter(|&(&d, &m)| m && d <= eps2)
            .count()
    }

    fn collect_within(&self, i: usize, eps2: f64, mask: &[bool], out: &mut Vec<usize>) {
        let row = &self.d2[i * self.n..(i + 1) * self.n];
        for (j, (&d, &m)) in row.iter().zip(mask).enumerate() {
            if m && d <= eps2 {
                out.push(j);
            }
        }
    }

    fn fold_min_row(&self, i: usize, acc: &mut [f64]) {
        let row = &self.d2[i * self.n..(i + 1) * self.n];
        for (slot, &d) in acc.iter_mut().zip(row) {
            if d < *slot {
                *slot = d;
            }
        }
    }
}

/// Greedy ε-cover of `candidates`: every candidate ends within `epsilon` of
/// the returned set (in the exact arithmetic of the accessor). Returns the
/// selected points in selection order; an empty candidate list yields an
/// empty cover.
///
/// Candidates must be distinct indices below `dist.len()`.
pub fn greedy_cover<D: PairDistance + ?Sized>(
    candidates: &[usize],
    dist: &D,
    epsilon: f64,
) -> Vec<usize> {
    // Neighbor lists are materialized only up to this many entries per
    // point; denser balls fall back to row scans, which they amortize by
    // covering many points per selection.
    const ADJ_CAP: usize = 64;
    const SPAN_OVERFLOW: u32 = u32::MAX;

    assert!(epsilon >= 0.0, "cover radius must be nonnegative");
    let m = candidates.len();
    if m == 0 {
        return Vec::new();
    }
    let n = dist.len();
    let eps2 = epsilon * epsilon;

    let mut uncovered = vec![false; n];
    for &c in candidates {
        uncovered[c] = true;
    }
    let mut remaining = m;

    // Degrees count uncovered candidates within the radius, the point itself
    // included (its distance to itself is zero). Capped neighbor lists from
    // the same pass serve later ball and decrement lookups; they are built
    // against the initial uncovered set, so filtering by the current flags
    // recovers the exact current ball.
    let mut degree = vec![0u32; n];
    let mut adj_data: Vec<u32> = Vec::new();
    let mut adj_span: Vec<(u32, u32)> = vec![(0, SPAN_OVERFLOW); n];
    let mut buckets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); m + 1];
    let mut scratch: Vec<usize> = Vec::with_capacity(ADJ_CAP);
    for &c in candidates {
        scratch.clear();
        let (count, complete) = dist.scan_within(c, eps2, &uncovered, ADJ_CAP, &mut scratch);
        degree[c] = count as u32;
        if complete {
            adj_span[c] = (adj_data.len() as u32, count as u32);
            adj_data.extend(scratch.iter().map(|&j| j as u32));
        }
        buckets[count].insert(c as u32);
    }
    let mut top = m;

    // Current ball of `p` among uncovered points.
    let ball_of = |p: usize,
                   uncovered: &[bool],
                   out: &mut Vec<usize>,
                   adj_data: &[u32],
                   adj_span: &[(u32, u32)]| {
        out.clear();
        let (start, len) = adj_span[p];
        if len == SPAN_OVERFLOW {
            dist.collect_within(p, eps2, uncovered, out);
        } else {
            for &j in &adj_data[start as usize..(start + len) as usize] {
                if uncovered[j as usize] {
                    out.push(j as usize);
                }
            }
        }
    };

    let mut selected = Vec::new();
    let mut ball = Vec::new();
    let mut neighbors = Vec::new();
    while remaining > 0 {
        while buckets[top].is_empty() {
            top -= 1;
        }
        // Max degree, lowest index: every bucket entry is current, so the
        // first element of the top bucket is the argmax.
        let x = *buckets[top].first().expect("top bucket nonempty") as usize;
        selected.push(x);

        if degree[x] == 1 {
            ball.clear();
            ball.push(x);
        } else {
            ball_of(x, &uncovered, &mut ball, &adj_data, &adj_span);
        }
        for &b in &ball {
            uncovered[b] = false;
            buckets[degree[b] as usize].remove(&(b as u32));
        }
        remaining -= ball.len();
        if remaining == 0 {
            break;
        }

        if ball.len() >= remaining {
            // Cheaper to recompute the few survivors than to walk the ball.
            let survivors: Vec<usize> = (0..n).filter(|&j| uncovered[j]).collect();
            for &j in &survivors {
                let old = degree[j];
                let new = dist.count_within(j, eps2, &uncovered) as u32;
                if new != old {
                    buckets[old as usize].remove(&(j as u32));
                    degree[j] = new;
                    buckets[new as usize].insert(j as u32);
                }
            }
        } else {
            // Every removed point takes one unit of degree from each of its
            // still-uncovered neighbors. A removed point of degree 1 had no
            // neighbor besides itself, so nothing survives to decrement.
            for &b in &ball {
                if degree[b] == 1 {
                    continue;
                }
                ball_of(b, &uncovered, &mut neighbors, &adj_data, &adj_span);
                for &v in &neighbors {
                    let old = degree[v];
                    buckets[old as usize].remove(&(v as u32));
                    degree[v] = old - 1;
                    buckets[(old - 1) as usize].insert(v as u32);
                }
            }
        }
    }
    selected
}

/// One level of the nested hierarchy: the radius, the accumulated cover
/// `T_i`, and the members added at this level.
#[derive(Debug, Clone)]
pub struct CoverLevel {
    /// 1-based level index.
    pub index: usize,
    /// `2^(1 - index)`.
    pub radius: f64,
    /// `T_index`, ascending.
    pub members: Vec<usize>,
    /// `T_index \ T_{index-1}`, ascending.
    pub newly_added: Vec<usize>,
}

/// Nested cover sets `T_1 ⊆ T_2 ⊆ ...` with halving radii.
#[derive(Debug, Clone)]
pub struct CoverHierarchy {
    pub levels: Vec<CoverLevel>,
    /// The smallest posterior deviation the hierarchy was built for.
    pub sigma_min: f64,
}

impl CoverHierarchy {
    /// Size of `T_i` for the level with the given radius, if one matches
    /// exactly.
    pub fn size_at_radius(&self, radius: f64) -> Option<usize> {
        self.levels
            .iter()
            .find(|l| l.radius == radius)
            .map(|l| l.members.len())
    }
}

/// Number of levels for a smallest deviation `sigma_min`:
/// `ceil(1 - log2 sigma_min)`.
pub fn level_count(sigma_min: f64) -> usize {
    assert!(
        sigma_min > 0.0,
        "hierarchy needs a positive smallest deviation"
    );
    let raw = (1.0 - sigma_min.log2()).ceil();
    // sigma_min <= 1 in a unit-diagonal prior, but don't rely on it.
    raw.max(1.0) as usize
}

/// Builds the hierarchy: at each level `i`, the set of points farther than
/// `eps_i` from `T_{i-1}` (all points at level 1, since the distance to the
/// empty set is infinite) is re-covered greedily at radius `eps_i` and the
/// result merged into `T_i`.
pub fn build_hierarchy_with<D: PairDistance + ?Sized>(
    sigma_min: f64,
    dist: &D,
) -> CoverHierarchy {
    let n = dist.len();
    let i_max = level_count(sigma_min);
    let mut d2_to_cover = vec![f64::INFINITY; n];
    let mut members: Vec<usize> = Vec::new();
    let mut levels = Vec::with_capacity(i_max);
    for i in 1..=i_max {
        let radius = 2.0f64.powi(1 - i as i32);
        let eps2 = radius * radius;
        let uncovered: Vec<usize> = (0..n).filter(|&x| d2_to_cover[x] > eps2).collect();
        let mut added = greedy_cover(&uncovered, dist, radius);
        for &c in &added {
            dist.fold_min_row(c, &mut d2_to_cover);
        }
        added.sort_unstable();
        let mut merged = Vec::with_capacity(members.len() + added.len());
        let (mut a, mut b) = (0, 0);
        while a < members.len() || b < added.len() {
            match (members.get(a), added.get(b)) {
                (Some(&x), Some(&y)) if x < y => {
                    merged.push(x);
                    a += 1;
                }
                (Some(_), Some(&y)) => {
                    merged.push(y);
                    b += 1;
                }
                (Some(&x), None) => {
                    merged.push(x);
                    a += 1;
                }
                (None, Some(&y)) => {
                    merged.push(y);
                    b += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        members = merged;
        levels.push(CoverLevel {
            index: i,
            radius,
            members: members.clone(),
            newly_added: added,
        });
    }
    CoverHierarchy { levels, sigma_min }
}

/// Hierarchy over a posterior state, using its pseudo-distance directly.
pub fn build_hierarchy(state: &crate::gp::PosteriorState<'_>) -> CoverHierarchy {
    build_hierarchy_with(state.sigma_min(), state)
}
