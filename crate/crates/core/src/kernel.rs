//! Kernel functions and kernel-matrix construction for vector spaces and
//! directed-graph spaces.
//!
//! Every kernel here is normalized so that `k(x, x) = 1` and all values lie
//! in `[0, 1]`: the squared-exponential kernel by construction, the
//! shortest-path graph kernel by explicit normalization with its raw
//! self-similarity.

use thiserror::Error;

use crate::matrix::SquareMatrix;

/// Upper limit on graph sizes accepted by [`DirectedGraph::new`].
pub const MAX_GRAPH_NODES: usize = 20;

/// Marker for unreachable node pairs in a shortest-path matrix.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("all points of a space must share one variant (vector or graph) and one dimension")]
    MixedPoints,
    #[error("graph {index} has zero raw self-similarity (no reachable node pair); cannot normalize")]
    ZeroSelfSimilarity { index: usize },
    #[error("invalid graph: {reason}")]
    InvalidGraph { reason: String },
    #[error("graph file, line {line}: {reason}")]
    GraphFormat { line: usize, reason: String },
}

/// A candidate point of a search space: either a real vector or a directed
/// graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Vector(Vec<f64>),
    Graph(DirectedGraph),
}

impl Point {
    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Point::Vector(v) => Some(v),
            Point::Graph(_) => None,
        }
    }

    pub fn as_graph(&self) -> Option<&DirectedGraph> {
        match self {
            Point::Vector(_) => None,
            Point::Graph(g) => Some(g),
        }
    }
}

/// All-pairs shortest-path lengths of a directed graph (unit edge weights).
///
/// Entry `(u, v)` is the minimum number of edges on a directed path from `u`
/// to `v`, `0` on the diagonal, [`UNREACHABLE`] when no path exists.
#[derive(Debug, Clone, PartialEq)]
pub struct SpMatrix {
    n: usize,
    dist: Vec<u32>,
}

impl SpMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u32 {
        self.dist[u * self.n + v]
    }

    /// Ordered pairs `(u, v)` with `u != v` and a finite path length.
    pub fn reachable_pair_count(&self) -> usize {
        let mut count = 0;
        for u in 0..self.n {
            for v in 0..self.n {
                if u != v && self.get(u, v) != UNREACHABLE {
                    count += 1;
                }
            }
        }
        count
    }

    /// Histogram of finite path lengths over ordered pairs `u != v`.
    /// Index `l` holds the number of pairs at length `l`; index 0 is unused.
    pub fn length_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.n.max(1)];
        for u in 0..self.n {
            for v in 0..self.n {
                let d = self.get(u, v);
                if u != v && d != UNREACHABLE {
                    hist[d as usize] += 1;
                }
            }
        }
        hist
    }
}

/// An unweighted directed graph with at most [`MAX_GRAPH_NODES`] nodes and no
/// self-loops. Shortest-path lengths and the path-length histogram are
/// computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    sp: SpMatrix,
    hist: Vec<u64>,
}

impl DirectedGraph {
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, KernelError> {
        if node_count == 0 || node_count > MAX_GRAPH_NODES {
            return Err(KernelError::InvalidGraph {
                reason: format!(
                    "node count {node_count} outside 1..={MAX_GRAPH_NODES}"
                ),
            });
        }
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(u, v) in &edges {
            if u == v {
                return Err(KernelError::InvalidGraph {
                    reason: format!("self-loop at node {u}"),
                });
            }
            if u >= node_count || v >= node_count {
                return Err(KernelError::InvalidGraph {
                    reason: format!("edge ({u}, {v}) references a node >= {node_count}"),
                });
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let sp = floyd_warshall_impl(node_count, &edges);
        let hist = sp.length_histogram();
        Ok(Self {
            node_count,
            edges,
            sp,
            hist,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn sp_matrix(&self) -> &SpMatrix {
        &self.sp
    }

    /// Path-length histogram over ordered reachable pairs (`u != v`).
    pub fn length_histogram(&self) -> &[u64] {
        &self.hist
    }

    /// Raw (unnormalized) self-similarity under the shortest-path kernel.
    pub fn raw_self_similarity(&self) -> f64 {
        self.hist.iter().map(|&c| (c * c) as f64).sum()
    }
}

fn floyd_warshall_impl(n: usize, edges: &[(usize, usize)]) -> SpMatrix {
    let mut dist = vec![UNREACHABLE; n * n];
    for u in 0..n {
        dist[u * n + u] = 0;
    }
    for &(u, v) in edges {
        dist[u * n + v] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if dik == UNREACHABLE {
                continue;
            }
            for j in 0..n {
                let dkj = dist[k * n + j];
                if dkj == UNREACHABLE {
                    continue;
                }
                let through = dik + dkj;
                if through < dist[i * n + j] {
                    dist[i * n + j] = through;
                }
            }
        }
    }
    SpMatrix { n, dist }
}

/// All-pairs shortest paths over unit edge weights.
pub fn floyd_warshall(graph: &DirectedGraph) -> SpMatrix {
    floyd_warshall_impl(graph.node_count, &graph.edges)
}

/// Squared-exponential kernel `exp(-||x - x2||^2 / (2 bandwidth^2))`.
pub fn se_kernel(x: &[f64], x2: &[f64], bandwidth: f64) -> Result<f64, KernelError> {
    if x.len() != x2.len() {
        return Err(KernelError::DimensionMismatch {
            left: x.len(),
            right: x2.len(),
        });
    }
    if !(bandwidth > 0.0) {
        return Err(KernelError::InvalidBandwidth(bandwidth));
    }
    Ok(se_kernel_unchecked(x, x2, bandwidth))
}

#[inline]
pub(crate) fn se_kernel_unchecked(x: &[f64], x2: &[f64], bandwidth: f64) -> f64 {
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(x2) {
        let d = a - b;
        sq += d * d;
    }
    (-sq / (2.0 * bandwidth * bandwidth)).exp()
}

/// Raw shortest-path kernel: the number of ordered reachable pair matchings
/// between the two graphs whose path lengths agree (delta base kernel).
///
/// Equals the double sum over reachable pairs of both graphs of
/// `1{len == len'}`, computed through the per-graph length histograms.
pub fn shortest_path_kernel(g: &DirectedGraph, g2: &DirectedGraph) -> f64 {
    let (short, long) = if g.hist.len() <= g2.hist.len() {
        (&g.hist, &g2.hist)
    } else {
        (&g2.hist, &g.hist)
    };
    short
        .iter()
        .zip(long.iter())
        .map(|(&a, &b)| (a * b) as f64)
        .sum()
}

/// Kernel choice for a search space.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    SquaredExponential { bandwidth: f64 },
    ShortestPath,
}

impl KernelSpec {
    pub fn se(bandwidth: f64) -> Result<Self, KernelError> {
        if !(bandwidth > 0.0) {
            return Err(KernelError::InvalidBandwidth(bandwidth));
        }
        Ok(KernelSpec::SquaredExponential { bandwidth })
    }
}

/// Prior kernel matrix over a candidate list: symmetric with unit diagonal,
/// every entry in `[0, 1]`.
///
/// The upper triangle is computed and mirrored, so symmetry is exact. Graph
/// kernels are normalized by `k(i,j) / sqrt(k(i,i) k(j,j))`; a graph with no
/// reachable pair has zero raw self-similarity and is reported as an error.
pub fn kernel_matrix(points: &[Point], spec: &KernelSpec) -> Result<SquareMatrix, KernelError> {
    if points.is_empty() {
        return Err(KernelError::EmptyCandidates);
    }
    let n = points.len();
    let mut out = SquareMatrix::zeros(n);
    match spec {
        KernelSpec::SquaredExponential { bandwidth } => {
            if !(*bandwidth > 0.0) {
                return Err(KernelError::InvalidBandwidth(*bandwidth));
            }
            let vectors: Vec<&[f64]> = points
                .iter()
                .map(|p| p.as_vector().ok_or(KernelError::MixedPoints))
                .collect::<Result<_, _>>()?;
            let dim = vectors[0].len();
            if vectors.iter().any(|v| v.len() != dim) {
                return Err(KernelError::MixedPoints);
            }
            for i in 0..n {
                out.set(i, i, 1.0);
                for j in (i + 1)..n {
                    let k = se_kernel_unchecked(vectors[i], vectors[j], *bandwidth);
                    out.set(i, j, k);
                    out.set(j, i, k);
                }
            }
        }
        KernelSpec::ShortestPath => {
            let graphs: Vec<&DirectedGraph> = points
                .iter()
                .map(|p| p.as_graph().ok_or(KernelError::MixedPoints))
                .collect::<Result<_, _>>()?;
            let self_sims: Vec<f64> = graphs.iter().map(|g| g.raw_self_similarity()).collect();
            for (index, &s) in self_sims.iter().enumerate() {
                if s <= 0.0 {
                    return Err(KernelError::ZeroSelfSimilarity { index });
                }
            }
            for i in 0..n {
                out.set(i, i, 1.0);
                for j in (i + 1)..n {
                    let raw = shortest_path_kernel(graphs[i], graphs[j]);
                    // Cauchy-Schwarz bounds the ratio by 1; rounding of the
                    // square root may exceed it by an ulp.
                    let k = (raw / (self_sims[i] * self_sims[j]).sqrt()).min(1.0);
                    out.set(i, j, k);
                    out.set(j, i, k);
                }
            }
        }
    }
    Ok(out)
}

/// Parses the graph block format:
///
/// ```text
/// graph <id> <node_count>
/// u v
/// u v
///
/// graph <id> <node_count>
/// ...
/// ```
///
/// Blocks are separated by blank lines; edge lines hold two 0-indexed node
/// ids. Returns `(id, graph)` pairs in file order.
pub fn parse_graph_file(text: &str) -> Result<Vec<(String, DirectedGraph)>, KernelError> {
    let mut graphs = Vec::new();
    let mut header: Option<(usize, String, usize)> = None; // (line, id, node_count)
    let mut edges: Vec<(usize, usize)> = Vec::new();

    let finish = |header: &mut Option<(usize, String, usize)>,
                      edges: &mut Vec<(usize, usize)>,
                      graphs: &mut Vec<(String, DirectedGraph)>|
     -> Result<(), KernelError> {
        if let Some((line, id, node_count)) = header.take() {
            let graph = DirectedGraph::new(node_count, edges.drain(..)).map_err(|e| {
                KernelError::GraphFormat {
                    line,
                    reason: e.to_string(),
                }
            })?;
            graphs.push((id, graph));
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            finish(&mut header, &mut edges, &mut graphs)?;
            continue;
        }
        let mut tokens = line.split_whitespace();
        let first = tokens.next().unwrap();
        if first == "graph" {
            finish(&mut header, &mut edges, &mut graphs)?;
            let id = tokens
                .next()
                .ok_or(KernelError::GraphFormat {
                    line: line_no,
                    reason: "missing graph id".into(),
                })?
                .to_string();
            let node_count: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(KernelError::GraphFormat {
                    line: line_no,
                    reason: "missing or invalid node count".into(),
                })?;
            if tokens.next().is_some() {
                return Err(KernelError::GraphFormat {
                    line: line_no,
                    reason: "trailing tokens after graph header".into(),
                });
            }
            header = Some((line_no, id, node_count));
        } else {
            if header.is_none() {
                return Err(KernelError::GraphFormat {
                    line: line_no,
                    reason: "edge line before any graph header".into(),
                });
            }
            let u: usize = first.parse().map_err(|_| KernelError::GraphFormat {
                line: line_no,
                reason: format!("invalid node id {first:?}"),
            })?;
            let v: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(KernelError::GraphFormat {
                    line: line_no,
                    reason: "edge line needs two node ids".into(),
                })?;
            if tokens.next().is_some() {
                return Err(KernelError::GraphFormat {
                    line: line_no,
                    reason: "trailing tokens after edge".into(),
                });
            }
            edges.push((u, v));
        }
    }
    finish(&mut header, &mut edges, &mut graphs)?;
    Ok(graphs)
}
