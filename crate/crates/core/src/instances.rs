//! Problem builders: MaxCut, packing and covering SDPs, the mixing-time SDP,
//! Gset parsing, random graphs, feasibility margins and solution repair.
//!
//! Every instance is stored in minimization form `min g(x)`; maximization
//! problems negate their objective and record how to report it.
//!
//! Variable layouts:
//!
//! * MaxCut: `X ∈ S^n` row-major, then a homogenizing coordinate `t`
//!   pinned to 1. Rows `t - X_ii > 0`.
//! * Packing: `X ∈ S^n` row-major. Rows `1 - tr(A_i X) > 0`.
//! * Covering: `x ∈ ℝ^m`. Barrier `-log det(Σ x_i A_i - I)`.
//! * Mixing: `X ∈ S^{n-1}` (node `k` of the graph is index `k - 2`), then
//!   `t` pinned to 1. Rows `t d²_e - D(X)_e > 0`.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierError, BarrierSpec, SparseRow};
use crate::linalg::{self, flat_from_mat, mat_from_flat};
use crate::lmo::{FeasibleSetSpec, LmoError};
use crate::solver::LinearObjective;

pub const INSTANCE_SCHEMA: &str = "hcg-instance/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: node index {index} outside 1..={n}")]
    IndexOutOfRange { line: usize, index: usize, n: usize },
    #[error("line {line}: duplicate edge ({i}, {j})")]
    DuplicateEdge { line: usize, i: usize, j: usize },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph is not connected")]
    Disconnected,
    #[error("invalid instance data: {0}")]
    InvalidData(String),
    #[error("radius {rho} is too small: a strictly feasible start needs more than {needed}")]
    RadiusTooSmall { rho: f64, needed: f64 },
    #[error("unknown builtin instance `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Lmo(#[from] LmoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// 1-indexed endpoints with `i < j`.
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<Edge>,
}

impl Graph {
    /// Validate and normalize the endpoint order of `edges`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self, InstanceError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (k, (a, b, w)) in edges.into_iter().enumerate() {
            let line = k + 1;
            for idx in [a, b] {
                if idx == 0 || idx > n {
                    return Err(InstanceError::IndexOutOfRange { line, index: idx, n });
                }
            }
            if a == b {
                return Err(InstanceError::SelfLoop { line, node: a });
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(InstanceError::DuplicateEdge { line, i, j });
            }
            if !w.is_finite() {
                return Err(InstanceError::InvalidGraph(format!("edge ({i}, {j}) has weight {w}")));
            }
            out.push(Edge { i, j, w });
        }
        Ok(Graph { n, edges: out })
    }

    /// Weighted combinatorial Laplacian.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            let (a, b) = (e.i - 1, e.j - 1);
            l[(a, a)] += e.w;
            l[(b, b)] += e.w;
            l[(a, b)] -= e.w;
            l[(b, a)] -= e.w;
        }
        l
    }

    /// Shortest-path distances from node 1 with edge lengths `sqrt(w)`;
    /// `None` when some node is unreachable.
    pub fn distances_from_first(&self) -> Option<Vec<f64>> {
        let n = self.n;
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            let len = e.w.sqrt();
            adj[e.i - 1].push((e.j - 1, len));
            adj[e.j - 1].push((e.i - 1, len));
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[0] = 0.0;
        for _ in 0..n {
            let u = (0..n).filter(|&v| !done[v]).min_by(|&a, &b| dist[a].total_cmp(&dist[b]))?;
            if !dist[u].is_finite() {
                return None;
            }
            done[u] = true;
            for &(v, len) in &adj[u] {
                if dist[u] + len < dist[v] {
                    dist[v] = dist[u] + len;
                }
            }
        }
        Some(dist)
    }
}

/// Parse the Gset text format: a header `N M` followed by `M` lines `i j w`.
pub fn parse_gset(text: &str) -> Result<Graph, InstanceError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(InstanceError::Parse { line: 1, message: "empty input".into() })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str, line: usize| {
        s.parse::<usize>().map_err(|_| InstanceError::Parse { line, message: format!("expected an integer, got `{s}`") })
    };
    if head.len() != 2 {
        return Err(InstanceError::Parse { line: hline, message: "header must be `N M`".into() });
    }
    let n = parse_usize(head[0], hline)?;
    let m = parse_usize(head[1], hline)?;
    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(m);
    for (line, l) in lines {
        if edges.len() == m {
            return Err(InstanceError::Parse { line, message: format!("more than the declared {m} edges") });
        }
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(InstanceError::Parse { line, message: "edge lines must be `i j w`".into() });
        }
        let a = parse_usize(f[0], line)?;
        let b = parse_usize(f[1], line)?;
        let w: f64 = f[2]
            .parse()
            .map_err(|_| InstanceError::Parse { line, message: format!("expected a number, got `{}`", f[2]) })?;
        for idx in [a, b] {
            if idx == 0 || idx > n {
                return Err(InstanceError::IndexOutOfRange { line, index: idx, n });
            }
        }
        if a == b {
            return Err(InstanceError::SelfLoop { line, node: a });
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if !seen.insert((i, j)) {
            return Err(InstanceError::DuplicateEdge { line, i, j });
        }
        edges.push(Edge { i, j, w });
    }
    if edges.len() != m {
        return Err(InstanceError::Parse {
            line: text.lines().count().max(1),
            message: format!("expected {m} edges, found {}", edges.len()),
        });
    }
    Ok(Graph { n, edges })
}

/// Connected graph: a random spanning tree plus `m - n + 1` distinct extra
/// edges, weights `d²` i.i.d. uniform on `(0, 1]`.
pub fn random_mixing_graph(n: usize, m: usize, seed: u64) -> Result<Graph, InstanceError> {
    if n < 2 {
        return Err(InstanceError::InvalidGraph("need at least two nodes".into()));
    }
    let max_edges = n * (n - 1) / 2;
    if m + 1 < n {
        return Err(InstanceError::InvalidGraph(format!("{m} edges cannot connect {n} nodes")));
    }
    if m > max_edges {
        return Err(InstanceError::InvalidGraph(format!("{m} edges exceed the {max_edges} of a complete graph")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(&mut rng);
    let mut pairs = HashSet::new();
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        let child = order[k];
        pairs.insert((parent.min(child), parent.max(child)));
    }
    let mut rest: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| ((i + 1)..=n).map(move |j| (i, j)))
        .filter(|p| !pairs.contains(p))
        .collect();
    let extra = m - (n - 1);
    let (chosen, _) = rest.partial_shuffle(&mut rng, extra);
    pairs.extend(chosen.iter().copied());
    let mut sorted: Vec<(usize, usize)> = pairs.into_iter().collect();
    sorted.sort_unstable();
    let edges = sorted.into_iter().map(|(i, j)| Edge { i, j, w: 1.0 - rng.gen::<f64>() }).collect();
    Ok(Graph { n, edges })
}

/// `m` distinct unit-weight edges chosen uniformly at random.
pub fn random_maxcut_graph(n: usize, m: usize, seed: u64) -> Result<Graph, InstanceError> {
    if n < 2 || m == 0 || m > n * (n - 1) / 2 {
        return Err(InstanceError::InvalidGraph(format!("cannot place {m} edges on {n} nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<(usize, usize)> = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j))).collect();
    let (chosen, _) = all.partial_shuffle(&mut rng, m);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    Ok(Graph { n, edges: chosen.into_iter().map(|(i, j)| Edge { i, j, w: 1.0 }).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    MaxCut,
    Packing,
    Covering,
    Mixing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A known optimal value of `g` (minimization form) and where it comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub value: f64,
    pub source: String,
}

#[derive(Debug, Clone)]
pub struct ConicInstance {
    pub name: String,
    pub kind: InstanceKind,
    pub objective: LinearObjective,
    pub barrier: BarrierSpec,
    pub set: FeasibleSetSpec,
    pub x0: Vec<f64>,
    pub sense: Sense,
    /// Reported value is `±scale · g(x)` with the sign given by `sense`.
    pub report_scale: f64,
    pub opt_ref: Option<Reference>,
    /// Graph data (normalized weights for mixing) kept for repair.
    pub graph: Option<Graph>,
}

impl ConicInstance {
    pub fn nu(&self) -> f64 {
        self.barrier.nu()
    }

    pub fn dim(&self) -> usize {
        self.barrier.dim()
    }

    /// Objective in the problem's own sense and units.
    pub fn report(&self, g: f64) -> f64 {
        match self.sense {
            Sense::Minimize => self.report_scale * g,
            Sense::Maximize => -self.report_scale * g,
        }
    }

    pub fn reported_objective(&self, x: &[f64]) -> f64 {
        self.report(self.objective.value(x))
    }

    /// Side length of the matrix block for matrix-valued instances.
    pub fn matrix_size(&self) -> Option<usize> {
        match (&self.kind, &self.graph) {
            (InstanceKind::MaxCut, Some(g)) => Some(g.n),
            (InstanceKind::Mixing, Some(g)) => Some(g.n - 1),
            (InstanceKind::Packing, _) => Some((self.dim() as f64).sqrt().round() as usize),
            _ => None,
        }
    }
}

fn identity_flat(n: usize, value: f64) -> Vec<f64> {
    let mut x = vec![0.0; n * n];
    for i in 0..n {
        x[i * n + i] = value;
    }
    x
}

/// MaxCut relaxation `max ¼<L, X>` over `X ⪰ 0`, `X_ii <= 1`, with
/// `tr X <= n`.
pub fn build_maxcut(graph: &Graph) -> Result<ConicInstance, InstanceError> {
    let n = graph.n;
    if n == 0 || graph.edges.is_empty() {
        return Err(InstanceError::InvalidGraph("MaxCut needs at least one edge".into()));
    }
    let t = n * n;
    let rows = (0..n).map(|i| SparseRow::new([(i * n + i, 1.0), (t, -1.0)])).collect();
    let barrier = BarrierSpec::affine_inequality(t + 1, rows, vec![0.0; n])?;
    let set = FeasibleSetSpec::pinned(FeasibleSetSpec::spectrahedron(n, n as f64)?, vec![1.0]);
    let mut coeffs: Vec<f64> = graph.laplacian().iter().map(|v| -0.25 * v).collect();
    coeffs.push(0.0);
    let mut x0 = identity_flat(n, 0.5);
    x0.push(1.0);
    Ok(ConicInstance {
        name: format!("maxcut-n{n}-m{}", graph.edges.len()),
        kind: InstanceKind::MaxCut,
        objective: LinearObjective::new(coeffs),
        barrier,
        set,
        x0,
        sense: Sense::Maximize,
        report_scale: 1.0,
        opt_ref: None,
        graph: Some(graph.clone()),
    })
}

fn check_psd(a: &DMatrix<f64>, what: &str) -> Result<(), InstanceError> {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    if linalg::asymmetry(a) > 1e-10 * scale {
        return Err(InstanceError::InvalidData(format!("{what} is not symmetric")));
    }
    if linalg::min_eigenvalue(a) < -1e-10 * scale {
        return Err(InstanceError::InvalidData(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

/// `min <C, X>` over `X ⪰ 0`, `tr X <= ρ`, `tr(A_i X) < 1`.
pub fn build_packing(a: &[DMatrix<f64>], c: &DMatrix<f64>, rho: f64) -> Result<ConicInstance, InstanceError> {
    let n = c.nrows();
    if a.is_empty() || n == 0 {
        return Err(InstanceError::InvalidData("packing needs constraints and a cost".into()));
    }
    for (k, ak) in a.iter().enumerate() {
        if ak.nrows() != n || ak.ncols() != n {
            return Err(InstanceError::InvalidData(format!("A_{} has the wrong size", k + 1)));
        }
        check_psd(ak, &format!("A_{}", k + 1))?;
    }
    if linalg::asymmetry(c) > 1e-10 * c.norm().max(1.0) {
        return Err(InstanceError::InvalidData("cost matrix is not symmetric".into()));
    }
    let set = FeasibleSetSpec::spectrahedron(n, rho)?;
    let rows = a
        .iter()
        .map(|ak| SparseRow::new(flat_from_mat(ak).into_iter().enumerate().filter(|(_, v)| *v != 0.0)))
        .collect();
    let barrier = BarrierSpec::affine_inequality(n * n, rows, vec![1.0; a.len()])?;
    let max_trace = a.iter().map(|ak| ak.trace()).fold(0.0, f64::max);
    let eps = if max_trace > 0.0 { (0.5 / max_trace).min(0.5 * rho / n as f64) } else { 0.5 * rho / n as f64 };
    Ok(ConicInstance {
        name: format!("packing-n{n}-m{}", a.len()),
        kind: InstanceKind::Packing,
        objective: LinearObjective::new(flat_from_mat(c)),
        barrier,
        set,
        x0: identity_flat(n, eps),
        sense: Sense::Minimize,
        report_scale: 1.0,
        opt_ref: None,
        graph: None,
    })
}

/// `min Σ x_i` over `x >= 0`, `Σ x_i <= ρ`, `Σ x_i A_i ≻ I`.
pub fn build_covering(a: &[DMatrix<f64>], rho: f64) -> Result<ConicInstance, InstanceError> {
    let m = a.len();
    if m == 0 {
        return Err(InstanceError::InvalidData("covering needs at least one matrix".into()));
    }
    let n = a[0].nrows();
    let mut sum = DMatrix::zeros(n, n);
    for (k, ak) in a.iter().enumerate() {
        if ak.nrows() != n || ak.ncols() != n {
            return Err(InstanceError::InvalidData(format!("A_{} has the wrong size", k + 1)));
        }
        check_psd(ak, &format!("A_{}", k + 1))?;
        sum += ak;
    }
    let lmin = linalg::min_eigenvalue(&sum);
    if !(lmin > 0.0) {
        return Err(InstanceError::InvalidData("Σ A_i must be positive definite".into()));
    }
    // x0 = β·1 needs β > 1/λ_min for the barrier and m·β < ρ for the simplex
    let needed = m as f64 / lmin;
    if !(rho > needed) {
        return Err(InstanceError::RadiusTooSmall { rho, needed });
    }
    let beta = if 2.0 * needed < rho { 2.0 / lmin } else { 0.5 * (1.0 / lmin + rho / m as f64) };
    let barrier =
        BarrierSpec::log_det_affine(m, -DMatrix::identity(n, n), a.iter().cloned().enumerate().collect())?;
    Ok(ConicInstance {
        name: format!("covering-n{n}-m{m}"),
        kind: InstanceKind::Covering,
        objective: LinearObjective::new(vec![1.0; m]),
        barrier,
        set: FeasibleSetSpec::scaled_simplex(m, rho)?,
        x0: vec![beta; m],
        sense: Sense::Minimize,
        report_scale: 1.0,
        opt_ref: None,
        graph: None,
    })
}

/// Entries of the edge functional `D(X)_e` as `(flat index, coefficient)`
/// over `S^{n-1}`.
fn edge_functional(e: &Edge, k: usize) -> Vec<(usize, f64)> {
    let j = e.j - 2;
    if e.i == 1 {
        vec![(j * k + j, 1.0)]
    } else {
        let i = e.i - 2;
        vec![(i * k + i, 1.0), (j * k + j, 1.0), (i * k + j, -1.0), (j * k + i, -1.0)]
    }
}

/// `D(X)` for every edge.
pub fn edge_values(graph: &Graph, x: &[f64]) -> Vec<f64> {
    let k = graph.n - 1;
    graph
        .edges
        .iter()
        .map(|e| edge_functional(e, k).into_iter().map(|(idx, c)| c * x[idx]).sum())
        .collect()
}

/// Mixing-time SDP `max <I - 11ᵀ/n, X>` over `X ∈ S^{n-1}_+`,
/// `D(X) <= d²`, `tr X <= α`.
pub fn build_mixing(graph: &Graph, normalize: bool) -> Result<ConicInstance, InstanceError> {
    let n = graph.n;
    if n < 2 || graph.edges.is_empty() {
        return Err(InstanceError::InvalidGraph("mixing needs at least two nodes and one edge".into()));
    }
    if let Some(e) = graph.edges.iter().find(|e| !(e.w > 0.0)) {
        return Err(InstanceError::InvalidGraph(format!("edge ({}, {}) has nonpositive d² {}", e.i, e.j, e.w)));
    }
    let total: f64 = graph.edges.iter().map(|e| e.w).sum();
    let kappa = if normalize { (n * n) as f64 / total } else { 1.0 };
    let g = Graph { n, edges: graph.edges.iter().map(|e| Edge { w: e.w * kappa, ..*e }).collect() };
    let dist = g.distances_from_first().ok_or(InstanceError::Disconnected)?;
    let alpha: f64 = dist[1..].iter().map(|d| d * d).sum();

    let k = n - 1;
    let t = k * k;
    let rows = g
        .edges
        .iter()
        .map(|e| {
            let mut entries = edge_functional(e, k);
            entries.push((t, -e.w));
            SparseRow::new(entries)
        })
        .collect();
    let barrier = BarrierSpec::affine_inequality(t + 1, rows, vec![0.0; g.edges.len()])?;
    let set = FeasibleSetSpec::pinned(FeasibleSetSpec::spectrahedron(k, alpha)?, vec![1.0]);

    let mut coeffs = vec![0.0; t + 1];
    for a in 0..k {
        for b in 0..k {
            let v = if a == b { 1.0 } else { 0.0 } - 1.0 / n as f64;
            coeffs[a * k + b] = -v;
        }
    }

    let star = g.edges.iter().filter(|e| e.i == 1).map(|e| e.w).fold(f64::INFINITY, f64::min);
    let inner = g.edges.iter().filter(|e| e.i > 1).map(|e| e.w / 2.0).fold(f64::INFINITY, f64::min);
    let mu = (0.5 * star.min(inner)).min(0.9 * alpha / k as f64);
    let mut x0 = identity_flat(k, mu);
    x0.push(1.0);

    Ok(ConicInstance {
        name: format!("mixing-n{n}-m{}", g.edges.len()),
        kind: InstanceKind::Mixing,
        objective: LinearObjective::new(coeffs),
        barrier,
        set,
        x0,
        sense: Sense::Maximize,
        report_scale: 1.0 / kappa,
        opt_ref: None,
        graph: Some(g),
    })
}

/// Minimum over all constraint slacks: conic slacks, PSD minimum
/// eigenvalue, trace and simplex bounds. `>= 0` iff `x` is feasible.
pub fn feasibility_margin(instance: &ConicInstance, x: &[f64]) -> f64 {
    if x.len() != instance.dim() {
        return f64::NEG_INFINITY;
    }
    conic_margin(&instance.barrier, x).min(instance.set.margin(x))
}

fn conic_margin(spec: &BarrierSpec, x: &[f64]) -> f64 {
    match spec {
        BarrierSpec::AffineInequality(a) => a.slacks(x).into_iter().fold(f64::INFINITY, f64::min),
        BarrierSpec::LogDetAffine(l) => linalg::min_eigenvalue(&l.matrix_at(x)),
        BarrierSpec::Product(p) => p
            .blocks()
            .iter()
            .map(|(off, child)| conic_margin(child, &x[*off..off + child.dim()]))
            .fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub input_objective: Option<f64>,
    pub repaired_objective: Option<f64>,
    /// `min(λ_min, 0)` subtracted from the diagonal (MaxCut).
    pub shift: f64,
    /// Final diagonal scaling `α` (MaxCut) or global fallback factor (mixing).
    pub scale: f64,
    /// Per-step `(node, γ)` scalings (mixing).
    pub steps: Vec<(usize, f64)>,
    pub margin_before: f64,
    pub margin_after: f64,
    pub fell_back: bool,
}

/// `X̃ = (X - min(λ_min, 0) I) / α` with `α = max(max_i X̃_ii, 1)`.
pub fn repair_maxcut_solution(x: &DMatrix<f64>) -> (DMatrix<f64>, RepairReport) {
    let n = x.nrows();
    let mut m = x.clone();
    linalg::symmetrize(&mut m);
    let scale = m.norm().max(1.0);
    let lmin = linalg::min_eigenvalue(&m);
    let diag_margin = |m: &DMatrix<f64>| (0..n).map(|i| 1.0 - m[(i, i)]).fold(f64::INFINITY, f64::min);
    let margin_before = lmin.min(diag_margin(&m));
    let shift = if lmin < -1e-12 * scale { lmin } else { 0.0 };
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let alpha = (0..n).map(|i| m[(i, i)]).fold(1.0, f64::max);
    if alpha > 1.0 {
        m /= alpha;
    }
    let margin_after = linalg::min_eigenvalue(&m).min(diag_margin(&m));
    let report = RepairReport {
        input_objective: None,
        repaired_objective: None,
        shift,
        scale: alpha,
        steps: Vec::new(),
        margin_before,
        margin_after,
        fell_back: false,
    };
    (m, report)
}

/// Relative violations `(D(X)_e - d²_e) / d²_e`.
fn mixing_violations(graph: &Graph, x: &[f64]) -> Vec<f64> {
    edge_values(graph, x).iter().zip(&graph.edges).map(|(d, e)| (d - e.w) / e.w).collect()
}

/// Repeatedly divide the row and column of the heavier endpoint of the most
/// violated edge by `γ + 1` until `D(X) <= d²`. The diagonal entry is divided
/// once, which keeps `X` positive semidefinite. After `max_steps` the
/// remaining violation is removed by a global division.
pub fn repair_mixing_solution(
    x: &DMatrix<f64>,
    graph: &Graph,
    max_steps: usize,
) -> Result<(DMatrix<f64>, RepairReport), InstanceError> {
    let k = graph.n - 1;
    if x.nrows() != k || x.ncols() != k {
        return Err(InstanceError::InvalidData(format!("expected a {k}×{k} matrix")));
    }
    let mut m = x.clone();
    linalg::symmetrize(&mut m);
    let scale = m.norm().max(1.0);
    let lmin = linalg::min_eigenvalue(&m);
    if lmin < -1e-9 * scale {
        return Err(InstanceError::InvalidData(format!("input is not positive semidefinite (λ_min = {lmin:e})")));
    }
    let worst = |m: &DMatrix<f64>| {
        let v = mixing_violations(graph, &flat_from_mat(m));
        v.iter().enumerate().fold((0usize, f64::NEG_INFINITY), |b, (e, &g)| if g > b.1 { (e, g) } else { b })
    };
    let margin_of = |m: &DMatrix<f64>| {
        let flat = flat_from_mat(m);
        edge_values(graph, &flat)
            .iter()
            .zip(&graph.edges)
            .map(|(d, e)| e.w - d)
            .fold(f64::INFINITY, f64::min)
            .min(linalg::min_eigenvalue(m))
    };
    let margin_before = margin_of(&m);
    let mut steps = Vec::new();
    let mut fell_back = false;
    let mut global = 1.0;
    loop {
        let (e, gamma) = worst(&m);
        if gamma <= 0.0 {
            break;
        }
        if steps.len() >= max_steps {
            global = gamma + 1.0;
            m /= global;
            fell_back = true;
            break;
        }
        let edge = graph.edges[e];
        let node = if edge.i == 1 {
            edge.j
        } else if m[(edge.i - 2, edge.i - 2)] >= m[(edge.j - 2, edge.j - 2)] {
            edge.i
        } else {
            edge.j
        };
        let r = node - 2;
        let f = gamma + 1.0;
        for c in 0..k {
            m[(r, c)] /= f;
            if c != r {
                m[(c, r)] /= f;
            }
        }
        steps.push((node, gamma));
    }
    if fell_back {
        log::warn!("mixing repair hit {max_steps} steps; applied a global division by {global}");
    }
    let margin_after = margin_of(&m);
    Ok((
        m,
        RepairReport {
            input_objective: None,
            repaired_objective: None,
            shift: 0.0,
            scale: global,
            steps,
            margin_before,
            margin_after,
            fell_back,
        },
    ))
}

/// Repair a full solution vector of a MaxCut or mixing instance.
pub fn repair_solution(instance: &ConicInstance, x: &[f64]) -> Result<(Vec<f64>, RepairReport), InstanceError> {
    if x.len() != instance.dim() {
        return Err(InstanceError::InvalidData(format!(
            "solution has {} entries, the instance has {}",
            x.len(),
            instance.dim()
        )));
    }
    let graph = instance
        .graph
        .as_ref()
        .ok_or_else(|| InstanceError::InvalidData("only MaxCut and mixing solutions can be repaired".into()))?;
    let (repaired, mut report) = match instance.kind {
        InstanceKind::MaxCut => repair_maxcut_solution(&mat_from_flat(x, graph.n)),
        InstanceKind::Mixing => repair_mixing_solution(&mat_from_flat(x, graph.n - 1), graph, 10_000)?,
        _ => return Err(InstanceError::InvalidData("only MaxCut and mixing solutions can be repaired".into())),
    };
    let mut out = flat_from_mat(&repaired);
    out.extend_from_slice(&x[out.len()..]);
    report.input_objective = Some(instance.reported_objective(x));
    report.repaired_objective = Some(instance.reported_objective(&out));
    Ok((out, report))
}

/// Self-describing instance file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema: String,
    pub kind: InstanceKind,
    #[serde(default)]
    pub name: Option<String>,
    /// Node count for graphs, matrix size for packing/covering.
    pub n: usize,
    /// 1-indexed graph edges.
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
    /// Edge weights (`d²` for mixing).
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub normalize: Option<bool>,
    /// Row-major `A_i` for packing and covering.
    #[serde(default)]
    pub matrices: Vec<Vec<f64>>,
    /// Row-major cost matrix for packing.
    #[serde(default)]
    pub cost: Option<Vec<f64>>,
    #[serde(default)]
    pub opt_ref: Option<Reference>,
}

impl InstanceFile {
    pub fn from_graph(kind: InstanceKind, graph: &Graph, seed: Option<u64>, normalize: Option<bool>) -> Self {
        InstanceFile {
            schema: INSTANCE_SCHEMA.into(),
            kind,
            name: None,
            n: graph.n,
            edges: graph.edges.iter().map(|e| (e.i, e.j)).collect(),
            weights: graph.edges.iter().map(|e| e.w).collect(),
            rho: None,
            seed,
            normalize,
            matrices: Vec::new(),
            cost: None,
            opt_ref: None,
        }
    }

    pub fn build(&self) -> Result<ConicInstance, InstanceError> {
        if self.schema != INSTANCE_SCHEMA {
            return Err(InstanceError::InvalidData(format!(
                "unsupported schema `{}` (expected `{INSTANCE_SCHEMA}`)",
                self.schema
            )));
        }
        let graph = || {
            if self.weights.len() != self.edges.len() {
                return Err(InstanceError::InvalidData("edges and weights differ in length".into()));
            }
            Graph::new(self.n, self.edges.iter().zip(&self.weights).map(|(&(i, j), &w)| (i, j, w)))
        };
        let matrices = || -> Result<Vec<DMatrix<f64>>, InstanceError> {
            self.matrices
                .iter()
                .map(|m| {
                    if m.len() != self.n * self.n {
                        Err(InstanceError::InvalidData(format!("matrix with {} entries, expected n² = {}", m.len(), self.n * self.n)))
                    } else {
                        Ok(mat_from_flat(m, self.n))
                    }
                })
                .collect()
        };
        let rho = || self.rho.ok_or_else(|| InstanceError::InvalidData("missing `rho`".into()));
        let mut inst = match self.kind {
            InstanceKind::MaxCut => build_maxcut(&graph()?)?,
            InstanceKind::Mixing => build_mixing(&graph()?, self.normalize.unwrap_or(true))?,
            InstanceKind::Covering => build_covering(&matrices()?, rho()?)?,
            InstanceKind::Packing => {
                let cost = self.cost.as_ref().ok_or_else(|| InstanceError::InvalidData("missing `cost`".into()))?;
                if cost.len() != self.n * self.n {
                    return Err(InstanceError::InvalidData("cost matrix has the wrong size".into()));
                }
                build_packing(&matrices()?, &mat_from_flat(cost, self.n), rho()?)?
            }
        };
        if let Some(name) = &self.name {
            inst.name = name.clone();
        }
        inst.opt_ref = self.opt_ref.clone();
        Ok(inst)
    }
}

/// Names accepted by [`builtin`].
pub const BUILTINS: &[&str] = &[
    "maxcut-edge",
    "maxcut-triangle",
    "maxcut-random",
    "packing-example",
    "covering-identity-10",
    "covering-scalar",
    "mixing-edge",
    "mixing-path3",
    "mixing-random",
];

fn with_ref(mut inst: ConicInstance, name: &str, value: f64, source: &str) -> ConicInstance {
    inst.name = name.into();
    inst.opt_ref = Some(Reference { value, source: source.into() });
    inst
}

fn unit_diag(n: usize, i: usize, v: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, i)] = v;
    m
}

/// Small named instances; random ones draw from `seed`.
pub fn builtin(name: &str, seed: u64) -> Result<ConicInstance, InstanceError> {
    Ok(match name {
        "maxcut-edge" => with_ref(build_maxcut(&Graph::new(2, [(1, 2, 1.0)])?)?, name, -1.0, "closed form: X_12 = -1"),
        "maxcut-triangle" => with_ref(
            build_maxcut(&Graph::new(3, [(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)])?)?,
            name,
            -2.25,
            "closed form: X_ij = -1/2",
        ),
        "maxcut-random" => {
            let mut inst = build_maxcut(&random_maxcut_graph(50, 200, seed)?)?;
            inst.name = format!("{name}-seed{seed}");
            inst
        }
        "packing-example" => with_ref(
            build_packing(&[DMatrix::identity(2, 2)], &(-DMatrix::identity(2, 2)), 2.0)?,
            name,
            -1.0,
            "closed form: tr X <= 1",
        ),
        "covering-identity-10" => {
            let a: Vec<_> = (0..10).map(|i| unit_diag(10, i, 1.0)).collect();
            with_ref(build_covering(&a, 20.0)?, name, 10.0, "closed form: x_i >= 1")
        }
        "covering-scalar" => with_ref(
            build_covering(&[unit_diag(1, 0, 2.0)], 3.0)?,
            name,
            0.5,
            "closed form: 2x - 1 > 0",
        ),
        "mixing-edge" => with_ref(
            build_mixing(&Graph::new(2, [(1, 2, 1.0)])?, false)?,
            name,
            -0.5,
            "closed form: max X_11 / 2 with X_11 <= 1",
        ),
        "mixing-path3" => with_ref(
            build_mixing(&Graph::new(3, [(1, 2, 1.0), (2, 3, 1.0)])?, false)?,
            name,
            -2.0,
            "collinear embedding 0, 1, 2",
        ),
        "mixing-random" => {
            let mut inst = build_mixing(&random_mixing_graph(100, 1000, seed)?, true)?;
            inst.name = format!("{name}-seed{seed}");
            inst
        }
        other => return Err(InstanceError::UnknownBuiltin(other.into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gset_examples() {
        let g = parse_gset("2 1\n1 2 1").unwrap();
        assert_eq!(g.n, 2);
        assert_eq!(g.edges, vec![Edge { i: 1, j: 2, w: 1.0 }]);
        assert_eq!(parse_gset("3 2\n1 2 1\n2 3 2\n").unwrap().edges.len(), 2);
        assert_eq!(
            parse_gset("2 1\n1 3 1"),
            Err(InstanceError::IndexOutOfRange { line: 2, index: 3, n: 2 })
        );
        assert!(matches!(parse_gset("3 2\n1 2 1\n2 1 1"), Err(InstanceError::DuplicateEdge { line: 3, .. })));
        assert!(matches!(parse_gset("2 1\n1 x 1"), Err(InstanceError::Parse { line: 2, .. })));
        assert!(matches!(parse_gset("3 2\n1 2 1"), Err(InstanceError::Parse { .. })));
        assert!(matches!(parse_gset("2 1\n2 2 1"), Err(InstanceError::SelfLoop { line: 2, node: 2 })));
        assert_eq!(parse_gset("3 1\n3 1 5").unwrap().edges[0], Edge { i: 1, j: 3, w: 5.0 });
    }

    #[test]
    fn maxcut_layout() {
        let inst = builtin("maxcut-edge", 0).unwrap();
        assert_eq!(inst.dim(), 5);
        assert_eq!(inst.nu(), 2.0);
        assert!(feasibility_margin(&inst, &inst.x0) > 0.0);
        let x = [1.0, -1.0, -1.0, 1.0, 1.0];
        assert_relative_eq!(inst.reported_objective(&x), 1.0);
        assert_relative_eq!(feasibility_margin(&inst, &x), 0.0, epsilon = 1e-12);
        let bad = [1.2, 0.0, 0.0, 0.5, 1.0];
        assert_relative_eq!(feasibility_margin(&inst, &bad), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn packing_start_has_half_slack() {
        let inst = builtin("packing-example", 0).unwrap();
        let slacks = match &inst.barrier {
            BarrierSpec::AffineInequality(a) => a.slacks(&inst.x0),
            _ => unreachable!(),
        };
        assert!(slacks.iter().all(|s| *s >= 0.5));
        assert!(build_packing(&[-DMatrix::identity(2, 2)], &DMatrix::identity(2, 2), 1.0).is_err());
    }

    #[test]
    fn covering_rejects_small_radius() {
        let a = [unit_diag(1, 0, 2.0)];
        assert!(matches!(build_covering(&a, 0.5), Err(InstanceError::RadiusTooSmall { .. })));
        let inst = build_covering(&a, 3.0).unwrap();
        assert_eq!(inst.x0, vec![1.0]);
        assert_eq!(inst.nu(), 1.0);
    }

    #[test]
    fn mixing_layout() {
        let inst = builtin("mixing-path3", 0).unwrap();
        assert_eq!(inst.dim(), 5);
        assert_eq!(inst.nu(), 2.0);
        match &inst.set {
            FeasibleSetSpec::FixedCoordinates { inner, .. } => {
                assert_eq!(**inner, FeasibleSetSpec::Spectrahedron { n: 2, rho: 5.0, trace_equality: false })
            }
            _ => panic!("unexpected set"),
        }
        assert!(feasibility_margin(&inst, &inst.x0) > 0.0);
        let opt = [1.0, 2.0, 2.0, 4.0, 1.0];
        assert_relative_eq!(inst.reported_objective(&opt), 2.0, epsilon = 1e-12);
        assert!(feasibility_margin(&inst, &opt) > -1e-12);
    }

    #[test]
    fn mixing_normalization() {
        let g = random_mixing_graph(6, 9, 4).unwrap();
        let inst = build_mixing(&g, true).unwrap();
        let total: f64 = inst.graph.as_ref().unwrap().edges.iter().map(|e| e.w).sum();
        assert!((total - 36.0).abs() < 1e-12);
        assert!(build_mixing(&Graph::new(3, [(1, 2, 1.0)]).unwrap(), false).is_err());
    }

    #[test]
    fn random_graphs() {
        let g = random_mixing_graph(4, 3, 1).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert!(g.distances_from_first().is_some());
        assert_eq!(g, random_mixing_graph(4, 3, 1).unwrap());
        assert!(random_mixing_graph(3, 1, 0).is_err());
        assert!(random_mixing_graph(4, 7, 0).is_err());
        let big = random_mixing_graph(100, 1000, 1).unwrap();
        assert_eq!(big.edges.len(), 1000);
        assert!(big.edges.iter().all(|e| e.w > 0.0 && e.w <= 1.0));
    }

    #[test]
    fn maxcut_repair_worked_case() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let (r, rep) = repair_maxcut_solution(&x);
        assert_relative_eq!(rep.shift, -0.5);
        assert_relative_eq!(rep.scale, 1.5);
        assert_relative_eq!(r[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r[(1, 1)], 0.0, epsilon = 1e-15);
        let feasible = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.5]);
        assert_eq!(repair_maxcut_solution(&feasible).0, feasible);
    }

    #[test]
    fn mixing_repair_single_edge() {
        let g = Graph::new(2, [(1, 2, 1.0)]).unwrap();
        let (r, rep) = repair_mixing_solution(&DMatrix::from_element(1, 1, 2.0), &g, 100).unwrap();
        assert_relative_eq!(r[(0, 0)], 1.0);
        assert_eq!(rep.steps, vec![(2, 1.0)]);
        let (same, rep) = repair_mixing_solution(&r, &g, 100).unwrap();
        assert_eq!(same, r);
        assert!(rep.steps.is_empty());
    }

    #[test]
    fn instance_file_round_trip() {
        let g = random_mixing_graph(5, 6, 3).unwrap();
        let file = InstanceFile::from_graph(InstanceKind::Mixing, &g, Some(3), Some(true));
        let a = file.build().unwrap();
        let b = build_mixing(&g, true).unwrap();
        assert_eq!(a.x0, b.x0);
        assert_eq!(a.objective, b.objective);
    }
}
