//! Logarithmically homogeneous self-concordant barriers.
//!
//! A [`BarrierSpec`] describes `F = f ∘ P` for three families:
//!
//! * `AffineInequality`: `F(x) = -Σ log(b_i - <a_i, x>)`, parameter `ν = m`.
//! * `LogDetAffine`: `F(x) = -log det M(x)` with `M(x) = M_0 + Σ x_k M_k`,
//!   parameter `ν = p` (the matrix size).
//! * `Product`: a sum of child barriers acting on consecutive disjoint blocks
//!   of coordinates, parameter `ν = Σ ν_child`.
//!
//! Evaluations go through a [`BarrierPoint`], which validates strict
//! feasibility once and caches the slacks (or the Cholesky factor of `M(x)`)
//! so that repeated gradient and curvature queries at the same point are
//! cheap. A point owns a copy of its coordinates, so moving the iterate means
//! building a new point.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, cholesky_lower};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("point outside the barrier domain: row {row} has slack {slack:e}")]
    InfeasibleRow { row: usize, slack: f64 },
    #[error("point outside the barrier domain: affine matrix loses definiteness at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("a product barrier needs at least one child")]
    EmptyProduct,
    #[error("omega_star is defined on [0, 1), got {0}")]
    OmegaStarDomain(f64),
    #[error("omega is defined on [0, inf), got {0}")]
    OmegaDomain(f64),
    #[error("invalid barrier data: {0}")]
    InvalidData(String),
}

/// `ω(τ) = τ - log(1 + τ)` for `τ >= 0`.
pub fn omega(tau: f64) -> Result<f64, BarrierError> {
    if !(tau >= 0.0) {
        return Err(BarrierError::OmegaDomain(tau));
    }
    if tau.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(tau - tau.ln_1p())
}

/// `ω*(τ) = -τ - log(1 - τ)` for `0 <= τ < 1`.
pub fn omega_star(tau: f64) -> Result<f64, BarrierError> {
    if !(0.0..1.0).contains(&tau) {
        return Err(BarrierError::OmegaStarDomain(tau));
    }
    Ok(-tau - (-tau).ln_1p())
}

/// A sparse linear functional on the ambient space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut row = SparseRow::default();
        for (i, v) in entries {
            row.indices.push(i);
            row.values.push(v);
        }
        row
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v * x[i])
            .sum()
    }

    /// `out += scale * row`
    pub fn scatter(&self, scale: f64, out: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] += scale * v;
        }
    }

    fn max_index(&self) -> Option<usize> {
        self.indices.iter().copied().max()
    }
}

#[derive(Debug, Clone)]
pub struct AffineInequality {
    dim: usize,
    rows: Vec<SparseRow>,
    offsets: Vec<f64>,
}

impl AffineInequality {
    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `b_i - <a_i, x>` for every row.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.offsets)
            .map(|(row, b)| b - row.dot(x))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LogDetAffine {
    dim: usize,
    constant: DMatrix<f64>,
    coeffs: Vec<(usize, DMatrix<f64>)>,
}

impl LogDetAffine {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    /// `M(x) = M_0 + Σ x_k M_k`
    pub fn matrix_at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (k, mk) in &self.coeffs {
            if x[*k] != 0.0 {
                m += mk * x[*k];
            }
        }
        m
    }

    /// The linear part `Σ h_k M_k`.
    pub fn linear_part(&self, h: &[f64]) -> DMatrix<f64> {
        let p = self.size();
        let mut m = DMatrix::zeros(p, p);
        for (k, mk) in &self.coeffs {
            if h[*k] != 0.0 {
                m += mk * h[*k];
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct ProductBarrier {
    dim: usize,
    blocks: Vec<(usize, BarrierSpec)>,
}

impl ProductBarrier {
    /// Children with their coordinate offsets.
    pub fn blocks(&self) -> &[(usize, BarrierSpec)] {
        &self.blocks
    }
}

/// Affine map `y = A x + b` used to pull a barrier back to another space.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum BarrierSpec {
    AffineInequality(AffineInequality),
    LogDetAffine(LogDetAffine),
    Product(ProductBarrier),
}

impl BarrierSpec {
    pub fn affine_inequality(
        dim: usize,
        rows: Vec<SparseRow>,
        offsets: Vec<f64>,
    ) -> Result<Self, BarrierError> {
        if rows.is_empty() {
            return Err(BarrierError::InvalidData("no inequality rows".into()));
        }
        if rows.len() != offsets.len() {
            return Err(BarrierError::DimensionMismatch {
                expected: rows.len(),
                got: offsets.len(),
            });
        }
        for row in &rows {
            if row.indices.len() != row.values.len() {
                return Err(BarrierError::InvalidData(
                    "sparse row has mismatched index/value lengths".into(),
                ));
            }
            if let Some(i) = row.max_index() {
                if i >= dim {
                    return Err(BarrierError::DimensionMismatch { expected: dim, got: i + 1 });
                }
            }
        }
        Ok(BarrierSpec::AffineInequality(AffineInequality { dim, rows, offsets }))
    }

    pub fn log_det_affine(
        dim: usize,
        constant: DMatrix<f64>,
        coeffs: Vec<(usize, DMatrix<f64>)>,
    ) -> Result<Self, BarrierError> {
        let p = constant.nrows();
        if p == 0 || constant.ncols() != p {
            return Err(BarrierError::InvalidData("constant term must be square and nonempty".into()));
        }
        let scale = constant.norm().max(1.0);
        if linalg::asymmetry(&constant) > 1e-10 * scale {
            return Err(BarrierError::InvalidData("constant term is not symmetric".into()));
        }
        for (k, mk) in &coeffs {
            if *k >= dim {
                return Err(BarrierError::DimensionMismatch { expected: dim, got: k + 1 });
            }
            if mk.nrows() != p || mk.ncols() != p {
                return Err(BarrierError::DimensionMismatch { expected: p, got: mk.nrows() });
            }
            if linalg::asymmetry(mk) > 1e-10 * mk.norm().max(1.0) {
                return Err(BarrierError::InvalidData(format!("coefficient {k} is not symmetric")));
            }
        }
        Ok(BarrierSpec::LogDetAffine(LogDetAffine { dim, constant, coeffs }))
    }

    /// Product of children placed on consecutive coordinate blocks.
    pub fn product(children: Vec<BarrierSpec>) -> Result<Self, BarrierError> {
        if children.is_empty() {
            return Err(BarrierError::EmptyProduct);
        }
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(children.len());
        for child in children {
            let d = child.dim();
            blocks.push((offset, child));
            offset += d;
        }
        Ok(BarrierSpec::Product(ProductBarrier { dim: offset, blocks }))
    }

    /// Pull the barrier back through `y = A x + b`; `ν` is unchanged.
    pub fn compose(&self, map: &AffineMap) -> Result<Self, BarrierError> {
        let out = map.matrix.nrows();
        let input = map.matrix.ncols();
        if out != self.dim() {
            return Err(BarrierError::DimensionMismatch { expected: self.dim(), got: out });
        }
        if map.offset.len() != out {
            return Err(BarrierError::DimensionMismatch { expected: out, got: map.offset.len() });
        }
        match self {
            BarrierSpec::AffineInequality(a) => {
                let mut rows = Vec::with_capacity(a.rows.len());
                let mut offsets = Vec::with_capacity(a.rows.len());
                for (row, b) in a.rows.iter().zip(&a.offsets) {
                    let mut dense = vec![0.0; input];
                    for (&k, &v) in row.indices.iter().zip(&row.values) {
                        for (j, d) in dense.iter_mut().enumerate() {
                            *d += v * map.matrix[(k, j)];
                        }
                    }
                    rows.push(SparseRow::new(
                        dense.into_iter().enumerate().filter(|(_, v)| *v != 0.0),
                    ));
                    offsets.push(b - row.dot(&map.offset));
                }
                BarrierSpec::affine_inequality(input, rows, offsets)
            }
            BarrierSpec::LogDetAffine(l) => {
                let mut constant = l.constant.clone();
                for (k, mk) in &l.coeffs {
                    constant += mk * map.offset[*k];
                }
                let p = l.size();
                let mut coeffs = Vec::new();
                for j in 0..input {
                    let mut mj = DMatrix::zeros(p, p);
                    let mut any = false;
                    for (k, mk) in &l.coeffs {
                        let a = map.matrix[(*k, j)];
                        if a != 0.0 {
                            mj += mk * a;
                            any = true;
                        }
                    }
                    if any {
                        coeffs.push((j, mj));
                    }
                }
                BarrierSpec::log_det_affine(input, constant, coeffs)
            }
            BarrierSpec::Product(_) => Err(BarrierError::InvalidData(
                "composition of a product barrier would break its block structure".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BarrierSpec::AffineInequality(a) => a.dim,
            BarrierSpec::LogDetAffine(l) => l.dim,
            BarrierSpec::Product(p) => p.dim,
        }
    }

    /// Barrier parameter ν.
    pub fn nu(&self) -> f64 {
        match self {
            BarrierSpec::AffineInequality(a) => a.rows.len() as f64,
            BarrierSpec::LogDetAffine(l) => l.size() as f64,
            BarrierSpec::Product(p) => p.blocks.iter().map(|(_, c)| c.nu()).sum(),
        }
    }

    /// Validate strict feasibility of `x` and cache what later queries need.
    pub fn point(&self, x: &[f64]) -> Result<BarrierPoint<'_>, BarrierError> {
        if x.len() != self.dim() {
            return Err(BarrierError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let state = build_state(self, x)?;
        Ok(BarrierPoint { spec: self, x: x.to_vec(), state })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, BarrierError> {
        Ok(self.point(x)?.value())
    }

    pub fn grad_dot(&self, x: &[f64], h: &[f64]) -> Result<f64, BarrierError> {
        Ok(self.point(x)?.grad_dot(h))
    }

    pub fn curvature(&self, x: &[f64], h: &[f64]) -> Result<f64, BarrierError> {
        Ok(self.point(x)?.curvature(h))
    }

    pub fn max_step(&self, x: &[f64], d: &[f64]) -> Result<f64, BarrierError> {
        Ok(self.point(x)?.max_step(d))
    }
}

#[derive(Debug, Clone)]
enum PointState {
    Slacks(Vec<f64>),
    LogDet {
        /// `L^{-1}` where `M(x) = L L^T`.
        linv: DMatrix<f64>,
        /// `M(x)^{-1}`
        inverse: DMatrix<f64>,
        log_det: f64,
    },
    Product(Vec<PointState>),
}

fn build_state(spec: &BarrierSpec, x: &[f64]) -> Result<PointState, BarrierError> {
    match spec {
        BarrierSpec::AffineInequality(a) => {
            let slacks = a.slacks(x);
            for (row, &s) in slacks.iter().enumerate() {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(BarrierError::InfeasibleRow { row, slack: s });
                }
            }
            Ok(PointState::Slacks(slacks))
        }
        BarrierSpec::LogDetAffine(l) => {
            let m = l.matrix_at(x);
            let p = m.nrows();
            let diag_scale = (0..p).map(|i| m[(i, i)].abs()).sum::<f64>() / p as f64;
            let tol = 1e-12 * diag_scale.max(f64::MIN_POSITIVE);
            let lower =
                cholesky_lower(&m, tol).map_err(|pivot| BarrierError::NotPositiveDefinite { pivot })?;
            let log_det = 2.0 * (0..p).map(|i| lower[(i, i)].ln()).sum::<f64>();
            let linv = lower
                .solve_lower_triangular(&DMatrix::identity(p, p))
                .ok_or(BarrierError::NotPositiveDefinite { pivot: 0 })?;
            let inverse = linv.transpose() * &linv;
            Ok(PointState::LogDet { linv, inverse, log_det })
        }
        BarrierSpec::Product(prod) => {
            let mut states = Vec::with_capacity(prod.blocks.len());
            for (offset, child) in &prod.blocks {
                let d = child.dim();
                states.push(build_state(child, &x[*offset..offset + d])?);
            }
            Ok(PointState::Product(states))
        }
    }
}

/// A strictly feasible point together with its cached factorization.
#[derive(Debug, Clone)]
pub struct BarrierPoint<'a> {
    spec: &'a BarrierSpec,
    x: Vec<f64>,
    state: PointState,
}

impl<'a> BarrierPoint<'a> {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn spec(&self) -> &'a BarrierSpec {
        self.spec
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    pub fn value(&self) -> f64 {
        value_rec(self.spec, &self.state)
    }

    /// Directional derivative `F'(x)[h]`.
    pub fn grad_dot(&self, h: &[f64]) -> f64 {
        grad_dot_rec(self.spec, &self.state, h)
    }

    /// Full gradient `∇F(x)` as a flat vector.
    pub fn gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.spec.dim()];
        gradient_rec(self.spec, &self.state, &mut g);
        g
    }

    /// `F''(x)[h, h]`
    pub fn curvature(&self, h: &[f64]) -> f64 {
        curvature_rec(self.spec, &self.state, h)
    }

    /// Local norm `‖h‖_x = F''(x)[h, h]^{1/2}`.
    pub fn local_norm(&self, h: &[f64]) -> f64 {
        self.curvature(h).max(0.0).sqrt()
    }

    /// Restriction of the barrier to the ray `x + γ d`.
    pub fn line(&self, d: &[f64]) -> LineBarrier {
        let mut line = LineBarrier { offset: 0.0, slacks: Vec::new(), rates: Vec::new() };
        line_rec(self.spec, &self.state, d, &mut line);
        line
    }

    /// `sup { γ > 0 : x + γ d strictly feasible }`, `+∞` when unblocked.
    pub fn max_step(&self, d: &[f64]) -> f64 {
        self.line(d).max_step()
    }

    /// Smallest conic slack: the minimum row slack for inequality blocks and
    /// the minimum eigenvalue of `M(x)` for log-det blocks.
    pub fn min_slack(&self) -> f64 {
        min_slack_rec(self.spec, &self.state, &self.x)
    }
}

fn value_rec(spec: &BarrierSpec, state: &PointState) -> f64 {
    match (spec, state) {
        (BarrierSpec::AffineInequality(_), PointState::Slacks(s)) => -s.iter().map(|v| v.ln()).sum::<f64>(),
        (BarrierSpec::LogDetAffine(_), PointState::LogDet { log_det, .. }) => -log_det,
        (BarrierSpec::Product(p), PointState::Product(states)) => p
            .blocks
            .iter()
            .zip(states)
            .map(|((_, c), st)| value_rec(c, st))
            .sum(),
        _ => unreachable!("barrier state does not match its spec"),
    }
}

fn grad_dot_rec(spec: &BarrierSpec, state: &PointState, h: &[f64]) -> f64 {
    match (spec, state) {
        (BarrierSpec::AffineInequality(a), PointState::Slacks(s)) => {
            a.rows.iter().zip(s).map(|(row, si)| row.dot(h) / si).sum()
        }
        (BarrierSpec::LogDetAffine(l), PointState::LogDet { inverse, .. }) => -l
            .coeffs
            .iter()
            .filter(|(k, _)| h[*k] != 0.0)
            .map(|(k, mk)| h[*k] * inverse.dot(mk))
            .sum::<f64>(),
        (BarrierSpec::Product(p), PointState::Product(states)) => p
            .blocks
            .iter()
            .zip(states)
            .map(|((off, c), st)| grad_dot_rec(c, st, &h[*off..off + c.dim()]))
            .sum(),
        _ => unreachable!("barrier state does not match its spec"),
    }
}

fn gradient_rec(spec: &BarrierSpec, state: &PointState, out: &mut [f64]) {
    match (spec, state) {
        (BarrierSpec::AffineInequality(a), PointState::Slacks(s)) => {
            for (row, si) in a.rows.iter().zip(s) {
                row.scatter(1.0 / si, out);
            }
        }
        (BarrierSpec::LogDetAffine(l), PointState::LogDet { inverse, .. }) => {
            for (k, mk) in &l.coeffs {
                out[*k] -= inverse.dot(mk);
            }
        }
        (BarrierSpec::Product(p), PointState::Product(states)) => {
            for ((off, c), st) in p.blocks.iter().zip(states) {
                gradient_rec(c, st, &mut out[*off..off + c.dim()]);
            }
        }
        _ => unreachable!("barrier state does not match its spec"),
    }
}

fn curvature_rec(spec: &BarrierSpec, state: &PointState, h: &[f64]) -> f64 {
    match (spec, state) {
        (BarrierSpec::AffineInequality(a), PointState::Slacks(s)) => a
            .rows
            .iter()
            .zip(s)
            .map(|(row, si)| {
                let r = row.dot(h) / si;
                r * r
            })
            .sum(),
        (BarrierSpec::LogDetAffine(l), PointState::LogDet { linv, .. }) => {
            let w = linv * l.linear_part(h) * linv.transpose();
            w.norm_squared()
        }
        (BarrierSpec::Product(p), PointState::Product(states)) => p
            .blocks
            .iter()
            .zip(states)
            .map(|((off, c), st)| curvature_rec(c, st, &h[*off..off + c.dim()]))
            .sum(),
        _ => unreachable!("barrier state does not match its spec"),
    }
}

fn line_rec(spec: &BarrierSpec, state: &PointState, d: &[f64], line: &mut LineBarrier) {
    match (spec, state) {
        (BarrierSpec::AffineInequality(a), PointState::Slacks(s)) => {
            for (row, si) in a.rows.iter().zip(s) {
                line.slacks.push(*si);
                line.rates.push(row.dot(d));
            }
        }
        (BarrierSpec::LogDetAffine(l), PointState::LogDet { linv, log_det, .. }) => {
            // -log det(M + γ M_d) = -log det M - Σ log(1 + γ λ_j), with λ_j the
            // eigenvalues of L^{-1} M_d L^{-T}.
            let mut w = linv * l.linear_part(d) * linv.transpose();
            linalg::symmetrize(&mut w);
            let eig = w.symmetric_eigen();
            line.offset -= log_det;
            for &lam in eig.eigenvalues.iter() {
                line.slacks.push(1.0);
                line.rates.push(-lam);
            }
        }
        (BarrierSpec::Product(p), PointState::Product(states)) => {
            for ((off, c), st) in p.blocks.iter().zip(states) {
                line_rec(c, st, &d[*off..off + c.dim()], line);
            }
        }
        _ => unreachable!("barrier state does not match its spec"),
    }
}

fn min_slack_rec(spec: &BarrierSpec, state: &PointState, x: &[f64]) -> f64 {
    match (spec, state) {
        (BarrierSpec::AffineInequality(_), PointState::Slacks(s)) => {
            s.iter().cloned().fold(f64::INFINITY, f64::min)
        }
        (BarrierSpec::LogDetAffine(l), PointState::LogDet { .. }) => linalg::min_eigenvalue(&l.matrix_at(x)),
        (BarrierSpec::Product(p), PointState::Product(states)) => p
            .blocks
            .iter()
            .zip(states)
            .map(|((off, c), st)| min_slack_rec(c, st, &x[*off..off + c.dim()]))
            .fold(f64::INFINITY, f64::min),
        _ => unreachable!("barrier state does not match its spec"),
    }
}

/// `F(x + γ d) = offset - Σ log(slack_j - γ rate_j)` along a fixed ray.
#[derive(Debug, Clone)]
pub struct LineBarrier {
    offset: f64,
    slacks: Vec<f64>,
    rates: Vec<f64>,
}

impl LineBarrier {
    /// Barrier value at step `γ`; `+∞` outside the domain.
    pub fn value(&self, gamma: f64) -> f64 {
        let mut acc = self.offset;
        for (s, r) in self.slacks.iter().zip(&self.rates) {
            let v = s - gamma * r;
            if !(v > 0.0) {
                return f64::INFINITY;
            }
            acc -= v.ln();
        }
        acc
    }

    /// `d/dγ F(x + γ d)`
    pub fn derivative(&self, gamma: f64) -> f64 {
        self.slacks
            .iter()
            .zip(&self.rates)
            .map(|(s, r)| r / (s - gamma * r))
            .sum()
    }

    pub fn max_step(&self) -> f64 {
        self.slacks
            .iter()
            .zip(&self.rates)
            .filter(|(_, &r)| r > 0.0)
            .map(|(s, r)| s / r)
            .fold(f64::INFINITY, f64::min)
    }
}
