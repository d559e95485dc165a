//! Linear minimization oracles over the compact sets used by the instances.
//!
//! Every oracle returns a point of the set together with a certificate
//! `(δ, θ)`: for the returned `s` and the cost `c`,
//! `<c, x> - <c, s> >= δ (max_{v ∈ X} <c, x - v> - θ)`.
//! Exact oracles report `(1, 0)`. The Lanczos oracle certifies the additive
//! part through the eigenvalue residual bound `λ_min >= λ - ‖C v - λ v‖`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lanczos;
use crate::linalg::{self, dot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmoError {
    #[error("cost matrix is not symmetric (asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },
    #[error("cost vector is empty")]
    EmptyCost,
    #[error("cost has dimension {got}, the feasible set has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
}

/// Inexactness certificate of an oracle answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub delta: f64,
    pub theta: f64,
    /// Eigen-residual norm `‖C v - λ v‖` backing `theta`, when iterative.
    pub residual: Option<f64>,
    /// False when the iterative oracle hit its iteration cap before reaching
    /// the requested `theta`.
    pub reached_target: bool,
}

impl Certificate {
    pub const EXACT: Certificate = Certificate { delta: 1.0, theta: 0.0, residual: None, reached_target: true };
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmoAnswer {
    pub s: Vec<f64>,
    /// `<c, s>` for the effective cost handed to the oracle.
    pub linear_value: f64,
    pub certificate: Certificate,
}

/// Settings of the Lanczos-backed spectrahedron oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    pub theta_target: f64,
    pub max_iters: usize,
    pub seed: u64,
}

/// How spectrahedron subproblems are solved. Simplex subproblems are always
/// solved in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OracleKind {
    /// Dense symmetric eigendecomposition.
    Exact,
    Lanczos(LanczosOptions),
}

impl OracleKind {
    /// Same oracle with a different additive target (no-op for `Exact`).
    pub fn with_theta(self, theta: f64) -> OracleKind {
        match self {
            OracleKind::Exact => OracleKind::Exact,
            OracleKind::Lanczos(o) => OracleKind::Lanczos(LanczosOptions { theta_target: theta, ..o }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSetSpec {
    /// `{S ⪰ 0, tr S <= ρ}` (or `tr S = ρ` when `trace_equality`) over
    /// row-major `n × n` matrices.
    Spectrahedron { n: usize, rho: f64, trace_equality: bool },
    /// `{s >= 0, Σ s_i <= ρ}` in `ℝ^m`.
    ScaledSimplex { m: usize, rho: f64 },
    /// `inner` on the leading coordinates, followed by coordinates pinned to
    /// fixed values.
    FixedCoordinates { inner: Box<FeasibleSetSpec>, pinned: Vec<f64> },
}

impl FeasibleSetSpec {
    pub fn spectrahedron(n: usize, rho: f64) -> Result<Self, LmoError> {
        check_rho(rho)?;
        if n == 0 {
            return Err(LmoError::InvalidSet("empty spectrahedron".into()));
        }
        Ok(FeasibleSetSpec::Spectrahedron { n, rho, trace_equality: false })
    }

    pub fn scaled_simplex(m: usize, rho: f64) -> Result<Self, LmoError> {
        check_rho(rho)?;
        if m == 0 {
            return Err(LmoError::InvalidSet("empty simplex".into()));
        }
        Ok(FeasibleSetSpec::ScaledSimplex { m, rho })
    }

    pub fn pinned(inner: FeasibleSetSpec, pinned: Vec<f64>) -> Self {
        FeasibleSetSpec::FixedCoordinates { inner: Box::new(inner), pinned }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSetSpec::Spectrahedron { n, .. } => n * n,
            FeasibleSetSpec::ScaledSimplex { m, .. } => *m,
            FeasibleSetSpec::FixedCoordinates { inner, pinned } => inner.dim() + pinned.len(),
        }
    }

    /// Minimize `<cost, s>` over the set.
    pub fn minimize(&self, cost: &[f64], oracle: &OracleKind) -> Result<LmoAnswer, LmoError> {
        if cost.len() != self.dim() {
            return Err(LmoError::DimensionMismatch { expected: self.dim(), got: cost.len() });
        }
        match self {
            FeasibleSetSpec::Spectrahedron { n, rho, trace_equality } => {
                let c = linalg::mat_from_flat(cost, *n);
                let mut ans = match oracle {
                    OracleKind::Exact => spectrahedron_lmo(&c, *rho)?,
                    OracleKind::Lanczos(o) => spectrahedron_lmo_lanczos(&c, *rho, o.theta_target, o.max_iters, o.seed)?,
                };
                if *trace_equality && ans.linear_value == 0.0 && ans.s.iter().all(|v| *v == 0.0) {
                    // equality forces a rank-one vertex even for PSD costs
                    ans = rank_one_vertex(&c, *rho, oracle)?;
                }
                Ok(ans)
            }
            FeasibleSetSpec::ScaledSimplex { rho, .. } => scaled_simplex_lmo(cost, *rho),
            FeasibleSetSpec::FixedCoordinates { inner, pinned } => {
                let d = inner.dim();
                let mut ans = inner.minimize(&cost[..d], oracle)?;
                for (k, v) in pinned.iter().enumerate() {
                    ans.linear_value += cost[d + k] * v;
                }
                ans.s.extend_from_slice(pinned);
                Ok(ans)
            }
        }
    }

    /// Signed membership margin: `>= 0` iff `x` lies in the set.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            FeasibleSetSpec::Spectrahedron { n, rho, trace_equality } => {
                let m = linalg::mat_from_flat(x, *n);
                let trace = m.trace();
                let trace_margin = if *trace_equality { -(rho - trace).abs() } else { rho - trace };
                let asym = linalg::asymmetry(&m);
                let mut sym = m;
                linalg::symmetrize(&mut sym);
                let margin = linalg::min_eigenvalue(&sym).min(trace_margin);
                if asym > 0.0 {
                    margin.min(-asym)
                } else {
                    margin
                }
            }
            FeasibleSetSpec::ScaledSimplex { rho, .. } => {
                let low = x.iter().cloned().fold(f64::INFINITY, f64::min);
                low.min(rho - x.iter().sum::<f64>())
            }
            FeasibleSetSpec::FixedCoordinates { inner, pinned } => {
                let d = inner.dim();
                let dev = pinned.iter().zip(&x[d..]).map(|(p, v)| (p - v).abs()).fold(0.0, f64::max);
                let inner_margin = inner.margin(&x[..d]);
                if dev > 0.0 {
                    inner_margin.min(-dev)
                } else {
                    inner_margin
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.margin(x) >= -tol
    }
}

fn check_rho(rho: f64) -> Result<(), LmoError> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(LmoError::InvalidSet(format!("radius must be positive, got {rho}")));
    }
    Ok(())
}

fn check_symmetric(c: &DMatrix<f64>) -> Result<(), LmoError> {
    let scale = c.norm();
    let asymmetry = linalg::asymmetry(c);
    if asymmetry > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(LmoError::NotSymmetric { asymmetry, scale });
    }
    Ok(())
}

fn scaled_outer(v: &[f64], rho: f64) -> Vec<f64> {
    let n = v.len();
    let mut s = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            s.push(rho * v[i] * v[j]);
        }
    }
    s
}

/// Smallest eigenpair by dense decomposition, lowest index on ties.
fn dense_min_eigenpair(c: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let mut sym = c.clone();
    linalg::symmetrize(&mut sym);
    let eig = sym.symmetric_eigen();
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).iter().cloned().collect())
}

/// The residual bound `λ_min(C) >= λ̃ - ‖r‖` only holds when `λ̃` approximates
/// the smallest eigenvalue rather than an interior one. Check it by
/// factoring `C - (λ̃ - ‖r‖)I`, with the residual padded by a rounding
/// allowance. Returns the padded residual, or `None` when some eigenvalue
/// lies below the bound.
fn verified_residual(c: &DMatrix<f64>, lambda: f64, residual: f64) -> Option<f64> {
    let padded = residual + 1e-12 * c.norm().max(f64::MIN_POSITIVE);
    let mut shifted = c.clone();
    for i in 0..c.nrows() {
        shifted[(i, i)] -= lambda - padded;
    }
    linalg::cholesky_lower(&shifted, 0.0).ok().map(|_| padded)
}

/// Exact `argmin { <C, S> : S ⪰ 0, tr S <= ρ }`.
pub fn spectrahedron_lmo(c: &DMatrix<f64>, rho: f64) -> Result<LmoAnswer, LmoError> {
    check_rho(rho)?;
    check_symmetric(c)?;
    let n = c.nrows();
    let (lambda, v) = dense_min_eigenpair(c);
    if lambda < 0.0 {
        let s = scaled_outer(&v, rho);
        let linear_value = dot(c.as_slice(), &s);
        Ok(LmoAnswer { s, linear_value, certificate: Certificate::EXACT })
    } else {
        Ok(LmoAnswer { s: vec![0.0; n * n], linear_value: 0.0, certificate: Certificate::EXACT })
    }
}

/// Certified `(1, θ)` answer for the spectrahedron from a Lanczos Ritz pair.
pub fn spectrahedron_lmo_lanczos(
    c: &DMatrix<f64>,
    rho: f64,
    theta_target: f64,
    max_iters: usize,
    seed: u64,
) -> Result<LmoAnswer, LmoError> {
    check_rho(rho)?;
    check_symmetric(c)?;
    let n = c.nrows();
    let op = |x: &[f64], y: &mut [f64]| {
        // row-major storage: y = C x
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(&c.as_slice()[i * n..(i + 1) * n], x);
        }
    };
    // nalgebra stores column-major; C is symmetric so rows and columns agree
    let theta_of = |lambda: f64, residual: f64| {
        if lambda < 0.0 {
            rho * residual
        } else {
            rho * (residual - lambda).max(0.0)
        }
    };
    let target = theta_target.max(0.0);
    let r = lanczos::smallest_eigenpair(n, op, max_iters, seed, |lam, res| theta_of(lam, res) <= target);
    let Some(residual) = verified_residual(c, r.value, r.residual) else {
        log::debug!("Ritz value {:e} is not the bottom of the spectrum; using the dense oracle", r.value);
        return spectrahedron_lmo(c, rho);
    };
    let theta = theta_of(r.value, residual);
    let certificate = Certificate {
        delta: 1.0,
        theta,
        residual: Some(residual),
        reached_target: theta <= target,
    };
    if r.value < 0.0 {
        let s = scaled_outer(&r.vector, rho);
        let linear_value = dot(c.as_slice(), &s);
        Ok(LmoAnswer { s, linear_value, certificate })
    } else {
        Ok(LmoAnswer { s: vec![0.0; n * n], linear_value: 0.0, certificate })
    }
}

fn rank_one_vertex(c: &DMatrix<f64>, rho: f64, oracle: &OracleKind) -> Result<LmoAnswer, LmoError> {
    let (v, certificate) = match oracle {
        OracleKind::Exact => (dense_min_eigenpair(c).1, Certificate::EXACT),
        OracleKind::Lanczos(o) => {
            let n = c.nrows();
            let op = |x: &[f64], y: &mut [f64]| {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = dot(&c.as_slice()[i * n..(i + 1) * n], x);
                }
            };
            let r = lanczos::smallest_eigenpair(n, op, o.max_iters, o.seed, |_, res| rho * res <= o.theta_target);
            let Some(residual) = verified_residual(c, r.value, r.residual) else {
                return rank_one_vertex(c, rho, &OracleKind::Exact);
            };
            let theta = rho * residual;
            (
                r.vector,
                Certificate {
                    delta: 1.0,
                    theta,
                    residual: Some(residual),
                    reached_target: theta <= o.theta_target,
                },
            )
        }
    };
    let s = scaled_outer(&v, rho);
    let linear_value = dot(c.as_slice(), &s);
    Ok(LmoAnswer { s, linear_value, certificate })
}

/// `argmin { <c, s> : s >= 0, Σ s_i <= ρ }`, lowest index on ties.
pub fn scaled_simplex_lmo(c: &[f64], rho: f64) -> Result<LmoAnswer, LmoError> {
    check_rho(rho)?;
    if c.is_empty() {
        return Err(LmoError::EmptyCost);
    }
    let mut best = 0;
    for (i, v) in c.iter().enumerate().skip(1) {
        if *v < c[best] {
            best = i;
        }
    }
    let mut s = vec![0.0; c.len()];
    let mut linear_value = 0.0;
    if c[best] < 0.0 {
        s[best] = rho;
        linear_value = rho * c[best];
    }
    Ok(LmoAnswer { s, linear_value, certificate: Certificate::EXACT })
}

/// Oracle for `<c_barrier, s> + g(s)` with linear `g(s) = <g_linear, s>`.
pub fn composite_lmo(
    set: &FeasibleSetSpec,
    c_barrier: &[f64],
    g_linear: &[f64],
    oracle: &OracleKind,
) -> Result<LmoAnswer, LmoError> {
    if c_barrier.len() != g_linear.len() {
        return Err(LmoError::DimensionMismatch { expected: c_barrier.len(), got: g_linear.len() });
    }
    let cost: Vec<f64> = c_barrier.iter().zip(g_linear).map(|(a, b)| a + b).collect();
    set.minimize(&cost, oracle)
}
