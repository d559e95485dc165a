//! Inner loop: conditional-gradient minimization of the potential
//! `V_t(x) = F(x) / t + g(x)` over `X ∩ dom F`.
//!
//! Three variants share one step routine so that they produce identical
//! iterates whenever their oracles agree:
//!
//! * [`cg_run`] takes the analytic step `α = min(1, t·gap / (e (e + t·gap)))`.
//! * [`lcg_run`] searches the segment for the best potential and keeps the
//!   analytic point if the search does worse.
//! * [`icg_run`] accepts an inexact oracle and stops on the certified gap.
//!
//! The `bound_*` functions evaluate the iteration-count guarantees. They are
//! monitors only and never steer the loops.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierError, BarrierPoint, BarrierSpec};
use crate::linalg::{convex_step, dot, sub};
use crate::lmo::{Certificate, FeasibleSetSpec, LmoError, OracleKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Lmo(#[from] LmoError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("iterate left the barrier domain at iteration {iteration}: {source}")]
    LeftDomain { iteration: usize, source: BarrierError },
}

/// `g(x) = <coeffs, x> + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearObjective {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl LinearObjective {
    pub fn new(coeffs: Vec<f64>) -> Self {
        LinearObjective { coeffs, constant: 0.0 }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) + self.constant
    }
}

/// The data defining `V_t`.
#[derive(Debug, Clone, Copy)]
pub struct PotentialProblem<'a> {
    pub barrier: &'a BarrierSpec,
    pub objective: &'a LinearObjective,
    pub set: &'a FeasibleSetSpec,
    pub t: f64,
}

impl<'a> PotentialProblem<'a> {
    pub fn new(
        barrier: &'a BarrierSpec,
        objective: &'a LinearObjective,
        set: &'a FeasibleSetSpec,
        t: f64,
    ) -> Result<Self, SolverError> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(SolverError::InvalidParameter(format!("t must be positive, got {t}")));
        }
        let dim = barrier.dim();
        if objective.coeffs.len() != dim || set.dim() != dim {
            return Err(SolverError::InvalidParameter(format!(
                "dimensions disagree: barrier {dim}, objective {}, set {}",
                objective.coeffs.len(),
                set.dim()
            )));
        }
        Ok(PotentialProblem { barrier, objective, set, t })
    }

    pub fn nu(&self) -> f64 {
        self.barrier.nu()
    }

    pub fn with_t(&self, t: f64) -> Result<Self, SolverError> {
        PotentialProblem::new(self.barrier, self.objective, self.set, t)
    }

    pub fn point(&self, x: &[f64]) -> Result<BarrierPoint<'a>, SolverError> {
        Ok(self.barrier.point(x)?)
    }

    pub fn potential_at(&self, p: &BarrierPoint<'_>) -> f64 {
        p.value() / self.t + self.objective.value(p.x())
    }

    pub fn potential(&self, x: &[f64]) -> Result<f64, SolverError> {
        Ok(self.potential_at(&self.point(x)?))
    }
}

/// Oracle answer at a point together with the merit quantities it induces.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `Γ_t(x, s) = <∇F(x)/t + c, x - s>`: the gap for an exact oracle, the
    /// certified gap otherwise.
    pub gap: f64,
    /// `‖s - x‖_x`
    pub e: f64,
    pub s: Vec<f64>,
    pub certificate: Certificate,
}

/// Query the oracle at `p` with cost `∇F(x)/t + c`.
pub fn evaluate(problem: &PotentialProblem<'_>, p: &BarrierPoint<'_>, oracle: &OracleKind) -> Result<Evaluation, SolverError> {
    let inv_t = 1.0 / problem.t;
    let cost: Vec<f64> = p
        .gradient()
        .iter()
        .zip(&problem.objective.coeffs)
        .map(|(g, c)| g * inv_t + c)
        .collect();
    let ans = problem.set.minimize(&cost, oracle)?;
    let d = sub(&ans.s, p.x());
    let gap = -dot(&cost, &d);
    let e = p.local_norm(&d);
    Ok(Evaluation { gap, e, s: ans.s, certificate: ans.certificate })
}

/// Exact gap at `x`: returns `(gap, s, e)`.
pub fn gap(problem: &PotentialProblem<'_>, x: &[f64]) -> Result<(f64, Vec<f64>, f64), SolverError> {
    let p = problem.point(x)?;
    let ev = evaluate(problem, &p, &OracleKind::Exact)?;
    Ok((ev.gap, ev.s, ev.e))
}

/// `min(1, t·gap / (e (e + t·gap)))`, with `α = 0` for a nonpositive gap and
/// `α = 1` when `e = 0` and the gap is positive.
pub fn analytic_step(gap: f64, e: f64, t: f64) -> f64 {
    if !(gap > 0.0) {
        return 0.0;
    }
    if e <= 0.0 {
        return 1.0;
    }
    let tg = t * gap;
    (tg / (e * (e + tg))).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Analytic,
    Full,
    LineSearch,
    Skipped,
}

/// Summary of one inner iteration. The oracle point itself is not kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub iteration: usize,
    pub gap: f64,
    pub e: f64,
    pub alpha: f64,
    pub kind: StepKind,
    pub potential_before: f64,
    pub potential_after: f64,
    /// `g` at the new iterate.
    pub objective: f64,
    pub theta: f64,
    pub oracle_target_reached: bool,
    /// Smallest conic slack of the new iterate.
    pub min_slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GapLeqEta,
    IterCap,
    TimeCap,
    /// The inexact oracle could not certify progress.
    NoProgress,
}

#[derive(Debug, Clone, Copy)]
pub struct InnerCaps {
    pub max_iters: usize,
    pub deadline: Option<Instant>,
}

impl InnerCaps {
    pub fn iterations(max_iters: usize) -> Self {
        InnerCaps { max_iters, deadline: None }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x_final: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<StepInfo>,
    pub stop_reason: StopReason,
    /// Gap (or certified gap) at `x_initial`.
    pub initial_gap: f64,
    /// Gap (or certified gap) at `x_final`.
    pub final_gap: f64,
    /// Additive inexactness of the last oracle call.
    pub final_theta: f64,
    pub potential_final: f64,
}

impl InnerResult {
    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::GapLeqEta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Analytic,
    LineSearch,
}

/// Best step along `x + γ (s - x)` on `[0, min(1, 0.999 · max_step)]` by
/// golden-section search on the potential, absolute tolerance `1e-10`.
pub fn line_search_gamma(problem: &PotentialProblem<'_>, p: &BarrierPoint<'_>, s: &[f64]) -> f64 {
    let d = sub(s, p.x());
    if d.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let line = p.line(&d);
    let slope = dot(&problem.objective.coeffs, &d);
    let inv_t = 1.0 / problem.t;
    let f = |g: f64| line.value(g) * inv_t + g * slope;
    let hi = (0.999 * line.max_step()).min(1.0);
    if !(hi > 0.0) {
        return 0.0;
    }
    let gamma = golden_section(&f, 0.0, hi, 1e-10);
    [0.0, gamma, hi]
        .into_iter()
        .fold((0.0, f(0.0)), |best, g| {
            let v = f(g);
            if v < best.1 {
                (g, v)
            } else {
                best
            }
        })
        .0
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Move from `p` using the oracle answer `ev` and return the new point.
fn take_step<'a>(
    problem: &PotentialProblem<'a>,
    p: &BarrierPoint<'a>,
    ev: &Evaluation,
    rule: Rule,
    iteration: usize,
    potential_before: f64,
) -> Result<(BarrierPoint<'a>, StepInfo), SolverError> {
    let alpha = analytic_step(ev.gap, ev.e, problem.t);
    let left = |source| SolverError::LeftDomain { iteration, source };
    let mut kind = if alpha >= 1.0 { StepKind::Full } else { StepKind::Analytic };
    let mut chosen_alpha = alpha;
    let mut next = problem.barrier.point(&convex_step(p.x(), &ev.s, alpha)).map_err(left)?;
    let mut v_next = problem.potential_at(&next);
    if rule == Rule::LineSearch {
        let gamma = line_search_gamma(problem, p, &ev.s);
        if gamma != alpha {
            if let Ok(cand) = problem.barrier.point(&convex_step(p.x(), &ev.s, gamma)) {
                let v = problem.potential_at(&cand);
                if v < v_next {
                    next = cand;
                    v_next = v;
                    chosen_alpha = gamma;
                    kind = StepKind::LineSearch;
                }
            }
        }
    }
    if v_next > potential_before + 1e-12 * (1.0 + potential_before.abs()) {
        log::warn!("potential increased at iteration {iteration}: {potential_before} -> {v_next}");
    }
    let info = StepInfo {
        iteration,
        gap: ev.gap,
        e: ev.e,
        alpha: chosen_alpha,
        kind,
        potential_before,
        potential_after: v_next,
        objective: problem.objective.value(next.x()),
        theta: ev.certificate.theta,
        oracle_target_reached: ev.certificate.reached_target,
        min_slack: next.min_slack(),
    };
    Ok((next, info))
}

fn run_loop(
    problem: &PotentialProblem<'_>,
    x0: &[f64],
    threshold: f64,
    oracle: &OracleKind,
    rule: Rule,
    caps: &InnerCaps,
) -> Result<InnerResult, SolverError> {
    let mut p = problem.point(x0)?;
    let mut v = problem.potential_at(&p);
    let mut trace = Vec::new();
    let mut initial_gap = None;
    let stop_reason;
    let mut last;
    let mut k = 0;
    loop {
        last = evaluate(problem, &p, oracle)?;
        initial_gap.get_or_insert(last.gap);
        if last.gap <= threshold {
            stop_reason = StopReason::GapLeqEta;
            break;
        }
        if k >= caps.max_iters {
            stop_reason = StopReason::IterCap;
            break;
        }
        if caps.expired() {
            stop_reason = StopReason::TimeCap;
            break;
        }
        let (next, info) = take_step(problem, &p, &last, rule, k, v)?;
        v = info.potential_after;
        trace.push(info);
        p = next;
        k += 1;
    }
    log::debug!("inner loop at t = {} stopped after {k} iterations ({stop_reason:?})", problem.t);
    Ok(InnerResult {
        x_final: p.into_x(),
        iterations: k,
        trace,
        stop_reason,
        initial_gap: initial_gap.unwrap_or(f64::NAN),
        final_gap: last.gap,
        final_theta: last.certificate.theta,
        potential_final: v,
    })
}

fn check_accuracy(eta: f64) -> Result<(), SolverError> {
    if !(eta > 0.0) {
        return Err(SolverError::InvalidParameter(format!("accuracy must be positive, got {eta}")));
    }
    Ok(())
}

/// Conditional gradient with the analytic step until `gap <= eta`.
pub fn cg_run(problem: &PotentialProblem<'_>, x0: &[f64], eta: f64, caps: &InnerCaps) -> Result<InnerResult, SolverError> {
    check_accuracy(eta)?;
    run_loop(problem, x0, eta, &OracleKind::Exact, Rule::Analytic, caps)
}

/// Conditional gradient with exact line search until `gap <= eta`.
pub fn lcg_run(problem: &PotentialProblem<'_>, x0: &[f64], eta: f64, caps: &InnerCaps) -> Result<InnerResult, SolverError> {
    check_accuracy(eta)?;
    run_loop(problem, x0, eta, &OracleKind::Exact, Rule::LineSearch, caps)
}

/// One inexact step from `x`. A nonpositive certified gap triggers one retry
/// with `θ / 10`; if that also fails the step is skipped with `α = 0`.
pub fn icg_step(
    problem: &PotentialProblem<'_>,
    x: &[f64],
    theta: f64,
    oracle: &OracleKind,
) -> Result<(Vec<f64>, StepInfo), SolverError> {
    let p = problem.point(x)?;
    let v = problem.potential_at(&p);
    let mut ev = evaluate(problem, &p, &oracle.with_theta(theta))?;
    if !(ev.gap > 0.0) {
        ev = evaluate(problem, &p, &oracle.with_theta(theta / 10.0))?;
    }
    if !(ev.gap > 0.0) {
        let info = StepInfo {
            iteration: 0,
            gap: ev.gap,
            e: ev.e,
            alpha: 0.0,
            kind: StepKind::Skipped,
            potential_before: v,
            potential_after: v,
            objective: problem.objective.value(x),
            theta: ev.certificate.theta,
            oracle_target_reached: ev.certificate.reached_target,
            min_slack: p.min_slack(),
        };
        return Ok((x.to_vec(), info));
    }
    let (next, info) = take_step(problem, &p, &ev, Rule::Analytic, 0, v)?;
    Ok((next.into_x(), info))
}

/// Inexact conditional gradient until the certified gap is `<= η δ`.
pub fn icg_run(
    problem: &PotentialProblem<'_>,
    x0: &[f64],
    eta: f64,
    delta: f64,
    theta: f64,
    oracle: &OracleKind,
    caps: &InnerCaps,
) -> Result<InnerResult, SolverError> {
    check_accuracy(eta)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(SolverError::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(theta >= 0.0) {
        return Err(SolverError::InvalidParameter(format!("theta must be nonnegative, got {theta}")));
    }
    run_loop(problem, x0, eta * delta, &oracle.with_theta(theta), Rule::Analytic, caps)
}

fn check_positive(values: &[(&str, f64)]) -> Result<(), SolverError> {
    for (name, v) in values {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(SolverError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

fn ceil_nonneg(v: f64) -> u64 {
    if v.is_nan() || v <= 0.0 {
        0
    } else {
        v.ceil() as u64
    }
}

/// Iterations until `gap <= η` for the exact variants, where `delta0`
/// upper-bounds the initial potential residual.
pub fn bound_r_g(nu: f64, t: f64, delta0: f64, omega_g: f64, eta: f64) -> Result<u64, SolverError> {
    check_positive(&[("nu", nu), ("t", t), ("delta0", delta0), ("omega_g", omega_g), ("eta", eta)])?;
    let first = 5.3 * (nu + t * delta0 + t * omega_g) * (10.6 * t * delta0).ln();
    let second = 24.0 * (nu + t * omega_g).powi(2) / (t * eta);
    Ok(ceil_nonneg(first) + ceil_nonneg(second))
}

/// Iterations until the potential residual is `<= η` for the exact variants.
pub fn bound_r_delta(nu: f64, t: f64, delta0: f64, omega_g: f64, eta: f64) -> Result<u64, SolverError> {
    check_positive(&[("nu", nu), ("t", t), ("delta0", delta0), ("omega_g", omega_g), ("eta", eta)])?;
    let first = 5.3 * (nu + t * delta0 + t * omega_g) * (10.6 * t * delta0).ln();
    let second = 12.0 * (nu + t * omega_g).powi(2) * (1.0 / (t * eta) - 1.0 / (t * delta0)).max(0.0);
    Ok(ceil_nonneg(first) + ceil_nonneg(second))
}

fn inexact_first_term(nu: f64, t: f64, delta0: f64, omega_g: f64, eta: f64, delta: f64, theta: f64) -> u64 {
    let damp = (1.0 - 10.6 * t * theta).max(0.0);
    let ratio = if damp > 0.0 { 10.6 * t * delta0 / damp } else { f64::INFINITY };
    let inner = ratio.min(delta0 / eta);
    ceil_nonneg(5.3 * (t * delta * (delta0 - theta) + nu + t * omega_g) / delta * inner.ln())
}

/// Iterations until the certified gap is `<= η δ` for the inexact variant.
#[allow(clippy::too_many_arguments)]
pub fn bound_r_g_inexact(
    nu: f64,
    t: f64,
    delta0: f64,
    omega_g: f64,
    eta: f64,
    delta: f64,
    theta: f64,
) -> Result<u64, SolverError> {
    check_positive(&[("nu", nu), ("t", t), ("delta0", delta0), ("omega_g", omega_g), ("eta", eta), ("delta", delta)])?;
    if !(theta >= 0.0) {
        return Err(SolverError::InvalidParameter(format!("theta must be nonnegative, got {theta}")));
    }
    let first = inexact_first_term(nu, t, delta0, omega_g, eta, delta, theta);
    let second = 12.0 * (nu + t * omega_g).powi(2) / (t * delta * delta * eta) * (2.0 + theta / eta);
    Ok(first + ceil_nonneg(second) + 1)
}

/// Iterations until the potential residual is `<= η + θ` for the inexact variant.
pub fn bound_r_delta_inexact(
    nu: f64,
    t: f64,
    delta0: f64,
    omega_g: f64,
    eta: f64,
    delta: f64,
    theta: f64,
) -> Result<u64, SolverError> {
    check_positive(&[("nu", nu), ("t", t), ("delta0", delta0), ("omega_g", omega_g), ("eta", eta), ("delta", delta)])?;
    if !(theta >= 0.0) {
        return Err(SolverError::InvalidParameter(format!("theta must be nonnegative, got {theta}")));
    }
    let first = inexact_first_term(nu, t, delta0, omega_g, eta, delta, theta);
    let tail = (1.0 / eta - 1.0 / (delta0 - theta)).max(0.0);
    let second = 12.0 * (nu + t * omega_g).powi(2) / (t * delta * delta) * tail;
    Ok(first + ceil_nonneg(second) + 1)
}
