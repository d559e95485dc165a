//! Outer path-following loop.
//!
//! Round `i` minimizes `V_{t_i}` to accuracy `η_i` starting from the previous
//! round's output, with `t_i = t_0 σ^{-i}`, `η_i = η_0 σ^i` and, for inexact
//! oracles, `θ_i = θ_0 σ^i`. Under the coupling `t_0 η_0 = 2ν` the output of
//! round `i` is within `2 η_i` (exact) or `η_i + θ_i + 2ν/t_i` (inexact) of
//! the optimal value.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierSpec;
use crate::lmo::{FeasibleSetSpec, OracleKind};
use crate::solver::{
    cg_run, icg_run, lcg_run, InnerCaps, InnerResult, LinearObjective, PotentialProblem, SolverError, StepInfo,
    StopReason,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Inexact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopySchedule {
    pub epsilon: f64,
    pub sigma: f64,
    pub t0: f64,
    pub eta0: f64,
    pub theta0: f64,
    pub delta: f64,
    pub nu: f64,
    pub omega_g: f64,
    pub mode: Mode,
    /// Index of the last round, `I`.
    pub rounds: usize,
    /// Set when `Ω_g = 0` forced a fallback accuracy.
    pub degenerate: bool,
}

/// `⌈log(k η_0 / ε) / log(1/σ)⌉` with `k = 2` (exact) or `3` (inexact),
/// clamped at zero.
pub fn round_count(eta0: f64, epsilon: f64, sigma: f64, mode: Mode) -> usize {
    let k = match mode {
        Mode::Exact => 2.0,
        Mode::Inexact => 3.0,
    };
    let r = ((k * eta0 / epsilon).ln() / (1.0 / sigma).ln()).ceil();
    if r > 0.0 {
        r as usize
    } else {
        0
    }
}

fn check_common(nu: f64, omega_g: f64, epsilon: f64, sigma: f64) -> Result<(), SolverError> {
    let bad = |m: String| Err(SolverError::InvalidParameter(m));
    if !(nu >= 1.0) {
        return bad(format!("barrier parameter must be at least 1, got {nu}"));
    }
    if !(omega_g >= 0.0) || !omega_g.is_finite() {
        return bad(format!("objective variation must be finite and nonnegative, got {omega_g}"));
    }
    if !(epsilon > 0.0) {
        return bad(format!("epsilon must be positive, got {epsilon}"));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return bad(format!("sigma must lie in (0, 1), got {sigma}"));
    }
    Ok(())
}

/// `t_0 = ν/Ω_g`, `η_0 = 2Ω_g` and, in inexact mode, `θ_0 = η_0`.
pub fn default_schedule(nu: f64, omega_g: f64, epsilon: f64, sigma: f64, mode: Mode) -> Result<HomotopySchedule, SolverError> {
    check_common(nu, omega_g, epsilon, sigma)?;
    if omega_g == 0.0 {
        return scaled_schedule(nu, omega_g, epsilon, sigma, mode, 2.0);
    }
    let eta0 = 2.0 * omega_g;
    Ok(HomotopySchedule {
        epsilon,
        sigma,
        t0: nu / omega_g,
        eta0,
        theta0: if mode == Mode::Inexact { eta0 } else { 0.0 },
        delta: 1.0,
        nu,
        omega_g,
        mode,
        rounds: round_count(eta0, epsilon, sigma, mode),
        degenerate: false,
    })
}

/// `η_0 = k Ω_g` and `t_0 = 2ν/η_0`, so the coupling `t_0 η_0 = 2ν` holds for
/// every `k`. With `Ω_g = 0` the accuracy falls back to `η_0 = ε`.
pub fn scaled_schedule(
    nu: f64,
    omega_g: f64,
    epsilon: f64,
    sigma: f64,
    mode: Mode,
    k: f64,
) -> Result<HomotopySchedule, SolverError> {
    check_common(nu, omega_g, epsilon, sigma)?;
    if !(k > 0.0) {
        return Err(SolverError::InvalidParameter(format!("eta0 multiplier must be positive, got {k}")));
    }
    let degenerate = omega_g == 0.0;
    let eta0 = if degenerate {
        log::warn!("objective is constant on the feasible set; using eta0 = epsilon");
        epsilon.max(f64::EPSILON)
    } else {
        k * omega_g
    };
    Ok(HomotopySchedule {
        epsilon,
        sigma,
        t0: 2.0 * nu / eta0,
        eta0,
        theta0: if mode == Mode::Inexact { eta0 } else { 0.0 },
        delta: 1.0,
        nu,
        omega_g,
        mode,
        rounds: round_count(eta0, epsilon, sigma, mode),
        degenerate,
    })
}

impl HomotopySchedule {
    pub fn with_theta0(mut self, theta0: f64) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    fn sigma_pow(&self, i: usize) -> f64 {
        self.sigma.powi(i as i32)
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 / self.sigma_pow(i)
    }

    pub fn eta(&self, i: usize) -> f64 {
        self.eta0 * self.sigma_pow(i)
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.theta0 * self.sigma_pow(i)
    }

    /// Nominal bound on `g(x̂_i) - Opt` for a round that met its stopping test.
    pub fn certificate(&self, i: usize) -> f64 {
        match self.mode {
            Mode::Exact => certificate(self.eta(i), 0.0, self.nu, self.t(i)),
            Mode::Inexact => certificate(self.eta(i), self.theta(i), self.nu, self.t(i)),
        }
    }
}

/// `η + θ + 2ν/t`.
pub fn certificate(eta: f64, theta: f64, nu: f64, t: f64) -> f64 {
    eta + theta + 2.0 * nu / t
}

/// `max g - min g` over the set for linear `g`, from two oracle calls.
pub fn compute_omega_g(objective: &LinearObjective, set: &FeasibleSetSpec) -> Result<f64, SolverError> {
    let neg: Vec<f64> = objective.coeffs.iter().map(|v| -v).collect();
    let hi = set.minimize(&neg, &OracleKind::Exact)?;
    let lo = set.minimize(&objective.coeffs, &OracleKind::Exact)?;
    Ok((-hi.linear_value - lo.linear_value).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerSolver {
    Cg,
    Lcg,
    Icg { oracle: OracleKind },
}

#[derive(Debug, Clone, Copy)]
pub struct Caps {
    /// Budget of inner iterations summed over all rounds.
    pub max_total_iters: usize,
    pub time_limit: Option<Duration>,
    /// Keep every round's output point in the trace.
    pub record_iterates: bool,
}

impl Caps {
    pub fn iterations(max_total_iters: usize) -> Self {
        Caps { max_total_iters, time_limit: None, record_iterates: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The certificate of the returned point is at most ε.
    Certified,
    /// All rounds finished but the final certificate exceeds ε.
    RoundsExhausted,
    IterCap,
    TimeCap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub t: f64,
    pub eta: f64,
    pub theta: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Gap (certified gap in inexact mode) at the round's output.
    pub final_gap: f64,
    pub final_theta: f64,
    /// `g(x̂_i)`
    pub objective: f64,
    /// Guaranteed bound on `g(x̂_i) - Opt`.
    pub certificate: f64,
    pub elapsed_secs: f64,
    #[serde(skip)]
    pub steps: Vec<StepInfo>,
    #[serde(skip)]
    pub x_hat: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterTrace {
    pub rounds: Vec<RoundRecord>,
    pub total_iterations: usize,
    pub status: RunStatus,
    pub best_certificate: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone)]
pub struct HomotopyResult {
    /// Output of the round with the smallest certificate (the last one on
    /// ties).
    pub x_hat: Vec<f64>,
    pub objective: f64,
    pub trace: OuterTrace,
}

/// Bound on `g(x̂) - Opt` from the data a round actually produced. It reduces
/// to the nominal certificate when the stopping test was met.
fn round_certificate(schedule: &HomotopySchedule, i: usize, r: &InnerResult) -> f64 {
    let t = schedule.t(i);
    match schedule.mode {
        Mode::Exact => certificate(schedule.eta(i).max(r.final_gap), 0.0, schedule.nu, t),
        Mode::Inexact => {
            let gap_bound = schedule.eta(i).max(r.final_gap / schedule.delta);
            certificate(gap_bound, schedule.theta(i).max(r.final_theta), schedule.nu, t)
        }
    }
}

/// Run the outer loop from the strictly feasible `x0`.
pub fn run(
    barrier: &BarrierSpec,
    objective: &LinearObjective,
    set: &FeasibleSetSpec,
    x0: &[f64],
    schedule: &HomotopySchedule,
    solver: InnerSolver,
    caps: &Caps,
) -> Result<HomotopyResult, SolverError> {
    if matches!(solver, InnerSolver::Icg { .. }) != (schedule.mode == Mode::Inexact) {
        return Err(SolverError::InvalidParameter("inexact inner solver requires an inexact schedule".into()));
    }
    let start = Instant::now();
    let deadline = caps.time_limit.map(|d| start + d);
    let mut x = x0.to_vec();
    let mut rounds = Vec::new();
    let mut total = 0usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut status = RunStatus::RoundsExhausted;

    for i in 0..=schedule.rounds {
        let problem = PotentialProblem::new(barrier, objective, set, schedule.t(i))?;
        let inner_caps = InnerCaps { max_iters: caps.max_total_iters.saturating_sub(total), deadline };
        let eta = schedule.eta(i);
        let r = match solver {
            InnerSolver::Cg => cg_run(&problem, &x, eta, &inner_caps)?,
            InnerSolver::Lcg => lcg_run(&problem, &x, eta, &inner_caps)?,
            InnerSolver::Icg { oracle } => {
                icg_run(&problem, &x, eta, schedule.delta, schedule.theta(i), &oracle, &inner_caps)?
            }
        };
        total += r.iterations;
        let cert = round_certificate(schedule, i, &r);
        let obj = objective.value(&r.x_final);
        log::info!(
            "round {i}: t = {:.4e}, eta = {eta:.4e}, iterations = {}, objective = {obj:.8e}, certificate = {cert:.4e}",
            problem.t,
            r.iterations
        );
        if best.as_ref().is_none_or(|(c, _)| cert <= *c) {
            best = Some((cert, r.x_final.clone()));
        }
        rounds.push(RoundRecord {
            round: i,
            t: problem.t,
            eta,
            theta: if schedule.mode == Mode::Inexact { schedule.theta(i) } else { 0.0 },
            iterations: r.iterations,
            stop_reason: r.stop_reason,
            final_gap: r.final_gap,
            final_theta: r.final_theta,
            objective: obj,
            certificate: cert,
            elapsed_secs: start.elapsed().as_secs_f64(),
            steps: r.trace,
            x_hat: caps.record_iterates.then(|| r.x_final.clone()),
        });
        x = r.x_final;
        match r.stop_reason {
            StopReason::IterCap => {
                status = RunStatus::IterCap;
                break;
            }
            StopReason::TimeCap => {
                status = RunStatus::TimeCap;
                break;
            }
            _ => {}
        }
        if cert <= schedule.epsilon {
            status = RunStatus::Certified;
            break;
        }
    }

    let (best_certificate, x_hat) = best.expect("at least one round runs");
    if status != RunStatus::Certified && best_certificate <= schedule.epsilon {
        status = RunStatus::Certified;
    }
    let objective_value = objective.value(&x_hat);
    Ok(HomotopyResult {
        x_hat,
        objective: objective_value,
        trace: OuterTrace {
            rounds,
            total_iterations: total,
            status,
            best_certificate,
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
    })
}

/// Exact-oracle homotopy with the analytic (`Cg`) or line-search (`Lcg`)
/// inner solver.
pub fn homotopy_run(
    barrier: &BarrierSpec,
    objective: &LinearObjective,
    set: &FeasibleSetSpec,
    x0: &[f64],
    schedule: &HomotopySchedule,
    lcg: bool,
    caps: &Caps,
) -> Result<HomotopyResult, SolverError> {
    let solver = if lcg { InnerSolver::Lcg } else { InnerSolver::Cg };
    run(barrier, objective, set, x0, schedule, solver, caps)
}

/// Homotopy driven by an inexact oracle.
pub fn inexact_homotopy_run(
    barrier: &BarrierSpec,
    objective: &LinearObjective,
    set: &FeasibleSetSpec,
    x0: &[f64],
    schedule: &HomotopySchedule,
    oracle: OracleKind,
    caps: &Caps,
) -> Result<HomotopyResult, SolverError> {
    run(barrier, objective, set, x0, schedule, InnerSolver::Icg { oracle }, caps)
}
