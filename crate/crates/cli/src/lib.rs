//! Command-line harness: build or load instances, run a solver configuration
//! and write line-delimited traces plus a summary record.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hcg_core::homotopy::{
    certificate, compute_omega_g, run, scaled_schedule, Caps, HomotopyResult, HomotopySchedule, InnerSolver, Mode,
    RunStatus,
};
use hcg_core::instances::{
    build_maxcut, builtin, feasibility_margin, parse_gset, random_maxcut_graph, random_mixing_graph, repair_solution,
    ConicInstance, InstanceFile, InstanceKind, RepairReport, BUILTINS,
};
use hcg_core::lmo::{LanczosOptions, OracleKind};
use hcg_core::solver::StepKind;
use serde::{Deserialize, Serialize};

pub const TRACE_SCHEMA: &str = "hcg-trace/1";
pub const SUMMARY_SCHEMA: &str = "hcg-summary/1";
pub const SOLUTION_SCHEMA: &str = "hcg-solution/1";
pub const REPAIR_SCHEMA: &str = "hcg-repair/1";

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hcg", version, about = "Homotopy conditional-gradient solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and report the certified result.
    Solve(SolveArgs),
    /// Generate a random instance file.
    Gen(GenArgs),
    /// Repair a MaxCut or mixing solution so that it is feasible.
    Repair(RepairArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Cg,
    Lcg,
    Icg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LmoChoice {
    Dense,
    Lanczos,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["instance", "gset"])))]
pub struct SolveArgs {
    /// Builtin instance name or path to an instance file.
    #[arg(long)]
    pub instance: Option<String>,
    /// Gset graph file, solved as a MaxCut relaxation.
    #[arg(long)]
    pub gset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lcg")]
    pub solver: SolverChoice,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    pub sigma: f64,
    /// `η₀ = k Ω_g`.
    #[arg(long, default_value_t = 2.0)]
    pub eta0_mult: f64,
    /// Multiplicative accuracy of the inexact oracle.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Initial additive accuracy of the inexact oracle (default `η₀`).
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Seed for random builtins and the Lanczos start vector.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Budget of inner iterations over all rounds.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iters: usize,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub time_limit: f64,
    #[arg(long, value_enum, default_value = "lanczos")]
    pub lmo: LmoChoice,
    /// Lanczos iteration limit per oracle call.
    #[arg(long, default_value_t = 300)]
    pub lanczos_iters: usize,
    /// Per-iteration trace (one JSON record per line).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Include wall-clock times in trace records.
    #[arg(long)]
    pub timed_trace: bool,
    /// Summary record; printed to stdout when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Output point.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Mixing,
    Maxcut,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instance file to write; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    /// Builtin instance name or path to an instance file.
    #[arg(long)]
    pub instance: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solution file written by `solve --solution`.
    #[arg(long)]
    pub solution: PathBuf,
    /// Repaired solution; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Repair report; printed to stderr when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// One inner iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub schema: String,
    pub round: usize,
    pub iteration: usize,
    pub t: f64,
    pub eta: f64,
    /// Gap at the iterate the step started from (certified gap for `icg`).
    pub gap: f64,
    pub potential: f64,
    /// Raw objective `g` after the step.
    pub objective: f64,
    pub alpha: f64,
    pub step: StepKind,
    /// Bound on `g - Opt` implied by this step's gap.
    pub certificate: f64,
    /// Round elapsed time; `null` unless timing is requested.
    pub elapsed: Option<f64>,
    /// Smallest conic slack after the step.
    pub feasibility_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub instance: String,
    pub solver: String,
    pub epsilon: f64,
    pub sigma: f64,
    pub eta0: f64,
    pub t0: f64,
    pub status: RunStatus,
    /// Raw objective `g(x̂)` of the minimization form.
    pub objective: f64,
    /// Objective in the instance's natural sense and scale.
    pub reported_objective: f64,
    pub certificate: f64,
    pub rounds: usize,
    pub total_iterations: usize,
    pub total_secs: f64,
    pub feasibility_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub schema: String,
    pub instance: String,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutput {
    pub schema: String,
    pub instance: String,
    pub report: RepairReport,
}

/// Run a parsed command and return the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Gen(args) => cmd_gen(&args).map(|_| EXIT_CERTIFIED),
        Command::Repair(args) => cmd_repair(&args).map(|_| EXIT_CERTIFIED),
    }
}

/// Builtin name or instance file path.
pub fn load_instance(source: &str, seed: u64) -> Result<ConicInstance> {
    if BUILTINS.contains(&source) {
        return Ok(builtin(source, seed)?);
    }
    let path = Path::new(source);
    if !path.exists() {
        bail!("`{source}` is neither a builtin instance ({}) nor an existing file", BUILTINS.join(", "));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file: InstanceFile =
        serde_json::from_str(&text).with_context(|| format!("{} is not a valid instance file", path.display()))?;
    Ok(file.build()?)
}

fn load_gset(path: &Path) -> Result<ConicInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut inst = build_maxcut(&parse_gset(&text)?)?;
    if let Some(stem) = path.file_stem() {
        inst.name = stem.to_string_lossy().into_owned();
    }
    Ok(inst)
}

pub fn schedule_for(inst: &ConicInstance, args: &SolveArgs) -> Result<HomotopySchedule> {
    let mode = if args.solver == SolverChoice::Icg { Mode::Inexact } else { Mode::Exact };
    let omega = compute_omega_g(&inst.objective, &inst.set)?;
    let mut schedule = scaled_schedule(inst.nu(), omega, args.epsilon, args.sigma, mode, args.eta0_mult)?;
    if mode == Mode::Inexact {
        schedule = schedule.with_delta(args.delta);
        if let Some(theta0) = args.theta0 {
            schedule = schedule.with_theta0(theta0);
        }
    }
    Ok(schedule)
}

fn inner_solver(args: &SolveArgs) -> InnerSolver {
    match args.solver {
        SolverChoice::Cg => InnerSolver::Cg,
        SolverChoice::Lcg => InnerSolver::Lcg,
        SolverChoice::Icg => InnerSolver::Icg {
            oracle: match args.lmo {
                LmoChoice::Dense => OracleKind::Exact,
                LmoChoice::Lanczos => OracleKind::Lanczos(LanczosOptions {
                    theta_target: 0.0,
                    max_iters: args.lanczos_iters,
                    seed: args.seed,
                }),
            },
        },
    }
}

/// Flatten a run into per-iteration records.
pub fn trace_records(result: &HomotopyResult, schedule: &HomotopySchedule, timed: bool) -> Vec<TraceRecord> {
    let mut out = Vec::with_capacity(result.trace.total_iterations);
    for rr in &result.trace.rounds {
        for step in &rr.steps {
            let gap_bound = if schedule.mode == Mode::Inexact { step.gap / schedule.delta } else { step.gap };
            out.push(TraceRecord {
                schema: TRACE_SCHEMA.into(),
                round: rr.round,
                iteration: step.iteration,
                t: rr.t,
                eta: rr.eta,
                gap: step.gap,
                potential: step.potential_after,
                objective: step.objective,
                alpha: step.alpha,
                step: step.kind,
                certificate: certificate(gap_bound.max(0.0), step.theta, schedule.nu, rr.t),
                elapsed: timed.then_some(rr.elapsed_secs),
                feasibility_margin: step.min_slack,
            });
        }
    }
    out
}

fn write_json_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    if !(args.time_limit > 0.0 && args.time_limit.is_finite()) {
        bail!("--time-limit must be positive and finite");
    }
    let inst = match (&args.instance, &args.gset) {
        (Some(source), None) => load_instance(source, args.seed)?,
        (None, Some(path)) => load_gset(path)?,
        _ => bail!("give exactly one of --instance and --gset"),
    };
    let schedule = schedule_for(&inst, args)?;
    log::info!(
        "{}: nu = {}, omega_g = {:.6e}, t0 = {:.6e}, eta0 = {:.6e}, {} rounds",
        inst.name,
        inst.nu(),
        schedule.omega_g,
        schedule.t0,
        schedule.eta0,
        schedule.rounds
    );
    let caps = Caps {
        max_total_iters: args.max_iters,
        time_limit: Some(Duration::from_secs_f64(args.time_limit)),
        record_iterates: false,
    };
    let result = run(&inst.barrier, &inst.objective, &inst.set, &inst.x0, &schedule, inner_solver(args), &caps)?;

    if let Some(path) = &args.trace {
        write_json_lines(path, &trace_records(&result, &schedule, args.timed_trace))?;
    }
    if let Some(path) = &args.solution {
        let sol = Solution { schema: SOLUTION_SCHEMA.into(), instance: inst.name.clone(), x: result.x_hat.clone() };
        write_json(Some(path), &sol)?;
    }
    let summary = Summary {
        schema: SUMMARY_SCHEMA.into(),
        instance: inst.name.clone(),
        solver: format!("{:?}", args.solver).to_lowercase(),
        epsilon: args.epsilon,
        sigma: args.sigma,
        eta0: schedule.eta0,
        t0: schedule.t0,
        status: result.trace.status,
        objective: result.objective,
        reported_objective: inst.report(result.objective),
        certificate: result.trace.best_certificate,
        rounds: result.trace.rounds.len(),
        total_iterations: result.trace.total_iterations,
        total_secs: result.trace.elapsed_secs,
        feasibility_margin: feasibility_margin(&inst, &result.x_hat),
    };
    write_json(args.summary.as_deref(), &summary)?;
    Ok(match result.trace.status {
        RunStatus::Certified => EXIT_CERTIFIED,
        _ => EXIT_UNCERTIFIED,
    })
}

pub fn generate(kind: GenKind, n: usize, m: usize, seed: u64) -> Result<InstanceFile> {
    Ok(match kind {
        GenKind::Mixing => {
            if m + 1 < n {
                bail!("a connected graph on {n} nodes needs at least {} edges, got {m}", n.saturating_sub(1));
            }
            InstanceFile::from_graph(InstanceKind::Mixing, &random_mixing_graph(n, m, seed)?, Some(seed), Some(true))
        }
        GenKind::Maxcut => InstanceFile::from_graph(InstanceKind::MaxCut, &random_maxcut_graph(n, m, seed)?, Some(seed), None),
    })
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let file = generate(args.kind, args.n, args.m, args.seed)?;
    write_json(args.out.as_deref(), &file)
}

pub fn cmd_repair(args: &RepairArgs) -> Result<()> {
    let inst = load_instance(&args.instance, args.seed)?;
    let text = std::fs::read_to_string(&args.solution)
        .with_context(|| format!("cannot read {}", args.solution.display()))?;
    let sol: Solution = serde_json::from_str(&text).context("invalid solution file")?;
    if sol.schema != SOLUTION_SCHEMA {
        bail!("unsupported solution schema `{}` (expected `{SOLUTION_SCHEMA}`)", sol.schema);
    }
    let (x, report) = repair_solution(&inst, &sol.x)?;
    write_json(args.out.as_deref(), &Solution { schema: SOLUTION_SCHEMA.into(), instance: inst.name.clone(), x })?;
    let out = RepairOutput { schema: REPAIR_SCHEMA.into(), instance: inst.name, report };
    match &args.report {
        Some(p) => write_json(Some(p), &out),
        None => {
            eprintln!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
    }
}
