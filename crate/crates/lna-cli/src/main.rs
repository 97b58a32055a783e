//! Command line front end: generate instances, solve them, run experiment
//! sweeps, and check candidate points.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lna::cs::{self, MatrixKind, SensingSetup};
use lna::io::{self, LoadedInstance, PointFile};
use lna::portfolio::{self, check_curvature, lambdas_from_xi, MvskInstance};
use lna::problem::{validate_derivatives_at_random_points, Iterate};
use lna::solver::{solve, SolverConfig};
use lna::sweep::{self, ExecutionMode, ExperimentPlan};
use lna::{classify_stationarity, convex_case_grade, DenseVector, MinimizerGrade, SupportCase};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lna",
    version,
    about = "Lagrange-Newton solver for sparsity-constrained nonlinear programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance file
    Gen(GenArgs),
    /// Solve an instance and print a run report
    Solve(SolveArgs),
    /// Run an experiment plan, writing trial records and a summary
    Sweep(SweepArgs),
    /// Check derivatives of an instance and classify a candidate point
    Check(CheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    #[value(name = "cs_gaussian")]
    CsGaussian,
    #[value(name = "cs_dct")]
    CsDct,
    #[value(name = "mvsk")]
    Mvsk,
}

#[derive(Args)]
struct GenArgs {
    /// Problem family
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Ambient dimension (number of unknowns or assets)
    #[arg(short, long)]
    n: usize,
    /// Sparsity level
    #[arg(short, long)]
    s: usize,
    /// Total sensing rows (sensing families)
    #[arg(short, long)]
    p: Option<usize>,
    /// Sampling ratio, p = ceil(r * n) (sensing families, ignored when -p given)
    #[arg(short, long)]
    r: Option<f64>,
    /// Risk aversion level (portfolio family)
    #[arg(long, default_value_t = 5.0)]
    xi: f64,
    /// Synthetic panel length (portfolio family)
    #[arg(long, default_value_t = 500)]
    t_obs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output instance path
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file produced by `gen`
    #[arg(short, long)]
    instance: PathBuf,
    /// Warm-start point file; defaults to the origin
    #[arg(long)]
    x0: Option<PathBuf>,
    /// Selection stepsize; defaults to 5/n for sensing, 1 for portfolios
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Write the final point to this path
    #[arg(long)]
    save_point: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment plan JSON
    #[arg(long)]
    plan: PathBuf,
    /// Records CSV path; overrides the plan's output_path
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Parallel)]
    mode: ModeArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Sequential,
    Parallel,
}

#[derive(Args)]
struct CheckArgs {
    /// Instance file produced by `gen`
    #[arg(short, long)]
    instance: PathBuf,
    /// Point to classify; defaults to solving the instance first
    #[arg(long)]
    point: Option<PathBuf>,
    /// Selection stepsize; defaults to 5/n for sensing, 1 for portfolios
    #[arg(long)]
    beta: Option<f64>,
    /// Seed for the derivative spot checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random points for the derivative spot checks
    #[arg(long, default_value_t = 20)]
    points: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not usage errors
            if e.use_stderr() {
                let first = e.to_string();
                let line = first.lines().next().unwrap_or("bad arguments");
                eprintln!("{line}");
                return ExitCode::from(1);
            }
            e.print().expect("stdout writable");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check(args) => cmd_check(args),
    }
}

// Family defaults on unit-norm sensing columns: 5p/n (the raw-ensemble 5/n
// rule times the squared column norm p it was calibrated against), 1 for
// portfolios. Sweeps additionally retry with halved stepsizes; a direct
// solve makes one attempt.
fn default_beta(inst: &LoadedInstance) -> f64 {
    match inst {
        LoadedInstance::Cs { instance, .. } => {
            let p_total = instance.objective_block().0.rows()
                + instance.constraint_block().0.rows();
            5.0 * p_total as f64 / inst.problem().dim() as f64
        }
        LoadedInstance::Mvsk(_) => 1.0,
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let inst = match args.family {
        FamilyArg::CsGaussian | FamilyArg::CsDct => {
            let kind = if args.family == FamilyArg::CsGaussian {
                MatrixKind::Gaussian
            } else {
                MatrixKind::PartialDct
            };
            let p = match (args.p, args.r) {
                (Some(p), _) => p,
                (None, Some(r)) => (r * args.n as f64).ceil() as usize,
                (None, None) => bail!("sensing families need -p or -r"),
            };
            let setup = SensingSetup::new(args.n, p, args.s, kind, args.seed);
            let instance = cs::generate(&setup).context("instance synthesis failed")?;
            LoadedInstance::Cs { instance, kind }
        }
        FamilyArg::Mvsk => {
            let panel = portfolio::synthetic_return_panel(args.n, args.t_obs, args.seed);
            let instance =
                MvskInstance::from_panel(&panel, lambdas_from_xi(args.xi), args.s)
                    .context("instance synthesis failed")?;
            let curvature = check_curvature(instance.lambdas(), instance.moments().1);
            if !curvature.passed() {
                eprintln!(
                    "warning: curvature screen failed (scalar {} vs {}, restricted pd: {})",
                    curvature.scalar_lhs, curvature.scalar_rhs, curvature.restricted_pd
                );
            }
            LoadedInstance::Mvsk(instance)
        }
    };
    io::save_instance(&inst, Some(args.seed), &args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    let p = inst.problem();
    println!(
        "wrote {} instance: n={} m={} s={} seed={} -> {}",
        inst.family_name(),
        p.dim(),
        p.num_constraints(),
        p.sparsity(),
        args.seed,
        args.output.display()
    );
    Ok(())
}

fn load_start(inst: &LoadedInstance, x0: Option<&Path>) -> Result<Iterate> {
    let p = inst.problem();
    let Some(path) = x0 else {
        return Ok(Iterate::origin(p.dim(), p.num_constraints()));
    };
    let point = io::load_point(path).with_context(|| format!("reading {}", path.display()))?;
    if point.x.len() != p.dim() {
        bail!(
            "start point has {} coordinates, instance has {}",
            point.x.len(),
            p.dim()
        );
    }
    let y = match point.y {
        Some(y) if y.len() != p.num_constraints() => bail!(
            "start point has {} multipliers, instance has {} constraints",
            y.len(),
            p.num_constraints()
        ),
        Some(y) => DenseVector::from_vec(y),
        None => DenseVector::zeros(p.num_constraints()),
    };
    Ok(Iterate::new(DenseVector::from_vec(point.x), y))
}

fn describe_case(case: SupportCase) -> &'static str {
    match case {
        SupportCase::FullSupport => "full_support",
        SupportCase::SlackSupport => "slack_support",
    }
}

fn describe_grade(grade: MinimizerGrade) -> &'static str {
    match grade {
        MinimizerGrade::GlobalMinimizer => "global minimizer",
        MinimizerGrade::LocalMinimizer => "local minimizer",
        MinimizerGrade::NotStationary => "not stationary",
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let inst = io::load_instance(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let z0 = load_start(&inst, args.x0.as_deref())?;
    let mut config = SolverConfig::new(args.beta.unwrap_or_else(|| default_beta(&inst)));
    config.epsilon = args.epsilon;
    config.max_iter = args.max_iter;

    let p = inst.problem();
    let report = solve(p, &z0, &config);

    println!("family: {}", inst.family_name());
    println!(
        "n: {}  m: {}  s: {}  beta: {:.6e}",
        p.dim(),
        p.num_constraints(),
        p.sparsity(),
        config.beta
    );
    println!("status: {}", report.status.as_str());
    println!("iterations: {}", report.iterations);
    println!(
        "eta: {:.6e}",
        report.eta_trace.last().copied().unwrap_or(f64::NAN)
    );
    println!("support: {:?}", report.final_support.indices());
    println!(
        "verdict: {} ({}), gradient residual {:.3e}, feasibility {:.3e}",
        if report.verdict.is_strong_stationary {
            "strong stationary"
        } else {
            "not strong stationary"
        },
        describe_case(report.verdict.case),
        report.verdict.gradient_residual,
        report.verdict.feasibility
    );
    println!("objective: {:.12e}", p.objective(&report.final_iterate.x));
    if let Some(csi) = inst.as_cs() {
        if csi.x_true().is_some() {
            let err = csi.recovery_error(&report.final_iterate.x)?;
            let ok = csi.recovery_success(&report.final_iterate.x)?;
            println!("abs_error: {err:.6e}");
            println!("success: {ok}");
        }
    }
    if inst.as_mvsk().is_some() {
        let s_hat = portfolio::sparsity_hat(&report.final_iterate.x)
            .map(|v| v.to_string())
            .unwrap_or_else(|_| "undefined".into());
        println!("sparsity_hat: {s_hat}");
    }
    println!("wall_time_s: {:.6}", report.wall_time_s);

    if let Some(path) = args.save_point {
        let point = PointFile {
            x: report.final_iterate.x.as_slice().to_vec(),
            y: Some(report.final_iterate.y.as_slice().to_vec()),
        };
        io::save_point(&point, &path)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote final point -> {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.plan)
        .with_context(|| format!("reading {}", args.plan.display()))?;
    let plan = ExperimentPlan::from_json(&text)?;
    let output = args
        .output
        .clone()
        .or_else(|| plan.output_path.as_ref().map(PathBuf::from))
        .ok_or_else(|| anyhow!("no output path: pass --output or set output_path in the plan"))?;

    let mode = match args.mode {
        ModeArg::Sequential => ExecutionMode::Sequential,
        ModeArg::Parallel => ExecutionMode::Parallel,
    };
    let outcome = sweep::run_plan_with(&plan, mode)?;

    sweep::emit_csv_path(&outcome.records, &output)
        .with_context(|| format!("writing {}", output.display()))?;
    let summary_path = output.with_extension("summary.json");
    sweep::emit_json_path(&outcome.summary, &summary_path)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    for (key, g) in &outcome.summary {
        let rate = g
            .success_rate
            .map(|r| format!("  success_rate={r:.3}"))
            .unwrap_or_default();
        println!(
            "{key}: trials={} converged={}{rate}  mean_iters={:.2}",
            g.trials, g.converged, g.mean_iterations
        );
    }
    println!("wrote {} records -> {}", outcome.records.len(), output.display());
    println!("wrote summary -> {}", summary_path.display());
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<()> {
    let inst = io::load_instance(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let p = inst.problem();
    let beta = args.beta.unwrap_or_else(|| default_beta(&inst));

    let reports = validate_derivatives_at_random_points(p, args.seed, args.points);
    let passed = reports.iter().filter(|r| r.passed()).count();
    let worst = reports
        .iter()
        .map(|r| r.max_error())
        .fold(0.0f64, f64::max);
    println!(
        "derivative check: {passed}/{} points passed (worst block error {worst:.3e})",
        reports.len()
    );

    let z = match &args.point {
        Some(path) => {
            let point =
                io::load_point(path).with_context(|| format!("reading {}", path.display()))?;
            if point.x.len() != p.dim() {
                bail!(
                    "point has {} coordinates, instance has {}",
                    point.x.len(),
                    p.dim()
                );
            }
            let y = point
                .y
                .map(DenseVector::from_vec)
                .unwrap_or_else(|| DenseVector::zeros(p.num_constraints()));
            if y.len() != p.num_constraints() {
                bail!("point has {} multipliers, instance has {}", y.len(), p.num_constraints());
            }
            Iterate::new(DenseVector::from_vec(point.x), y)
        }
        None => {
            let report = solve(p, &Iterate::origin(p.dim(), p.num_constraints()), &SolverConfig::new(beta));
            println!(
                "no point given: solved first ({}, {} iterations)",
                report.status.as_str(),
                report.iterations
            );
            report.final_iterate
        }
    };

    let tol = 1e-6 * (1.0 + z.x.norm2());
    let verdict = classify_stationarity(p, &z, beta, tol);
    println!(
        "stationarity: {} (case {}, tol {:.3e})",
        if verdict.is_strong_stationary {
            "strong stationary"
        } else {
            "not strong stationary"
        },
        describe_case(verdict.case),
        tol
    );
    println!(
        "  gradient residual {:.3e}, feasibility {:.3e}, margin {:.3e}, beta_hat {:.3e}",
        verdict.gradient_residual, verdict.feasibility, verdict.margin, verdict.beta_hat
    );
    if inst.as_cs().is_some() {
        // quadratic objective and affine constraints: strong stationarity
        // upgrades to global, slack support even certifies the unconstrained
        // problem
        println!("grade: {}", describe_grade(convex_case_grade(&verdict)));
    }
    if passed < reports.len() {
        bail!("derivative check failed at {} points", reports.len() - passed);
    }
    Ok(())
}
