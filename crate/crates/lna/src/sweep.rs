//! Experiment sweeps: run the solver over a grid of problem shapes with
//! many seeded trials each, aggregate per grid point, and emit CSV records
//! plus a JSON summary.
//!
//! Trial t of every grid point draws its instance from seed_base + t, so a
//! grid point and trial index fully determine the problem. Trials are
//! independent and run in parallel when the `parallel` feature is enabled;
//! records are sorted by (grid point, trial) before aggregation and emission,
//! so parallel and sequential execution produce identical output.

use crate::cs::{self, MatrixKind, SensingSetup};
use crate::portfolio::{self, lambdas_from_xi, MvskInstance};
use crate::problem::Iterate;
use crate::solver::{solve, SolverConfig, SolverStatus};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("bad experiment plan: {0}")]
    BadPlan(String),
    #[error("instance synthesis failed: {0}")]
    Synthesis(String),
    #[error("nothing to emit: no records")]
    EmptyRecords,
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record file: {0}")]
    Parse(String),
}

/// Problem family a plan sweeps over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    CsGaussian,
    CsDct,
    Mvsk,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::CsGaussian => "cs_gaussian",
            Family::CsDct => "cs_dct",
            Family::Mvsk => "mvsk",
        }
    }

    pub fn parse(text: &str) -> Option<Family> {
        match text {
            "cs_gaussian" => Some(Family::CsGaussian),
            "cs_dct" => Some(Family::CsDct),
            "mvsk" => Some(Family::Mvsk),
            _ => None,
        }
    }
}

/// One grid coordinate. Sensing sweeps give `p` directly or as a sampling
/// ratio `r` (p = ceil(r n), with `p` winning when both are present);
/// portfolio sweeps give the risk-aversion level `xi` and optionally the
/// panel length `t_obs` (default 500).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_obs: Option<usize>,
}

impl GridPoint {
    pub fn cs(n: usize, p: usize, s: usize) -> Self {
        Self {
            n,
            p: Some(p),
            r: None,
            s,
            xi: None,
            t_obs: None,
        }
    }

    pub fn cs_ratio(n: usize, r: f64, s: usize) -> Self {
        Self {
            n,
            p: None,
            r: Some(r),
            s,
            xi: None,
            t_obs: None,
        }
    }

    pub fn mvsk(n: usize, s: usize, xi: f64) -> Self {
        Self {
            n,
            p: None,
            r: None,
            s,
            xi: Some(xi),
            t_obs: None,
        }
    }

    fn resolved_p(&self) -> Option<usize> {
        self.p.or_else(|| self.r.map(|r| (r * self.n as f64).ceil() as usize))
    }
}

/// How the selection stepsize is chosen per grid point.
///
/// The default sensing stepsize is 5p/n on unit-norm columns: the classic
/// 5/n rule is calibrated against raw Gaussian ensembles whose squared
/// column norms concentrate at p, so after normalization the equivalent
/// selection step picks up that factor. On top of this the default policy
/// retries non-converged sensing runs from the origin with the stepsize
/// halved, twice at most, because large steps explore supports well but can
/// cycle, while halved steps always settle. An explicit stepsize disables
/// the retry ladder and runs the solver exactly once.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPolicy {
    /// Family defaults: the 5p/n ladder for sensing, a single run at 1 for
    /// portfolios.
    HalvingBackoff,
    Explicit(f64),
}

impl BetaPolicy {
    /// Stepsizes to attempt in order; the first converged run wins.
    fn ladder(&self, family: Family, n: usize, p: Option<usize>) -> Vec<f64> {
        match self {
            BetaPolicy::Explicit(b) => vec![*b],
            BetaPolicy::HalvingBackoff => match family {
                Family::CsGaussian | Family::CsDct => {
                    let p = p.expect("sensing grid points carry p") as f64;
                    let b0 = 5.0 * p / n as f64;
                    vec![b0, b0 / 2.0, b0 / 4.0]
                }
                Family::Mvsk => vec![1.0],
            },
        }
    }
}

/// A full experiment description, loadable from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub family: Family,
    pub grid: Vec<GridPoint>,
    pub trials: usize,
    pub seed_base: u64,
    pub beta_policy: BetaPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        let plan: ExperimentPlan =
            serde_json::from_str(text).map_err(|e| SweepError::BadPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.grid.is_empty() {
            return Err(SweepError::BadPlan("empty grid".into()));
        }
        if self.trials == 0 {
            return Err(SweepError::BadPlan("need at least one trial".into()));
        }
        for (i, g) in self.grid.iter().enumerate() {
            if g.s == 0 || g.s >= g.n {
                return Err(SweepError::BadPlan(format!(
                    "grid[{i}]: need 0 < s < n, got s={}, n={}",
                    g.s, g.n
                )));
            }
            match self.family {
                Family::CsGaussian | Family::CsDct => {
                    let p = g.resolved_p().ok_or_else(|| {
                        SweepError::BadPlan(format!("grid[{i}]: sensing sweep needs p or r"))
                    })?;
                    if p >= g.n || p == 0 {
                        return Err(SweepError::BadPlan(format!(
                            "grid[{i}]: need 0 < p < n, got p={p}, n={}",
                            g.n
                        )));
                    }
                }
                Family::Mvsk => {
                    if g.xi.is_none() {
                        return Err(SweepError::BadPlan(format!(
                            "grid[{i}]: portfolio sweep needs xi"
                        )));
                    }
                    if g.n > portfolio::MAX_ASSETS {
                        return Err(SweepError::BadPlan(format!(
                            "grid[{i}]: portfolio universe capped at {} assets",
                            portfolio::MAX_ASSETS
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One solver run inside a sweep, flattened for CSV emission.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub family: Family,
    pub n: usize,
    /// Resolved total sensing rows; sensing families only.
    pub p: Option<usize>,
    pub s: usize,
    pub xi: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub status: &'static str,
    pub iterations: usize,
    pub eta_final: f64,
    /// ||x - x_true||; sensing families only.
    pub abs_error: Option<f64>,
    pub success: Option<bool>,
    /// Effective sparsity of the final point; portfolio family only.
    pub sparsity_hat: Option<usize>,
    pub f_value: Option<f64>,
    pub wall_time_s: f64,
}

/// Per-grid-point aggregates. Sensing error means are reported both over
/// all trials and over successful trials only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSummary {
    pub family: Family,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub s: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    pub trials: usize,
    pub converged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_abs_error_all: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_abs_error_success: Option<f64>,
    pub mean_iterations: f64,
    pub mean_wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_f_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_sparsity_hat: Option<f64>,
}

/// Records plus the per-grid-point summary keyed by a canonical label.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub records: Vec<TrialRecord>,
    pub summary: BTreeMap<String, GridSummary>,
}

/// Whether trials run on the rayon pool or one after another. Without the
/// `parallel` feature both modes run sequentially.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    Parallel,
}

/// Runs a plan with the default execution mode (parallel when available).
pub fn run_plan(plan: &ExperimentPlan) -> Result<SweepOutcome, SweepError> {
    run_plan_with(plan, ExecutionMode::Parallel)
}

/// Runs a plan with an explicit execution mode.
pub fn run_plan_with(
    plan: &ExperimentPlan,
    mode: ExecutionMode,
) -> Result<SweepOutcome, SweepError> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.grid.len())
        .flat_map(|g| (0..plan.trials).map(move |t| (g, t)))
        .collect();

    let mut tagged = execute(plan, &jobs, mode)?;
    tagged.sort_by_key(|(job_idx, _)| *job_idx);
    let records: Vec<TrialRecord> = tagged.into_iter().map(|(_, r)| r).collect();
    let summary = summarize(plan, &records);
    Ok(SweepOutcome { records, summary })
}

// Returns (job index, record) pairs so ordering never depends on how the
// execution backend schedules work.
fn execute(
    plan: &ExperimentPlan,
    jobs: &[(usize, usize)],
    mode: ExecutionMode,
) -> Result<Vec<(usize, TrialRecord)>, SweepError> {
    match mode {
        ExecutionMode::Sequential => jobs
            .iter()
            .enumerate()
            .map(|(i, &(g, t))| run_trial(plan, g, t).map(|r| (i, r)))
            .collect(),
        ExecutionMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                jobs.par_iter()
                    .enumerate()
                    .map(|(i, &(g, t))| run_trial(plan, g, t).map(|r| (i, r)))
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                jobs.iter()
                    .enumerate()
                    .map(|(i, &(g, t))| run_trial(plan, g, t).map(|r| (i, r)))
                    .collect()
            }
        }
    }
}

fn run_trial(plan: &ExperimentPlan, grid_idx: usize, trial: usize) -> Result<TrialRecord, SweepError> {
    let g = plan.grid[grid_idx];
    let seed = plan.seed_base + trial as u64;

    match plan.family {
        Family::CsGaussian | Family::CsDct => {
            let kind = if plan.family == Family::CsGaussian {
                MatrixKind::Gaussian
            } else {
                MatrixKind::PartialDct
            };
            let p = g.resolved_p().expect("validated");
            let setup = SensingSetup::new(g.n, p, g.s, kind, seed);
            let inst = cs::generate(&setup).map_err(|e| SweepError::Synthesis(e.to_string()))?;
            let ladder = plan.beta_policy.ladder(plan.family, g.n, Some(p));
            let mut wall_time_s = 0.0;
            let mut report = None;
            for &beta in &ladder {
                let attempt = solve(&inst, &Iterate::origin(g.n, setup.m), &SolverConfig::new(beta));
                wall_time_s += attempt.wall_time_s;
                let done = attempt.status == SolverStatus::Converged;
                report = Some(attempt);
                if done {
                    break;
                }
            }
            let report = report.expect("ladder is nonempty");
            let abs_error = inst
                .recovery_error(&report.final_iterate.x)
                .expect("generated instances carry ground truth");
            let success = inst
                .recovery_success(&report.final_iterate.x)
                .expect("generated instances carry ground truth")
                && report.status == SolverStatus::Converged;
            Ok(TrialRecord {
                family: plan.family,
                n: g.n,
                p: Some(p),
                s: g.s,
                xi: None,
                trial,
                seed,
                status: report.status.as_str(),
                iterations: report.iterations,
                eta_final: *report.eta_trace.last().expect("nonempty trace"),
                abs_error: Some(abs_error),
                success: Some(success),
                sparsity_hat: None,
                f_value: None,
                wall_time_s,
            })
        }
        Family::Mvsk => {
            let xi = g.xi.expect("validated");
            let t_obs = g.t_obs.unwrap_or(500);
            let panel = portfolio::synthetic_return_panel(g.n, t_obs, seed);
            let inst = MvskInstance::from_panel(&panel, lambdas_from_xi(xi), g.s)
                .map_err(|e| SweepError::Synthesis(e.to_string()))?;
            let beta = plan.beta_policy.ladder(plan.family, g.n, None)[0];
            let config = SolverConfig::new(beta);
            let report = solve(&inst, &Iterate::origin(g.n, 1), &config);
            let f_value = crate::problem::ProblemSpec::objective(&inst, &report.final_iterate.x);
            let sparsity_hat = portfolio::sparsity_hat(&report.final_iterate.x).ok();
            Ok(TrialRecord {
                family: plan.family,
                n: g.n,
                p: None,
                s: g.s,
                xi: Some(xi),
                trial,
                seed,
                status: report.status.as_str(),
                iterations: report.iterations,
                eta_final: *report.eta_trace.last().expect("nonempty trace"),
                abs_error: None,
                success: None,
                sparsity_hat,
                f_value: Some(f_value),
                wall_time_s: report.wall_time_s,
            })
        }
    }
}

fn summary_key(r: &TrialRecord) -> String {
    let mut key = format!("{}/n={}", r.family.as_str(), r.n);
    if let Some(p) = r.p {
        key.push_str(&format!("/p={p}"));
    }
    key.push_str(&format!("/s={}", r.s));
    if let Some(xi) = r.xi {
        key.push_str(&format!("/xi={xi}"));
    }
    key
}

fn summarize(plan: &ExperimentPlan, records: &[TrialRecord]) -> BTreeMap<String, GridSummary> {
    let mut groups: BTreeMap<String, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(summary_key(r)).or_default().push(r);
    }
    let is_cs = matches!(plan.family, Family::CsGaussian | Family::CsDct);
    groups
        .into_iter()
        .map(|(key, rs)| {
            let trials = rs.len();
            let converged = rs.iter().filter(|r| r.status == "converged").count();
            let mean = |vals: &[f64]| -> Option<f64> {
                if vals.is_empty() {
                    None
                } else {
                    Some(vals.iter().sum::<f64>() / vals.len() as f64)
                }
            };
            let successes: Vec<&&TrialRecord> =
                rs.iter().filter(|r| r.success == Some(true)).collect();
            let summary = GridSummary {
                family: rs[0].family,
                n: rs[0].n,
                p: rs[0].p,
                s: rs[0].s,
                xi: rs[0].xi,
                trials,
                converged,
                success_rate: is_cs.then(|| successes.len() as f64 / trials as f64),
                mean_abs_error_all: mean(
                    &rs.iter().filter_map(|r| r.abs_error).collect::<Vec<_>>(),
                ),
                mean_abs_error_success: mean(
                    &successes
                        .iter()
                        .filter_map(|r| r.abs_error)
                        .collect::<Vec<_>>(),
                ),
                mean_iterations: rs.iter().map(|r| r.iterations as f64).sum::<f64>()
                    / trials as f64,
                mean_wall_time_s: rs.iter().map(|r| r.wall_time_s).sum::<f64>() / trials as f64,
                mean_f_value: mean(&rs.iter().filter_map(|r| r.f_value).collect::<Vec<_>>()),
                mean_sparsity_hat: mean(
                    &rs.iter()
                        .filter_map(|r| r.sparsity_hat.map(|v| v as f64))
                        .collect::<Vec<_>>(),
                ),
            };
            (key, summary)
        })
        .collect()
}

/// Fixed CSV schema, one column per record field in declared order.
pub const CSV_HEADER: &str =
    "family,n,p,s,xi,trial,seed,status,iterations,eta_final,abs_error,success,sparsity_hat,f_value,wall_time_s";

fn fmt_f64(v: f64) -> String {
    // 17 significant digits: enough for exact f64 round trips
    format!("{v:.16e}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes records as CSV (UTF-8, comma separators, LF line endings).
pub fn emit_csv<W: Write>(records: &[TrialRecord], mut out: W) -> Result<(), SweepError> {
    if records.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    out.write_all(CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for r in records {
        let line = [
            r.family.as_str().to_string(),
            r.n.to_string(),
            r.p.map(|v| v.to_string()).unwrap_or_default(),
            r.s.to_string(),
            fmt_opt_f64(r.xi),
            r.trial.to_string(),
            r.seed.to_string(),
            r.status.to_string(),
            r.iterations.to_string(),
            fmt_f64(r.eta_final),
            fmt_opt_f64(r.abs_error),
            r.success.map(|v| v.to_string()).unwrap_or_default(),
            r.sparsity_hat.map(|v| v.to_string()).unwrap_or_default(),
            fmt_opt_f64(r.f_value),
            fmt_f64(r.wall_time_s),
        ]
        .join(",");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn emit_csv_path(records: &[TrialRecord], path: &Path) -> Result<(), SweepError> {
    let file = std::fs::File::create(path)?;
    emit_csv(records, std::io::BufWriter::new(file))
}

/// Parses a record CSV produced by [`emit_csv`].
pub fn read_csv(text: &str) -> Result<Vec<TrialRecord>, SweepError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SweepError::Parse("empty file".into()))?;
    if header != CSV_HEADER {
        return Err(SweepError::Parse(format!("unexpected header: {header}")));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(SweepError::Parse(format!(
                "line {}: {} fields",
                lineno + 2,
                fields.len()
            )));
        }
        let err = |what: &str| SweepError::Parse(format!("line {}: bad {what}", lineno + 2));
        let parse_f64 = |s: &str, what: &str| -> Result<f64, SweepError> {
            s.parse::<f64>().map_err(|_| err(what))
        };
        let parse_opt_f64 = |s: &str, what: &str| -> Result<Option<f64>, SweepError> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse_f64(s, what).map(Some)
            }
        };
        let family = Family::parse(fields[0]).ok_or_else(|| err("family"))?;
        let status = match fields[7] {
            "converged" => "converged",
            "max_iterations" => "max_iterations",
            "singular_system" => "singular_system",
            _ => return Err(err("status")),
        };
        out.push(TrialRecord {
            family,
            n: fields[1].parse().map_err(|_| err("n"))?,
            p: if fields[2].is_empty() {
                None
            } else {
                Some(fields[2].parse().map_err(|_| err("p"))?)
            },
            s: fields[3].parse().map_err(|_| err("s"))?,
            xi: parse_opt_f64(fields[4], "xi")?,
            trial: fields[5].parse().map_err(|_| err("trial"))?,
            seed: fields[6].parse().map_err(|_| err("seed"))?,
            status,
            iterations: fields[8].parse().map_err(|_| err("iterations"))?,
            eta_final: parse_f64(fields[9], "eta_final")?,
            abs_error: parse_opt_f64(fields[10], "abs_error")?,
            success: match fields[11] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                _ => return Err(err("success")),
            },
            sparsity_hat: if fields[12].is_empty() {
                None
            } else {
                Some(fields[12].parse().map_err(|_| err("sparsity_hat"))?)
            },
            f_value: parse_opt_f64(fields[13], "f_value")?,
            wall_time_s: parse_f64(fields[14], "wall_time_s")?,
        });
    }
    Ok(out)
}

/// Writes the summary map as pretty JSON.
pub fn emit_json<W: Write>(
    summary: &BTreeMap<String, GridSummary>,
    mut out: W,
) -> Result<(), SweepError> {
    if summary.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    let text = serde_json::to_string_pretty(summary)
        .expect("summary serialization cannot fail");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn emit_json_path(
    summary: &BTreeMap<String, GridSummary>,
    path: &Path,
) -> Result<(), SweepError> {
    let file = std::fs::File::create(path)?;
    emit_json(summary, std::io::BufWriter::new(file))
}
