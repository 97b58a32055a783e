//! The Lagrange-Newton iteration: select a working index set from the
//! hard-thresholding surrogate, test the progress measure, and take one
//! Newton step on the restricted stationarity equation.
//!
//! Each step solves a single (s+m) x (s+m) saddle-point system directly and
//! assigns exact zeros off the working set, so every iterate after the first
//! is s-sparse regardless of the starting point.

use crate::lagrangian::{
    assemble_newton_system, classify_stationarity, eta, grad_lagrangian, StationarityVerdict,
};
use crate::linalg::LinalgError;
use crate::problem::{Iterate, ProblemSpec};
use crate::sparse::{select_index_set, IndexSet};
use std::time::Instant;
use thiserror::Error;

/// Iterates whose stacked norm exceeds this are treated as divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SolverError {
    /// The reduced Newton matrix broke down in LU at the given iteration.
    #[error("singular Newton system at iteration {iteration}: {source}")]
    SingularSystem {
        iteration: usize,
        source: LinalgError,
    },
    /// Fewer than 3 iterates recorded; convergence ratios are undefined.
    #[error("insufficient history: need at least 3 iterates, have {have}")]
    InsufficientHistory { have: usize },
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Selection stepsize beta > 0. Problem families suggest their own
    /// defaults (5/n for the sensing family, 1 for the portfolio family).
    pub beta: f64,
    /// Stop once the progress measure falls to or below this.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Threshold for "already in the support" in the selection tie-break.
    pub support_tol: f64,
}

impl SolverConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            epsilon: 1e-6,
            max_iter: 1000,
            support_tol: 0.0,
        }
    }
}

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    /// Progress measure reached epsilon.
    Converged,
    /// Iteration budget exhausted or the divergence guard tripped.
    MaxIterations,
    /// The reduced Newton system was singular at the recorded iteration.
    SingularSystem { iteration: usize },
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::SingularSystem { .. } => "singular_system",
        }
    }
}

/// Full account of one solver run.
///
/// `iterations` counts completed Newton steps; `eta_trace` holds the
/// progress measure at every visited iterate (so its length is
/// iterations + 1), `support_trace` the working set chosen there, and
/// `iterate_trace` the iterates themselves for post-hoc convergence
/// diagnostics.
#[derive(Clone, Debug)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub final_iterate: Iterate,
    pub final_support: IndexSet,
    pub iterations: usize,
    pub eta_trace: Vec<f64>,
    pub support_trace: Vec<IndexSet>,
    pub step_norm_trace: Vec<f64>,
    pub iterate_trace: Vec<Iterate>,
    pub wall_time_s: f64,
    pub verdict: StationarityVerdict,
}

/// One Newton step on the working set T: solve the reduced saddle-point
/// system and scatter, assigning exact zeros off T.
pub fn newton_step(
    p: &dyn ProblemSpec,
    z: &Iterate,
    t: &IndexSet,
    iteration: usize,
) -> Result<Iterate, SolverError> {
    let sys = assemble_newton_system(p, z, t);
    let sol = sys
        .matrix
        .lu_solve(&sys.rhs)
        .map_err(|source| SolverError::SingularSystem { iteration, source })?;
    let n = p.dim();
    let m = p.num_constraints();
    let s = t.len();
    let mut x = crate::linalg::DenseVector::zeros(n);
    for (ii, &i) in t.indices().iter().enumerate() {
        x[i] = sol[ii];
    }
    let mut y = crate::linalg::DenseVector::zeros(m);
    for c in 0..m {
        y[c] = sol[s + c];
    }
    let next = Iterate::new(x, y);
    if !next.all_finite() {
        return Err(SolverError::SingularSystem {
            iteration,
            source: LinalgError::SingularMatrix {
                step: 0,
                pivot: 0.0,
                threshold: 0.0,
            },
        });
    }
    Ok(next)
}

/// Runs the Lagrange-Newton iteration from z0.
///
/// The starting point need not be sparse; the first step lands on an
/// s-sparse iterate. A singular reduced system ends the run with that
/// status rather than panicking, so sweeps can record it as a failure.
pub fn solve(p: &dyn ProblemSpec, z0: &Iterate, config: &SolverConfig) -> SolverReport {
    assert!(config.beta > 0.0, "beta must be positive");
    assert!(p.sparsity() >= 1 && p.sparsity() < p.dim(), "need 0 < s < n");
    let started = Instant::now();
    let s = p.sparsity();

    let mut z = z0.clone();
    let mut eta_trace = Vec::new();
    let mut support_trace: Vec<IndexSet> = Vec::new();
    let mut step_norm_trace = Vec::new();
    let mut iterate_trace = vec![z.clone()];
    let status;

    let mut k = 0usize;
    loop {
        let grad_l = grad_lagrangian(p, &z);
        let t = select_index_set(&z.x, &grad_l, config.beta, s, config.support_tol)
            .expect("sparsity level validated above");
        let eta_k = eta(p, &z, &t, config.beta);
        eta_trace.push(eta_k);
        support_trace.push(t.clone());

        if eta_k <= config.epsilon {
            status = SolverStatus::Converged;
            break;
        }
        if k == config.max_iter || z.norm2() > DIVERGENCE_GUARD {
            status = SolverStatus::MaxIterations;
            break;
        }

        match newton_step(p, &z, &t, k) {
            Ok(next) => {
                step_norm_trace.push(next.distance(&z));
                z = next;
                iterate_trace.push(z.clone());
                k += 1;
            }
            Err(SolverError::SingularSystem { iteration, .. }) => {
                status = SolverStatus::SingularSystem { iteration };
                break;
            }
            Err(other) => unreachable!("newton_step only returns SingularSystem: {other}"),
        }
    }

    let verdict = classify_stationarity(
        p,
        &z,
        config.beta,
        1e-6 * (1.0 + z.x.norm2()),
    );
    let final_support = support_trace.last().expect("at least one selection").clone();
    SolverReport {
        status,
        final_iterate: z,
        final_support,
        iterations: k,
        eta_trace,
        support_trace,
        step_norm_trace,
        iterate_trace,
        wall_time_s: started.elapsed().as_secs_f64(),
        verdict,
    }
}

/// Quadratic-convergence diagnostics against a reference point z_ref
/// (typically the final iterate): r_k = d_{k+1} / d_k^2 with
/// d_k = ||z_k - z_ref||, reported for every k with d_k > 1e-8.
///
/// Bounded ratios as d_k shrinks are the signature of local quadratic
/// convergence; linearly converging runs blow these up instead.
pub fn convergence_ratio_trace(
    report: &SolverReport,
    z_ref: &Iterate,
) -> Result<Vec<f64>, SolverError> {
    let iterates = &report.iterate_trace;
    if iterates.len() < 3 {
        return Err(SolverError::InsufficientHistory {
            have: iterates.len(),
        });
    }
    let mut out = Vec::new();
    for k in 0..iterates.len() - 1 {
        let dk = iterates[k].distance(z_ref);
        if dk <= 1e-8 {
            continue;
        }
        let dk1 = iterates[k + 1].distance(z_ref);
        out.push(dk1 / (dk * dk));
    }
    Ok(out)
}
