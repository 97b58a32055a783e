//! Lagrangian machinery: the restricted stationarity equation, the reduced
//! Newton (saddle-point) system, the progress measure that drives stopping,
//! and the strong-stationarity classifier.
//!
//! Notation used throughout: L(x, y) = f(x) - <y, h(x)>, q = grad_x L,
//! and T is the working index set with complement Tc. For a selected T the
//! residual stacks [q_T ; x_Tc ; -h(x)], which vanishes exactly at a strong
//! stationary point whose support is covered by T.

use crate::linalg::{DenseMatrix, DenseVector};
use crate::problem::{Iterate, ProblemSpec};
use crate::sparse::{self, IndexSet};

/// grad_x L(x, y) = grad f(x) - jac_h(x)^T y.
pub fn grad_lagrangian(p: &dyn ProblemSpec, z: &Iterate) -> DenseVector {
    let g = p.grad_objective(&z.x);
    if p.num_constraints() == 0 {
        return g;
    }
    let jt_y = p.jac_constraints(&z.x).matvec_transpose(&z.y);
    g.sub(&jt_y)
}

/// hess_xx L(x, y) = hess f(x) - sum_i y_i hess h_i(x).
///
/// Constraints with zero multiplier are skipped, so affine families never
/// touch their (identically zero) constraint Hessians here.
pub fn hess_lagrangian(p: &dyn ProblemSpec, z: &Iterate) -> DenseMatrix {
    let mut h = p.hess_objective(&z.x);
    let n = p.dim();
    for i in 0..p.num_constraints() {
        let yi = z.y[i];
        if yi == 0.0 {
            continue;
        }
        let hc = p.hess_constraint(i, &z.x);
        for r in 0..n {
            for c in 0..n {
                let v = h.get(r, c) - yi * hc.get(r, c);
                h.set(r, c, v);
            }
        }
    }
    h
}

/// Stationarity residual restricted to T: stacks [q_T ; x_Tc ; -h(x)],
/// length n + m. Complement entries appear in ascending index order.
pub fn eval_residual(p: &dyn ProblemSpec, z: &Iterate, t: &IndexSet) -> DenseVector {
    let q = grad_lagrangian(p, z);
    let h = p.constraints(&z.x);
    stack_residual(&q, &z.x, &h, t)
}

fn stack_residual(q: &DenseVector, x: &DenseVector, h: &DenseVector, t: &IndexSet) -> DenseVector {
    let n = x.len();
    let m = h.len();
    let mut out = DenseVector::zeros(n + m);
    let mut k = 0;
    for &i in t.indices() {
        out[k] = q[i];
        k += 1;
    }
    for i in t.complement() {
        out[k] = x[i];
        k += 1;
    }
    for i in 0..m {
        out[k] = -h[i];
        k += 1;
    }
    out
}

/// Reduced Newton system on the working set T.
///
/// `matrix` is the (s+m) x (s+m) saddle-point matrix
/// [[ (hess_xx L)_TT , -(jac_h)_T^T ], [ -(jac_h)_T , 0 ]] and `rhs` is
/// chosen so the solution is the next iterate (x_T, y) in absolute form,
/// with x off T assigned to zero.
#[derive(Clone, Debug)]
pub struct NewtonSystem {
    pub matrix: DenseMatrix,
    pub rhs: DenseVector,
    pub t: IndexSet,
}

/// Assembles the reduced system at z for working set T.
///
/// The top right-hand block contracts the T-rows of the full Lagrangian
/// Hessian against the full current x (not just x_T): the two agree once the
/// off-T entries are zero, but only the full contraction makes a single step
/// from a dense warm start land on the restricted stationary point.
pub fn assemble_newton_system(p: &dyn ProblemSpec, z: &Iterate, t: &IndexSet) -> NewtonSystem {
    let s = t.len();
    let m = p.num_constraints();
    let hess = hess_lagrangian(p, z);
    let grad_f = p.grad_objective(&z.x);
    let h = p.constraints(&z.x);
    let jac = p.jac_constraints(&z.x);

    let mut matrix = DenseMatrix::zeros(s + m, s + m);
    for (ii, &i) in t.indices().iter().enumerate() {
        for (jj, &j) in t.indices().iter().enumerate() {
            matrix.set(ii, jj, hess.get(i, j));
        }
        for c in 0..m {
            let v = -jac.get(c, i);
            matrix.set(ii, s + c, v);
            matrix.set(s + c, ii, v);
        }
    }

    let mut rhs = DenseVector::zeros(s + m);
    for (ii, &i) in t.indices().iter().enumerate() {
        let mut row_dot_x = 0.0;
        for j in 0..p.dim() {
            row_dot_x += hess.get(i, j) * z.x[j];
        }
        rhs[ii] = -grad_f[i] + row_dot_x;
    }
    let jx = jac.matvec(&z.x);
    for c in 0..m {
        rhs[s + c] = h[c] - jx[c];
    }

    NewtonSystem {
        matrix,
        rhs,
        t: t.clone(),
    }
}

/// Progress measure: ||residual||_2 plus a hinge penalty for complement
/// gradient entries that would force a different index-set selection,
/// max_{i in Tc} max(|q_i| - |x|_(s) / beta, 0).
pub fn eta(p: &dyn ProblemSpec, z: &Iterate, t: &IndexSet, beta: f64) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    let q = grad_lagrangian(p, z);
    let h = p.constraints(&z.x);
    let f = stack_residual(&q, &z.x, &h, t);
    let xs = sparse::sth_largest_abs(&z.x, t.len()).expect("s within bounds");
    let cut = xs / beta;
    let mut hinge = 0.0f64;
    for i in t.complement() {
        hinge = hinge.max(q[i].abs() - cut);
    }
    f.norm2() + hinge.max(0.0)
}

/// Which branch of the stationarity conditions applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportCase {
    /// ||x||_0 = s: multipliers must kill q on the support and the
    /// complement gradient must stay under |x|_(s) / beta.
    FullSupport,
    /// ||x||_0 < s: the full gradient of the Lagrangian must vanish.
    SlackSupport,
}

/// Outcome of the strong-stationarity test at a candidate (x, y).
#[derive(Clone, Debug)]
pub struct StationarityVerdict {
    pub is_strong_stationary: bool,
    pub case: SupportCase,
    /// ||q_Gamma||_2 in the full-support case, ||q||_2 otherwise.
    pub gradient_residual: f64,
    /// ||h(x)||_2.
    pub feasibility: f64,
    /// |x|_(s) - beta * ||q_Gammac||_inf; +inf when the complement
    /// gradient vanishes or the support is slack.
    pub margin: f64,
    /// Largest beta for which the full-support condition would hold,
    /// |x|_(s) / ||q_Gammac||_inf; +inf when q vanishes off the support.
    pub beta_hat: f64,
}

/// Tests the strong beta-stationarity conditions at z.
///
/// Support membership uses the scale-aware threshold `tol * (1 + ||x||_inf)`.
/// The strict margin inequality is tested with additive slack `tol`, since a
/// strict comparison is not meaningful at floating-point boundaries. Points
/// carrying more than s nonzeros are never stationary here.
pub fn classify_stationarity(
    p: &dyn ProblemSpec,
    z: &Iterate,
    beta: f64,
    tol: f64,
) -> StationarityVerdict {
    assert!(beta > 0.0, "beta must be positive");
    let s = p.sparsity();
    let q = grad_lagrangian(p, z);
    let feasibility = p.constraints(&z.x).norm2();
    let support_tol = tol * (1.0 + z.x.norm_inf());
    let gamma = sparse::support(&z.x, support_tol);
    let nnz = gamma.len();

    if nnz < s {
        let gradient_residual = q.norm2();
        let is_strong = feasibility <= tol && gradient_residual <= tol;
        return StationarityVerdict {
            is_strong_stationary: is_strong,
            case: SupportCase::SlackSupport,
            gradient_residual,
            feasibility,
            margin: f64::INFINITY,
            beta_hat: f64::INFINITY,
        };
    }

    // full support (or oversized, which always fails): split q on the top-s
    // magnitude support and its complement
    let gamma_s: Vec<usize> = if nnz == s {
        gamma
    } else {
        let proj = sparse::project_sparse(&z.x, s).expect("s within bounds");
        sparse::support(&proj, 0.0)
    };
    let gset = IndexSet::new(gamma_s, p.dim());
    let gradient_residual = q.gather(gset.indices()).norm2();
    let q_off = gset
        .complement()
        .iter()
        .map(|&i| q[i].abs())
        .fold(0.0f64, f64::max);
    let xs = sparse::sth_largest_abs(&z.x, s).expect("s within bounds");
    let margin = if q_off == 0.0 {
        f64::INFINITY
    } else {
        xs - beta * q_off
    };
    let beta_hat = if q_off == 0.0 { f64::INFINITY } else { xs / q_off };
    let is_strong = nnz == s
        && feasibility <= tol
        && gradient_residual <= tol
        && beta * q_off < xs + tol;

    StationarityVerdict {
        is_strong_stationary: is_strong,
        case: SupportCase::FullSupport,
        gradient_residual,
        feasibility,
        margin,
        beta_hat,
    }
}

/// What a strong stationary point means when the objective is convex and the
/// constraints affine: slack support certifies a global minimizer, full
/// support a local one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinimizerGrade {
    GlobalMinimizer,
    LocalMinimizer,
    NotStationary,
}

/// Grades a verdict under convexity of f and affinity of h. Meaningless for
/// nonconvex objectives; callers restrict it to families where convexity is
/// structural.
pub fn convex_case_grade(verdict: &StationarityVerdict) -> MinimizerGrade {
    if !verdict.is_strong_stationary {
        return MinimizerGrade::NotStationary;
    }
    match verdict.case {
        SupportCase::SlackSupport => MinimizerGrade::GlobalMinimizer,
        SupportCase::FullSupport => MinimizerGrade::LocalMinimizer,
    }
}
