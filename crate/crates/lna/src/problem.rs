//! Problem abstraction: smooth objective, equality constraints, sparsity
//! budget, and a finite-difference cross-check for hand-coded derivatives.

use crate::linalg::{DenseMatrix, DenseVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A sparsity-constrained equality-constrained program:
/// minimize f(x) subject to h(x) = 0 and at most `sparsity()` nonzeros in x.
///
/// Implementations provide analytic first and second derivatives. Constraint
/// Hessians are exposed per constraint; the Lagrangian assembly owns the
/// contraction with the multipliers, and affine constraints simply return an
/// all-zero matrix.
pub trait ProblemSpec: Send + Sync {
    /// Number of decision variables n.
    fn dim(&self) -> usize;
    /// Number of equality constraints m (may be 0).
    fn num_constraints(&self) -> usize;
    /// Sparsity budget s with 0 < s < n.
    fn sparsity(&self) -> usize;

    fn objective(&self, x: &DenseVector) -> f64;
    fn grad_objective(&self, x: &DenseVector) -> DenseVector;
    fn hess_objective(&self, x: &DenseVector) -> DenseMatrix;

    /// Constraint values h(x), length m.
    fn constraints(&self, x: &DenseVector) -> DenseVector;
    /// Constraint Jacobian, m x n.
    fn jac_constraints(&self, x: &DenseVector) -> DenseMatrix;
    /// Hessian of the i-th constraint, n x n.
    fn hess_constraint(&self, i: usize, x: &DenseVector) -> DenseMatrix;
}

/// Primal-dual pair (x, y).
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub x: DenseVector,
    pub y: DenseVector,
}

impl Iterate {
    pub fn new(x: DenseVector, y: DenseVector) -> Self {
        Self { x, y }
    }

    /// Origin start: x = 0, y = 0.
    pub fn origin(n: usize, m: usize) -> Self {
        Self {
            x: DenseVector::zeros(n),
            y: DenseVector::zeros(m),
        }
    }

    /// Euclidean norm of the stacked (x, y) vector.
    pub fn norm2(&self) -> f64 {
        (self.x.norm2().powi(2) + self.y.norm2().powi(2)).sqrt()
    }

    pub fn distance(&self, other: &Iterate) -> f64 {
        (self.x.sub(&other.x).norm2().powi(2) + self.y.sub(&other.y).norm2().powi(2)).sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.x.all_finite() && self.y.all_finite()
    }
}

/// Relative agreement, per block, between analytic derivatives and central
/// finite differences at one point.
#[derive(Clone, Debug)]
pub struct DerivativeReport {
    pub grad_objective_error: f64,
    pub hess_objective_error: f64,
    pub jac_constraints_error: f64,
    pub hess_constraints_error: f64,
    pub threshold: f64,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.grad_objective_error <= self.threshold
            && self.hess_objective_error <= self.threshold
            && self.jac_constraints_error <= self.threshold
            && self.hess_constraints_error <= self.threshold
    }

    pub fn max_error(&self) -> f64 {
        self.grad_objective_error
            .max(self.hess_objective_error)
            .max(self.jac_constraints_error)
            .max(self.hess_constraints_error)
    }
}

/// Pass threshold for derivative checks: central differences on smooth
/// polynomial-like problems agree far below this.
pub const DERIVATIVE_CHECK_TOL: f64 = 1e-4;

fn fd_step(xi: f64) -> f64 {
    1e-6 * (1.0 + xi.abs())
}

fn block_error(analytic_flat: &[f64], numeric_flat: &[f64]) -> f64 {
    let scale: f64 = 1.0 + analytic_flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: f64 = analytic_flat
        .iter()
        .zip(numeric_flat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / scale
}

/// Checks every analytic derivative block against central differences at x.
///
/// grad f is checked against f, hess f against grad f, the constraint
/// Jacobian against h, and each constraint Hessian against its Jacobian row.
/// Reported errors are Frobenius distances scaled by 1 + the analytic norm.
pub fn validate_derivatives(p: &dyn ProblemSpec, x: &DenseVector) -> DerivativeReport {
    let n = p.dim();
    let m = p.num_constraints();
    assert_eq!(x.len(), n, "point dimension mismatch");

    let mut xp = x.clone();

    // grad f vs f
    let grad = p.grad_objective(x);
    let mut grad_fd = vec![0.0; n];
    for i in 0..n {
        let h = fd_step(x[i]);
        xp[i] = x[i] + h;
        let fp = p.objective(&xp);
        xp[i] = x[i] - h;
        let fm = p.objective(&xp);
        xp[i] = x[i];
        grad_fd[i] = (fp - fm) / (2.0 * h);
    }
    let grad_err = block_error(grad.as_slice(), &grad_fd);

    // hess f vs grad f
    let hess = p.hess_objective(x);
    let mut hess_fd = vec![0.0; n * n];
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let gp = p.grad_objective(&xp);
        xp[j] = x[j] - h;
        let gm = p.grad_objective(&xp);
        xp[j] = x[j];
        for i in 0..n {
            hess_fd[i * n + j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    let hess_err = block_error(hess.as_flat(), &hess_fd);

    // jac h vs h, and hess h_i vs row i of jac h
    let (jac_err, hess_h_err) = if m == 0 {
        (0.0, 0.0)
    } else {
        let jac = p.jac_constraints(x);
        let mut jac_fd = vec![0.0; m * n];
        for j in 0..n {
            let h = fd_step(x[j]);
            xp[j] = x[j] + h;
            let hp = p.constraints(&xp);
            xp[j] = x[j] - h;
            let hm = p.constraints(&xp);
            xp[j] = x[j];
            for i in 0..m {
                jac_fd[i * n + j] = (hp[i] - hm[i]) / (2.0 * h);
            }
        }
        let jac_err = block_error(jac.as_flat(), &jac_fd);

        let mut worst = 0.0f64;
        for ci in 0..m {
            let hc = p.hess_constraint(ci, x);
            let mut hc_fd = vec![0.0; n * n];
            for j in 0..n {
                let h = fd_step(x[j]);
                xp[j] = x[j] + h;
                let jp = p.jac_constraints(&xp);
                xp[j] = x[j] - h;
                let jm = p.jac_constraints(&xp);
                xp[j] = x[j];
                for i in 0..n {
                    hc_fd[i * n + j] = (jp.get(ci, i) - jm.get(ci, i)) / (2.0 * h);
                }
            }
            worst = worst.max(block_error(hc.as_flat(), &hc_fd));
        }
        (jac_err, worst)
    };

    DerivativeReport {
        grad_objective_error: grad_err,
        hess_objective_error: hess_err,
        jac_constraints_error: jac_err,
        hess_constraints_error: hess_h_err,
        threshold: DERIVATIVE_CHECK_TOL,
    }
}

/// Runs [`validate_derivatives`] at `count` seeded standard-normal points and
/// returns the reports. Convenience for randomized test sweeps.
pub fn validate_derivatives_at_random_points(
    p: &dyn ProblemSpec,
    seed: u64,
    count: usize,
) -> Vec<DerivativeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.dim();
    (0..count)
        .map(|_| {
            let x = DenseVector::from_vec(
                (0..n)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect(),
            );
            validate_derivatives(p, &x)
        })
        .collect()
}
