//! Sparse recovery family: least-squares objective with a slice of the
//! sensing rows held out as hard equality constraints.
//!
//!   minimize 1/2 ||A x - b||^2  subject to  C x = d,  ||x||_0 <= s
//!
//! Instances are synthesized from a planted s-sparse signal: draw a p x n
//! sensing matrix (Gaussian or partial-DCT rows), normalize its columns,
//! measure the signal, then split off m rows as the constraint block.

use crate::linalg::{DenseMatrix, DenseVector};
use crate::problem::ProblemSpec;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsError {
    #[error("instance carries no ground-truth signal")]
    MissingGroundTruth,
    #[error("invalid sensing setup: {0}")]
    BadSetup(String),
}

/// How the sensing rows are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    /// Independent standard normal entries.
    Gaussian,
    /// Row i is cos(2*pi*(j-1)*psi_i) over columns j with one uniform
    /// frequency draw psi_i per row.
    PartialDct,
}

/// Dimensions and seed for instance synthesis. `p` counts total sensing
/// rows before the split; `m` of them become equality constraints.
#[derive(Clone, Copy, Debug)]
pub struct SensingSetup {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub m: usize,
    pub kind: MatrixKind,
    pub seed: u64,
}

impl SensingSetup {
    /// Standard protocol: m = ceil(0.1 s) constraint rows.
    pub fn new(n: usize, p: usize, s: usize, kind: MatrixKind, seed: u64) -> Self {
        let m = s.div_ceil(10);
        Self { n, p, s, m, kind, seed }
    }

    fn validate(&self) -> Result<(), CsError> {
        if self.n == 0 || self.s == 0 || self.s >= self.n {
            return Err(CsError::BadSetup(format!(
                "need 0 < s < n, got s={}, n={}",
                self.s, self.n
            )));
        }
        if self.p >= self.n {
            return Err(CsError::BadSetup(format!(
                "underdetermined sensing requires p < n, got p={}, n={}",
                self.p, self.n
            )));
        }
        if self.m > self.s || self.m >= self.p {
            return Err(CsError::BadSetup(format!(
                "need m <= s and m < p, got m={}, s={}, p={}",
                self.m, self.s, self.p
            )));
        }
        Ok(())
    }
}

/// A concrete sparse recovery instance. The objective Hessian A^T A is
/// computed once on first use and shared across calls.
#[derive(Debug)]
pub struct CsInstance {
    a: DenseMatrix,
    b: DenseVector,
    c: DenseMatrix,
    d: DenseVector,
    s: usize,
    x_true: Option<DenseVector>,
    gram: OnceLock<DenseMatrix>,
}

impl CsInstance {
    /// Builds from explicit blocks. `a` is (p-m) x n, `c` is m x n with
    /// m <= s; entries must be finite.
    pub fn new(
        a: DenseMatrix,
        b: DenseVector,
        c: DenseMatrix,
        d: DenseVector,
        s: usize,
        x_true: Option<DenseVector>,
    ) -> Result<Self, CsError> {
        let n = a.cols();
        if c.cols() != n {
            return Err(CsError::BadSetup(format!(
                "objective and constraint blocks disagree on n: {} vs {}",
                n,
                c.cols()
            )));
        }
        if b.len() != a.rows() || d.len() != c.rows() {
            return Err(CsError::BadSetup(
                "right-hand side lengths disagree with their blocks".into(),
            ));
        }
        if s == 0 || s >= n {
            return Err(CsError::BadSetup(format!("need 0 < s < n, got s={s}, n={n}")));
        }
        if c.rows() > s {
            return Err(CsError::BadSetup(format!(
                "more constraints than sparsity budget: m={} > s={}",
                c.rows(),
                s
            )));
        }
        if !a.all_finite() || !b.all_finite() || !c.all_finite() || !d.all_finite() {
            return Err(CsError::BadSetup("non-finite entries in problem data".into()));
        }
        if let Some(xt) = &x_true {
            if xt.len() != n || !xt.all_finite() {
                return Err(CsError::BadSetup("bad ground-truth vector".into()));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            s,
            x_true,
            gram: OnceLock::new(),
        })
    }

    pub fn objective_block(&self) -> (&DenseMatrix, &DenseVector) {
        (&self.a, &self.b)
    }

    pub fn constraint_block(&self) -> (&DenseMatrix, &DenseVector) {
        (&self.c, &self.d)
    }

    pub fn x_true(&self) -> Option<&DenseVector> {
        self.x_true.as_ref()
    }

    fn gram(&self) -> &DenseMatrix {
        self.gram.get_or_init(|| self.a.gram())
    }

    /// Relative recovery test against the planted signal:
    /// ||x - x_true|| < 0.01 ||x_true||, strict.
    pub fn recovery_success(&self, x: &DenseVector) -> Result<bool, CsError> {
        let xt = self.x_true.as_ref().ok_or(CsError::MissingGroundTruth)?;
        Ok(recovery_success(x, xt))
    }

    /// Absolute recovery error ||x - x_true||_2.
    pub fn recovery_error(&self, x: &DenseVector) -> Result<f64, CsError> {
        let xt = self.x_true.as_ref().ok_or(CsError::MissingGroundTruth)?;
        Ok(x.sub(xt).norm2())
    }
}

/// Strict relative recovery criterion; `x_true` must be nonzero.
pub fn recovery_success(x: &DenseVector, x_true: &DenseVector) -> bool {
    let scale = x_true.norm2();
    assert!(scale > 0.0, "ground truth must be nonzero");
    x.sub(x_true).norm2() < 0.01 * scale
}

impl ProblemSpec for CsInstance {
    fn dim(&self) -> usize {
        self.a.cols()
    }
    fn num_constraints(&self) -> usize {
        self.c.rows()
    }
    fn sparsity(&self) -> usize {
        self.s
    }
    fn objective(&self, x: &DenseVector) -> f64 {
        0.5 * self.a.matvec(x).sub(&self.b).norm2().powi(2)
    }
    fn grad_objective(&self, x: &DenseVector) -> DenseVector {
        let r = self.a.matvec(x).sub(&self.b);
        self.a.matvec_transpose(&r)
    }
    fn hess_objective(&self, _x: &DenseVector) -> DenseMatrix {
        self.gram().clone()
    }
    fn constraints(&self, x: &DenseVector) -> DenseVector {
        self.c.matvec(x).sub(&self.d)
    }
    fn jac_constraints(&self, _x: &DenseVector) -> DenseMatrix {
        self.c.clone()
    }
    fn hess_constraint(&self, _i: usize, _x: &DenseVector) -> DenseMatrix {
        DenseMatrix::zeros(self.dim(), self.dim())
    }
}

/// Draws an instance per the setup. The generator is ChaCha8 seeded with
/// `setup.seed`; draws happen in a fixed order (sensing entries row-major,
/// then the support permutation, then signal values, then the row-split
/// permutation), so instances are identical across platforms and runs.
pub fn generate(setup: &SensingSetup) -> Result<CsInstance, CsError> {
    setup.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let (n, p, s, m) = (setup.n, setup.p, setup.s, setup.m);

    // 1. raw sensing matrix
    let mut sensing = match setup.kind {
        MatrixKind::Gaussian => {
            let mut mat = DenseMatrix::zeros(p, n);
            for i in 0..p {
                for j in 0..n {
                    mat.set(i, j, rng.sample::<f64, _>(StandardNormal));
                }
            }
            mat
        }
        MatrixKind::PartialDct => {
            let mut mat = DenseMatrix::zeros(p, n);
            for i in 0..p {
                let psi: f64 = rng.random();
                for j in 0..n {
                    mat.set(i, j, (2.0 * std::f64::consts::PI * (j as f64) * psi).cos());
                }
            }
            mat
        }
    };

    // 2. unit-norm columns
    for j in 0..n {
        let mut norm2 = 0.0;
        for i in 0..p {
            norm2 += sensing.get(i, j) * sensing.get(i, j);
        }
        let norm = norm2.sqrt();
        for i in 0..p {
            let v = sensing.get(i, j) / norm;
            sensing.set(i, j, v);
        }
    }

    // 3. planted signal: s uniform positions, standard normal values
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let mut x_true = DenseVector::zeros(n);
    for &j in &positions[..s] {
        x_true[j] = rng.sample::<f64, _>(StandardNormal);
    }

    // 4. measure, then split rows: first m permuted rows become constraints
    let meas = sensing.matvec(&x_true);
    let mut rows: Vec<usize> = (0..p).collect();
    rows.shuffle(&mut rng);
    let (constraint_rows, objective_rows) = rows.split_at(m);

    let c = sensing.select_rows(constraint_rows);
    let d = meas.gather(constraint_rows);
    let a = sensing.select_rows(objective_rows);
    let b = meas.gather(objective_rows);

    CsInstance::new(a, b, c, d, s, Some(x_true))
}

/// Spot-check of the regularity assumptions behind one-step exactness:
/// for `trials` random index sets T of size s, count how often rank(A_T)
/// falls below s or rank(C_T) below m. Violations are returned, not
/// asserted; Gaussian instances make them measure-zero events.
pub fn sensing_rank_report(instance: &CsInstance, trials: usize, seed: u64) -> RankReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = instance.dim();
    let s = instance.sparsity();
    let m = instance.num_constraints();
    let mut a_violations = 0;
    let mut c_violations = 0;
    for _ in 0..trials {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let t: Vec<usize> = {
            let mut t = idx[..s].to_vec();
            t.sort_unstable();
            t
        };
        let a_t = instance.a.select_columns(&t);
        if a_t.rank_estimate(1e-10) < s {
            a_violations += 1;
        }
        if m > 0 {
            let c_t = instance.c.select_columns(&t);
            if c_t.rank_estimate(1e-10) < m {
                c_violations += 1;
            }
        }
    }
    RankReport {
        trials,
        a_rank_violations: a_violations,
        c_rank_violations: c_violations,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RankReport {
    pub trials: usize,
    pub a_rank_violations: usize,
    pub c_rank_violations: usize,
}
