//! Mean-variance-skewness-kurtosis portfolio selection on a fixed asset
//! universe, with co-moment tensors estimated from a panel of returns:
//!
//!   minimize  -l1 x'mu + l2 x'Sigma x - l3 x'Phi(x(x)x) + l4 x'Psi(x(x)x(x)x)
//!   subject to  e'x = 1  and  ||x||_0 <= s
//!
//! Phi (n x n^2) and Psi (n x n^3) are the third and fourth central
//! co-moment tensors flattened in Kronecker order: the column of Phi for the
//! pair (j, k) is j*n + k, the column of Psi for (j, k, l) is j*n^2 + k*n + l.
//! All contractions are index loops; the Kronecker factors are never
//! materialized. Dense tensors keep this family honest only at desk scale,
//! so estimation enforces n <= 40.

use crate::linalg::{DenseMatrix, DenseVector};
use crate::problem::ProblemSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Hard cap on the asset count: Psi storage is n^4 reals.
pub const MAX_ASSETS: usize = 40;

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("need at least 2 return periods, got {got}")]
    InsufficientSamples { got: usize },
    #[error("dense co-moment tensors are capped at n={MAX_ASSETS} assets, got {got}")]
    DimensionTooLarge { got: usize },
    #[error("effective sparsity of the zero vector is undefined")]
    ZeroVector,
    #[error("malformed return panel: {0}")]
    PanelFormat(String),
    #[error("invalid instance: {0}")]
    BadInstance(String),
}

/// Per-period asset returns: one row per period, one column per asset.
#[derive(Clone, Debug)]
pub struct ReturnPanel {
    returns: DenseMatrix,
    asset_names: Vec<String>,
}

impl ReturnPanel {
    pub fn new(returns: DenseMatrix, asset_names: Vec<String>) -> Result<Self, PortfolioError> {
        if asset_names.len() != returns.cols() {
            return Err(PortfolioError::PanelFormat(format!(
                "{} asset names for {} columns",
                asset_names.len(),
                returns.cols()
            )));
        }
        if !returns.all_finite() {
            return Err(PortfolioError::PanelFormat("non-finite return".into()));
        }
        Ok(Self {
            returns,
            asset_names,
        })
    }

    /// Parses the plain CSV layout: a header row of asset names, then one
    /// comma-separated row of decimal returns per period.
    pub fn from_csv(text: &str) -> Result<Self, PortfolioError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| PortfolioError::PanelFormat("empty panel".into()))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let n = names.len();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let row: Result<Vec<f64>, _> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect();
            let row = row.map_err(|e| {
                PortfolioError::PanelFormat(format!("row {}: {e}", lineno + 2))
            })?;
            if row.len() != n {
                return Err(PortfolioError::PanelFormat(format!(
                    "row {} has {} fields, header has {n}",
                    lineno + 2,
                    row.len()
                )));
            }
            rows.push(row);
        }
        Self::new(DenseMatrix::from_rows(&rows), names)
    }

    pub fn periods(&self) -> usize {
        self.returns.rows()
    }

    pub fn assets(&self) -> usize {
        self.returns.cols()
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn returns(&self) -> &DenseMatrix {
        &self.returns
    }
}

/// Sample co-moments of a panel, centered, with 1/T normalization.
#[derive(Clone, Debug)]
pub struct CoMoments {
    pub mu: DenseVector,
    pub sigma: DenseMatrix,
    pub phi: DenseMatrix,
    pub psi: DenseMatrix,
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    let mut items = [0usize, 1, 2, 3];
    heap_permute(&mut items, 4, &mut out);
    out
}

fn heap_permute(items: &mut [usize; 4], k: usize, out: &mut Vec<[usize; 4]>) {
    if k == 1 {
        out.push(*items);
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

const PERM3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Estimates mean, covariance, and the flattened third/fourth central
/// co-moment tensors. Accumulation runs over sorted index tuples only and
/// scatters to every permutation afterwards, which keeps the n^4 tensor
/// affordable at desk scale.
pub fn estimate_comoments(panel: &ReturnPanel) -> Result<CoMoments, PortfolioError> {
    let t_obs = panel.periods();
    let n = panel.assets();
    if t_obs < 2 {
        return Err(PortfolioError::InsufficientSamples { got: t_obs });
    }
    if n > MAX_ASSETS {
        return Err(PortfolioError::DimensionTooLarge { got: n });
    }
    let r = &panel.returns;
    let scale = 1.0 / t_obs as f64;

    let mut mu = DenseVector::zeros(n);
    for t in 0..t_obs {
        for i in 0..n {
            mu[i] += r.get(t, i);
        }
    }
    for i in 0..n {
        mu[i] *= scale;
    }

    // centered rows
    let mut centered = DenseMatrix::zeros(t_obs, n);
    for t in 0..t_obs {
        for i in 0..n {
            centered.set(t, i, r.get(t, i) - mu[i]);
        }
    }

    let mut sigma = DenseMatrix::zeros(n, n);
    for t in 0..t_obs {
        let row = centered.row(t);
        for i in 0..n {
            for j in i..n {
                let v = sigma.get(i, j) + row[i] * row[j];
                sigma.set(i, j, v);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = sigma.get(i, j) * scale;
            sigma.set(i, j, v);
            sigma.set(j, i, v);
        }
    }

    // third moment over sorted triples
    let triples: Vec<(usize, usize, usize)> = {
        let mut v = Vec::new();
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    v.push((i, j, k));
                }
            }
        }
        v
    };
    let mut tri_sums = vec![0.0f64; triples.len()];
    for t in 0..t_obs {
        let row = centered.row(t);
        for (idx, &(i, j, k)) in triples.iter().enumerate() {
            tri_sums[idx] += row[i] * row[j] * row[k];
        }
    }
    let mut phi = DenseMatrix::zeros(n, n * n);
    for (idx, &(i, j, k)) in triples.iter().enumerate() {
        let v = tri_sums[idx] * scale;
        let t3 = [i, j, k];
        for perm in &PERM3 {
            let (a, b, c) = (t3[perm[0]], t3[perm[1]], t3[perm[2]]);
            phi.set(a, b * n + c, v);
        }
    }

    // fourth moment over sorted quadruples
    let quads: Vec<(usize, usize, usize, usize)> = {
        let mut v = Vec::new();
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    for l in k..n {
                        v.push((i, j, k, l));
                    }
                }
            }
        }
        v
    };
    let mut quad_sums = vec![0.0f64; quads.len()];
    for t in 0..t_obs {
        let row = centered.row(t);
        for (idx, &(i, j, k, l)) in quads.iter().enumerate() {
            quad_sums[idx] += row[i] * row[j] * row[k] * row[l];
        }
    }
    let perms4 = permutations4();
    let mut psi = DenseMatrix::zeros(n, n * n * n);
    for (idx, &(i, j, k, l)) in quads.iter().enumerate() {
        let v = quad_sums[idx] * scale;
        let t4 = [i, j, k, l];
        for perm in &perms4 {
            let (a, b, c, d) = (t4[perm[0]], t4[perm[1]], t4[perm[2]], t4[perm[3]]);
            psi.set(a, b * n * n + c * n + d, v);
        }
    }

    Ok(CoMoments { mu, sigma, phi, psi })
}

/// Preference weights (l1, l2, l3, l4) from a single risk-aversion level:
/// l1 = 1, l2 = xi/2, l3 = xi(xi+1)/6, l4 = xi(xi+1)(xi+2)/24.
pub fn lambdas_from_xi(xi: f64) -> [f64; 4] {
    [
        1.0,
        xi / 2.0,
        xi * (xi + 1.0) / 6.0,
        xi * (xi + 1.0) * (xi + 2.0) / 24.0,
    ]
}

/// A concrete portfolio instance over estimated (or supplied) moments.
#[derive(Clone, Debug)]
pub struct MvskInstance {
    mu: DenseVector,
    sigma: DenseMatrix,
    phi: DenseMatrix,
    psi: DenseMatrix,
    lambdas: [f64; 4],
    s: usize,
}

impl MvskInstance {
    pub fn new(
        mu: DenseVector,
        sigma: DenseMatrix,
        phi: DenseMatrix,
        psi: DenseMatrix,
        lambdas: [f64; 4],
        s: usize,
    ) -> Result<Self, PortfolioError> {
        let n = mu.len();
        if sigma.rows() != n || sigma.cols() != n {
            return Err(PortfolioError::BadInstance("sigma must be n x n".into()));
        }
        if phi.rows() != n || phi.cols() != n * n {
            return Err(PortfolioError::BadInstance("phi must be n x n^2".into()));
        }
        if psi.rows() != n || psi.cols() != n * n * n {
            return Err(PortfolioError::BadInstance("psi must be n x n^3".into()));
        }
        if s == 0 || s >= n {
            return Err(PortfolioError::BadInstance(format!(
                "need 0 < s < n, got s={s}, n={n}"
            )));
        }
        if !mu.all_finite()
            || !sigma.all_finite()
            || !phi.all_finite()
            || !psi.all_finite()
            || !lambdas.iter().all(|l| l.is_finite())
        {
            return Err(PortfolioError::BadInstance("non-finite data".into()));
        }
        Ok(Self {
            mu,
            sigma,
            phi,
            psi,
            lambdas,
            s,
        })
    }

    pub fn from_panel(
        panel: &ReturnPanel,
        lambdas: [f64; 4],
        s: usize,
    ) -> Result<Self, PortfolioError> {
        let m = estimate_comoments(panel)?;
        Self::new(m.mu, m.sigma, m.phi, m.psi, lambdas, s)
    }

    pub fn moments(&self) -> (&DenseVector, &DenseMatrix, &DenseMatrix, &DenseMatrix) {
        (&self.mu, &self.sigma, &self.phi, &self.psi)
    }

    pub fn lambdas(&self) -> [f64; 4] {
        self.lambdas
    }

    fn n(&self) -> usize {
        self.mu.len()
    }

    /// [Phi (x(x)x)]_i = sum_{jk} Phi[i, j*n+k] x_j x_k.
    fn phi_xx(&self, x: &DenseVector) -> DenseVector {
        let n = self.n();
        let mut out = DenseVector::zeros(n);
        for i in 0..n {
            let row = self.phi.row(i);
            let mut acc = 0.0;
            for j in 0..n {
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                let base = j * n;
                let mut inner = 0.0;
                for k in 0..n {
                    inner += row[base + k] * x[k];
                }
                acc += xj * inner;
            }
            out[i] = acc;
        }
        out
    }

    /// [Psi (x(x)x(x)x)]_i = sum_{jkl} Psi[i, j*n^2+k*n+l] x_j x_k x_l.
    fn psi_xxx(&self, x: &DenseVector) -> DenseVector {
        let n = self.n();
        let mut out = DenseVector::zeros(n);
        for i in 0..n {
            let row = self.psi.row(i);
            let mut acc = 0.0;
            for j in 0..n {
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let xjk = xj * x[k];
                    if xjk == 0.0 {
                        continue;
                    }
                    let base = j * n * n + k * n;
                    let mut inner = 0.0;
                    for l in 0..n {
                        inner += row[base + l] * x[l];
                    }
                    acc += xjk * inner;
                }
            }
            out[i] = acc;
        }
        out
    }

    /// [Phi (I(x)x)]_{i,c} = sum_k Phi[i, c*n+k] x_k.
    fn phi_ix(&self, x: &DenseVector) -> DenseMatrix {
        let n = self.n();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let row = self.phi.row(i);
            for c in 0..n {
                let base = c * n;
                let mut acc = 0.0;
                for k in 0..n {
                    acc += row[base + k] * x[k];
                }
                out.set(i, c, acc);
            }
        }
        out
    }

    /// [Psi (I(x)x(x)x)]_{i,c} = sum_{kl} Psi[i, c*n^2+k*n+l] x_k x_l.
    fn psi_ixx(&self, x: &DenseVector) -> DenseMatrix {
        let n = self.n();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let row = self.psi.row(i);
            for c in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    let xk = x[k];
                    if xk == 0.0 {
                        continue;
                    }
                    let base = c * n * n + k * n;
                    let mut inner = 0.0;
                    for l in 0..n {
                        inner += row[base + l] * x[l];
                    }
                    acc += xk * inner;
                }
                out.set(i, c, acc);
            }
        }
        out
    }
}

impl ProblemSpec for MvskInstance {
    fn dim(&self) -> usize {
        self.n()
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn sparsity(&self) -> usize {
        self.s
    }

    fn objective(&self, x: &DenseVector) -> f64 {
        let [l1, l2, l3, l4] = self.lambdas;
        let sx = self.sigma.matvec(x);
        -l1 * self.mu.dot(x) + l2 * x.dot(&sx) - l3 * x.dot(&self.phi_xx(x))
            + l4 * x.dot(&self.psi_xxx(x))
    }

    fn grad_objective(&self, x: &DenseVector) -> DenseVector {
        let [l1, l2, l3, l4] = self.lambdas;
        let n = self.n();
        let sx = self.sigma.matvec(x);
        let pxx = self.phi_xx(x);
        let pxxx = self.psi_xxx(x);
        let mut g = DenseVector::zeros(n);
        for i in 0..n {
            g[i] = -l1 * self.mu[i] + 2.0 * l2 * sx[i] - 3.0 * l3 * pxx[i] + 4.0 * l4 * pxxx[i];
        }
        g
    }

    fn hess_objective(&self, x: &DenseVector) -> DenseMatrix {
        let [_, l2, l3, l4] = self.lambdas;
        let n = self.n();
        let pix = self.phi_ix(x);
        let pixx = self.psi_ixx(x);
        let mut h = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                h.set(
                    i,
                    j,
                    2.0 * l2 * self.sigma.get(i, j) - 6.0 * l3 * pix.get(i, j)
                        + 12.0 * l4 * pixx.get(i, j),
                );
            }
        }
        h
    }

    fn constraints(&self, x: &DenseVector) -> DenseVector {
        let sum: f64 = x.iter().sum();
        DenseVector::from_vec(vec![sum - 1.0])
    }

    fn jac_constraints(&self, _x: &DenseVector) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0; self.n()]])
    }

    fn hess_constraint(&self, _i: usize, _x: &DenseVector) -> DenseMatrix {
        DenseMatrix::zeros(self.n(), self.n())
    }
}

/// Curvature screen for the quartic model: the scalar inequality
/// 4 l4 (2 l2 - 1) > l3^2 plus positive definiteness of Sigma restricted
/// to the budget hyperplane {d : e'd = 0}.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureCheck {
    pub scalar_ok: bool,
    pub scalar_lhs: f64,
    pub scalar_rhs: f64,
    pub restricted_pd: bool,
}

impl CurvatureCheck {
    pub fn passed(&self) -> bool {
        self.scalar_ok && self.restricted_pd
    }
}

/// Evaluates the curvature screen. The hyperplane restriction uses the
/// difference basis d_i = e_i - e_{i+1}; positive definiteness of the
/// projected Gram matrix is decided by unpivoted elimination pivots.
pub fn check_curvature(lambdas: [f64; 4], sigma: &DenseMatrix) -> CurvatureCheck {
    let [_, l2, l3, l4] = lambdas;
    let lhs = 4.0 * l4 * (2.0 * l2 - 1.0);
    let rhs = l3 * l3;
    let n = sigma.rows();
    let restricted_pd = if n < 2 {
        true
    } else {
        let mut basis = DenseMatrix::zeros(n, n - 1);
        for j in 0..n - 1 {
            basis.set(j, j, 1.0);
            basis.set(j + 1, j, -1.0);
        }
        let projected = basis.transpose().matmul(&sigma.matmul(&basis));
        projected.sym_positive_definite(1e-12)
    };
    CurvatureCheck {
        scalar_ok: lhs > rhs,
        scalar_lhs: lhs,
        scalar_rhs: rhs,
        restricted_pd,
    }
}

/// Effective sparsity: the smallest t such that the t largest magnitudes
/// hold at least 99% of ||x||_1.
pub fn sparsity_hat(x: &DenseVector) -> Result<usize, PortfolioError> {
    let total: f64 = x.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Err(PortfolioError::ZeroVector);
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let target = 0.99 * total;
    let mut acc = 0.0;
    for (t, v) in mags.iter().enumerate() {
        acc += v;
        if acc >= target {
            return Ok(t + 1);
        }
    }
    Ok(x.len())
}

/// Synthesizes a seeded return panel with nontrivial third moments.
///
/// Model: a one-factor Gaussian core z_{t,i} = sqrt(0.3) f_t + sqrt(0.7)
/// e_{t,i} pushed through exponentiation, v = exp(sigma_i z), with per-asset
/// sigma_i in [0.4, 0.8]; every third asset's shock is negated for a mix of
/// skew signs. Shocks are standardized in distribution (population mean
/// subtracted, population standard deviation divided out) and then mapped to
/// annual-horizon equity magnitudes: r_{t,i} = drift_i + 0.20 * shock_{t,i}
/// with per-asset drifts in [2%, 10%].
///
/// The 20% volatility scale matters for the solver, not just cosmetics: a
/// strong stationary point exists at stepsize beta only while off-support
/// Lagrangian gradients stay below |x|_(s)/beta, and gradient magnitudes grow
/// with the moment scale (quadratically and worse in the volatility). Panels
/// left at unit variance push that threshold three orders of magnitude below
/// reach, so a unit-stepsize run has no stationary point to find and churns
/// forever. At 20% volatility the quartic term still shapes the Newton steps
/// but beta = 1 sits comfortably inside the admissible range.
///
/// Draw order: the n drifts, then per period the common factor followed by
/// the n idiosyncratic shocks.
pub fn synthetic_return_panel(n: usize, t_obs: usize, seed: u64) -> ReturnPanel {
    use rand::Rng;
    assert!(n >= 1, "need at least one asset");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol: f64 = 0.20;
    let rho: f64 = 0.3;
    let w_f = rho.sqrt();
    let w_e = (1.0 - rho).sqrt();
    let sigmas: Vec<f64> = (0..n)
        .map(|i| 0.4 + 0.4 * (i as f64) / (n.max(2) - 1) as f64)
        .collect();
    let drifts: Vec<f64> = (0..n)
        .map(|_| vol * (0.1 + 0.4 * rng.random::<f64>()))
        .collect();
    let mut returns = DenseMatrix::zeros(t_obs, n);
    for t in 0..t_obs {
        let f: f64 = rng.sample(StandardNormal);
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            let z = w_f * f + w_e * e;
            let sig = sigmas[i];
            let mean = (sig * sig / 2.0).exp();
            let var = ((sig * sig).exp() - 1.0) * (sig * sig).exp();
            let standardized = ((sig * z).exp() - mean) / var.sqrt();
            let shock = if i % 3 == 2 { -standardized } else { standardized };
            returns.set(t, i, drifts[i] + vol * shock);
        }
    }
    let names = (0..n).map(|i| format!("A{i}")).collect();
    ReturnPanel::new(returns, names).expect("synthetic panel is well formed")
}
