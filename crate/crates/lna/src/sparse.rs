//! Support handling and hard-thresholding style selections.
//!
//! Ties in magnitude are resolved deterministically: projections keep the
//! lexicographically smallest index set, and the Newton support selection
//! prefers indices already in the current support, then smaller indices.
//! Every run with the same inputs therefore picks the same index set.

use crate::linalg::DenseVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparsityError {
    #[error("bad sparsity level s={s} for dimension n={n} (need 1 <= s <= n)")]
    BadSparsityLevel { s: usize, n: usize },
}

/// Sorted set of coordinate indices inside an ambient dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
    n: usize,
}

impl IndexSet {
    /// Builds a set from arbitrary order; sorts and checks bounds/duplicates.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Self {
        indices.sort_unstable();
        for w in indices.windows(2) {
            assert!(w[0] != w[1], "duplicate index {}", w[0]);
        }
        if let Some(&last) = indices.last() {
            assert!(last < n, "index {last} out of bounds for n={n}");
        }
        Self { indices, n }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Ascending complement within the ambient dimension.
    pub fn complement(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n - self.indices.len());
        let mut cursor = self.indices.iter().peekable();
        for i in 0..self.n {
            if cursor.peek() == Some(&&i) {
                cursor.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn is_superset_of(&self, other: &[usize]) -> bool {
        other.iter().all(|&i| self.contains(i))
    }
}

/// Indices with magnitude strictly above `tol`, ascending.
pub fn support(x: &DenseVector, tol: f64) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i].abs() > tol).collect()
}

/// The s-th largest entry of |x| (1-indexed), i.e. |x|_(s).
pub fn sth_largest_abs(x: &DenseVector, s: usize) -> Result<f64, SparsityError> {
    let n = x.len();
    if s == 0 || s > n {
        return Err(SparsityError::BadSparsityLevel { s, n });
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(mags[s - 1])
}

/// Euclidean projection onto the s-sparse set: keeps the s largest
/// magnitudes, zeroing the rest. Under ties the kept index set is the
/// lexicographically smallest valid choice.
pub fn project_sparse(z: &DenseVector, s: usize) -> Result<DenseVector, SparsityError> {
    let n = z.len();
    if s == 0 || s > n {
        return Err(SparsityError::BadSparsityLevel { s, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| z[j].abs().total_cmp(&z[i].abs()).then(i.cmp(&j)));
    let mut out = DenseVector::zeros(n);
    for &i in &order[..s] {
        out[i] = z[i];
    }
    Ok(out)
}

/// Picks the Newton support: the s largest magnitudes of u = x - beta * gradL.
///
/// Any index set with that property is admissible; this implementation breaks
/// magnitude ties by preferring indices already in supp(x) (detected at
/// `support_tol`), then smaller indices, so the choice is deterministic and
/// sticky around a converged support.
pub fn select_index_set(
    x: &DenseVector,
    grad_l: &DenseVector,
    beta: f64,
    s: usize,
    support_tol: f64,
) -> Result<IndexSet, SparsityError> {
    let n = x.len();
    if s == 0 || s > n {
        return Err(SparsityError::BadSparsityLevel { s, n });
    }
    assert_eq!(grad_l.len(), n, "gradient length mismatch");
    assert!(beta > 0.0, "beta must be positive");
    let u: Vec<f64> = (0..n).map(|i| x[i] - beta * grad_l[i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| {
        u[j].abs()
            .total_cmp(&u[i].abs())
            .then_with(|| {
                let in_i = x[i].abs() > support_tol;
                let in_j = x[j].abs() > support_tol;
                in_j.cmp(&in_i)
            })
            .then(i.cmp(&j))
    });
    Ok(IndexSet::new(order[..s].to_vec(), n))
}
