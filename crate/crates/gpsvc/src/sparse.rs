//! Sparse symmetric storage and Cholesky factorization for taper-induced
//! covariance patterns.
//!
//! The pattern is fixed by the taper range (entries exist exactly where the
//! pairwise distance is below it, plus the diagonal) and is computed once per
//! engine; only the numeric values change with the covariance parameters.
//! Internally the rows are reordered with reverse Cuthill-McKee to keep the
//! factor fill small; the permutation never leaks out of this module's
//! solves, and the log-determinant is permutation invariant.

use crate::error::{Error, Result};
use crate::model::DistanceMatrix;
use nalgebra::{DMatrix, DVector};

/// Immutable pattern of the tapered covariance matrix, in RCM order.
#[derive(Debug)]
pub struct SparseTemplate {
    n: usize,
    /// CSC column pointers of the full symmetric pattern, permuted order.
    col_ptr: Vec<usize>,
    /// Row indices (permuted order), ascending within each column.
    row_idx: Vec<usize>,
    /// Distance of each stored entry, aligned with `row_idx`.
    dist: Vec<f64>,
    /// `perm[new] = old` observation index.
    perm: Vec<usize>,
    /// Stored off-diagonal entry count (both triangles).
    nnz_offdiag: usize,
}

impl SparseTemplate {
    /// Build the pattern of all pairs closer than `taper_range` (strict),
    /// plus the diagonal.
    pub fn from_distances(dist: &DistanceMatrix, taper_range: f64) -> Self {
        let n = dist.n();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if dist.get(i, j) < taper_range {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut dists = Vec::new();
        let mut nnz_offdiag = 0;
        col_ptr.push(0);
        for new_col in 0..n {
            let old_col = perm[new_col];
            let mut rows: Vec<usize> = adj[old_col].iter().map(|&old| iperm[old]).collect();
            rows.push(new_col);
            rows.sort_unstable();
            for &new_row in &rows {
                if new_row == new_col {
                    dists.push(0.0);
                } else {
                    nnz_offdiag += 1;
                    dists.push(dist.get(perm[new_row], old_col));
                }
                row_idx.push(new_row);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            n,
            col_ptr,
            row_idx,
            dist: dists,
            perm,
            nnz_offdiag,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Off-diagonal stored entries, counting both triangles.
    pub fn nnz_offdiag(&self) -> usize {
        self.nnz_offdiag
    }

    /// Fill values entry by entry. `f(orig_row, orig_col, dist)` must return
    /// the off-diagonal covariance; `diag(orig_row)` the diagonal.
    pub fn fill<F, G>(&self, f: F, diag: G) -> SparseSym<'_>
    where
        F: Fn(usize, usize, f64) -> f64,
        G: Fn(usize) -> f64,
    {
        let mut values = vec![0.0; self.row_idx.len()];
        for col in 0..self.n {
            let old_col = self.perm[col];
            for e in self.col_ptr[col]..self.col_ptr[col + 1] {
                let row = self.row_idx[e];
                values[e] = if row == col {
                    diag(old_col)
                } else {
                    f(self.perm[row], old_col, self.dist[e])
                };
            }
        }
        SparseSym { template: self, values }
    }
}

/// Numeric values laid over a [`SparseTemplate`].
#[derive(Debug)]
pub struct SparseSym<'a> {
    template: &'a SparseTemplate,
    values: Vec<f64>,
}

impl<'a> SparseSym<'a> {
    pub fn template(&self) -> &'a SparseTemplate {
        self.template
    }

    /// Dense symmetric matrix in the original (unpermuted) order.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.template.n;
        let mut out = DMatrix::zeros(n, n);
        for col in 0..n {
            let old_col = self.template.perm[col];
            for e in self.template.col_ptr[col]..self.template.col_ptr[col + 1] {
                let old_row = self.template.perm[self.template.row_idx[e]];
                out[(old_row, old_col)] = self.values[e];
            }
        }
        out
    }

    /// Up-looking sparse Cholesky `A = L L^T` in the permuted order.
    pub fn cholesky(&self) -> Result<SparseChol<'a>> {
        let t = self.template;
        let n = t.n;
        let parent = elimination_tree(t);

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut diag = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut stack = vec![0usize; n];
        let mut path = vec![0usize; n];

        for k in 0..n {
            // pattern of row k of L: reach of A(0..k, k) in the etree
            mark[k] = k;
            let mut top = n;
            let (start, end) = (t.col_ptr[k], t.col_ptr[k + 1]);
            let mut d = 0.0;
            for e in start..end {
                let i = t.row_idx[e];
                if i > k {
                    continue;
                }
                if i == k {
                    d = self.values[e];
                    continue;
                }
                x[i] = self.values[e];
                let mut len = 0;
                let mut j = i;
                while j != usize::MAX && mark[j] != k {
                    path[len] = j;
                    len += 1;
                    mark[j] = k;
                    j = parent[j];
                }
                debug_assert!(j != usize::MAX, "etree path from {i} must reach {k}");
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    stack[top] = path[len];
                }
            }
            // sparse triangular solve along the pattern, leaves first
            for s in top..n {
                let j = stack[s];
                let xj = x[j];
                x[j] = 0.0;
                let lkj = xj / diag[j];
                for &(i, lij) in &cols[j] {
                    x[i] -= lij * lkj;
                }
                d -= lkj * lkj;
                cols[j].push((k, lkj));
            }
            if !(d > 0.0) {
                return Err(Error::Numeric(format!(
                    "sparse Cholesky failed: non-positive pivot {d:e} at index {k} \
                     (original row {})",
                    t.perm[k]
                )));
            }
            diag[k] = d.sqrt();
        }

        Ok(SparseChol { template: t, cols, diag })
    }
}

/// Lower-triangular sparse Cholesky factor, permuted order.
#[derive(Debug)]
pub struct SparseChol<'a> {
    template: &'a SparseTemplate,
    /// Strictly-below-diagonal entries of each column, rows ascending.
    cols: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl SparseChol<'_> {
    pub fn n(&self) -> usize {
        self.template.n
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.diag.iter().map(|d| d.ln()).sum::<f64>()
    }

    fn forward_permuted(&self, b: &DVector<f64>) -> Vec<f64> {
        let n = self.n();
        let mut x: Vec<f64> = (0..n).map(|new| b[self.template.perm[new]]).collect();
        for j in 0..n {
            x[j] /= self.diag[j];
            let xj = x[j];
            for &(i, v) in &self.cols[j] {
                x[i] -= v * xj;
            }
        }
        x
    }

    fn backward_in_place(&self, x: &mut [f64]) {
        for j in (0..self.n()).rev() {
            let mut s = x[j];
            for &(i, v) in &self.cols[j] {
                s -= v * x[i];
            }
            x[j] = s / self.diag[j];
        }
    }

    /// `A^{-1} b` in the original order.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.forward_permuted(b);
        self.backward_in_place(&mut x);
        let mut out = DVector::zeros(self.n());
        for (new, &old) in self.template.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// `L^{-1} P b`: whitened vector, valid for quadratic forms and
    /// least-squares work where the row order is irrelevant.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.forward_permuted(b))
    }

    /// Trace of `A^{-1}`.
    pub fn inv_trace(&self) -> f64 {
        // tr A^{-1} = sum_j ||L^{-1} e_j||^2, done column by column on the
        // permuted system (the trace is permutation invariant).
        let n = self.n();
        let mut total = 0.0;
        let mut x = vec![0.0; n];
        for s in 0..n {
            x[s..].iter_mut().for_each(|v| *v = 0.0);
            x[s] = 1.0;
            for j in s..n {
                x[j] /= self.diag[j];
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for &(i, v) in &self.cols[j] {
                    x[i] -= v * xj;
                }
            }
            total += x[s..].iter().map(|v| v * v).sum::<f64>();
        }
        total
    }
}

/// Elimination tree of the pattern (upper-triangle traversal with path
/// compression).
fn elimination_tree(t: &SparseTemplate) -> Vec<usize> {
    let n = t.n;
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for e in t.col_ptr[k]..t.col_ptr[k + 1] {
            let mut i = t.row_idx[e];
            if i >= k {
                continue;
            }
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Reverse Cuthill-McKee ordering; returns `perm[new] = old`. Deterministic:
/// ties break on the original index.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.sort_by_key(|&i| (adj[i].len(), i));
    let mut queue = std::collections::VecDeque::new();
    for &start in &nodes {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (adj[v].len(), v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}
