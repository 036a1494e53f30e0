//! K-sparse vectors and column-sparse matrices, plus the handful of
//! sparse-dense products the update algorithms need.
//!
//! A K-sparse target is a D-dimensional vector with at most K << D active
//! entries; a batch of m of them is a D x m matrix stored column-wise as
//! (index, value) pairs. Columns are canonicalized to ascending index order
//! at construction, and duplicate indices within a column are rejected (a
//! target is one vector; duplicates indicate a caller bug).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::DenseMat;

/// D-dimensional vector with at most K << D explicit (index, value) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct KSparseVec {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl KSparseVec {
    /// Validates, sorts by index, and rejects duplicates and range errors.
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let (indices, values) = canonicalize(dim, indices, values)?;
        Ok(KSparseVec { dim, indices, values })
    }

    pub fn empty(dim: usize) -> Self {
        KSparseVec { dim, indices: Vec::new(), values: Vec::new() }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Sum of squared values (the sparse `y^T y`).
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn densify(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

fn canonicalize(
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if indices.len() != values.len() {
        return Err(Error::DimMismatch {
            op: "sparse construction",
            lhs: (indices.len(), 1),
            rhs: (values.len(), 1),
        });
    }
    for &i in &indices {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
    }
    let mut pairs: Vec<(usize, f64)> = indices.into_iter().zip(values).collect();
    pairs.sort_by_key(|&(i, _)| i);
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateIndex { index: w[0].0 });
        }
    }
    Ok(pairs.into_iter().unzip())
}

/// D x m matrix whose columns are K-sparse vectors sharing the row
/// dimension D. Houses targets (pattern + target values) and the sparse
/// gradient matrices built on the same pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct KSparseMat {
    dim_rows: usize,
    cols: Vec<KSparseVec>,
}

impl KSparseMat {
    pub fn from_columns(dim_rows: usize, cols: Vec<KSparseVec>) -> Result<Self> {
        for c in &cols {
            if c.dim() != dim_rows {
                return Err(Error::DimMismatch {
                    op: "from_columns",
                    lhs: (dim_rows, 1),
                    rhs: (c.dim(), 1),
                });
            }
        }
        Ok(KSparseMat { dim_rows, cols })
    }

    /// Builds from per-column (indices, values) pairs.
    pub fn from_parts(
        dim_rows: usize,
        columns: Vec<(Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let cols = columns
            .into_iter()
            .map(|(i, v)| KSparseVec::new(dim_rows, i, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(KSparseMat { dim_rows, cols })
    }

    /// Same sparsity pattern, new values; `vals[j]` must match column j's
    /// active count and order.
    pub fn replace_values(&self, vals: &[Vec<f64>]) -> Result<KSparseMat> {
        if vals.len() != self.cols.len() {
            return Err(Error::DimMismatch {
                op: "replace_values",
                lhs: (self.cols.len(), 1),
                rhs: (vals.len(), 1),
            });
        }
        let mut cols = Vec::with_capacity(self.cols.len());
        for (c, v) in self.cols.iter().zip(vals) {
            if v.len() != c.nnz() {
                return Err(Error::DimMismatch {
                    op: "replace_values",
                    lhs: (c.nnz(), 1),
                    rhs: (v.len(), 1),
                });
            }
            cols.push(KSparseVec {
                dim: self.dim_rows,
                indices: c.indices.clone(),
                values: v.clone(),
            });
        }
        Ok(KSparseMat { dim_rows: self.dim_rows, cols })
    }

    #[inline]
    pub fn dim_rows(&self) -> usize {
        self.dim_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn col(&self, j: usize) -> &KSparseVec {
        &self.cols[j]
    }

    pub fn columns(&self) -> &[KSparseVec] {
        &self.cols
    }

    /// Largest active count over columns (the effective K).
    pub fn max_nnz(&self) -> usize {
        self.cols.iter().map(|c| c.nnz()).max().unwrap_or(0)
    }

    pub fn densify(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.dim_rows, self.cols.len());
        for (j, c) in self.cols.iter().enumerate() {
            for (&i, &v) in c.indices.iter().zip(&c.values) {
                *out.at_mut(i, j) = v;
            }
        }
        out
    }
}

/// `S^T V` for sparse `S` (D x m) and dense `V` (D x d), returned as m x d.
///
/// Touches only the K active rows of `V` per column: O(K m d) instead of
/// O(D m d).
pub fn sparse_transpose_times_dense(s: &KSparseMat, v: &DenseMat) -> Result<DenseMat> {
    if s.dim_rows() != v.rows() {
        return Err(Error::DimMismatch {
            op: "sparse_transpose_times_dense",
            lhs: (s.dim_rows(), s.n_cols()),
            rhs: (v.rows(), v.cols()),
        });
    }
    let mut out = DenseMat::zeros(s.n_cols(), v.cols());
    for (j, c) in s.columns().iter().enumerate() {
        let row = out.row_mut(j);
        for (&i, &val) in c.indices().iter().zip(c.values()) {
            let vrow = &v.data()[i * v.cols()..(i + 1) * v.cols()];
            for (o, &x) in row.iter_mut().zip(vrow) {
                *o += val * x;
            }
        }
    }
    Ok(out)
}

/// `y^T V` for a sparse vector (length D) and dense `V` (D x d): the
/// length-d vector `V^T y` computed from K rows of `V`.
pub fn sparse_vec_transpose_times_dense(y: &KSparseVec, v: &DenseMat) -> Result<Vec<f64>> {
    if y.dim() != v.rows() {
        return Err(Error::DimMismatch {
            op: "sparse_vec_transpose_times_dense",
            lhs: (y.dim(), 1),
            rhs: (v.rows(), v.cols()),
        });
    }
    let mut out = vec![0.0; v.cols()];
    for (&i, &val) in y.indices().iter().zip(y.values()) {
        crate::mat::axpy(&mut out, v.row(i), val);
    }
    Ok(out)
}

/// Gram matrix `S^T S` (m x m), each entry the dot product of two K-sparse
/// columns, via a two-pointer merge over the sorted index lists: O(m^2 K).
pub fn sparse_gram(s: &KSparseMat) -> DenseMat {
    let m = s.n_cols();
    let mut out = DenseMat::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let d = sparse_dot(s.col(i), s.col(j));
            *out.at_mut(i, j) = d;
            *out.at_mut(j, i) = d;
        }
    }
    out
}

fn sparse_dot(a: &KSparseVec, b: &KSparseVec) -> f64 {
    let (ai, av) = (a.indices(), a.values());
    let (bi, bv) = (b.indices(), b.values());
    let mut s = 0.0;
    let (mut p, mut q) = (0, 0);
    while p < ai.len() && q < bi.len() {
        match ai[p].cmp(&bi[q]) {
            core::cmp::Ordering::Less => p += 1,
            core::cmp::Ordering::Greater => q += 1,
            core::cmp::Ordering::Equal => {
                s += av[p] * bv[q];
                p += 1;
                q += 1;
            }
        }
    }
    s
}

/// Per-column sums of active values: the length-m vector `S^T 1_D`.
pub fn sparse_column_sums(s: &KSparseMat) -> Vec<f64> {
    s.columns()
        .iter()
        .map(|c| c.values().iter().sum())
        .collect()
}

/// `V += scale * S * G` for sparse `S` (D x m) and dense `G` (m x d),
/// touching at most K*m rows of `V`; all other rows stay bit-identical.
pub fn scatter_row_update(
    v: &mut DenseMat,
    s: &KSparseMat,
    g: &DenseMat,
    scale: f64,
) -> Result<()> {
    if s.dim_rows() != v.rows() || s.n_cols() != g.rows() || g.cols() != v.cols() {
        return Err(Error::DimMismatch {
            op: "scatter_row_update",
            lhs: (v.rows(), v.cols()),
            rhs: (g.rows(), g.cols()),
        });
    }
    for (j, c) in s.columns().iter().enumerate() {
        let grow = &g.data()[j * g.cols()..(j + 1) * g.cols()];
        for (&i, &val) in c.indices().iter().zip(c.values()) {
            let f = scale * val;
            let vrow = &mut v.data_mut()[i * grow.len()..(i + 1) * grow.len()];
            for (x, &gv) in vrow.iter_mut().zip(grow) {
                *x += f * gv;
            }
        }
    }
    Ok(())
}

/// Rank-one scatter `V += scale * y * g^T`, touching only y's K rows.
pub fn scatter_vec_update(
    v: &mut DenseMat,
    y: &KSparseVec,
    g: &[f64],
    scale: f64,
) -> Result<()> {
    if y.dim() != v.rows() || g.len() != v.cols() {
        return Err(Error::DimMismatch {
            op: "scatter_vec_update",
            lhs: (v.rows(), v.cols()),
            rhs: (y.dim(), g.len()),
        });
    }
    for (&i, &val) in y.indices().iter().zip(y.values()) {
        crate::mat::axpy(v.row_mut(i), g, scale * val);
    }
    Ok(())
}
