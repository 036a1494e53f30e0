//! Dense f64 matrix kernels: multiply, inversion, one-sided Jacobi SVD,
//! and power iteration for extreme singular values.
//!
//! Storage is row-major. Only the kernels the layers need are exposed; this
//! is not a general linear-algebra API. All kernels are pure and
//! deterministic: accumulation order is fixed per shape, so repeated runs
//! are bit-identical.

use alloc::vec;
use alloc::vec::Vec;
use libm::sqrt;

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                op: "from_vec",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        Ok(DenseMat { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        DenseMat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    pub fn transpose(&self) -> DenseMat {
        let mut t = DenseMat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &DenseMat, s: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimMismatch {
                op: "add_scaled",
                lhs: (self.rows, self.cols),
                rhs: (other.rows, other.cols),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Rank-one update `self += s * u v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], s: f64) -> Result<()> {
        if u.len() != self.rows || v.len() != self.cols {
            return Err(Error::DimMismatch {
                op: "add_outer",
                lhs: (self.rows, self.cols),
                rhs: (u.len(), v.len()),
            });
        }
        for (r, &ur) in u.iter().enumerate() {
            let su = s * ur;
            for (x, &vc) in self.row_mut(r).iter_mut().zip(v) {
                *x += su * vc;
            }
        }
        Ok(())
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec length mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `self^T * x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_t length mismatch");
        let mut y = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                axpy(&mut y, self.row(r), xr);
            }
        }
        y
    }

    /// `self <- self * diag(d)` (scales column j by `d[j]`).
    pub fn scale_cols(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.cols, "scale_cols length mismatch");
        for r in 0..self.rows {
            for (x, &s) in self.row_mut(r).iter_mut().zip(d) {
                *x *= s;
            }
        }
    }

    pub fn trace(&self) -> f64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self.at(i, i)).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry-wise difference; matrices must be same shape.
    pub fn max_abs_diff(&self, other: &DenseMat) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "max_abs_diff shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dot product of equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot length mismatch");
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// `y += s * x`.
#[inline]
pub fn axpy(y: &mut [f64], x: &[f64], s: f64) {
    assert_eq!(y.len(), x.len(), "axpy length mismatch");
    for i in 0..y.len() {
        y[i] += s * x[i];
    }
}

/// General product `op(A) * op(B)` where `op` optionally transposes.
///
/// Four loop nests, one per flag pair, each with the innermost loop running
/// over contiguous output columns; accumulation order is fixed so results
/// are run-to-run deterministic.
pub fn matmul(a: &DenseMat, ta: bool, b: &DenseMat, tb: bool) -> Result<DenseMat> {
    let (p, r1) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (r2, q) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    if r1 != r2 {
        return Err(Error::DimMismatch {
            op: "matmul",
            lhs: (p, r1),
            rhs: (r2, q),
        });
    }
    let r = r1;
    let mut c = DenseMat::zeros(p, q);
    match (ta, tb) {
        (false, false) => {
            for i in 0..p {
                for k in 0..r {
                    let aik = a.at(i, k);
                    if aik != 0.0 {
                        axpy(c.row_mut(i), b.row(k), aik);
                    }
                }
            }
        }
        (true, false) => {
            for k in 0..r {
                for i in 0..p {
                    let aki = a.at(k, i);
                    if aki != 0.0 {
                        axpy(c.row_mut(i), b.row(k), aki);
                    }
                }
            }
        }
        (false, true) => {
            for i in 0..p {
                for j in 0..q {
                    *c.at_mut(i, j) = dot(a.row(i), b.row(j));
                }
            }
        }
        (true, true) => {
            for i in 0..p {
                for j in 0..q {
                    let mut s = 0.0;
                    for k in 0..r {
                        s += a.at(k, i) * b.at(j, k);
                    }
                    *c.at_mut(i, j) = s;
                }
            }
        }
    }
    Ok(c)
}

/// Inverse of a square matrix by Gauss-Jordan elimination with partial
/// pivoting on an augmented `[A | I]` tableau.
///
/// Fails with `SingularMatrix` when the best available pivot is effectively
/// zero (magnitude at most 1e-300 scaled by the pivot row's norm).
pub fn invert_square(a: &DenseMat) -> Result<DenseMat> {
    if a.rows != a.cols {
        return Err(Error::DimMismatch {
            op: "invert_square",
            lhs: (a.rows, a.cols),
            rhs: (a.cols, a.rows),
        });
    }
    let n = a.rows;
    let mut work = a.clone();
    let mut inv = DenseMat::identity(n);

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = work.at(col, col).abs();
        for r in col + 1..n {
            let mag = work.at(r, col).abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        let row_norm = work.row(pivot_row).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pivot_mag <= 1e-300 * row_norm.max(1.0) {
            return Err(Error::SingularMatrix);
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = work.at(col, j);
                *work.at_mut(col, j) = work.at(pivot_row, j);
                *work.at_mut(pivot_row, j) = tmp;
                let tmp = inv.at(col, j);
                *inv.at_mut(col, j) = inv.at(pivot_row, j);
                *inv.at_mut(pivot_row, j) = tmp;
            }
        }
        let inv_pivot = 1.0 / work.at(col, col);
        for j in 0..n {
            *work.at_mut(col, j) *= inv_pivot;
            *inv.at_mut(col, j) *= inv_pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work.at(r, col);
            if factor != 0.0 {
                for j in 0..n {
                    let w = work.at(col, j);
                    *work.at_mut(r, j) -= factor * w;
                    let v = inv.at(col, j);
                    *inv.at_mut(r, j) -= factor * v;
                }
            }
        }
    }
    Ok(inv)
}

/// Singular value decomposition `A = left * diag(sigma) * right^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Orthonormal left singular vectors, one per column.
    pub left_vectors: DenseMat,
    /// Nonincreasing, nonnegative singular values.
    pub singular_values: Vec<f64>,
    /// Orthonormal right singular vectors, one per column.
    pub right_vectors: DenseMat,
}

/// One-sided Jacobi SVD of a square matrix.
///
/// Rotates column pairs of a working copy until all pairs are mutually
/// orthogonal; column norms are then the singular values. Adequate for the
/// small square matrices this crate deals in (d up to a few thousand).
/// Fails with `NoConvergence` after 100*d sweeps.
pub fn svd_square(a: &DenseMat) -> Result<SvdResult> {
    if a.rows != a.cols {
        return Err(Error::DimMismatch {
            op: "svd_square",
            lhs: (a.rows, a.cols),
            rhs: (a.cols, a.rows),
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(SvdResult {
            left_vectors: DenseMat::zeros(0, 0),
            singular_values: Vec::new(),
            right_vectors: DenseMat::zeros(0, 0),
        });
    }

    // Work on G^T so column rotations become contiguous row rotations.
    let mut gt = a.transpose(); // row i of gt = column i of G
    let mut vt = DenseMat::identity(n); // row i of vt = column i of V

    let tol = 1e-14;
    let max_sweeps = 100 * n;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let rp = gt.row(p);
                    let rq = gt.row(q);
                    (dot(rp, rp), dot(rq, rq), dot(rp, rq))
                };
                if gamma.abs() <= tol * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                rotate_rows(&mut gt, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence);
    }

    let mut sigma: Vec<f64> = (0..n).map(|i| norm(gt.row(i))).collect();

    // Normalized nonzero columns of G are the left vectors; zero columns
    // (rank deficiency) get filled by orthonormal completion below.
    let mut ut = DenseMat::zeros(n, n); // row i = left vector i
    let mut zero_cols = Vec::new();
    for (i, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            let inv = 1.0 / s;
            for (dst, &src) in ut.row_mut(i).iter_mut().zip(gt.row(i)) {
                *dst = src * inv;
            }
        } else {
            zero_cols.push(i);
        }
    }
    for &i in &zero_cols {
        let filled = orthonormal_completion(&ut, i, n);
        ut.row_mut(i).copy_from_slice(&filled);
    }

    // Sort singular values into nonincreasing order, permuting vectors along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).unwrap());
    let mut left = DenseMat::zeros(n, n);
    let mut right = DenseMat::zeros(n, n);
    let mut sorted_sigma = Vec::with_capacity(n);
    for (new_idx, &old_idx) in order.iter().enumerate() {
        sorted_sigma.push(sigma[old_idx]);
        for r in 0..n {
            *left.at_mut(r, new_idx) = ut.at(old_idx, r);
            *right.at_mut(r, new_idx) = vt.at(old_idx, r);
        }
    }
    sigma = sorted_sigma;

    Ok(SvdResult {
        left_vectors: left,
        singular_values: sigma,
        right_vectors: right,
    })
}

fn rotate_rows(m: &mut DenseMat, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols;
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let (head, tail) = m.data.split_at_mut(hi * cols);
    let row_lo = &mut head[lo * cols..(lo + 1) * cols];
    let row_hi = &mut tail[..cols];
    let (rp, rq) = if p < q { (row_lo, row_hi) } else { (row_hi, row_lo) };
    for k in 0..cols {
        let gp = rp[k];
        let gq = rq[k];
        rp[k] = c * gp - s * gq;
        rq[k] = s * gp + c * gq;
    }
}

/// Finds a unit vector orthogonal to every already-filled row of `ut`
/// except row `skip` itself, used to complete a rank-deficient basis.
fn orthonormal_completion(ut: &DenseMat, skip: usize, n: usize) -> Vec<f64> {
    for basis in 0..n {
        let mut v = vec![0.0; n];
        v[basis] = 1.0;
        for r in 0..n {
            if r == skip {
                continue;
            }
            let row = ut.row(r);
            let proj = dot(row, &v);
            axpy(&mut v, row, -proj);
        }
        let nv = norm(&v);
        if nv > 0.5 {
            for x in &mut v {
                *x /= nv;
            }
            return v;
        }
    }
    unreachable!("orthonormal completion always succeeds for dimension count reasons")
}

/// Extreme singular values of U with their left singular vectors.
#[derive(Debug, Clone)]
pub struct SingularExtremes {
    pub sigma_max: f64,
    pub u_max: Vec<f64>,
    pub sigma_min: f64,
    pub u_min: Vec<f64>,
}

/// Power iteration for the largest and smallest singular values of `u`.
///
/// `u_inv` must be a current inverse of `u`; the smallest value is found by
/// iterating on the inverse's Gram matrix. Both returned vectors are unit
/// left singular vectors of `u`. The estimates are one-sided: `sigma_max`
/// never exceeds the true largest value and `sigma_min` never falls below
/// the true smallest (Rayleigh-quotient bounds), so a scan-and-fix loop
/// never overshoots the true spectrum.
pub fn power_iteration_extremes(
    u: &DenseMat,
    u_inv: &DenseMat,
    iters: usize,
) -> Result<SingularExtremes> {
    if u.rows != u.cols {
        return Err(Error::DimMismatch {
            op: "power_iteration_extremes",
            lhs: (u.rows, u.cols),
            rhs: (u.cols, u.rows),
        });
    }
    assert!(iters >= 1, "power iteration needs at least one step");
    let n = u.rows;

    // Fixed pseudo-random start vector: deterministic, and in generic
    // position so it is never orthogonal to a dominant direction.
    let start = deterministic_unit_vector(n);

    // Largest: iterate x <- U U^T x. The iterate stays a left direction.
    let mut x = start.clone();
    for _ in 0..iters {
        let y = u.matvec_t(&x); // U^T x
        let z = u.matvec(&y); // U U^T x
        let nz = norm(&z);
        if nz <= 1e-300 {
            return Err(Error::ZeroMatrix);
        }
        x = z;
        let inv = 1.0 / nz;
        for v in &mut x {
            *v *= inv;
        }
    }
    let sigma_max = norm(&u.matvec_t(&x));
    let u_max = x;

    // Smallest: iterate x <- U^-T U^-1 x, the Gram matrix of U^-T, whose
    // dominant eigenvector is U's left singular vector for sigma_min.
    let mut x = start;
    for _ in 0..iters {
        let y = u_inv.matvec(&x); // U^-1 x
        let z = u_inv.matvec_t(&y); // U^-T U^-1 x
        let nz = norm(&z);
        if nz <= 1e-300 {
            return Err(Error::ZeroMatrix);
        }
        x = z;
        let inv = 1.0 / nz;
        for v in &mut x {
            *v *= inv;
        }
    }
    let inv_norm = norm(&u_inv.matvec(&x));
    if inv_norm <= 1e-300 {
        return Err(Error::ZeroMatrix);
    }
    let sigma_min = 1.0 / inv_norm;
    let u_min = x;

    Ok(SingularExtremes { sigma_max, u_max, sigma_min, u_min })
}

fn deterministic_unit_vector(n: usize) -> Vec<f64> {
    // splitmix64 stream from a fixed seed, mapped into [-1, 1].
    let mut state: u64 = 0x9e3779b97f4a7c15;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z as f64 / u64::MAX as f64) * 2.0 - 1.0
        })
        .collect();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    v
}
