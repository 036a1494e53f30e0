//! Deterministic generators and tolerance helpers shared by the unit tests.

use alloc::vec::Vec;

use crate::mat::DenseMat;

/// LCG step shared by the generators below.
fn lcg_step(s: &mut u64) -> f64 {
    *s = s.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
    ((*s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

/// Deterministic matrix with entries in [-1, 1].
pub fn lcg_mat(rows: usize, cols: usize, seed: u64) -> DenseMat {
    let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    DenseMat::from_fn(rows, cols, |_, _| lcg_step(&mut s))
}

/// Deterministic vector with entries in [-1, 1].
pub fn lcg_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    (0..n).map(|_| lcg_step(&mut s)).collect()
}

/// Relative closeness with an absolute floor of 1.
pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(a.abs()).max(1.0)
}

/// Relative Frobenius distance, floored to avoid division by ~0.
pub fn rel_frob_diff(a: &DenseMat, b: &DenseMat) -> f64 {
    let mut diff = a.clone();
    diff.add_scaled(b, -1.0).unwrap();
    diff.frob_norm() / b.frob_norm().max(1e-30)
}

/// Relative max-abs distance between vectors, floored at 1.
pub fn rel_vec_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1e-30f64, |m, v| m.max(v.abs())).max(1.0);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Test-only spherical loss that exercises every gradient path, including
/// the sum-of-outputs term squared error never touches:
/// `l = q + s^2 + sum_k a_k t_k`.
#[derive(Debug, Clone, Copy)]
pub struct QSumLoss;

impl crate::loss::SphericalLoss for QSumLoss {
    fn eval(&self, q: f64, s: f64, _support: &[usize], a: &[f64], t: &[f64]) -> f64 {
        q + s * s + a.iter().zip(t).map(|(x, y)| x * y).sum::<f64>()
    }

    fn grad_q(&self, _q: f64, _s: f64, _support: &[usize], _a: &[f64], _t: &[f64]) -> f64 {
        1.0
    }

    fn grad_s(&self, _q: f64, s: f64, _support: &[usize], _a: &[f64], _t: &[f64]) -> f64 {
        2.0 * s
    }

    fn grad_a(
        &self,
        _q: f64,
        _s: f64,
        _support: &[usize],
        _a: &[f64],
        t: &[f64],
        out: &mut [f64],
    ) {
        out.copy_from_slice(t);
    }

    fn uses_sum_of_outputs(&self) -> bool {
        true
    }
}

/// Deterministic random K-sparse matrix: distinct indices per column,
/// values in [-1, 1].
pub fn lcg_sparse(dim_rows: usize, m: usize, k: usize, seed: u64) -> crate::sparse::KSparseMat {
    let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(17);
    let mut step = || {
        s = s.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        s
    };
    let cols = (0..m)
        .map(|_| {
            let mut indices = Vec::new();
            while indices.len() < k {
                let i = (step() % dim_rows as u64) as usize;
                if !indices.contains(&i) {
                    indices.push(i);
                }
            }
            let values: Vec<f64> = (0..k)
                .map(|_| (step() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
                .collect();
            (indices, values)
        })
        .collect();
    crate::sparse::KSparseMat::from_parts(dim_rows, cols).unwrap()
}
