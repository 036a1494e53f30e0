//! Update-timing benchmark: factored vs naive output layer across a list of
//! output dimensions D.
//!
//! Each timed sample covers one *complete* minibatch update -- forward
//! products, loss, upstream gradient, parameter update, and bookkeeping --
//! on data generated before the clock starts. The factored update's cost is
//! independent of D except for the K*m touched rows of V; the naive update
//! scales linearly in D. Reported rows are raw per-rep timings; summaries
//! give the median per (impl, D) cell.
//!
//! The default precision is f32 so the D = 800k grid fits comfortably in
//! desk memory (800k x 64 x 4B is about 205 MB for V or W). The core crate
//! is f64-only, so this module carries f32 mirrors of both minibatch
//! squared-error updates; a unit test pins each mirror to the f64 core
//! implementation on shared data. The f32 factored mirror always tracks the
//! inverse by direct d x d inversion (never the m x m solve): the cost class
//! is unchanged and the mirror stays short.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lst_core::{DenseMat, FactoredOutputLayer, KSparseMat, KSparseVec, NaiveOutputLayer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const CSV_HEADER: &str = "impl,D,d,m,K,rep,update_seconds";

/// Learning rate used inside timed updates. Timing is rate-independent; the
/// value only needs to keep repeated updates numerically tame.
const BENCH_ETA: f64 = 1e-3;

/// Constant initial weight entry; lets Q = D*c^2*ones and wbar = D*c be
/// written down analytically instead of paying an O(D d^2) setup product.
const INIT_FILL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplTag {
    Naive,
    Factored,
}

impl ImplTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImplTag::Naive => "naive",
            ImplTag::Factored => "factored",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(ImplTag::Naive),
            "factored" => Ok(ImplTag::Factored),
            other => bail!("unknown impl tag {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub impl_tag: ImplTag,
    pub dim_out: usize,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub rep: usize,
    pub update_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Exact-header CSV; floats use the shortest round-trippable decimal
    /// form, so `parse_csv(to_csv(r)) == r` bit for bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.impl_tag.as_str(),
                row.dim_out,
                row.d,
                row.m,
                row.k,
                row.rep,
                row.update_seconds
            )
            .expect("string writes cannot fail");
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<BenchReport> {
        let mut lines = text.lines();
        let header = lines.next().context("empty CSV")?;
        if header != CSV_HEADER {
            bail!("bad CSV header {header:?} (expected {CSV_HEADER:?})");
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                bail!("CSV line {}: expected 7 fields, found {}", lineno + 2, fields.len());
            }
            rows.push(BenchRow {
                impl_tag: ImplTag::parse(fields[0])?,
                dim_out: fields[1].parse()?,
                d: fields[2].parse()?,
                m: fields[3].parse()?,
                k: fields[4].parse()?,
                rep: fields[5].parse()?,
                update_seconds: fields[6].parse()?,
            });
        }
        Ok(BenchReport { rows })
    }

    /// Median update time per (impl, D) cell, in first-appearance order.
    pub fn medians(&self) -> Vec<(ImplTag, usize, f64)> {
        let mut cells: Vec<(ImplTag, usize, Vec<f64>)> = Vec::new();
        for row in &self.rows {
            match cells.iter_mut().find(|(t, d, _)| *t == row.impl_tag && *d == row.dim_out) {
                Some((_, _, v)) => v.push(row.update_seconds),
                None => cells.push((row.impl_tag, row.dim_out, vec![row.update_seconds])),
            }
        }
        cells
            .into_iter()
            .map(|(tag, dim, mut v)| {
                v.sort_by(|a, b| a.partial_cmp(b).expect("times are finite"));
                let mid = v.len() / 2;
                let med =
                    if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) };
                (tag, dim, med)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub impl_tag: ImplTag,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub d_list: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub precision: Precision,
    pub warmup: usize,
}

// ---------------------------------------------------------------------------
// f32 kernels. Row-major; the minibatch H is stored transposed (m x d) so
// every hot loop walks contiguous rows.

struct MatF32 {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

/// Allocate with an explicit out-of-memory report naming the offending D.
fn try_vec_f32(len: usize, fill: f32, dim_out: usize) -> Result<Vec<f32>> {
    let mut v = Vec::new();
    if v.try_reserve_exact(len).is_err() {
        bail!("out of memory allocating {len} f32 weights for D = {dim_out}");
    }
    v.resize(len, fill);
    Ok(v)
}

fn try_vec_f64(len: usize, fill: f64, dim_out: usize) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    if v.try_reserve_exact(len).is_err() {
        bail!("out of memory allocating {len} f64 weights for D = {dim_out}");
    }
    v.resize(len, fill);
    Ok(v)
}

impl MatF32 {
    fn zeros(rows: usize, cols: usize) -> Self {
        MatF32 { rows, cols, data: vec![0.0; rows * cols] }
    }

    fn filled(rows: usize, cols: usize, v: f32, dim_out: usize) -> Result<Self> {
        Ok(MatF32 { rows, cols, data: try_vec_f32(rows * cols, v, dim_out)? })
    }

    fn identity(n: usize) -> Self {
        let mut m = MatF32::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    /// A * B, accumulating over rows of B (cache-friendly ikj order).
    fn mul_nn(a: &MatF32, b: &MatF32) -> MatF32 {
        assert_eq!(a.cols, b.rows);
        let mut out = MatF32::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            let arow = a.row(i);
            let orow = out.row_mut(i);
            for (k, &av) in arow.iter().enumerate() {
                let brow = b.row(k);
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        out
    }

    /// A^T * B where A and B have the same row count.
    fn mul_tn(a: &MatF32, b: &MatF32) -> MatF32 {
        assert_eq!(a.rows, b.rows);
        let mut out = MatF32::zeros(a.cols, b.cols);
        for i in 0..a.rows {
            let arow = a.row(i);
            let brow = b.row(i);
            for (k, &av) in arow.iter().enumerate() {
                let orow = out.row_mut(k);
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        out
    }

    /// A * B^T: every output entry is a contiguous row-row dot.
    fn mul_nt(a: &MatF32, b: &MatF32) -> MatF32 {
        assert_eq!(a.cols, b.cols);
        let mut out = MatF32::zeros(a.rows, b.rows);
        for i in 0..a.rows {
            let arow = a.row(i);
            let orow = out.row_mut(i);
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = b.row(j);
                *o = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    /// Gauss-Jordan inverse with partial pivoting.
    fn inverted(&self) -> Result<MatF32> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = MatF32 { rows: n, cols: n, data: self.data.clone() };
        let mut inv = MatF32::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a.at(i, col).abs().partial_cmp(&a.at(j, col).abs()).expect("finite")
                })
                .expect("nonempty range");
            if a.at(pivot, col).abs() < 1e-12 {
                bail!("singular matrix in f32 inversion");
            }
            if pivot != col {
                a.data.swap_chunks(pivot, col, n);
                inv.data.swap_chunks(pivot, col, n);
            }
            let diag = a.at(col, col);
            for x in a.row_mut(col) {
                *x /= diag;
            }
            for x in inv.row_mut(col) {
                *x /= diag;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.at(r, col);
                if factor == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let v = a.at(col, c);
                    *a.row_mut(r).get_mut(c).expect("in range") -= factor * v;
                    let w = inv.at(col, c);
                    *inv.row_mut(r).get_mut(c).expect("in range") -= factor * w;
                }
            }
        }
        Ok(inv)
    }
}

/// Swap two same-length rows inside one flat buffer.
trait SwapChunks {
    fn swap_chunks(&mut self, r1: usize, r2: usize, width: usize);
}

impl SwapChunks for Vec<f32> {
    fn swap_chunks(&mut self, r1: usize, r2: usize, width: usize) {
        for c in 0..width {
            self.swap(r1 * width + c, r2 * width + c);
        }
    }
}

struct SparseColF32 {
    indices: Vec<usize>,
    values: Vec<f32>,
}

/// (Y^T Y)_{ij} over sorted supports, two-pointer merge per pair.
fn sparse_gram_f32(cols: &[SparseColF32]) -> MatF32 {
    let m = cols.len();
    let mut out = MatF32::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let (a, b) = (&cols[i], &cols[j]);
            let mut dot = 0.0f32;
            let (mut p, mut q) = (0, 0);
            while p < a.indices.len() && q < b.indices.len() {
                match a.indices[p].cmp(&b.indices[q]) {
                    core::cmp::Ordering::Less => p += 1,
                    core::cmp::Ordering::Greater => q += 1,
                    core::cmp::Ordering::Equal => {
                        dot += a.values[p] * b.values[q];
                        p += 1;
                        q += 1;
                    }
                }
            }
            *out.row_mut(i).get_mut(j).expect("in range") = dot;
            *out.row_mut(j).get_mut(i).expect("in range") = dot;
        }
    }
    out
}

/// f32 mirror of the factored minibatch squared-error update. State layout
/// matches the core layer (V: D x d, U/Q: d x d, wbar: d); H arrives
/// transposed. The inverse is recomputed directly each step.
struct FactoredF32 {
    v: MatF32,
    u: MatF32,
    q: MatF32,
    wbar: Vec<f32>,
}

impl FactoredF32 {
    fn constant_init(dim_out: usize, d: usize, c: f32) -> Result<Self> {
        Ok(FactoredF32 {
            v: MatF32::filled(dim_out, d, c, dim_out)?,
            u: MatF32::identity(d),
            q: MatF32::filled(d, d, dim_out as f32 * c * c, dim_out)?,
            wbar: vec![dim_out as f32 * c; d],
        })
    }

    /// One full update; returns the batch loss.
    fn update(&mut self, h_t: &MatF32, y: &[SparseColF32], eta: f32) -> Result<f32> {
        let (m, d) = (h_t.rows, h_t.cols);

        // Forward products: h_hat^T = H^T Q (Q symmetric), y_hat^T = (V^T Y)^T U.
        let h_hat_t = MatF32::mul_nn(h_t, &self.q);
        let mut vty_t = MatF32::zeros(m, d);
        for (j, col) in y.iter().enumerate() {
            let row = vty_t.row_mut(j);
            for (&idx, &val) in col.indices.iter().zip(&col.values) {
                for (o, &vv) in row.iter_mut().zip(self.v.row(idx)) {
                    *o += val * vv;
                }
            }
        }
        let y_hat_t = MatF32::mul_nn(&vty_t, &self.u);

        // Loss pieces: M = H^T QH - (P + P^T) + Y^T Y, L = tr(M).
        let m_hat = MatF32::mul_nt(h_t, &h_hat_t);
        let p = MatF32::mul_nt(&y_hat_t, h_t);
        let gram = sparse_gram_f32(y);
        let mut m_mat = MatF32::zeros(m, m);
        let mut loss = 0.0f32;
        for i in 0..m {
            for j in 0..m {
                let v = m_hat.at(i, j) - p.at(i, j) - p.at(j, i) + gram.at(i, j);
                *m_mat.row_mut(i).get_mut(j).expect("in range") = v;
                if i == j {
                    loss += v;
                }
            }
        }

        // Upstream gradient (transposed): 2 (h_hat - y_hat).
        let mut grad_t = MatF32::zeros(m, d);
        for ((g, &hh), &yh) in grad_t.data.iter_mut().zip(&h_hat_t.data).zip(&y_hat_t.data) {
            *g = 2.0 * (hh - yh);
        }

        // U <- U - 2 eta (UH) H^T, inverse recomputed directly.
        let uh_t = MatF32::mul_nt(h_t, &self.u);
        let uhht = MatF32::mul_tn(&uh_t, h_t);
        for (u, &x) in self.u.data.iter_mut().zip(&uhht.data) {
            *u -= 2.0 * eta * x;
        }
        let u_inv = self.u.inverted()?;

        // V rows at the target support: V += 2 eta Y z^T, z = U_new^{-T} H.
        let z_t = MatF32::mul_nn(h_t, &u_inv);
        for (j, col) in y.iter().enumerate() {
            let zrow = z_t.row(j);
            for (&idx, &val) in col.indices.iter().zip(&col.values) {
                let vrow = self.v.row_mut(idx);
                for (vv, &zv) in vrow.iter_mut().zip(zrow) {
                    *vv += 2.0 * eta * val * zv;
                }
            }
        }

        // Q <- Q - eta (H grad^T + grad H^T) + 4 eta^2 (HM) H^T.
        let hg = MatF32::mul_tn(h_t, &grad_t);
        let hm_t = MatF32::mul_tn(&m_mat, h_t);
        let hmht = MatF32::mul_tn(&hm_t, h_t);
        for idx in 0..d * d {
            let (i, j) = (idx / d, idx % d);
            self.q.data[idx] +=
                -eta * (hg.at(i, j) + hg.at(j, i)) + 4.0 * eta * eta * hmht.at(i, j);
        }

        // wbar <- wbar - 2 eta H (H^T wbar - colsums Y).
        let mut t = vec![0.0f32; m];
        for (j, tj) in t.iter_mut().enumerate() {
            let hrow = h_t.row(j);
            let dot: f32 = hrow.iter().zip(&self.wbar).map(|(a, b)| a * b).sum();
            let ysum: f32 = y[j].values.iter().sum();
            *tj = dot - ysum;
        }
        for (j, &tj) in t.iter().enumerate() {
            let hrow = h_t.row(j);
            for (w, &hv) in self.wbar.iter_mut().zip(hrow) {
                *w -= 2.0 * eta * tj * hv;
            }
        }
        Ok(loss)
    }

    /// Materialized W = VU (omega-free path), for pinning tests only.
    #[cfg(test)]
    fn materialize_w(&self) -> MatF32 {
        MatF32::mul_nn(&self.v, &self.u)
    }
}

/// f32 mirror of the naive dense squared-error step.
struct NaiveF32 {
    w: MatF32,
}

impl NaiveF32 {
    fn constant_init(dim_out: usize, d: usize, c: f32) -> Result<Self> {
        Ok(NaiveF32 { w: MatF32::filled(dim_out, d, c, dim_out)? })
    }

    fn update(&mut self, h_t: &MatF32, y: &[SparseColF32], eta: f32) -> Result<f32> {
        let (m, d) = (h_t.rows, h_t.cols);
        let dim_out = self.w.rows;

        // Residual R = WH - Y, loss = |R|^2 (R stored transposed, m x D).
        let mut r_t = MatF32::zeros(m, dim_out);
        for i in 0..dim_out {
            let wrow = self.w.row(i);
            for j in 0..m {
                let hrow = h_t.row(j);
                let dot: f32 = wrow.iter().zip(hrow).map(|(a, b)| a * b).sum();
                *r_t.row_mut(j).get_mut(i).expect("in range") = dot;
            }
        }
        for (j, col) in y.iter().enumerate() {
            let rrow = r_t.row_mut(j);
            for (&idx, &val) in col.indices.iter().zip(&col.values) {
                rrow[idx] -= val;
            }
        }
        let loss: f32 = r_t.data.iter().map(|x| x * x).sum();

        // grad_H = 2 W^T R: accumulate over W's rows (grad stored m x d).
        let mut grad_t = MatF32::zeros(m, d);
        for i in 0..dim_out {
            let wrow = self.w.row(i);
            for j in 0..m {
                let rv = 2.0 * r_t.at(j, i);
                if rv == 0.0 {
                    continue;
                }
                let grow = grad_t.row_mut(j);
                for (g, &wv) in grow.iter_mut().zip(wrow) {
                    *g += rv * wv;
                }
            }
        }

        // W <- W - 2 eta R H^T, fused row-wise (no D x d temporary).
        for i in 0..dim_out {
            for j in 0..m {
                let f = 2.0 * eta * r_t.at(j, i);
                if f == 0.0 {
                    continue;
                }
                let hrow = h_t.row(j);
                let wrow = self.w.row_mut(i);
                for (w, &hv) in wrow.iter_mut().zip(hrow) {
                    *w -= f * hv;
                }
            }
        }
        std::hint::black_box(&grad_t);
        Ok(loss)
    }
}

// ---------------------------------------------------------------------------
// Data generation (outside the timed region).

fn gen_f32_batches(
    n: usize,
    dim_out: usize,
    d: usize,
    m: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(MatF32, Vec<SparseColF32>)> {
    (0..n)
        .map(|_| {
            let mut h_t = MatF32::zeros(m, d);
            for x in &mut h_t.data {
                *x = rng.sample::<f64, _>(StandardNormal) as f32;
            }
            let cols = (0..m)
                .map(|_| {
                    let mut idx = rand::seq::index::sample(rng, dim_out, k).into_vec();
                    idx.sort_unstable();
                    SparseColF32 { indices: idx, values: vec![1.0; k] }
                })
                .collect();
            (h_t, cols)
        })
        .collect()
}

fn gen_f64_batches(
    n: usize,
    dim_out: usize,
    d: usize,
    m: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(DenseMat, KSparseMat)> {
    (0..n)
        .map(|_| {
            let h = DenseMat::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let cols = (0..m)
                .map(|_| {
                    let mut idx = rand::seq::index::sample(rng, dim_out, k).into_vec();
                    idx.sort_unstable();
                    KSparseVec::new(dim_out, idx, vec![1.0; k]).expect("valid sparse column")
                })
                .collect();
            (h, KSparseMat::from_columns(dim_out, cols).expect("valid sparse batch"))
        })
        .collect()
}

fn factored_f64_constant_init(dim_out: usize, d: usize) -> Result<FactoredOutputLayer> {
    let c = INIT_FILL;
    let v = DenseMat::from_vec(dim_out, d, try_vec_f64(dim_out * d, c, dim_out)?)?;
    let q = DenseMat::from_fn(d, d, |_, _| dim_out as f64 * c * c);
    Ok(FactoredOutputLayer::from_parts(
        v,
        DenseMat::identity(d),
        vec![0.0; d],
        q,
        DenseMat::identity(d),
        vec![dim_out as f64 * c; d],
        lst_core::StabilizeConfig::default(),
    )?)
}

/// Time `spec.reps` updates per D after `spec.warmup` untimed ones.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    let total = spec.warmup + spec.reps;
    for &dim_out in &spec.d_list {
        if spec.k > dim_out {
            bail!("K = {} exceeds D = {dim_out}", spec.k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ dim_out as u64);
        match spec.precision {
            Precision::F32 => {
                let batches = gen_f32_batches(total, dim_out, spec.d, spec.m, spec.k, &mut rng);
                let eta = BENCH_ETA as f32;
                match spec.impl_tag {
                    ImplTag::Factored => {
                        let mut layer =
                            FactoredF32::constant_init(dim_out, spec.d, INIT_FILL as f32)?;
                        time_updates(spec, dim_out, &mut report, &batches, |(h, y)| {
                            layer.update(h, y, eta).map(|l| l as f64)
                        })?;
                    }
                    ImplTag::Naive => {
                        let mut layer = NaiveF32::constant_init(dim_out, spec.d, INIT_FILL as f32)?;
                        time_updates(spec, dim_out, &mut report, &batches, |(h, y)| {
                            layer.update(h, y, eta).map(|l| l as f64)
                        })?;
                    }
                }
            }
            Precision::F64 => {
                let batches = gen_f64_batches(total, dim_out, spec.d, spec.m, spec.k, &mut rng);
                match spec.impl_tag {
                    ImplTag::Factored => {
                        let mut layer = factored_f64_constant_init(dim_out, spec.d)?;
                        time_updates(spec, dim_out, &mut report, &batches, |(h, y)| {
                            let (l, g) = layer.minibatch_mse_update(h, y, BENCH_ETA)?;
                            std::hint::black_box(&g);
                            Ok(l)
                        })?;
                    }
                    ImplTag::Naive => {
                        let w = DenseMat::from_vec(
                            dim_out,
                            spec.d,
                            try_vec_f64(dim_out * spec.d, INIT_FILL, dim_out)?,
                        )?;
                        let mut layer = NaiveOutputLayer::new(w);
                        time_updates(spec, dim_out, &mut report, &batches, |(h, y)| {
                            let (l, g) = layer.naive_mse_step(h, y, BENCH_ETA)?;
                            std::hint::black_box(&g);
                            Ok(l)
                        })?;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Shared warmup-then-time loop; `step` runs one full update on one batch.
fn time_updates<B>(
    spec: &BenchSpec,
    dim_out: usize,
    report: &mut BenchReport,
    batches: &[B],
    mut step: impl FnMut(&B) -> Result<f64>,
) -> Result<()> {
    for batch in &batches[..spec.warmup] {
        std::hint::black_box(step(batch)?);
    }
    for (rep, batch) in batches[spec.warmup..].iter().enumerate() {
        let start = Instant::now();
        let loss = step(batch)?;
        let dt = start.elapsed().as_secs_f64();
        std::hint::black_box(loss);
        report.rows.push(BenchRow {
            impl_tag: spec.impl_tag,
            dim_out,
            d: spec.d,
            m: spec.m,
            k: spec.k,
            rep,
            update_seconds: dt,
        });
    }
    Ok(())
}

/// Run the benchmark, write CSV to `csv_out`, and median summaries to
/// `summary`.
pub fn cmd_bench(
    spec: &BenchSpec,
    csv_out: &mut dyn Write,
    summary: &mut dyn Write,
) -> Result<i32> {
    let report = run_bench(spec)?;
    csv_out.write_all(report.to_csv().as_bytes())?;
    for (tag, dim, median) in report.medians() {
        writeln!(summary, "median impl={} D={} update_seconds={}", tag.as_str(), dim, median)?;
    }
    Ok(0)
}
