//! Binary checkpoint containers. All integers are 64-bit little-endian, all
//! floats 64-bit little-endian, all matrices row-major; round-trips are
//! bit-exact.
//!
//! Layouts (version 1):
//! - factored layer, magic `LSTF`: header {magic, version, D, d}, then
//!   V (D x d), U (d x d), omega (d), Q (d x d), U_inv_T (d x d), wbar (d).
//! - naive layer, magic `LSTN`: header {magic, version, D, d}, then W (D x d).
//! - full network, magic `LSTC`: header {magic, version, dim_in, dim_out,
//!   n_hidden}, widths (n_hidden + 1 of them: input-layer output width, then
//!   each hidden output width), one nonlinearity tag byte for the input layer
//!   plus one per hidden layer (0 = tanh, 1 = identity), then the input
//!   layer's W1 (dim_in x widths[0]) and b1, each hidden layer's W and b, and
//!   finally the output layer as an embedded `LSTF` or `LSTN` block.
//! - n-gram dataset cache, magic `LSTD`: header {magic, version, n,
//!   vocab_cap, example count}, then per example `n` ids as 32-bit
//!   little-endian (`n - 1` context ids followed by the target id).
//!
//! The stabilizer configuration is a runtime policy, not model state, so it
//! is not serialized; loaded factored layers carry the default configuration.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use lst_core::{
    DenseMat, FactoredOutputLayer, HiddenLayer, MlpStack, NaiveOutputLayer, Nonlin, OutputLayer,
    SparseInputLayer, StabilizeConfig,
};

pub const FACTORED_MAGIC: &[u8; 4] = b"LSTF";
pub const NAIVE_MAGIC: &[u8; 4] = b"LSTN";
pub const MODEL_MAGIC: &[u8; 4] = b"LSTC";
pub const DATASET_MAGIC: &[u8; 4] = b"LSTD";
pub const FORMAT_VERSION: u64 = 1;

fn write_u64(w: &mut dyn Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u64(r: &mut dyn Read) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn write_f64_slice(w: &mut dyn Write, xs: &[f64]) -> io::Result<()> {
    for &x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64_vec(r: &mut dyn Read, len: usize) -> io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn read_dense(r: &mut dyn Read, rows: usize, cols: usize) -> Result<DenseMat> {
    let data = read_f64_vec(r, rows * cols)?;
    Ok(DenseMat::from_vec(rows, cols, data)?)
}

fn expect_header(r: &mut dyn Read, magic: &[u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != magic {
        bail!(
            "bad checkpoint magic: expected {:?}, found {:?}",
            core::str::from_utf8(magic).unwrap(),
            got
        );
    }
    let version = read_u64(r)?;
    if version != FORMAT_VERSION {
        bail!("unsupported checkpoint version {version} (expected {FORMAT_VERSION})");
    }
    Ok(())
}

pub fn write_factored(w: &mut dyn Write, layer: &FactoredOutputLayer) -> io::Result<()> {
    w.write_all(FACTORED_MAGIC)?;
    write_u64(w, FORMAT_VERSION)?;
    write_u64(w, layer.dim_out() as u64)?;
    write_u64(w, layer.d() as u64)?;
    write_f64_slice(w, layer.v().data())?;
    write_f64_slice(w, layer.u().data())?;
    write_f64_slice(w, layer.omega())?;
    write_f64_slice(w, layer.q().data())?;
    write_f64_slice(w, layer.u_inv_t().data())?;
    write_f64_slice(w, layer.wbar())
}

pub fn read_factored(r: &mut dyn Read) -> Result<FactoredOutputLayer> {
    expect_header(r, FACTORED_MAGIC)?;
    let dim_out = read_u64(r)? as usize;
    let d = read_u64(r)? as usize;
    let v = read_dense(r, dim_out, d)?;
    let u = read_dense(r, d, d)?;
    let omega = read_f64_vec(r, d)?;
    let q = read_dense(r, d, d)?;
    let u_inv_t = read_dense(r, d, d)?;
    let wbar = read_f64_vec(r, d)?;
    Ok(FactoredOutputLayer::from_parts(
        v,
        u,
        omega,
        q,
        u_inv_t,
        wbar,
        StabilizeConfig::default(),
    )?)
}

pub fn write_naive(w: &mut dyn Write, layer: &NaiveOutputLayer) -> io::Result<()> {
    w.write_all(NAIVE_MAGIC)?;
    write_u64(w, FORMAT_VERSION)?;
    write_u64(w, layer.dim_out() as u64)?;
    write_u64(w, layer.d() as u64)?;
    write_f64_slice(w, layer.w().data())
}

pub fn read_naive(r: &mut dyn Read) -> Result<NaiveOutputLayer> {
    expect_header(r, NAIVE_MAGIC)?;
    let dim_out = read_u64(r)? as usize;
    let d = read_u64(r)? as usize;
    Ok(NaiveOutputLayer::new(read_dense(r, dim_out, d)?))
}

fn nonlin_tag(n: Nonlin) -> u8 {
    match n {
        Nonlin::Tanh => 0,
        Nonlin::Identity => 1,
    }
}

fn nonlin_from_tag(tag: u8) -> Result<Nonlin> {
    match tag {
        0 => Ok(Nonlin::Tanh),
        1 => Ok(Nonlin::Identity),
        other => bail!("unknown nonlinearity tag {other}"),
    }
}

pub fn write_model(w: &mut dyn Write, net: &MlpStack) -> io::Result<()> {
    let input = net.input();
    let hidden = net.hidden();
    w.write_all(MODEL_MAGIC)?;
    write_u64(w, FORMAT_VERSION)?;
    write_u64(w, input.dim_in() as u64)?;
    write_u64(w, net.output().dim_out() as u64)?;
    write_u64(w, hidden.len() as u64)?;
    write_u64(w, input.dim_out() as u64)?;
    for layer in hidden {
        write_u64(w, layer.w.cols() as u64)?;
    }
    w.write_all(&[nonlin_tag(net.input_nonlin())])?;
    for layer in hidden {
        w.write_all(&[nonlin_tag(layer.nonlin)])?;
    }
    write_f64_slice(w, input.w1.data())?;
    write_f64_slice(w, &input.b1)?;
    for layer in hidden {
        write_f64_slice(w, layer.w.data())?;
        write_f64_slice(w, &layer.b)?;
    }
    match net.output() {
        OutputLayer::Factored(layer) => write_factored(w, layer),
        OutputLayer::Naive(layer) => write_naive(w, layer),
    }
}

pub fn read_model(r: &mut dyn Read) -> Result<MlpStack> {
    expect_header(r, MODEL_MAGIC)?;
    let dim_in = read_u64(r)? as usize;
    let dim_out = read_u64(r)? as usize;
    let n_hidden = read_u64(r)? as usize;
    let mut widths = Vec::with_capacity(n_hidden + 1);
    for _ in 0..n_hidden + 1 {
        widths.push(read_u64(r)? as usize);
    }
    let mut tags = vec![0u8; n_hidden + 1];
    r.read_exact(&mut tags)?;
    let input_nonlin = nonlin_from_tag(tags[0])?;

    let w1 = read_dense(r, dim_in, widths[0])?;
    let b1 = read_f64_vec(r, widths[0])?;
    let input = SparseInputLayer::new(w1, b1)?;
    let mut hidden = Vec::with_capacity(n_hidden);
    for i in 0..n_hidden {
        let w = read_dense(r, widths[i], widths[i + 1])?;
        let b = read_f64_vec(r, widths[i + 1])?;
        hidden.push(HiddenLayer { w, b, nonlin: nonlin_from_tag(tags[i + 1])? });
    }

    // The embedded block's own magic says which output implementation this is.
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    let output = match &magic {
        m if m == FACTORED_MAGIC => {
            let body = read_after_magic_factored(r)?;
            OutputLayer::Factored(body)
        }
        m if m == NAIVE_MAGIC => {
            let body = read_after_magic_naive(r)?;
            OutputLayer::Naive(body)
        }
        other => bail!("unknown output-layer magic {other:?}"),
    };
    if output.dim_out() != dim_out {
        bail!(
            "output dimension mismatch: manifest says {dim_out}, embedded layer has {}",
            output.dim_out()
        );
    }
    Ok(MlpStack::from_parts(input, input_nonlin, hidden, output)?)
}

fn read_after_magic_factored(r: &mut dyn Read) -> Result<FactoredOutputLayer> {
    let version = read_u64(r)?;
    if version != FORMAT_VERSION {
        bail!("unsupported checkpoint version {version}");
    }
    let dim_out = read_u64(r)? as usize;
    let d = read_u64(r)? as usize;
    let v = read_dense(r, dim_out, d)?;
    let u = read_dense(r, d, d)?;
    let omega = read_f64_vec(r, d)?;
    let q = read_dense(r, d, d)?;
    let u_inv_t = read_dense(r, d, d)?;
    let wbar = read_f64_vec(r, d)?;
    Ok(FactoredOutputLayer::from_parts(
        v,
        u,
        omega,
        q,
        u_inv_t,
        wbar,
        StabilizeConfig::default(),
    )?)
}

fn read_after_magic_naive(r: &mut dyn Read) -> Result<NaiveOutputLayer> {
    let version = read_u64(r)?;
    if version != FORMAT_VERSION {
        bail!("unsupported checkpoint version {version}");
    }
    let dim_out = read_u64(r)? as usize;
    let d = read_u64(r)? as usize;
    Ok(NaiveOutputLayer::new(read_dense(r, dim_out, d)?))
}

pub fn save_model(path: &Path, net: &MlpStack) -> Result<()> {
    let mut file = BufWriter::new(
        File::create(path).with_context(|| format!("creating checkpoint {}", path.display()))?,
    );
    write_model(&mut file, net)?;
    file.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpStack> {
    let mut file = BufReader::new(
        File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?,
    );
    read_model(&mut file)
}

/// Write the id-encoded examples of an n-gram dataset.
pub fn write_dataset_cache(
    w: &mut dyn Write,
    n: usize,
    vocab_cap: usize,
    examples: &[(Vec<u32>, u32)],
) -> io::Result<()> {
    w.write_all(DATASET_MAGIC)?;
    write_u64(w, FORMAT_VERSION)?;
    write_u64(w, n as u64)?;
    write_u64(w, vocab_cap as u64)?;
    write_u64(w, examples.len() as u64)?;
    for (ctx, target) in examples {
        debug_assert_eq!(ctx.len(), n - 1);
        for &id in ctx {
            w.write_all(&id.to_le_bytes())?;
        }
        w.write_all(&target.to_le_bytes())?;
    }
    Ok(())
}

/// Read back `(n, vocab_cap, examples)` from a dataset cache.
#[allow(clippy::type_complexity)]
pub fn read_dataset_cache(r: &mut dyn Read) -> Result<(usize, usize, Vec<(Vec<u32>, u32)>)> {
    expect_header(r, DATASET_MAGIC)?;
    let n = read_u64(r)? as usize;
    let vocab_cap = read_u64(r)? as usize;
    let count = read_u64(r)? as usize;
    if n < 2 {
        bail!("dataset cache declares window width {n} < 2");
    }
    let mut examples = Vec::with_capacity(count);
    let mut buf = [0u8; 4];
    for _ in 0..count {
        let mut ctx = Vec::with_capacity(n - 1);
        for _ in 0..n - 1 {
            r.read_exact(&mut buf)?;
            ctx.push(u32::from_le_bytes(buf));
        }
        r.read_exact(&mut buf)?;
        examples.push((ctx, u32::from_le_bytes(buf)));
    }
    Ok((n, vocab_cap, examples))
}
