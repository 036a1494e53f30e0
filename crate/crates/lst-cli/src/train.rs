//! Toy trainer: a small MLP with the sparse input layer and either output
//! implementation, on synthetic one-hot data or an n-gram text corpus.
//!
//! Log format: a `epoch,iteration,mean_loss` header, then one line per
//! minibatch with the batch's mean squared-error loss. Epochs revisit the
//! same example sequence in the same order (no shuffling), so runs are fully
//! deterministic for a fixed seed and twin runs differing only in the output
//! implementation can be compared line by line.
//!
//! Synthetic mode draws `examples` one-hot pairs over a `vocab_cap`-sized
//! space (a random association task; the n-gram window setting does not
//! apply). Text mode ingests the file at the given path with
//! [`crate::ngram::ingest_ngrams`] and trains on the positional-block
//! encoding, whose input dimension is `(n - 1) * vocab_cap`.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use lst_core::{
    generate_synthetic, KSparseMat, MlpStack, Nonlin, OutputKind, OutputLayer, SquaredError,
    StabilizeConfig, SyntheticSpec, ValueDist,
};

use crate::checkpoint;
use crate::ngram;

#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic,
    Path(PathBuf),
}

#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub data: DataSource,
    pub ngram_n: usize,
    pub vocab_cap: usize,
    /// Synthetic example count; ignored for text data.
    pub examples: usize,
    /// Hidden-layer widths; the output handle dimension is the last width
    /// plus the constant-1 bias row.
    pub layers: Vec<usize>,
    pub output: OutputKind,
    pub eta: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Override the factored layer's stabilization cadence (updates between
    /// checks); `None` keeps the default.
    pub stabilize_every: Option<usize>,
    pub checkpoint: Option<PathBuf>,
}

fn build_batches(spec: &TrainSpec) -> Result<(usize, Vec<(KSparseMat, KSparseMat)>)> {
    match &spec.data {
        DataSource::Synthetic => {
            let stream = generate_synthetic(&SyntheticSpec {
                dim_in: spec.vocab_cap,
                dim_out: spec.vocab_cap,
                d_hint: spec.layers.last().copied().unwrap_or(1) + 1,
                k: 1,
                m: spec.batch,
                examples: spec.examples,
                seed: spec.seed.wrapping_add(0xA5A5_5A5A),
                values: ValueDist::Unit,
            });
            Ok((spec.vocab_cap, stream.collect()))
        }
        DataSource::Path(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading corpus {}", path.display()))?;
            let ds = ngram::ingest_ngrams(&text, spec.ngram_n, spec.vocab_cap)?;
            let dim_in = ds.input_dim();
            let mut batches = Vec::new();
            for chunk in ds.examples.chunks(spec.batch) {
                let mut xs = Vec::with_capacity(chunk.len());
                let mut ys = Vec::with_capacity(chunk.len());
                for (ctx, target) in chunk {
                    let (x, y) = ngram::encode_example(ctx, *target, ds.vocab_cap)?;
                    xs.push(x);
                    ys.push(y);
                }
                batches.push((
                    KSparseMat::from_columns(dim_in, xs)?,
                    KSparseMat::from_columns(ds.vocab_cap, ys)?,
                ));
            }
            Ok((dim_in, batches))
        }
    }
}

/// Run the configured training job, streaming log lines to `log`; returns
/// the final network (already checkpointed if a path was given).
pub fn run_train(spec: &TrainSpec, log: &mut dyn Write) -> Result<MlpStack> {
    anyhow::ensure!(spec.batch >= 1, "batch size must be at least 1");
    anyhow::ensure!(!spec.layers.is_empty(), "at least one hidden width required");
    let (dim_in, batches) = build_batches(spec)?;

    let mut net = MlpStack::new(
        dim_in,
        &spec.layers,
        spec.vocab_cap,
        Nonlin::Tanh,
        spec.output,
        spec.seed,
    )?;
    if let Some(every) = spec.stabilize_every {
        if let OutputLayer::Factored(layer) = net.output_mut() {
            layer.set_config(StabilizeConfig { n_check: every, ..StabilizeConfig::default() });
        }
    }

    writeln!(log, "epoch,iteration,mean_loss")?;
    for epoch in 1..=spec.epochs {
        for (it, (x, y)) in batches.iter().enumerate() {
            let loss = net.train_step(x, y, spec.eta, &SquaredError)?;
            writeln!(log, "{},{},{}", epoch, it + 1, loss / x.n_cols() as f64)?;
        }
    }

    if let Some(path) = &spec.checkpoint {
        checkpoint::save_model(path, &net)?;
    }
    Ok(net)
}

/// Command wrapper: exit 0 on success; errors propagate (exit 1).
pub fn cmd_train(spec: &TrainSpec, log: &mut dyn Write) -> Result<i32> {
    run_train(spec, log)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> TrainSpec {
        TrainSpec {
            data: DataSource::Synthetic,
            ngram_n: 2,
            vocab_cap: 60,
            examples: 400,
            layers: vec![8],
            output: OutputKind::Factored,
            eta: 0.01,
            epochs: 2,
            batch: 8,
            seed: 11,
            stabilize_every: None,
            checkpoint: None,
        }
    }

    fn epoch_means(log: &str) -> Vec<f64> {
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for line in log.lines().skip(1) {
            let mut parts = line.split(',');
            let epoch: usize = parts.next().unwrap().parse().unwrap();
            let _it: usize = parts.next().unwrap().parse().unwrap();
            let loss: f64 = parts.next().unwrap().parse().unwrap();
            if sums.len() < epoch {
                sums.resize(epoch, (0.0, 0));
            }
            sums[epoch - 1].0 += loss;
            sums[epoch - 1].1 += 1;
        }
        sums.into_iter().map(|(s, n)| s / n as f64).collect()
    }

    #[test]
    fn mean_loss_decreases_between_epochs_on_synthetic_data() {
        let mut log = Vec::new();
        run_train(&base_spec(), &mut log).unwrap();
        let log = String::from_utf8(log).unwrap();
        assert!(log.starts_with("epoch,iteration,mean_loss\n"));
        let means = epoch_means(&log);
        assert_eq!(means.len(), 2);
        assert!(
            means[1] < means[0],
            "epoch means must strictly decrease: {} vs {}",
            means[0],
            means[1]
        );
    }

    #[test]
    fn zero_epochs_checkpoint_equals_initialization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("init.lstc");
        let mut spec = base_spec();
        spec.epochs = 0;
        spec.checkpoint = Some(path.clone());
        let mut log = Vec::new();
        run_train(&spec, &mut log).unwrap();
        assert_eq!(String::from_utf8(log).unwrap(), "epoch,iteration,mean_loss\n");

        let fresh = MlpStack::new(
            spec.vocab_cap,
            &spec.layers,
            spec.vocab_cap,
            Nonlin::Tanh,
            spec.output,
            spec.seed,
        )
        .unwrap();
        let mut expected = Vec::new();
        checkpoint::write_model(&mut expected, &fresh).unwrap();
        let written = std::fs::read(&path).unwrap();
        assert_eq!(written, expected, "zero-epoch checkpoint must equal the initialization");
    }

    #[test]
    fn text_corpus_trains_and_logs_every_batch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        for _ in 0..30 {
            writeln!(f, "the cat sat on the mat").unwrap();
        }
        drop(f);

        let spec = TrainSpec {
            data: DataSource::Path(path),
            ngram_n: 3,
            vocab_cap: 8,
            examples: 0,
            layers: vec![6],
            output: OutputKind::Factored,
            eta: 0.01,
            epochs: 1,
            batch: 10,
            seed: 3,
            stabilize_every: Some(50),
            checkpoint: None,
        };
        let mut log = Vec::new();
        run_train(&spec, &mut log).unwrap();
        let log = String::from_utf8(log).unwrap();
        // 30 lines x 4 windows of width 3 = 120 examples -> 12 batches of 10.
        assert_eq!(log.lines().count(), 1 + 12);
        for line in log.lines().skip(1) {
            let loss: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!(loss.is_finite() && loss >= 0.0);
        }
    }

    #[test]
    fn logs_are_deterministic_for_a_fixed_seed() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_train(&base_spec(), &mut a).unwrap();
        run_train(&base_spec(), &mut b).unwrap();
        assert_eq!(a, b);
    }
}
