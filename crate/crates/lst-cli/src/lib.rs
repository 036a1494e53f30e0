//! Command-line front end for the factored output layer.
//!
//! Subcommands:
//! - `equivalence`: run factored and naive twins on identical synthetic data
//!   and report per-step/overall deviations (exit 0 iff within tolerance).
//! - `bench`: time complete output-layer updates across a list of output
//!   dimensions D, emitting raw per-rep CSV plus median summaries.
//! - `train`: fit a small MLP on synthetic or n-gram text data with either
//!   output implementation, logging `epoch,iteration,mean_loss` lines.
//! - `stabilize-demo`: drive U ill-conditioned on purpose, stabilize, and
//!   report condition numbers and W drift.
//!
//! Exit codes: 0 success, 1 criterion/tolerance failure or runtime error,
//! 2 usage error. All commands are deterministic for a fixed seed except
//! the wall-clock timing fields of `bench`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

pub mod bench;
pub mod checkpoint;
pub mod equivalence;
pub mod ngram;
pub mod stabdemo;
pub mod train;

use bench::{BenchSpec, ImplTag, Precision};
use equivalence::{EquivLoss, EquivSpec};
use stabdemo::StabDemoSpec;
use train::{DataSource, TrainSpec};

#[derive(Parser, Debug)]
#[command(name = "lst", version, about = "Exact D-free output-layer updates: equivalence, benchmarks, training, stabilization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LossFlag {
    /// Dedicated squared-error entry points.
    Mse,
    /// General spherical path instantiated with squared error.
    SphericalMse,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ImplFlag {
    Naive,
    Factored,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrecisionFlag {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OutputFlag {
    Factored,
    Naive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StrategyFlag {
    #[value(name = "full_svd")]
    FullSvd,
    #[value(name = "power_scan")]
    PowerScan,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Factored vs naive twin trajectories on identical data.
    Equivalence {
        /// Output dimension.
        #[arg(long = "D")]
        dim_out: usize,
        /// Input (handle) dimension of the output layer.
        #[arg(long)]
        d: usize,
        /// Minibatch width.
        #[arg(long)]
        m: usize,
        /// Nonzeros per target column.
        #[arg(long = "K")]
        k: usize,
        /// Number of minibatch updates.
        #[arg(long)]
        steps: usize,
        /// Learning rate.
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "mse")]
        loss: LossFlag,
        /// Maximum allowed deviation (W, loss, and gradient alike).
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Time complete output-layer updates across output dimensions.
    Bench {
        #[arg(long = "impl", value_enum)]
        impl_tag: ImplFlag,
        #[arg(long, default_value_t = 64)]
        d: usize,
        #[arg(long, default_value_t = 128)]
        m: usize,
        #[arg(long = "K", default_value_t = 1)]
        k: usize,
        /// Comma-separated output dimensions, e.g. 50000,200000,800000.
        #[arg(long = "D-list", value_delimiter = ',', required = true, num_args = 1..)]
        d_list: Vec<usize>,
        /// Timed updates per D.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "f32")]
        precision: PrecisionFlag,
        /// Untimed updates per D before the clock starts.
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a small MLP on synthetic or n-gram text data.
    Train {
        /// `synthetic` or a path to a UTF-8 corpus (one document per line).
        #[arg(long, default_value = "synthetic")]
        data: String,
        /// N-gram window width for text data.
        #[arg(long = "ngram", default_value_t = 2)]
        ngram_n: usize,
        /// Vocabulary cap D (id space including the unknown id 0).
        #[arg(long = "vocab-cap", default_value_t = 500)]
        vocab_cap: usize,
        /// Synthetic example count (ignored for text data).
        #[arg(long, default_value_t = 2000)]
        examples: usize,
        /// Comma-separated hidden widths, e.g. 32,16.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        layers: Vec<usize>,
        #[arg(long, value_enum, default_value = "factored")]
        output: OutputFlag,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        /// Minibatch width.
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Updates between stabilization checks of the factored layer.
        #[arg(long = "stabilize-every")]
        stabilize_every: Option<usize>,
        /// Write the final model checkpoint here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Drive U ill-conditioned, stabilize, report condition and W drift.
    StabilizeDemo {
        #[arg(long)]
        d: usize,
        /// Aggressive online updates to run before stabilizing.
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long = "eta-large", default_value_t = 0.3)]
        eta_large: f64,
        #[arg(long, value_enum, default_value = "power_scan")]
        strategy: StrategyFlag,
    },
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    2
}

/// Parse args and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version print to stdout and exit 0; real parse errors are
            // usage errors (exit 2).
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    let stdout = std::io::stdout();
    match command {
        Command::Equivalence { dim_out, d, m, k, steps, eta, seed, loss, tol } => {
            if dim_out == 0 || d == 0 || m == 0 {
                return Ok(usage_error("--D, --d, and --m must be at least 1"));
            }
            if k > dim_out {
                return Ok(usage_error("--K cannot exceed --D"));
            }
            if eta.is_nan() || eta < 0.0 || tol.is_nan() || tol < 0.0 {
                return Ok(usage_error("--eta and --tol must be nonnegative"));
            }
            let spec = EquivSpec {
                dim_out,
                d,
                m,
                k,
                steps,
                eta,
                seed,
                loss: match loss {
                    LossFlag::Mse => EquivLoss::Mse,
                    LossFlag::SphericalMse => EquivLoss::SphericalMse,
                },
            };
            equivalence::cmd_equivalence(&spec, tol, &mut stdout.lock())
        }
        Command::Bench { impl_tag, d, m, k, d_list, reps, seed, precision, warmup, out } => {
            if d == 0 || m == 0 || k == 0 {
                return Ok(usage_error("--d, --m, and --K must be at least 1"));
            }
            if reps == 0 {
                return Ok(usage_error("--reps must be at least 1"));
            }
            if let Some(&small) = d_list.iter().find(|&&dim| k > dim) {
                return Ok(usage_error(&format!("--K {k} exceeds D-list entry {small}")));
            }
            let spec = BenchSpec {
                impl_tag: match impl_tag {
                    ImplFlag::Naive => ImplTag::Naive,
                    ImplFlag::Factored => ImplTag::Factored,
                },
                d,
                m,
                k,
                d_list,
                reps,
                seed,
                precision: match precision {
                    PrecisionFlag::F32 => Precision::F32,
                    PrecisionFlag::F64 => Precision::F64,
                },
                warmup,
            };
            let mut summary = std::io::stderr();
            match out {
                Some(path) => {
                    let mut file = std::fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    let code = bench::cmd_bench(&spec, &mut file, &mut summary)?;
                    file.flush()?;
                    Ok(code)
                }
                None => bench::cmd_bench(&spec, &mut stdout.lock(), &mut summary),
            }
        }
        Command::Train {
            data,
            ngram_n,
            vocab_cap,
            examples,
            layers,
            output,
            eta,
            epochs,
            batch,
            seed,
            stabilize_every,
            checkpoint,
        } => {
            if ngram_n < 2 {
                return Ok(usage_error("--ngram must be at least 2"));
            }
            if vocab_cap == 0 || batch == 0 || layers.contains(&0) {
                return Ok(usage_error("--vocab-cap, --batch, and --layers entries must be at least 1"));
            }
            if stabilize_every == Some(0) {
                return Ok(usage_error("--stabilize-every must be at least 1"));
            }
            let spec = TrainSpec {
                data: if data == "synthetic" {
                    DataSource::Synthetic
                } else {
                    DataSource::Path(PathBuf::from(data))
                },
                ngram_n,
                vocab_cap,
                examples,
                layers,
                output: match output {
                    OutputFlag::Factored => lst_core::OutputKind::Factored,
                    OutputFlag::Naive => lst_core::OutputKind::Naive,
                },
                eta,
                epochs,
                batch,
                seed,
                stabilize_every,
                checkpoint,
            };
            train::cmd_train(&spec, &mut stdout.lock())
        }
        Command::StabilizeDemo { d, steps, eta_large, strategy } => {
            if d == 0 {
                return Ok(usage_error("--d must be at least 1"));
            }
            let spec = StabDemoSpec {
                d,
                steps,
                eta_large,
                strategy: match strategy {
                    StrategyFlag::FullSvd => lst_core::Strategy::FullSvd,
                    StrategyFlag::PowerScan => lst_core::Strategy::PowerScan,
                },
            };
            stabdemo::cmd_stabilize_demo(&spec, &mut stdout.lock())
        }
    }
}
