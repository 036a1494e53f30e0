//! Exact, output-size-independent gradient updates for linear output layers
//! with K-sparse targets.
//!
//! A dense output layer `o = W h` with `W : D x d` costs O(Dd) per SGD step,
//! which dominates training when D (e.g. a vocabulary) is huge and the target
//! `y` has only K << D nonzero entries. This crate maintains W implicitly as
//!
//! ```text
//! W = V U + 1_D w^T
//! ```
//!
//! and updates `V`, `U`, `w` together with the bookkeeping quantities
//! `Q = W^T W`, `wbar = W^T 1_D`, and a tracked inverse transpose of `U`, so
//! that every SGD step on W is reproduced *exactly* (to round-off) at
//! O(d^2) / O(m d^2) cost per example/minibatch, independent of D. The loss
//! may be any member of the spherical family: a function of `|o|^2`,
//! `sum(o)`, and the output coordinates at the target's support.
//!
//! Modules:
//! - [`mat`]: dense f64 kernels (multiply, inversion, Jacobi SVD, power
//!   iteration), the substrate for everything else.
//! - [`sparse`]: K-sparse vectors/matrices and the few sparse-dense products
//!   the updates need.
//! - [`loss`]: the spherical loss interface and the squared-error instance.
//! - [`factored`]: the implicit layer itself and its exact update rules.
//! - [`naive`]: the literal dense reference layer (oracle and baseline).
//! - [`stabilize`]: conditioning maintenance for U (pristine restore,
//!   per-singular-value fixes, scan-and-fix passes).
//! - [`net`]: a minimal MLP with a sparse input layer, for end-to-end
//!   training on K-sparse data with either output layer.
//! - [`synth`]: deterministic synthetic K-sparse instance generation.
//!
//! The crate is `no_std` (with `alloc`); file formats, text ingestion, and
//! the command-line front end live in the companion `lst-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod factored;
pub mod loss;
pub mod mat;
pub mod naive;
pub mod net;
pub mod sparse;
pub mod stabilize;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use factored::{FactoredOutputLayer, ForwardStats, VInit};
pub use loss::{LossEvalBatch, SphericalLoss, SquaredError};
pub use mat::{DenseMat, SvdResult};
pub use naive::NaiveOutputLayer;
pub use net::{HiddenLayer, MlpStack, Nonlin, OutputKind, OutputLayer, SparseInputLayer};
pub use sparse::{KSparseMat, KSparseVec};
pub use stabilize::{StabilizeConfig, StabilizeReport, Strategy};
pub use synth::{generate_synthetic, SyntheticSpec, SyntheticStream, ValueDist};
