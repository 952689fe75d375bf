//! Compression toolkit for dense feed-forward networks.
//!
//! The pipeline: train with a sparseness-inducing penalty (ℓ2, ℓ1, an
//! exponential ℓ0 surrogate, or combined ℓ2-ℓ0), prune the smallest
//! weights (globally, per layer, or at random), fine-tune under the
//! prune mask, and run the result as a CSR sparse model. A sweep harness
//! measures accuracy against compression rate across strategies and
//! seeds, and a CLI exposes the whole flow plus model/CSV file formats.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod io;
pub mod model;
pub mod numerics;
pub mod pruning;
pub mod regularizers;
pub mod sparse;
pub mod sweep;
pub mod training;

pub use data::{Dataset, Split};
pub use error::{Error, Result};
pub use model::{Activation, DenseLayer, Gradients, InitScheme, Network};
pub use numerics::{Matrix, Rng};
pub use pruning::PruneMask;
pub use regularizers::{LayerPenalty, RegKind, RegularizerSpec, ResolvedReg, Strategy};
pub use sparse::SparseModel;
pub use training::{TrainConfig, TrainReport};
