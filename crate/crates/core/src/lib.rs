//! Superposition of multiresolution tensors for one-class anomaly detection.
//!
//! Each rank-normalized sample `x̃ ∈ [0,1]^L` is embedded as a product state of
//! Fourier features at `P` resolutions, rotated site by site by `M·P`
//! bond-dimension-1 operators, and the resulting superposition is scored by its
//! squared overlap with the reference product state `|0…0⟩`.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, CSV ingestion and the
//! command-line front end live in the companion `smtad` crate.
//!
//! Module map:
//!
//! * [`model`]: parameters, embedding, numerator, normalization constant, score
//! * [`preprocess`]: rank normalization and the train/test split protocol
//! * [`training`]: regularized log-likelihood, analytic gradient, Adam, epochs
//! * [`analysis`]: reduced density matrices, entropies, mutual information
//! * [`metrics`]: AUROC and average precision
//! * [`oracle`]: dense `2^L` state-vector reference used for verification

#![cfg_attr(not(test), no_std)]
// `!(x > floor)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod linalg;
mod matrix;
pub mod seed;

pub mod analysis;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod preprocess;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{ModelParams, ScoreBreakdown, SignedLogProduct};
