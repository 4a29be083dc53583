//! Quadratic-manifold embeddings for nonintrusive model reduction.
//!
//! A quadratic manifold decodes reduced coordinates `z` as
//! `V z + W h(z)`, where `h` collects all pairwise products of the entries
//! of `z`. The basis `V` is chosen greedily from the left singular vectors
//! of the training snapshots, optionally scoring each candidate by how well
//! an operator-inference model `z_{j+1} = A z_j + H h(z_j)` fitted to the
//! resulting embedding reproduces the training trajectory.
//!
//! Modules, bottom up:
//! - [`numerics`]: thin SVD and block-regularized ridge regression.
//! - [`manifold`]: feature map, encoder/decoder and coefficient fit.
//! - [`opinf`]: reduced-model fit, rollout and prediction error.
//! - [`greedy`]: basis selection and the manifold trainers.
//! - [`transport`]: snapshot generator for the rotating Gaussian benchmark.
//! - [`format`], [`report`], [`cli`]: files, CSV reports and commands.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod format;
pub mod greedy;
pub mod manifold;
pub mod numerics;
pub mod opinf;
pub mod report;
pub mod transport;

pub use error::{Error, Result};
pub use format::{Method, ModelFile};
pub use greedy::{GreedyConfig, Mode};
pub use manifold::{Coordinates, QuadraticManifold, ReducedTrajectory};
pub use numerics::{thin_svd, DenseMatrix, SvdFactors};
pub use opinf::{ReducedModel, Score};
pub use transport::TransportConfig;
