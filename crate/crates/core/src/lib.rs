//! Learn causal dependence tree approximations of joint Gaussian process
//! distributions.
//!
//! Given `m` jointly Gaussian random processes over `n` timesteps, the best
//! tree-shaped approximation of the joint law (best in KL divergence) is the
//! rooted directed spanning tree over processes that maximizes the sum of
//! pairwise directed informations on its edges. This crate computes the
//! exact Gaussian information measures, runs the tree optimizers, and ships
//! a binary hypothesis-testing harness to compare the approximations.
//!
//! Modules, bottom-up:
//!
//! - [`linalg`] — dense symmetric Cholesky / log-det kernels
//! - [`model`] — strictly causal linear Gaussian generative models
//! - [`info`] — mutual information, directed information, KL divergence
//! - [`trees`] — Kruskal and Chu-Liu/Edmonds maximum-weight tree optimizers
//! - [`hypothesis`] — log-likelihood-ratio tests and ROC curves
//!
//! All information quantities are in nats. With the default `parallel`
//! feature the data-parallel inner loops (weight matrices, per-root
//! arborescence search, sampling, trial scoring) run on rayon; results are
//! bit-identical to the sequential fallback.

pub mod error;
pub mod hypothesis;
pub mod info;
pub mod linalg;
pub mod model;
pub mod trees;

pub use error::{Error, Result};
