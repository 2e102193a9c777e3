//! Core data model and statistical routines for measuring community engagement
//! in open-source repositories.
//!
//! The crate is organised by analysis stage:
//!
//! * [`model`] repository records, lifespan normalization and exclusion filters
//! * [`stats`] descriptive statistics, rank correlation, rank-sum tests and the
//!   bootstrap comparison of correlations
//! * [`distfit`] heavy-tailed distribution fits and Kolmogorov–Smirnov distances
//! * [`efa`] sampling adequacy, parallel analysis, minres extraction, varimax
//!   rotation, factor scores and split-half validation
//! * [`regress`] least-squares fits of log-transformed project dynamics
//! * [`lifespan`] lifespan quartiles and pairwise group comparisons

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distfit;
pub mod efa;
pub mod error;
pub mod lifespan;
pub mod linalg;
pub mod model;
pub mod regress;
pub mod rng;
pub mod stats;

pub use error::{CoreError, Result};
pub use model::{ActiveLifespan, FilterReport, MetricVector, RepositoryRecord};
