//! Descriptive statistics, rank correlation, rank-sum tests and bootstrap z-tests.

pub mod bootstrap;
pub mod descriptive;
pub mod rank;
pub mod ranksum;

pub use bootstrap::{
    bootstrap_rho_difference, bootstrap_rho_literal, BootstrapMode, BootstrapResult, PairedSample,
};
pub use descriptive::{descriptive_stats, median, quantile, DescriptiveStats};
pub use rank::{average_ranks, median_split, spearman_rho, CorrelationResult, MedianSplit};
pub use ranksum::{
    cliffs_delta, compare_two_groups, mann_whitney_u, mann_whitney_u_with, GroupComparisonResult,
    PValueMethod,
};
