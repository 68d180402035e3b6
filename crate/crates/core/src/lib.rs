//! Differential expression ranking that revises two-sample t-statistics using
//! inter-gene correlation.
//!
//! The pipeline orders genes by |t|, declares the bottom `P`% null (the zero
//! assumption), and re-estimates the remaining mean parameters as the point of
//! minimum Mahalanobis distance from the observed statistics:
//!
//! ```text
//! u1 = t1 - C10 * C00^-1 * t0
//! ```
//!
//! where `C` is the sample correlation of the group-centred expression matrix.
//! Genes are then ranked by `|u1|`.
//!
//! Modules follow the stages of that pipeline:
//!
//! - [`data`]: expression matrix and group labels, TSV ingestion.
//! - [`tstats`]: per-gene t-statistics and the zero-assumption partition.
//! - [`correlation`]: group-centred matrix and the correlation blocks.
//! - [`solver`]: dense Cholesky and low-rank Woodbury solves, plus the
//!   brute-force Mahalanobis oracle.
//! - [`ranking`]: scores, ranked lists, and the end-to-end driver.
//! - [`simulation`]: data with known truth, and the t-covariance lab.
//! - [`evaluation`]: empirical FDR and multi-replicate studies.

pub mod correlation;
pub mod data;
pub mod error;
pub mod evaluation;
mod numeric;
pub mod ranking;
pub mod simulation;
pub mod solver;
pub mod tstats;

pub use correlation::{
    build_correlation_model, remove_treatment_effects, theoretical_tcov, CenteredMatrix,
    CorrelationModel, Representation, DEFAULT_JITTER,
};
pub use data::{load_expression_matrix, load_labels, ExpressionMatrix, Group, GroupLabels};
pub use error::{Error, Result};
pub use evaluation::{
    comparison_table, empirical_fdr, run_study, ComparisonTable, FdrScore, Generator, Method,
    StudyConfig,
    StudyReport,
};
pub use ranking::{
    rank_genes, rank_raw_t, run_tellipsoid, tellipsoid_scores, ListMetadata, RankedGeneList, RankedRow,
    SolverChoice, TellipsoidConfig, TellipsoidRun, TellipsoidScores,
};
pub use simulation::{
    gaussian_generate, random_group_split, row_standardize, spike_in, verify_observation,
    standardize_generate, BlockCovSpec, Direction, GroundTruth, Observation, ObservationResult,
    SpikeSpec,
};
pub use solver::{
    brute_force_ustar, mahalanobis_distance, solve_dense, solve_lowrank, SolveMethod, SolveReport,
};
pub use tstats::{partition_za, two_sample_t, TStatistics, ZaPartition, DEFAULT_PERCENT};
