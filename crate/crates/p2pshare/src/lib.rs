//! Simulation and optimization toolkit for peer-to-peer deductible sharing
//! on social networks.
//!
//! The crate is organized around the pipeline:
//!
//! - [`netgen`]: random graphs with a prescribed degree mean and dispersion
//! - [`lossmodel`]: the claim process and capped-loss moments
//! - [`sharing`]: settlement under reciprocal-contract mechanisms
//! - [`optimize`]: engagement magnitudes via LP, sparse MIP and QP
//! - [`ordering`]: convex-order and share-matrix analysis tools
//! - [`analytics`]: fairness probabilities and dispersion sweeps
//! - [`cli`]: the `p2pshare` command-line entry point

pub mod analytics;
pub mod cli;
pub mod lossmodel;
pub mod netgen;
pub mod optimize;
pub mod ordering;
pub mod sharing;

pub use analytics::{fairness_exact, run_sweep, FairnessReport, SweepConfig, SweepRow};
pub use lossmodel::{loss_moments, sample_claims, ClaimSample, LossModel, Severity};
pub use netgen::{friends_of_friends, generate_graph, realize_graph, sample_degree_sequence, Graph};
pub use ordering::{convex_order_compare, DiscreteDist, ShareMatrix};
pub use optimize::{solve_engagement_lp, solve_min_variance_qp, solve_sparse_mip, solve_two_stage};
pub use sharing::{
    settle_personalized, settle_two_layer, settle_uniform, settle_uniform_with_self,
    EngagementMap, SettlementResult,
};
