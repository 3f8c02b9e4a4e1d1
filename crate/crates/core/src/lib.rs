//! Normal-Normal hierarchical models with a uniform shrinkage prior on the
//! random-effect covariance: MCMC fitting and repeated-sampling coverage
//! evaluation of the resulting random-effect intervals.

// Argument checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coverage;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod stochastics;

pub use coverage::{evaluate_cell, run_campaign, CampaignResult, CellSeeds, CoverageResult, GenerativeConfig};
pub use error::{Error, Result};
pub use linalg::SpdMatrix;
pub use model::{Dataset, GaussianMoments, GroupObservation, HyperState};
pub use priors::PriorSpec;
pub use sampler::{run_chain, PosteriorSamples, SamplerConfig};
pub use stochastics::RngStream;
