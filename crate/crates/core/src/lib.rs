//! Calibration of jointly scaled, integer-rounded relative-popularity
//! series onto one common scale with explicit error bounds.
//!
//! Offline, [`bank_builder`] chains overlapping requests into an anchor
//! bank; [`bank_optimizer`] thins it to near-equidistant anchors. Online,
//! [`calibrator`] binary-searches the bank for an anchor comparable to a
//! query. All ratios and bounds are exact rationals.
//!
//! The crate is `no_std` and needs only `alloc`. IO, caching and the live
//! client live in the companion `anchorbank` crate.

#![no_std]

extern crate alloc;

pub mod bank_builder;
pub mod bank_optimizer;
pub mod calibrator;
pub mod error;
pub mod model;
pub mod provider;
pub mod sim;

pub use bank_builder::{
    build_bank, build_from_responses, build_graph, calibrate_bank, estimate_ratios,
    sample_anchors, shingle_requests, BuildConfig, BuildOutput, ComparisonGraph,
    DisconnectedPolicy, FrequencyList, ReferencePolicy,
};
pub use bank_optimizer::{
    eta_of_c, optimize_bank, refine_pairwise, select_equidistant_subset, theoretical_optimum,
    OptimalityParams, RefineConfig, RefineOutput,
};
pub use calibrator::{
    calibrate, calibrate_batch, search_step, BatchOutcome, CalibrationResult, CalibrationStatus,
    Decision, SearchTolerance,
};
pub use error::{BuildError, CalibrateError, ModelError, OptimizerError, ProviderError};
pub use model::{
    bounds_of, chain, pair_ratio, AnchorBank, AnchorBankEntry, BankParams, Bound, InterestSeries,
    Precision, QueryId, Rational, RatioEstimate, RequestSpec, RoundingBounds, Timespan,
};
pub use provider::{Provider, ProviderResponse};
pub use sim::{make_universe, GroundTruthUniverse, RoundingRule, ShapeFamily, Simulator, UniverseSpec};
