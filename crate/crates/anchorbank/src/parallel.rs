//! Thread-parallel variants of the batch operations, on the rayon pool.
//!
//! Results come back in input order, so outputs match the sequential
//! versions exactly.

use anchorbank_core::bank_builder::{plan_anchors, BuildOutput};
use anchorbank_core::calibrator::BatchOutcome;
use anchorbank_core::{
    build_from_responses, calibrate, shingle_requests, AnchorBank, BuildConfig, BuildError,
    FrequencyList, Provider, ProviderError, ProviderResponse, QueryId, RequestSpec,
    SearchTolerance,
};
use rayon::prelude::*;

pub fn fetch_all<P: Provider + Sync + ?Sized>(
    provider: &P,
    requests: &[RequestSpec],
) -> Result<Vec<ProviderResponse>, ProviderError> {
    requests.par_iter().map(|r| provider.fetch(r)).collect()
}

/// Offline phase with the first-round requests fetched concurrently.
pub fn build_bank_parallel<P: Provider + Sync + ?Sized>(
    provider: &P,
    freq: &FrequencyList,
    config: &BuildConfig,
) -> Result<BuildOutput, BuildError> {
    let anchors = plan_anchors(freq, config)?;
    let requests = shingle_requests(&anchors, config.k, &config.region, config.timespan)?;
    let responses = fetch_all(provider, &requests)?;
    build_from_responses(anchors, responses, config)
}

pub fn calibrate_batch_parallel<P: Provider + Sync + ?Sized>(
    queries: &[QueryId],
    bank: &AnchorBank,
    provider: &P,
    tolerance: &SearchTolerance,
) -> BatchOutcome {
    let outcomes: Vec<_> = queries
        .par_iter()
        .map(|q| (q.clone(), calibrate(q, bank, provider, tolerance)))
        .collect();
    BatchOutcome::from_outcomes(outcomes)
}
