use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::QueryId;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("query id must not be empty")]
    EmptyQueryId,
    #[error("reading {0} outside 0..=100")]
    OutOfRange(i64),
    #[error("exact reading {0} outside [0, 100]")]
    OutOfRangeExact(String),
    #[error("a request holds 2 to 5 queries, got {0}")]
    RequestSize(usize),
    #[error("duplicate query {0}")]
    DuplicateQuery(QueryId),
    #[error("timespan ends ({end}) before it starts ({start})")]
    InvalidTimespan { start: String, end: String },
    #[error("ratio undefined: maximum of {0} is zero")]
    DivisionUndefined(QueryId),
    #[error("{numerator} and {denominator} come from different scaling contexts")]
    MixedScale {
        numerator: QueryId,
        denominator: QueryId,
    },
    #[error("cannot chain: expected middle query {expected}, found {found}")]
    ChainMismatch { expected: QueryId, found: QueryId },
    #[error("zero estimate {numerator}/{denominator} has no inverse")]
    ZeroEstimate {
        numerator: QueryId,
        denominator: QueryId,
    },
    #[error("anchor bank is empty")]
    EmptyBank,
    #[error("entry {0} is not strictly positive")]
    NonPositiveEntry(QueryId),
    #[error("entry {0} has an inconsistent interval")]
    InconsistentEntry(QueryId),
    #[error("bank not strictly increasing at {previous} -> {next}")]
    UnsortedBank { previous: QueryId, next: QueryId },
    #[error("anchor {0} not in bank")]
    MissingAnchor(QueryId),
    #[error("reference {0} must have calibrated value exactly 1")]
    ReferenceNotUnit(QueryId),
    #[error("response holds {got} series for {expected} queries")]
    SeriesCount { expected: usize, got: usize },
    #[error("series for {found} where {expected} was requested")]
    SeriesOrder { expected: QueryId, found: QueryId },
    #[error("response is not scaled: no reading equals 100")]
    NotScaled,
    #[error("degenerate universe: {0}")]
    DegenerateUniverse(&'static str),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("unknown query {0}")]
    UnknownQuery(QueryId),
    #[error("transport failure: {message}")]
    Transport {
        message: String,
        retryable: bool,
        /// Suggested wait before retrying, in milliseconds.
        retry_after_ms: Option<u64>,
    },
    #[error("malformed upstream payload: {0}")]
    Payload(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("need n <= N <= |list|, got n={n}, N={top_n}, |list|={available}")]
    SampleSize {
        n: usize,
        top_n: usize,
        available: usize,
    },
    #[error("need 2 <= k <= min(5, n), got k={k}, n={n}")]
    GroupSize { k: usize, n: usize },
    #[error("threshold tau={0} outside 0..=100")]
    Threshold(u32),
    #[error("frequency list not sorted descending at {0}")]
    UnsortedFrequencies(QueryId),
    #[error("invalid frequency for {0}")]
    InvalidFrequency(QueryId),
    #[error("reference {0} is not an anchor")]
    UnknownReference(QueryId),
    #[error("{} anchors cannot be chained to the reference: {unreachable:?}", unreachable.len())]
    Disconnected { unreachable: Vec<QueryId> },
    #[error("no anchors left after dropping uninformative ones")]
    NoAnchors,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("bank needs at least 2 anchors")]
    BankTooSmall,
    #[error(
        "gap between {lower} and {upper} spans ratio {ratio:.4} (more than one order of \
         magnitude); rebuild the initial bank with more anchors (increase n)"
    )]
    Gap {
        lower: QueryId,
        upper: QueryId,
        ratio: f64,
    },
    #[error("hop {lower} -> {upper}: smaller maximum rounds to zero")]
    IrrecoverableHop { lower: QueryId, upper: QueryId },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CalibrateError {
    #[error("search tolerance must lie in (0, 1)")]
    Tolerance,
    #[error("bank has no anchor other than the query itself")]
    NoComparableAnchor,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
