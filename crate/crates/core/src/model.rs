//! Domain types and the rounding-interval algebra.
//!
//! Every quantity that enters a bank is an exact rational. Floating point is
//! only produced at the output boundary through the `*_f64` accessors.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::Mul;

use chrono::{Days, NaiveDate};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::ModelError;

/// Exact arbitrary-precision rational.
pub type Rational = BigRational;

/// Largest value a provider reports after scaling.
pub const SCALE_MAX: u32 = 100;

/// Maximum number of queries in one provider request.
pub const MAX_QUERIES_PER_REQUEST: usize = 5;

/// Builds `num / den` as an exact rational.
///
/// Panics if `den` is zero.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn half() -> Rational {
    rat(1, 2)
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Opaque, non-empty query identifier (plain text or a knowledge-base id
/// such as `/m/02h6_6p`).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct QueryId(String);

impl QueryId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(ModelError::EmptyQueryId);
        }
        Ok(QueryId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl core::str::FromStr for QueryId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryId::new(s)
    }
}

/// Closed date interval `[start, end]`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Timespan {
    start: NaiveDate,
    end: NaiveDate,
}

impl Timespan {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, ModelError> {
        if end < start {
            return Err(ModelError::InvalidTimespan {
                start: start.to_string(),
                end: end.to_string(),
            });
        }
        Ok(Timespan { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    /// Weekly sampling grid starting at `start`, inclusive of `end`.
    pub fn weekly_grid(&self) -> Vec<NaiveDate> {
        let mut dates = Vec::new();
        let mut d = self.start;
        while d <= self.end {
            dates.push(d);
            match d.checked_add_days(Days::new(7)) {
                Some(next) => d = next,
                None => break,
            }
        }
        dates
    }
}

impl fmt::Display for Timespan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.start, self.end)
    }
}

/// One provider request: 2 to 5 distinct queries for a region and timespan.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RequestSpec {
    queries: Vec<QueryId>,
    region: String,
    timespan: Timespan,
}

impl RequestSpec {
    pub fn new(
        queries: Vec<QueryId>,
        region: impl Into<String>,
        timespan: Timespan,
    ) -> Result<Self, ModelError> {
        if queries.len() < 2 || queries.len() > MAX_QUERIES_PER_REQUEST {
            return Err(ModelError::RequestSize(queries.len()));
        }
        for (i, q) in queries.iter().enumerate() {
            if queries[..i].contains(q) {
                return Err(ModelError::DuplicateQuery(q.clone()));
            }
        }
        Ok(RequestSpec {
            queries,
            region: region.into(),
            timespan,
        })
    }

    pub fn queries(&self) -> &[QueryId] {
        &self.queries
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn timespan(&self) -> Timespan {
        self.timespan
    }

    /// Stable textual key: `v1`, region, start, end and the queries in
    /// request order, tab-separated. Tabs and newlines inside fields are
    /// escaped so distinct requests never collide.
    pub fn canonical_key(&self) -> String {
        let mut key = String::from("v1");
        let mut push = |field: &str| {
            key.push('\t');
            for ch in field.chars() {
                match ch {
                    '\\' => key.push_str("\\\\"),
                    '\t' => key.push_str("\\t"),
                    '\n' => key.push_str("\\n"),
                    c => key.push(c),
                }
            }
        };
        push(&self.region);
        push(&self.timespan.start.to_string());
        push(&self.timespan.end.to_string());
        for q in &self.queries {
            push(q.as_str());
        }
        key
    }
}

/// Upper interval end that may be unbounded (a zero lower bound in a
/// denominator).
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Bound {
    Finite(Rational),
    Unbounded,
}

impl Bound {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    /// `1 / lower`, unbounded when `lower` is zero.
    pub fn recip_of(lower: &Rational) -> Bound {
        if lower.is_zero() {
            Bound::Unbounded
        } else {
            Bound::Finite(lower.recip())
        }
    }

    /// `1 / self` as a lower bound: zero when unbounded.
    pub fn recip_lower(&self) -> Rational {
        match self {
            Bound::Finite(v) => v.recip(),
            Bound::Unbounded => Rational::zero(),
        }
    }

    /// `self / denom` for a non-negative `denom`.
    pub fn div_by(&self, denom: &Rational) -> Bound {
        match self {
            Bound::Finite(v) if !denom.is_zero() => Bound::Finite(v / denom),
            _ => Bound::Unbounded,
        }
    }

    pub fn scale(&self, factor: &Rational) -> Bound {
        match self {
            Bound::Finite(v) => Bound::Finite(v * factor),
            Bound::Unbounded => Bound::Unbounded,
        }
    }

    pub fn ge(&self, value: &Rational) -> bool {
        match self {
            Bound::Finite(v) => v >= value,
            Bound::Unbounded => true,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Bound::Finite(v) => to_f64(v),
            Bound::Unbounded => f64::INFINITY,
        }
    }
}

impl Mul for &Bound {
    type Output = Bound;

    /// Both operands are strictly positive wherever this is used, so the
    /// `0 * inf` case never arises.
    fn mul(self, rhs: &Bound) -> Bound {
        match (self, rhs) {
            (Bound::Finite(a), Bound::Finite(b)) => Bound::Finite(a * b),
            _ => Bound::Unbounded,
        }
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Bound::Finite(a), Bound::Finite(b)) => a.cmp(b),
            (Bound::Finite(_), Bound::Unbounded) => Ordering::Less,
            (Bound::Unbounded, Bound::Finite(_)) => Ordering::Greater,
            (Bound::Unbounded, Bound::Unbounded) => Ordering::Equal,
        }
    }
}

/// Interval `[lo, hi]` that contains an unobserved, unrounded reading.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RoundingBounds {
    pub value: Rational,
    pub lo: Rational,
    pub hi: Rational,
}

impl RoundingBounds {
    pub fn exact(value: Rational) -> Self {
        RoundingBounds {
            lo: value.clone(),
            hi: value.clone(),
            value,
        }
    }

    /// A reading of 100 that another reading in the same response also
    /// reached: the true value is in `[99.5, 100]`.
    pub fn shared_peak() -> Self {
        RoundingBounds {
            value: int(SCALE_MAX as i64),
            lo: int(SCALE_MAX as i64) - half(),
            hi: int(SCALE_MAX as i64),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }
}

/// Rounding interval of an integer reading `m`: `[m - 1/2, m + 1/2]`, with
/// the lower end clamped at 0 and no rounding at the scale maximum.
pub fn bounds_of(m: u32) -> Result<RoundingBounds, ModelError> {
    if m > SCALE_MAX {
        return Err(ModelError::OutOfRange(m as i64));
    }
    if m == SCALE_MAX {
        return Ok(RoundingBounds::exact(int(m as i64)));
    }
    let value = int(m as i64);
    let lo = if m == 0 {
        Rational::zero()
    } else {
        &value - half()
    };
    let hi = &value + half();
    Ok(RoundingBounds { value, lo, hi })
}

/// Whether observed values are integers produced by rounding, or exact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Precision {
    Rounded,
    Exact,
}

/// Identifies a common scaling context: series sharing one id were scaled
/// together.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ResponseId(pub u64);

/// How a series relates to the scale maximum of its response.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Peak {
    /// Series maximum is below 100.
    Below,
    /// Series reads 100, but so does another series in the same response;
    /// only one of them is the true maximum.
    Shared,
    /// The only series reading 100, hence the true joint maximum. `point` is
    /// the index of its single 100-reading, if there is exactly one.
    Sole { point: Option<usize> },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Point {
    pub date: NaiveDate,
    pub value: Rational,
}

/// One query's observed series in a single response.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InterestSeries {
    query: QueryId,
    points: Vec<Point>,
    max_value: Rational,
    precision: Precision,
    pub(crate) response_id: ResponseId,
    pub(crate) peak: Peak,
}

impl InterestSeries {
    /// Series of rounded integer readings in `0..=100`.
    pub fn rounded(query: QueryId, points: Vec<(NaiveDate, u32)>) -> Result<Self, ModelError> {
        let mut out = Vec::with_capacity(points.len());
        for (date, v) in points {
            if v > SCALE_MAX {
                return Err(ModelError::OutOfRange(v as i64));
            }
            out.push(Point {
                date,
                value: int(v as i64),
            });
        }
        Ok(Self::assemble(query, out, Precision::Rounded))
    }

    /// Series of exact (unrounded) readings in `[0, 100]`.
    pub fn exact(query: QueryId, points: Vec<(NaiveDate, Rational)>) -> Result<Self, ModelError> {
        let top = int(SCALE_MAX as i64);
        let mut out = Vec::with_capacity(points.len());
        for (date, value) in points {
            if value < Rational::zero() || value > top {
                return Err(ModelError::OutOfRangeExact(value.to_string()));
            }
            out.push(Point { date, value });
        }
        Ok(Self::assemble(query, out, Precision::Exact))
    }

    fn assemble(query: QueryId, points: Vec<Point>, precision: Precision) -> Self {
        let max_value = points
            .iter()
            .map(|p| &p.value)
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero);
        InterestSeries {
            query,
            points,
            max_value,
            precision,
            response_id: ResponseId(0),
            peak: Peak::Below,
        }
    }

    pub fn query(&self) -> &QueryId {
        &self.query
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn max_value(&self) -> &Rational {
        &self.max_value
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn response_id(&self) -> ResponseId {
        self.response_id
    }

    pub fn peak(&self) -> Peak {
        self.peak
    }

    pub fn is_all_zero(&self) -> bool {
        self.max_value.is_zero()
    }

    fn reading_bounds(&self, value: &Rational, exact_peak: bool) -> RoundingBounds {
        match self.precision {
            Precision::Exact => RoundingBounds::exact(value.clone()),
            Precision::Rounded => {
                let m = value.to_integer().to_u32().unwrap_or(0);
                if m == SCALE_MAX && !exact_peak {
                    RoundingBounds::shared_peak()
                } else {
                    // `m` was validated on construction.
                    bounds_of(m).expect("reading within scale")
                }
            }
        }
    }

    /// Interval containing the unrounded series maximum.
    pub fn max_bounds(&self) -> RoundingBounds {
        let exact_peak = matches!(self.peak, Peak::Sole { .. });
        self.reading_bounds(&self.max_value, exact_peak)
    }

    /// Interval containing the unrounded value of point `i`.
    pub fn point_bounds(&self, i: usize) -> RoundingBounds {
        let exact_peak = matches!(self.peak, Peak::Sole { point: Some(p) } if p == i);
        self.reading_bounds(&self.points[i].value, exact_peak)
    }
}

/// Directed estimate of the ratio between two queries' maxima.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatioEstimate {
    pub numerator: QueryId,
    pub denominator: QueryId,
    pub r: Rational,
    pub lo: Rational,
    pub hi: Bound,
    /// `hi / lo`, the multiplicative width of the interval.
    pub eta: Bound,
}

impl RatioEstimate {
    pub fn identity(query: QueryId) -> Self {
        RatioEstimate {
            numerator: query.clone(),
            denominator: query,
            r: Rational::one(),
            lo: Rational::one(),
            hi: Bound::Finite(Rational::one()),
            eta: Bound::Finite(Rational::one()),
        }
    }

    /// Assembles an estimate from its interval, deriving `eta`.
    pub fn from_interval(
        numerator: QueryId,
        denominator: QueryId,
        r: Rational,
        lo: Rational,
        hi: Bound,
    ) -> Self {
        let eta = hi.div_by(&lo);
        RatioEstimate {
            numerator,
            denominator,
            r,
            lo,
            hi,
            eta,
        }
    }

    /// Estimate of `denominator / numerator`.
    pub fn inverse(&self) -> Result<RatioEstimate, ModelError> {
        if self.r.is_zero() {
            return Err(ModelError::ZeroEstimate {
                numerator: self.numerator.clone(),
                denominator: self.denominator.clone(),
            });
        }
        Ok(RatioEstimate {
            numerator: self.denominator.clone(),
            denominator: self.numerator.clone(),
            r: self.r.recip(),
            lo: self.hi.recip_lower(),
            hi: Bound::recip_of(&self.lo),
            eta: self.eta.clone(),
        })
    }

    pub fn contains(&self, ratio: &Rational) -> bool {
        &self.lo <= ratio && self.hi.ge(ratio)
    }

    pub fn r_f64(&self) -> f64 {
        to_f64(&self.r)
    }

    pub fn eta_f64(&self) -> f64 {
        self.eta.to_f64()
    }
}

/// Ratio of the maxima of two series from the same response.
pub fn pair_ratio(x: &InterestSeries, y: &InterestSeries) -> Result<RatioEstimate, ModelError> {
    if x.response_id != y.response_id || x.precision != y.precision {
        return Err(ModelError::MixedScale {
            numerator: x.query.clone(),
            denominator: y.query.clone(),
        });
    }
    if y.max_value.is_zero() {
        return Err(ModelError::DivisionUndefined(y.query.clone()));
    }
    let bx = x.max_bounds();
    let by = y.max_bounds();
    let r = &x.max_value / &y.max_value;
    let lo = &bx.lo / &by.hi;
    let hi = Bound::Finite(&bx.hi / &by.lo);
    Ok(RatioEstimate::from_interval(
        x.query.clone(),
        y.query.clone(),
        r,
        lo,
        hi,
    ))
}

/// Transitive estimate `x/z` from `x/y` and `y/z`.
pub fn chain(a: &RatioEstimate, b: &RatioEstimate) -> Result<RatioEstimate, ModelError> {
    if a.denominator != b.numerator {
        return Err(ModelError::ChainMismatch {
            expected: a.denominator.clone(),
            found: b.numerator.clone(),
        });
    }
    Ok(RatioEstimate {
        numerator: a.numerator.clone(),
        denominator: b.denominator.clone(),
        r: &a.r * &b.r,
        lo: &a.lo * &b.lo,
        hi: &a.hi * &b.hi,
        eta: &a.eta * &b.eta,
    })
}

/// One calibrated anchor: its maximum as a fraction of the reference's.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AnchorBankEntry {
    pub query: QueryId,
    pub calibrated: Rational,
    pub lo: Rational,
    pub hi: Rational,
    pub eta: Rational,
}

impl AnchorBankEntry {
    pub fn reference(query: QueryId) -> Self {
        AnchorBankEntry {
            query,
            calibrated: Rational::one(),
            lo: Rational::one(),
            hi: Rational::one(),
            eta: Rational::one(),
        }
    }

    /// The entry viewed as an estimate of `query / reference`.
    pub fn as_estimate(&self, reference: &QueryId) -> RatioEstimate {
        RatioEstimate {
            numerator: self.query.clone(),
            denominator: reference.clone(),
            r: self.calibrated.clone(),
            lo: self.lo.clone(),
            hi: Bound::Finite(self.hi.clone()),
            eta: Bound::Finite(self.eta.clone()),
        }
    }

    pub fn calibrated_f64(&self) -> f64 {
        to_f64(&self.calibrated)
    }
}

pub const BANK_SCHEMA_VERSION: u32 = 1;

/// Parameters a bank was built with.
#[derive(Clone, PartialEq, Debug)]
pub struct BankParams {
    pub k: usize,
    pub tau: u32,
    pub search_tolerance: Rational,
    pub seed: u64,
}

/// Anchors sorted by strictly increasing calibrated maximum.
#[derive(Clone, PartialEq, Debug)]
pub struct AnchorBank {
    entries: Vec<AnchorBankEntry>,
    reference: QueryId,
    search_start: QueryId,
    region: String,
    timespan: Timespan,
    params: BankParams,
    schema_version: u32,
}

impl AnchorBank {
    /// Validates the bank invariants: unique ids, strictly increasing
    /// calibrated values, interval containment, and a unit reference entry.
    pub fn new(
        entries: Vec<AnchorBankEntry>,
        reference: QueryId,
        search_start: QueryId,
        region: impl Into<String>,
        timespan: Timespan,
        params: BankParams,
    ) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::EmptyBank);
        }
        for (i, e) in entries.iter().enumerate() {
            if e.calibrated <= Rational::zero() || e.lo <= Rational::zero() {
                return Err(ModelError::NonPositiveEntry(e.query.clone()));
            }
            if !(e.lo <= e.calibrated && e.calibrated <= e.hi) || e.eta != &e.hi / &e.lo {
                return Err(ModelError::InconsistentEntry(e.query.clone()));
            }
            if i > 0 && entries[i - 1].calibrated >= e.calibrated {
                return Err(ModelError::UnsortedBank {
                    previous: entries[i - 1].query.clone(),
                    next: e.query.clone(),
                });
            }
            if entries[..i].iter().any(|p| p.query == e.query) {
                return Err(ModelError::DuplicateQuery(e.query.clone()));
            }
        }
        let r = entries
            .iter()
            .find(|e| e.query == reference)
            .ok_or_else(|| ModelError::MissingAnchor(reference.clone()))?;
        if !(r.calibrated.is_one() && r.lo.is_one() && r.hi.is_one()) {
            return Err(ModelError::ReferenceNotUnit(reference));
        }
        if !entries.iter().any(|e| e.query == search_start) {
            return Err(ModelError::MissingAnchor(search_start));
        }
        Ok(AnchorBank {
            entries,
            reference,
            search_start,
            region: region.into(),
            timespan,
            params,
            schema_version: BANK_SCHEMA_VERSION,
        })
    }

    pub fn entries(&self) -> &[AnchorBankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn reference(&self) -> &QueryId {
        &self.reference
    }

    /// Anchor the online search compares against first.
    pub fn search_start(&self) -> &QueryId {
        &self.search_start
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn timespan(&self) -> Timespan {
        self.timespan
    }

    pub fn params(&self) -> &BankParams {
        &self.params
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn index_of(&self, query: &QueryId) -> Option<usize> {
        self.entries.iter().position(|e| &e.query == query)
    }

    pub fn entry(&self, query: &QueryId) -> Option<&AnchorBankEntry> {
        self.entries.iter().find(|e| &e.query == query)
    }

    pub fn median_index(&self) -> usize {
        (self.entries.len() - 1) / 2
    }

    pub fn contains(&self, query: &QueryId) -> bool {
        self.index_of(query).is_some()
    }
}
