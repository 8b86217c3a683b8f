//! Online calibration of arbitrary queries by binary search over a bank.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use chrono::NaiveDate;
use num_traits::{One, Zero};

use crate::error::CalibrateError;
use crate::model::{
    chain, pair_ratio, rat, to_f64, AnchorBank, AnchorBankEntry, Bound, InterestSeries, QueryId,
    Rational, RatioEstimate, RequestSpec,
};
use crate::provider::Provider;

/// Acceptance band `(t, 1/t)` for the ratio between a query and an anchor.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SearchTolerance(Rational);

impl SearchTolerance {
    pub fn new(value: Rational) -> Result<Self, CalibrateError> {
        if value <= Rational::zero() || value >= Rational::one() {
            return Err(CalibrateError::Tolerance);
        }
        Ok(SearchTolerance(value))
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }
}

impl Default for SearchTolerance {
    fn default() -> Self {
        SearchTolerance(rat(1, 10))
    }
}

/// Outcome of comparing a query against one anchor.
#[derive(Clone, PartialEq, Debug)]
pub enum Decision {
    /// Query is too small for this anchor; continue with less popular ones.
    GoLeft,
    /// Query is too large for this anchor; continue with more popular ones.
    GoRight,
    Accept(RatioEstimate),
}

/// Decides from one joint response: left iff `r <= t`, right iff
/// `r >= 1/t`, accept otherwise. An all-zero anchor counts as `r = inf`,
/// unless the query is all-zero too, which goes left.
pub fn search_step(
    query: &InterestSeries,
    anchor: &InterestSeries,
    tolerance: &SearchTolerance,
) -> Result<Decision, CalibrateError> {
    if anchor.is_all_zero() {
        return Ok(if query.is_all_zero() {
            Decision::GoLeft
        } else {
            Decision::GoRight
        });
    }
    let r = query.max_value() / anchor.max_value();
    if &r <= tolerance.value() {
        Ok(Decision::GoLeft)
    } else if r >= tolerance.value().recip() {
        Ok(Decision::GoRight)
    } else {
        Ok(Decision::Accept(pair_ratio(query, anchor)?))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum CalibrationStatus {
    Ok,
    /// Query is below every anchor; reported against the least popular one.
    ClampedLow,
    /// Query is above every anchor; reported against the most popular one.
    ClampedHigh,
}

impl CalibrationStatus {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationStatus::Ok => "ok",
            CalibrationStatus::ClampedLow => "clamped_low",
            CalibrationStatus::ClampedHigh => "clamped_high",
        }
    }

    pub fn is_clamped(self) -> bool {
        self != CalibrationStatus::Ok
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CalibratedPoint {
    pub date: NaiveDate,
    pub value: Rational,
    pub lo: Rational,
    pub hi: Bound,
}

/// A query's series as a fraction of the reference's maximum.
#[derive(Clone, PartialEq, Debug)]
pub struct CalibrationResult {
    pub query: QueryId,
    pub points: Vec<CalibratedPoint>,
    pub calibrated: Rational,
    pub lo: Rational,
    pub hi: Bound,
    pub matched_anchor: QueryId,
    pub requests_used: usize,
    pub status: CalibrationStatus,
}

impl CalibrationResult {
    pub fn calibrated_f64(&self) -> f64 {
        to_f64(&self.calibrated)
    }

    pub fn lo_f64(&self) -> f64 {
        to_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64()
    }

    pub fn contains(&self, ratio: &Rational) -> bool {
        &self.lo <= ratio && self.hi.ge(ratio)
    }

    /// Re-expresses the result against `anchor` instead of the bank
    /// reference: values are multiplied by `1 / R_anchor`, bounds widened by
    /// the anchor's interval.
    pub fn relative_to(&self, bank: &AnchorBank, anchor: &QueryId) -> Result<Self, CalibrateError> {
        let a = bank
            .entry(anchor)
            .ok_or_else(|| crate::error::ModelError::MissingAnchor(anchor.clone()))?;
        let factor = a.calibrated.recip();
        let lo_factor = a.hi.recip();
        let hi_factor = a.lo.recip();
        Ok(CalibrationResult {
            points: self
                .points
                .iter()
                .map(|p| CalibratedPoint {
                    date: p.date,
                    value: &p.value * &factor,
                    lo: &p.lo * &lo_factor,
                    hi: p.hi.scale(&hi_factor),
                })
                .collect(),
            calibrated: &self.calibrated * &factor,
            lo: &self.lo * &lo_factor,
            hi: self.hi.scale(&hi_factor),
            ..self.clone()
        })
    }
}

/// Result from a comparison of `qs` against anchor `x` (series `xs`).
///
/// The true value of a point relative to the reference is
/// `v*_p / m*_x * R*_x`; every factor lies in a known interval.
fn assemble(
    query: &QueryId,
    reference: &QueryId,
    x: &AnchorBankEntry,
    qs: &InterestSeries,
    xs: &InterestSeries,
    requests_used: usize,
    status: CalibrationStatus,
) -> Result<CalibrationResult, CalibrateError> {
    let mx = xs.max_value();
    let mxb = xs.max_bounds();
    let lo_scale = &x.lo / &mxb.hi;
    let hi_scale = Bound::Finite(x.hi.clone()).div_by(&mxb.lo);

    let points: Vec<CalibratedPoint> = qs
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let b = qs.point_bounds(i);
            let lo = &b.lo * &lo_scale;
            let value = if mx.is_zero() {
                lo.clone()
            } else {
                &p.value / mx * &x.calibrated
            };
            CalibratedPoint {
                date: p.date,
                value,
                lo,
                hi: hi_scale.scale(&b.hi),
            }
        })
        .collect();

    let (calibrated, lo, hi) = if mx.is_zero() {
        let qb = qs.max_bounds();
        let lo = &qb.lo * &lo_scale;
        let calibrated = points
            .iter()
            .map(|p| &p.value)
            .max()
            .cloned()
            .unwrap_or_else(|| lo.clone());
        (calibrated, lo, hi_scale.scale(&qb.hi))
    } else {
        let est = chain(&pair_ratio(qs, xs)?, &x.as_estimate(reference))?;
        (est.r, est.lo, est.hi)
    };

    Ok(CalibrationResult {
        query: query.clone(),
        points,
        calibrated,
        lo,
        hi,
        matched_anchor: x.query.clone(),
        requests_used,
        status,
    })
}

/// A query that is itself an anchor keeps its bank value and interval. One
/// request next to a neighbouring anchor supplies its series. Returns `None`
/// if the query's maximum rounds to zero there.
fn calibrate_anchor<P: Provider + ?Sized>(
    query: &QueryId,
    own: &AnchorBankEntry,
    bank: &AnchorBank,
    provider: &P,
    requests: &mut usize,
) -> Result<Option<CalibrationResult>, CalibrateError> {
    let entries = bank.entries();
    let idx = bank.index_of(query).expect("entry exists");
    let partner = if idx + 1 < entries.len() {
        idx + 1
    } else if idx > 0 {
        idx - 1
    } else {
        return Ok(None);
    };
    let req = RequestSpec::new(
        alloc::vec![query.clone(), entries[partner].query.clone()],
        bank.region(),
        bank.timespan(),
    )?;
    let resp = provider.fetch(&req)?;
    *requests += 1;
    let qs = &resp.series()[0];
    if qs.max_value().is_zero() {
        return Ok(None);
    }
    let mut r = assemble(query, bank.reference(), own, qs, qs, *requests, CalibrationStatus::Ok)?;
    r.calibrated = own.calibrated.clone();
    r.lo = own.lo.clone();
    r.hi = Bound::Finite(own.hi.clone());
    Ok(Some(r))
}

/// Calibrates `query` against `bank` by binary search.
///
/// A query already in the bank is answered from its entry. Otherwise the
/// first comparison is against the bank's search start; each later one
/// against the midpoint of the remaining range. Every comparison is one
/// provider request. If the range empties at either end, the result is
/// clamped against the extreme anchor. If it empties between two anchors,
/// the tightest comparison made is reported.
pub fn calibrate<P: Provider + ?Sized>(
    query: &QueryId,
    bank: &AnchorBank,
    provider: &P,
    tolerance: &SearchTolerance,
) -> Result<CalibrationResult, CalibrateError> {
    let mut requests = 0;
    if let Some(own) = bank.entry(query) {
        if let Some(r) = calibrate_anchor(query, own, bank, provider, &mut requests)? {
            return Ok(r);
        }
    }
    let entries = bank.entries();
    let candidates: Vec<usize> = (0..entries.len())
        .filter(|&i| &entries[i].query != query)
        .collect();
    if candidates.is_empty() {
        return Err(CalibrateError::NoComparableAnchor);
    }
    let start_idx = bank.index_of(bank.search_start()).unwrap_or(bank.median_index());
    let mut mid = candidates
        .iter()
        .position(|&i| i >= start_idx)
        .unwrap_or(candidates.len() - 1);

    let mut lo: isize = 0;
    let mut hi: isize = candidates.len() as isize - 1;
    let mut seen: Vec<(usize, InterestSeries, InterestSeries)> = Vec::new();
    loop {
        let anchor = &entries[candidates[mid]];
        let req = RequestSpec::new(
            alloc::vec![query.clone(), anchor.query.clone()],
            bank.region(),
            bank.timespan(),
        )?;
        let resp = provider.fetch(&req)?;
        requests += 1;
        let qs = resp.series()[0].clone();
        let xs = resp.series()[1].clone();
        match search_step(&qs, &xs, tolerance)? {
            Decision::Accept(_) => {
                return assemble(
                    query,
                    bank.reference(),
                    anchor,
                    &qs,
                    &xs,
                    requests,
                    CalibrationStatus::Ok,
                );
            }
            Decision::GoLeft => hi = mid as isize - 1,
            Decision::GoRight => lo = mid as isize + 1,
        }
        seen.push((candidates[mid], qs, xs));
        if lo > hi {
            break;
        }
        mid = ((lo + hi) / 2) as usize;
    }

    let status = if hi < 0 {
        CalibrationStatus::ClampedLow
    } else if lo >= candidates.len() as isize {
        CalibrationStatus::ClampedHigh
    } else {
        CalibrationStatus::Ok
    };
    let mut best: Option<CalibrationResult> = None;
    let pick: Vec<&(usize, InterestSeries, InterestSeries)> = match status {
        CalibrationStatus::Ok => seen.iter().collect(),
        _ => seen.last().into_iter().collect(),
    };
    for (idx, qs, xs) in pick {
        let r = assemble(query, bank.reference(), &entries[*idx], qs, xs, requests, status)?;
        let tighter = match &best {
            None => true,
            Some(b) => r.hi.div_by(&r.lo) <= b.hi.div_by(&b.lo),
        };
        if tighter {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one comparison"))
}

/// Per-query results of a batch plus the request-count histogram.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct BatchOutcome {
    pub results: Vec<CalibrationResult>,
    pub errors: Vec<(QueryId, CalibrateError)>,
    /// `requests_used` -> number of queries.
    pub histogram: BTreeMap<usize, usize>,
}

impl BatchOutcome {
    /// Collects outcomes in input order; errors are isolated per query.
    pub fn from_outcomes(
        outcomes: impl IntoIterator<Item = (QueryId, Result<CalibrationResult, CalibrateError>)>,
    ) -> Self {
        let mut out = BatchOutcome::default();
        for (q, r) in outcomes {
            match r {
                Ok(r) => {
                    *out.histogram.entry(r.requests_used).or_insert(0) += 1;
                    out.results.push(r);
                }
                Err(e) => out.errors.push((q, e)),
            }
        }
        out
    }

    pub fn mean_requests(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        let total: usize = self.results.iter().map(|r| r.requests_used).sum();
        total as f64 / self.results.len() as f64
    }

    pub fn max_requests(&self) -> usize {
        self.results.iter().map(|r| r.requests_used).max().unwrap_or(0)
    }
}

/// Calibrates each query in turn.
pub fn calibrate_batch<P: Provider + ?Sized>(
    queries: &[QueryId],
    bank: &AnchorBank,
    provider: &P,
    tolerance: &SearchTolerance,
) -> BatchOutcome {
    BatchOutcome::from_outcomes(
        queries
            .iter()
            .map(|q| (q.clone(), calibrate(q, bank, provider, tolerance))),
    )
}

/// Largest number of requests a search over `n` anchors can take.
pub fn max_search_requests(n: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < n {
        bits += 1;
    }
    bits + 1
}
