//! Text encodings shared by bank files and the response cache.
//!
//! Both are "sealed" documents: one header line
//! `<kind> v<version> sha256=<hex>` followed by a JSON body whose SHA-256
//! (of the exact body bytes) is in the header.

use std::str::FromStr;

use anchorbank_core::model::{Precision, ResponseId};
use anchorbank_core::{InterestSeries, ProviderResponse, QueryId, Rational, RequestSpec, Timespan};
use chrono::NaiveDate;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::StoreError;

/// A rational as `[numerator, denominator]` decimal strings.
pub type RationalPair = [String; 2];

pub fn rational_to_pair(r: &Rational) -> RationalPair {
    [r.numer().to_string(), r.denom().to_string()]
}

pub fn rational_from_pair(p: &RationalPair) -> Result<Rational, StoreError> {
    let num = BigInt::from_str(&p[0]).map_err(|e| StoreError::Invalid(format!("{}: {e}", p[0])))?;
    let den = BigInt::from_str(&p[1]).map_err(|e| StoreError::Invalid(format!("{}: {e}", p[1])))?;
    if den.is_zero() {
        return Err(StoreError::Invalid("zero denominator".into()));
    }
    Ok(Rational::new(num, den))
}

/// Parses `"3/10"`, `"0.1"`, `"7"` or `"-2.5"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, StoreError> {
    let s = s.trim();
    let bad = || StoreError::Invalid(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let den = BigInt::from(10u32).pow(frac.len() as u32);
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Shortest exact decimal or fraction for display in CSVs.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    format!("{}/{}", r.numer(), r.denom())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn seal(kind: &str, version: u32, body: &str) -> String {
    format!("{kind} v{version} sha256={}\n{body}", sha256_hex(body.as_bytes()))
}

/// Checks header and checksum; returns the version and the body.
pub fn unseal<'a>(kind: &str, text: &'a str) -> Result<(u32, &'a str), StoreError> {
    let Some((header, body)) = text.split_once('\n') else {
        return Err(StoreError::Checksum);
    };
    let mut parts = header.split(' ');
    let (Some(k), Some(v), Some(sum), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(StoreError::Header(header.chars().take(80).collect()));
    };
    if k != kind {
        return Err(StoreError::Header(format!("expected {kind}, found {k}")));
    }
    let version = v
        .strip_prefix('v')
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| StoreError::Header(format!("bad version {v:?}")))?;
    let sum = sum
        .strip_prefix("sha256=")
        .ok_or_else(|| StoreError::Header(format!("bad checksum field {sum:?}")))?;
    if sha256_hex(body.as_bytes()) != sum {
        return Err(StoreError::Checksum);
    }
    Ok((version, body))
}

pub fn parse_date(s: &str) -> Result<NaiveDate, StoreError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| StoreError::Invalid(format!("{s}: {e}")))
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TimespanDoc {
    pub start: String,
    pub end: String,
}

impl TimespanDoc {
    pub fn from_timespan(t: Timespan) -> Self {
        TimespanDoc {
            start: t.start().to_string(),
            end: t.end().to_string(),
        }
    }

    pub fn to_timespan(&self) -> Result<Timespan, StoreError> {
        Ok(Timespan::new(parse_date(&self.start)?, parse_date(&self.end)?)?)
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RequestDoc {
    pub queries: Vec<String>,
    pub region: String,
    pub timespan: TimespanDoc,
}

impl RequestDoc {
    pub fn from_request(r: &RequestSpec) -> Self {
        RequestDoc {
            queries: r.queries().iter().map(|q| q.to_string()).collect(),
            region: r.region().to_string(),
            timespan: TimespanDoc::from_timespan(r.timespan()),
        }
    }

    pub fn to_request(&self) -> Result<RequestSpec, StoreError> {
        let ids = self
            .queries
            .iter()
            .map(|q| QueryId::new(q.as_str()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RequestSpec::new(ids, &self.region, self.timespan.to_timespan()?)?)
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SeriesDoc {
    pub query: String,
    /// `[date, value]`; values are integers or exact fractions.
    pub points: Vec<[String; 2]>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ResponseDoc {
    pub request: RequestDoc,
    pub response_id: u64,
    pub precision: String,
    pub series: Vec<SeriesDoc>,
}

impl ResponseDoc {
    pub fn from_response(resp: &ProviderResponse) -> Self {
        ResponseDoc {
            request: RequestDoc::from_request(resp.request()),
            response_id: resp.response_id().0,
            precision: match resp.precision() {
                Precision::Rounded => "rounded".into(),
                Precision::Exact => "exact".into(),
            },
            series: resp
                .series()
                .iter()
                .map(|s| SeriesDoc {
                    query: s.query().to_string(),
                    points: s
                        .points()
                        .iter()
                        .map(|p| [p.date.to_string(), format_rational(&p.value)])
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_response(&self) -> Result<ProviderResponse, StoreError> {
        let request = self.request.to_request()?;
        let mut series = Vec::with_capacity(self.series.len());
        for s in &self.series {
            let id = QueryId::new(s.query.as_str())?;
            let series_one = match self.precision.as_str() {
                "rounded" => {
                    let mut pts = Vec::with_capacity(s.points.len());
                    for [d, v] in &s.points {
                        let v: u32 = v
                            .parse()
                            .map_err(|_| StoreError::Invalid(format!("reading {v:?}")))?;
                        pts.push((parse_date(d)?, v));
                    }
                    InterestSeries::rounded(id, pts)?
                }
                "exact" => {
                    let mut pts = Vec::with_capacity(s.points.len());
                    for [d, v] in &s.points {
                        let v = parse_rational(v)?;
                        if v.is_negative() {
                            return Err(StoreError::Invalid(format!("negative reading {v}")));
                        }
                        pts.push((parse_date(d)?, v));
                    }
                    InterestSeries::exact(id, pts)?
                }
                other => return Err(StoreError::Invalid(format!("precision {other:?}"))),
            };
            series.push(series_one);
        }
        Ok(ProviderResponse::new(request, series, ResponseId(self.response_id))?)
    }
}
