//! Input lists and CSV outputs.
//!
//! CSVs are UTF-8 with RFC 4180 quoting and ISO-8601 dates. Ratios are
//! written both as floats and, where a reader may want to audit them, as
//! exact fractions. An unbounded upper end is written as `inf`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use anchorbank_core::bank_optimizer::{EtaComparison, EtaGridRow};
use anchorbank_core::calibrator::BatchOutcome;
use anchorbank_core::model::to_f64;
use anchorbank_core::{AnchorBank, Bound, CalibrationResult, FrequencyList, QueryId};

use crate::codec::{format_rational, sha256_hex};
use crate::error::FormatError;

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

fn read_err(e: std::io::Error) -> FormatError {
    FormatError::Io {
        path: "<input>".into(),
        source: e,
    }
}

/// Two tab-separated columns, `id` and `frequency`. A first line whose
/// second column is not a number is taken as a header. Blank lines and
/// lines starting with `#` are skipped. Rows may come in any order.
pub fn read_frequency_tsv(reader: impl BufRead) -> Result<FrequencyList, FormatError> {
    let mut rows = Vec::new();
    let mut first = true;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(read_err)?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let header_allowed = std::mem::replace(&mut first, false);
        let mut cols = line.split('\t');
        let (Some(id), Some(freq)) = (cols.next(), cols.next()) else {
            return Err(parse_err(i + 1, "expected two tab-separated columns"));
        };
        let freq = match freq.trim().parse::<f64>() {
            Ok(f) => f,
            Err(_) if header_allowed => continue,
            Err(_) => return Err(parse_err(i + 1, format!("bad frequency {freq:?}"))),
        };
        let id = QueryId::new(id.trim()).map_err(|e| parse_err(i + 1, e.to_string()))?;
        rows.push((id, freq));
    }
    Ok(FrequencyList::from_unsorted(rows)?)
}

pub fn write_frequency_tsv(freq: &FrequencyList, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "id\tfrequency")?;
    for (q, f) in freq.entries() {
        writeln!(out, "{q}\t{f}")?;
    }
    Ok(())
}

/// One query per line; blank lines and `#` comments skipped.
pub fn read_query_list(reader: impl BufRead) -> Result<Vec<QueryId>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(read_err)?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(QueryId::new(line).map_err(|e| parse_err(i + 1, e.to_string()))?);
    }
    Ok(out)
}

fn bound_str(b: &Bound) -> String {
    match b {
        Bound::Finite(r) => to_f64(r).to_string(),
        Bound::Unbounded => "inf".into(),
    }
}

fn bound_exact(b: &Bound) -> String {
    match b {
        Bound::Finite(r) => format_rational(r),
        Bound::Unbounded => "inf".into(),
    }
}

/// File stem for a query's series CSV: the id with unsafe characters
/// replaced, plus a short hash so distinct ids never collide.
pub fn file_stem_for(query: &QueryId) -> String {
    let safe: String = query
        .as_str()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(64)
        .collect();
    format!("{safe}-{}", &sha256_hex(query.as_str().as_bytes())[..8])
}

pub fn write_bank_csv(bank: &AnchorBank, out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query", "R", "R_lo", "R_hi", "eta", "R_exact", "is_reference"])?;
    for e in bank.entries() {
        w.write_record([
            e.query.to_string(),
            to_f64(&e.calibrated).to_string(),
            to_f64(&e.lo).to_string(),
            to_f64(&e.hi).to_string(),
            to_f64(&e.eta).to_string(),
            format_rational(&e.calibrated),
            (&e.query == bank.reference()).to_string(),
        ])?;
    }
    w.flush().map_err(read_err)?;
    Ok(())
}

pub fn write_series_csv(result: &CalibrationResult, out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "value", "lo", "hi"])?;
    for p in &result.points {
        w.write_record([
            p.date.to_string(),
            to_f64(&p.value).to_string(),
            to_f64(&p.lo).to_string(),
            bound_str(&p.hi),
        ])?;
    }
    w.flush().map_err(read_err)?;
    Ok(())
}

pub fn write_summary_csv(results: &[CalibrationResult], out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "query",
        "status",
        "matched_anchor",
        "requests_used",
        "R",
        "R_lo",
        "R_hi",
        "R_exact",
        "R_hi_exact",
    ])?;
    for r in results {
        w.write_record([
            r.query.to_string(),
            r.status.name().to_string(),
            r.matched_anchor.to_string(),
            r.requests_used.to_string(),
            r.calibrated_f64().to_string(),
            r.lo_f64().to_string(),
            bound_str(&r.hi),
            format_rational(&r.calibrated),
            bound_exact(&r.hi),
        ])?;
    }
    w.flush().map_err(read_err)?;
    Ok(())
}

pub fn write_histogram_csv(histogram: &BTreeMap<usize, usize>, out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["requests_used", "queries"])?;
    for (k, v) in histogram {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush().map_err(read_err)?;
    Ok(())
}

pub fn write_errors_csv(batch: &BatchOutcome, out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query", "error"])?;
    for (q, e) in &batch.errors {
        w.write_record([q.to_string(), e.to_string()])?;
    }
    w.flush().map_err(read_err)?;
    Ok(())
}

pub fn write_eta_grid_csv(rows: &[EtaGridRow], out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["c", "r_star", "eta"])?;
    for r in rows {
        w.write_record([r.c.to_string(), r.r_star.to_string(), r.eta.to_string()])?;
    }
    w.flush().map_err(read_err)?;
    Ok(())
}

pub fn write_eta_comparison_csv(rows: &[EtaComparison], out: impl Write) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query", "R", "eta_initial", "eta_optimized", "eta_theoretical"])?;
    for r in rows {
        w.write_record([
            r.query.to_string(),
            r.calibrated.to_string(),
            r.eta_initial.to_string(),
            r.eta_optimized.to_string(),
            r.eta_theoretical.to_string(),
        ])?;
    }
    w.flush().map_err(read_err)?;
    Ok(())
}
