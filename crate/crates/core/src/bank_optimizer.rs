//! Near-equidistant anchor banks.
//!
//! Chaining `n - 1` hops of constant ratio `c`, each observed with one side
//! pinned at 100 and the other rounded, gives a total bound ratio
//! `((c + e) / (c - e))^(log_c r*)` for half-width `e`. It is minimized near
//! `c = 1/e` independently of `r*`. The optimizer picks a subset of an
//! initial bank whose hops are as close to `c` as possible, re-measures every
//! hop with a two-query request, and recalibrates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::E;

use num_traits::ToPrimitive;

use crate::bank_builder::{chains_to, entries_from_chains, ComparisonGraph, ReferencePolicy};
use crate::error::{BuildError, OptimizerError};
use crate::model::{
    int, pair_ratio, to_f64, AnchorBank, BankParams, QueryId, Rational, RatioEstimate, RequestSpec,
    SCALE_MAX,
};
use crate::provider::Provider;

/// Target hop ratio and rounding half-width (on the `[0, 1]` scale).
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct OptimalityParams {
    pub target_ratio: f64,
    pub rounding_half_width: f64,
}

impl Default for OptimalityParams {
    fn default() -> Self {
        OptimalityParams {
            target_ratio: 1.0 / E,
            rounding_half_width: 1.0 / 200.0,
        }
    }
}

impl OptimalityParams {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let (c, eps) = (self.target_ratio, self.rounding_half_width);
        if !(c > 0.0 && c < 1.0) {
            return Err(OptimizerError::Domain(format!("target ratio {c} not in (0, 1)")));
        }
        if !(eps > 0.0 && eps < c) {
            return Err(OptimizerError::Domain(format!(
                "rounding half-width {eps} not in (0, {c})"
            )));
        }
        Ok(())
    }
}

/// Bound ratio of one hop with ratio `c`: `(c + eps) / (c - eps)`.
pub fn step_factor(c: f64, eps: f64) -> Result<f64, OptimizerError> {
    OptimalityParams {
        target_ratio: c,
        rounding_half_width: eps,
    }
    .validate()?;
    Ok((c + eps) / (c - eps))
}

/// Bound ratio of an equidistant chain with hop ratio `c` spanning `r_star`.
pub fn eta_of_c(c: f64, r_star: f64, eps: f64) -> Result<f64, OptimizerError> {
    let step = step_factor(c, eps)?;
    if !(r_star > 0.0 && r_star < 1.0) {
        return Err(OptimizerError::Domain(format!("r* = {r_star} not in (0, 1)")));
    }
    let hops = libm::log(r_star) / libm::log(c);
    Ok(libm::pow(step, hops))
}

/// Bound ratio of the chain at `c = 1/e`: `step^(-ln r*)`. `r_star = 1`
/// spans no hops and yields exactly 1.
pub fn theoretical_optimum(r_star: f64, eps: f64) -> Result<f64, OptimizerError> {
    if !(r_star > 0.0 && r_star <= 1.0) {
        return Err(OptimizerError::Domain(format!("r* = {r_star} not in (0, 1]")));
    }
    let step = step_factor(1.0 / E, eps)?;
    Ok(libm::pow(step, -libm::log(r_star)))
}

/// `steps + 1` evenly spaced values covering `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .collect()
}

/// Grid value of `c` minimizing `eta_of_c`, skipping points outside the
/// domain. The first minimum wins on ties.
pub fn argmin_c(r_star: f64, eps: f64, grid: &[f64]) -> Result<f64, OptimizerError> {
    let mut best: Option<(f64, f64)> = None;
    for &c in grid {
        let Ok(eta) = eta_of_c(c, r_star, eps) else {
            continue;
        };
        if best.map_or(true, |(_, b)| eta < b) {
            best = Some((c, eta));
        }
    }
    best.map(|(c, _)| c)
        .ok_or_else(|| OptimizerError::Domain(format!("no grid point in the domain for r* = {r_star}")))
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct EtaGridRow {
    pub c: f64,
    pub r_star: f64,
    pub eta: f64,
}

/// `eta_of_c` over the product of `cs` and `r_stars` (invalid points skipped).
pub fn eta_grid(cs: &[f64], r_stars: &[f64], eps: f64) -> Vec<EtaGridRow> {
    let mut rows = Vec::new();
    for &r_star in r_stars {
        for &c in cs {
            if let Ok(eta) = eta_of_c(c, r_star, eps) {
                rows.push(EtaGridRow { c, r_star, eta });
            }
        }
    }
    rows
}

/// `|log(c / r)|`, the cost of a hop with ratio `r`.
pub fn hop_weight(c: f64, ratio: f64) -> f64 {
    libm::fabs(libm::log(c) - libm::log(ratio))
}

/// Shortest path from the least to the most popular anchor in the complete
/// directed graph over `bank`, with hop weight `|log(c / r_xy)|` and
/// `r_xy = R_x / R_y`. Returns the node sequence.
///
/// Fails when a chosen hop spans more than one order of magnitude.
pub fn select_equidistant_subset(bank: &AnchorBank, c: f64) -> Result<Vec<QueryId>, OptimizerError> {
    if !(c > 0.0 && c < 1.0) {
        return Err(OptimizerError::Domain(format!("target ratio {c} not in (0, 1)")));
    }
    let n = bank.len();
    if n < 2 {
        return Err(OptimizerError::BankTooSmall);
    }
    let ln_r: Vec<f64> = bank
        .entries()
        .iter()
        .map(|e| libm::log(to_f64(&e.calibrated)))
        .collect();

    // Dense Dijkstra; the graph is complete.
    let mut dist = alloc::vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = alloc::vec![None; n];
    let mut done = alloc::vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let mut u = None;
        for i in 0..n {
            if !done[i] && dist[i].is_finite() && u.map_or(true, |j: usize| dist[i] < dist[j]) {
                u = Some(i);
            }
        }
        let Some(u) = u else { break };
        done[u] = true;
        if u == n - 1 {
            break;
        }
        for v in 0..n {
            if done[v] {
                continue;
            }
            let w = libm::fabs(libm::log(c) - (ln_r[u] - ln_r[v]));
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                prev[v] = Some(u);
            }
        }
    }

    let mut path = alloc::vec![n - 1];
    let mut cur = n - 1;
    while let Some(p) = prev[cur] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    let entries = bank.entries();
    for hop in path.windows(2) {
        let ratio = libm::exp(ln_r[hop[0]] - ln_r[hop[1]]);
        if ratio < 0.1 {
            return Err(OptimizerError::Gap {
                lower: entries[hop[0]].query.clone(),
                upper: entries[hop[1]].query.clone(),
                ratio,
            });
        }
    }
    Ok(path.into_iter().map(|i| entries[i].query.clone()).collect())
}

/// Bound ratio a two-query request would give for a hop with point ratio
/// `r` (< 1): the smaller side reads `m = round(100 r)`, the larger 100.
fn pairwise_eta(r: &Rational) -> Option<Rational> {
    let scaled = r * int(SCALE_MAX as i64);
    let m = (scaled + crate::model::half()).floor().to_integer().to_i64()?;
    if m <= 0 {
        return None;
    }
    if m >= SCALE_MAX as i64 {
        return Some(int(SCALE_MAX as i64) / (int(SCALE_MAX as i64) - crate::model::half()));
    }
    let m = int(m);
    Some((&m + crate::model::half()) / (&m - crate::model::half()))
}

#[derive(Clone, PartialEq, Debug)]
pub struct RefineConfig {
    pub params: OptimalityParams,
    pub reference: ReferencePolicy,
    /// Allowed range for adjacent ratios in the result; violations are
    /// reported, not fatal.
    pub band: Option<(f64, f64)>,
    /// Reuse a first-round estimate instead of requesting a hop when it is
    /// already as tight as a two-query request would be.
    pub reuse_round_one: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            params: OptimalityParams::default(),
            reference: ReferencePolicy::CloseToMedian,
            band: Some((0.25, 0.55)),
            reuse_round_one: true,
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct BandViolation {
    pub lower: QueryId,
    pub upper: QueryId,
    pub ratio: f64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct RefineOutput {
    pub bank: AnchorBank,
    /// First-round estimates merged with the re-measured hops.
    pub graph: ComparisonGraph,
    pub hops: Vec<RatioEstimate>,
    pub requests_issued: usize,
    pub reused_hops: usize,
    pub band_violations: Vec<BandViolation>,
}

/// Subset anchor closest (in log scale) to the median anchor of `initial`;
/// ties go to the smaller id.
pub fn closest_to_median(initial: &AnchorBank, subset: &[QueryId]) -> Option<QueryId> {
    let median = libm::log(to_f64(&initial.entries()[initial.median_index()].calibrated));
    subset
        .iter()
        .filter_map(|q| initial.entry(q).map(|e| (q, libm::log(to_f64(&e.calibrated)))))
        .min_by(|a, b| {
            libm::fabs(a.1 - median)
                .total_cmp(&libm::fabs(b.1 - median))
                .then_with(|| a.0.cmp(b.0))
        })
        .map(|(q, _)| q.clone())
}

/// Re-measures each adjacent hop of `subset` (ascending popularity) with a
/// two-query request and recalibrates the subset.
///
/// Calibration uses the tightest chains over all estimates at hand: the
/// re-measured hops plus `round_one` when given. The search start is the
/// subset anchor closest to the median of `initial`.
pub fn refine_pairwise<P: Provider + ?Sized>(
    subset: &[QueryId],
    provider: &P,
    initial: &AnchorBank,
    round_one: Option<&ComparisonGraph>,
    config: &RefineConfig,
) -> Result<RefineOutput, OptimizerError> {
    config.params.validate()?;
    if subset.len() < 2 {
        return Err(OptimizerError::BankTooSmall);
    }
    let mut graph = round_one.cloned().unwrap_or_default();
    let mut hops = Vec::with_capacity(subset.len() - 1);
    let mut requests_issued = 0;
    let mut reused_hops = 0;
    for w in subset.windows(2) {
        let (lower, upper) = (&w[0], &w[1]);
        let reused = match (config.reuse_round_one, round_one) {
            (true, Some(g)) => g.estimate(lower, upper).filter(|e| {
                match (pairwise_eta(&e.r), e.eta.finite()) {
                    (Some(pred), Some(eta)) => eta <= &pred,
                    _ => false,
                }
            }),
            _ => None,
        };
        let estimate = match reused {
            Some(e) => {
                reused_hops += 1;
                e
            }
            None => {
                let req = RequestSpec::new(
                    alloc::vec![lower.clone(), upper.clone()],
                    initial.region(),
                    initial.timespan(),
                )?;
                let resp = provider.fetch(&req)?;
                requests_issued += 1;
                let (xs, ys) = (&resp.series()[0], &resp.series()[1]);
                if xs.is_all_zero() || ys.is_all_zero() {
                    return Err(OptimizerError::IrrecoverableHop {
                        lower: lower.clone(),
                        upper: upper.clone(),
                    });
                }
                pair_ratio(xs, ys)?
            }
        };
        graph.insert(&estimate);
        hops.push(estimate);
    }

    let start = closest_to_median(initial, subset).unwrap_or_else(|| subset[0].clone());
    let reference = match &config.reference {
        ReferencePolicy::Explicit(q) => {
            if !subset.contains(q) {
                return Err(BuildError::UnknownReference(q.clone()).into());
            }
            q.clone()
        }
        ReferencePolicy::MostPopular => subset[subset.len() - 1].clone(),
        ReferencePolicy::CloseToMedian => start.clone(),
    };

    let (chains, _) = chains_to(&graph, &reference)?;
    let keep: BTreeSet<&QueryId> = subset.iter().collect();
    let subset_chains: BTreeMap<QueryId, _> = chains
        .into_iter()
        .filter(|(q, _)| keep.contains(q))
        .collect();
    if subset_chains.len() != subset.len() {
        let unreachable = subset
            .iter()
            .filter(|q| !subset_chains.contains_key(*q))
            .cloned()
            .collect();
        return Err(BuildError::Disconnected { unreachable }.into());
    }
    let (entries, tied) = entries_from_chains(&subset_chains, &reference);
    if !tied.is_empty() {
        log::warn!("optimized bank drops tied anchors: {:?}", tied);
    }
    let start = if entries.iter().any(|e| e.query == start) {
        start
    } else {
        reference.clone()
    };
    let params = BankParams {
        k: 2,
        ..initial.params().clone()
    };
    let bank = AnchorBank::new(
        entries,
        reference,
        start,
        initial.region(),
        initial.timespan(),
        params,
    )?;

    let mut band_violations = Vec::new();
    if let Some((lo, hi)) = config.band {
        for w in bank.entries().windows(2) {
            let ratio = to_f64(&(&w[0].calibrated / &w[1].calibrated));
            if ratio < lo || ratio > hi {
                band_violations.push(BandViolation {
                    lower: w[0].query.clone(),
                    upper: w[1].query.clone(),
                    ratio,
                });
            }
        }
    }

    Ok(RefineOutput {
        bank,
        graph,
        hops,
        requests_issued,
        reused_hops,
        band_violations,
    })
}

/// Subset selection followed by pairwise refinement.
pub fn optimize_bank<P: Provider + ?Sized>(
    provider: &P,
    initial: &AnchorBank,
    round_one: Option<&ComparisonGraph>,
    config: &RefineConfig,
) -> Result<RefineOutput, OptimizerError> {
    config.params.validate()?;
    let subset = select_equidistant_subset(initial, config.params.target_ratio)?;
    refine_pairwise(&subset, provider, initial, round_one, config)
}

/// Per-anchor bound ratios before and after optimization.
#[derive(Clone, PartialEq, Debug)]
pub struct EtaComparison {
    pub query: QueryId,
    pub calibrated: f64,
    pub eta_initial: f64,
    pub eta_optimized: f64,
    /// Optimum for the anchor's estimated span to the reference.
    pub eta_theoretical: f64,
}

/// Compares every anchor of `optimized` against its tightest chain to the
/// same reference in the first-round graph.
pub fn compare_eta(
    round_one: &ComparisonGraph,
    optimized: &AnchorBank,
    eps: f64,
) -> Result<Vec<EtaComparison>, OptimizerError> {
    let (chains, _) = chains_to(round_one, optimized.reference())?;
    let mut rows = Vec::with_capacity(optimized.len());
    for e in optimized.entries() {
        let eta_initial = chains
            .get(&e.query)
            .map(|c| c.estimate.eta.to_f64())
            .unwrap_or(f64::INFINITY);
        let r = to_f64(&e.calibrated);
        let span = if r > 1.0 { 1.0 / r } else { r };
        rows.push(EtaComparison {
            query: e.query.clone(),
            calibrated: r,
            eta_initial,
            eta_optimized: to_f64(&e.eta),
            eta_theoretical: theoretical_optimum(span, eps)?,
        });
    }
    Ok(rows)
}
