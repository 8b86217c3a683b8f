//! Simulator experiments backing the acceptance checks.
//!
//! Each experiment returns a report (metrics plus pass/fail checks) and the
//! raw per-query rows the metrics were computed from.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anchorbank_core::bank_builder::{chains_to, plan_anchors, BuildOutput};
use anchorbank_core::bank_optimizer::{argmin_c, eta_grid, linear_grid, step_factor, EtaGridRow};
use anchorbank_core::calibrator::max_search_requests;
use anchorbank_core::model::to_f64;
use anchorbank_core::{
    estimate_ratios, make_universe, optimize_bank, shingle_requests, theoretical_optimum, BuildConfig,
    CalibrationStatus, DisconnectedPolicy, FrequencyList, OptimalityParams, Provider, QueryId,
    Rational, RefineConfig, RoundingRule, SearchTolerance, ShapeFamily, Simulator, UniverseSpec,
};
use num_traits::{Signed, Zero};

use crate::config::rounding_name;
use crate::error::{FormatError, HarnessError};
use crate::parallel::{build_bank_parallel, calibrate_batch_parallel};
use crate::storage::{load_bank, save_bank, BankFile, Provenance, UniverseDoc};

#[derive(Clone, PartialEq, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, PartialEq, Debug)]
pub struct ExperimentReport {
    pub name: String,
    pub seeds: Vec<u64>,
    pub metrics: Vec<(String, f64)>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, seeds: &[u64]) -> Self {
        ExperimentReport {
            name: name.into(),
            seeds: seeds.to_vec(),
            metrics: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Plain-text block: one line per metric and per check.
    pub fn render(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let mut out = format!("== {} (seeds {})\n", self.name, seeds.join(","));
        for (n, v) in &self.metrics {
            out.push_str(&format!("   {n} = {v}\n"));
        }
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
        }
        out
    }
}

/// Simulated world shared by the experiments.
#[derive(Clone, PartialEq, Debug)]
pub struct SimSetup {
    pub n_queries: usize,
    pub log10_range: f64,
    pub shape_family: ShapeFamily,
    pub rounding: RoundingRule,
    pub sigma: f64,
    pub n_anchors: usize,
    /// Anchors are drawn from this many top-ranked queries; all if `None`.
    pub top_n: Option<usize>,
    pub k: usize,
    pub tau: u32,
}

impl SimSetup {
    pub fn new(n_queries: usize, log10_range: f64, n_anchors: usize) -> Self {
        SimSetup {
            n_queries,
            log10_range,
            shape_family: ShapeFamily::Mixed,
            rounding: RoundingRule::NearestHalfAway,
            sigma: 0.3,
            n_anchors,
            top_n: None,
            k: BuildConfig::DEFAULT_K,
            tau: BuildConfig::DEFAULT_TAU,
        }
    }

    pub fn with_rounding(mut self, rounding: RoundingRule) -> Self {
        self.rounding = rounding;
        self
    }

    fn universe_spec(&self, seed: u64) -> UniverseSpec {
        UniverseSpec::new(self.n_queries, self.log10_range, self.shape_family, seed)
    }

    pub fn simulator(&self, seed: u64) -> Result<Simulator, HarnessError> {
        Ok(Simulator::new(make_universe(&self.universe_spec(seed))?, self.rounding))
    }

    pub fn frequencies(&self, sim: &Simulator, seed: u64) -> Result<FrequencyList, HarnessError> {
        Ok(FrequencyList::from_unsorted(sim.universe().frequency_proxy(self.sigma, seed))?)
    }

    pub fn build_config(&self, seed: u64) -> BuildConfig {
        let start = chrono::NaiveDate::from_ymd_opt(2021, 1, 3).expect("valid date");
        let end = start + chrono::Days::new(7 * (anchorbank_core::sim::DEFAULT_POINTS as u64 - 1));
        let timespan = anchorbank_core::Timespan::new(start, end).expect("ordered");
        let mut c = BuildConfig::new("US", timespan);
        c.top_n = self.top_n.unwrap_or(self.n_queries).min(self.n_queries);
        c.sample_n = self.n_anchors.min(c.top_n);
        c.k = self.k;
        c.tau = self.tau;
        c.seed = seed;
        c.on_disconnected = DisconnectedPolicy::Drop;
        c
    }

    pub fn provenance(&self, seed: u64) -> Provenance {
        let c = self.build_config(seed);
        let mut parameters = BTreeMap::new();
        parameters.insert("k".to_string(), c.k.to_string());
        parameters.insert("tau".to_string(), c.tau.to_string());
        parameters.insert("top_n".to_string(), c.top_n.to_string());
        parameters.insert("sample_n".to_string(), c.sample_n.to_string());
        parameters.insert("seed".to_string(), seed.to_string());
        Provenance {
            provider: "simulator".into(),
            universe: Some(UniverseDoc {
                n_queries: self.n_queries,
                log10_range: self.log10_range,
                shape_family: self.shape_family.name().into(),
                seed,
                points: anchorbank_core::sim::DEFAULT_POINTS,
                rounding: rounding_name(self.rounding).into(),
            }),
            fetched: None,
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    /// Simulator plus an initial bank for `seed`.
    pub fn build(&self, seed: u64) -> Result<(Simulator, BuildOutput), HarnessError> {
        let sim = self.simulator(seed)?;
        let freq = self.frequencies(&sim, seed)?;
        let out = build_bank_parallel(&sim, &freq, &self.build_config(seed))?;
        Ok((sim, out))
    }
}

fn csv_out(out: impl Write) -> csv::Writer<impl Write> {
    csv::Writer::from_writer(out)
}

#[derive(Clone, PartialEq, Debug)]
pub struct ContainmentRow {
    pub seed: u64,
    pub query: QueryId,
    pub status: CalibrationStatus,
    pub truth: f64,
    pub r: f64,
    pub lo: f64,
    pub hi: f64,
    pub contained: bool,
    pub relative_error: f64,
    pub zero_width: bool,
}

#[derive(Clone, PartialEq, Debug)]
pub struct ContainmentOutcome {
    pub report: ExperimentReport,
    pub rows: Vec<ContainmentRow>,
}

impl ContainmentOutcome {
    pub fn write_rows(&self, out: impl Write) -> Result<(), FormatError> {
        let mut w = csv_out(out);
        w.write_record([
            "seed", "query", "status", "truth", "R", "R_lo", "R_hi", "contained", "relative_error", "zero_width",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.seed.to_string(),
                r.query.to_string(),
                r.status.name().to_string(),
                r.truth.to_string(),
                r.r.to_string(),
                r.lo.to_string(),
                r.hi.to_string(),
                r.contained.to_string(),
                r.relative_error.to_string(),
                r.zero_width.to_string(),
            ])?;
        }
        w.flush().map_err(|e| FormatError::Io {
            path: "<output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Builds a bank per seed and calibrates every query of the universe.
///
/// Checks depend on the rounding rule: nearest rounding must contain every
/// latent ratio (clamped results excluded); disabled rounding must recover
/// every ratio exactly with zero-width envelopes; floor rounding is the
/// negative control and must miss at least one.
pub fn exp_containment(seeds: &[u64], setup: &SimSetup) -> Result<ContainmentOutcome, HarnessError> {
    let started = Instant::now();
    let name = format!("containment[{}]", rounding_name(setup.rounding));
    let mut report = ExperimentReport::new(name, seeds);
    let mut rows = Vec::new();
    let mut span = f64::INFINITY;
    for &seed in seeds {
        let (sim, out) = setup.build(seed)?;
        let bank = &out.bank;
        let reference = bank.reference().clone();
        let ref_max = sim.universe().max_of(&reference).expect("reference in universe").clone();
        let queries: Vec<QueryId> = sim.universe().ids().cloned().collect();
        let maxima: Vec<f64> = queries
            .iter()
            .map(|q| to_f64(sim.universe().max_of(q).expect("known")))
            .collect();
        let (lo, hi) = maxima
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), m| (a.min(*m), b.max(*m)));
        span = span.min((hi / lo).log10());

        let batch = calibrate_batch_parallel(&queries, bank, &sim, &SearchTolerance::default());
        if let Some((q, e)) = batch.errors.first() {
            log::error!("calibration of {q} failed: {e}");
        }
        report.metric(&format!("seed{seed}_bank_size"), bank.len() as f64);
        report.metric(&format!("seed{seed}_errors"), batch.errors.len() as f64);
        for r in &batch.results {
            let truth: Rational = sim.universe().max_of(&r.query).expect("known") / &ref_max;
            let rel = if truth.is_zero() {
                0.0
            } else {
                to_f64(&((&r.calibrated - &truth) / &truth).abs())
            };
            rows.push(ContainmentRow {
                seed,
                query: r.query.clone(),
                status: r.status,
                truth: to_f64(&truth),
                r: r.calibrated_f64(),
                lo: r.lo_f64(),
                hi: r.hi_f64(),
                contained: r.contains(&truth),
                relative_error: rel,
                zero_width: r.hi.finite() == Some(&r.lo),
            });
        }
        if !batch.errors.is_empty() {
            report.check(
                &format!("seed {seed} calibrates every query"),
                false,
                format!("{} failures", batch.errors.len()),
            );
        }
    }

    let scored: Vec<&ContainmentRow> = rows.iter().filter(|r| !r.status.is_clamped()).collect();
    let contained = scored.iter().filter(|r| r.contained).count();
    let rate = if scored.is_empty() {
        0.0
    } else {
        contained as f64 / scored.len() as f64
    };
    let max_rel = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let zero_width = rows.iter().filter(|r| r.zero_width).count();
    let per_seed = rows.len() / seeds.len().max(1);
    let elapsed = started.elapsed().as_secs_f64();
    report.metric("queries", rows.len() as f64);
    report.metric("non_clamped", scored.len() as f64);
    report.metric("containment_rate", rate);
    report.metric("span_orders_of_magnitude", span);
    report.metric("max_relative_error", max_rel);
    report.metric("zero_width_envelopes", zero_width as f64);
    report.metric("seconds", elapsed);

    match setup.rounding {
        RoundingRule::NearestHalfAway => {
            report.check(
                "every non-clamped interval contains the latent ratio",
                contained == scored.len() && !scored.is_empty(),
                format!("{contained}/{} contained", scored.len()),
            );
            report.check(
                "workload size",
                per_seed >= 1000 && span >= 5.0,
                format!("{per_seed} queries per seed spanning {span:.2} orders"),
            );
            report.check("runtime", elapsed <= 300.0, format!("{elapsed:.1} s"));
        }
        RoundingRule::Disabled => {
            report.check(
                "exact recovery",
                max_rel <= 1e-12 && !rows.is_empty(),
                format!("max relative error {max_rel:e}"),
            );
            report.check(
                "zero-width envelopes",
                zero_width == rows.len(),
                format!("{zero_width}/{} zero width", rows.len()),
            );
        }
        RoundingRule::Floor => {
            report.check(
                "floor rounding breaks containment",
                rate < 1.0,
                format!("{contained}/{} contained", scored.len()),
            );
        }
    }
    Ok(ContainmentOutcome { report, rows })
}

#[derive(Clone, PartialEq, Debug)]
pub struct SearchRow {
    pub seed: u64,
    pub query: QueryId,
    pub requests_used: usize,
    pub status: CalibrationStatus,
}

#[derive(Clone, PartialEq, Debug)]
pub struct SearchCostOutcome {
    pub report: ExperimentReport,
    pub rows: Vec<SearchRow>,
    pub histogram: BTreeMap<usize, usize>,
}

impl SearchCostOutcome {
    pub fn write_rows(&self, out: impl Write) -> Result<(), FormatError> {
        let mut w = csv_out(out);
        w.write_record(["seed", "query", "requests_used", "status"])?;
        for r in &self.rows {
            w.write_record([
                r.seed.to_string(),
                r.query.to_string(),
                r.requests_used.to_string(),
                r.status.name().to_string(),
            ])?;
        }
        w.flush().map_err(|e| FormatError::Io {
            path: "<output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Requests per calibration. With `matched`, anchors are drawn from the
/// whole query population; otherwise only from its most popular tenth, so
/// most queries fall below the bank.
pub fn exp_search_cost(seeds: &[u64], setup: &SimSetup, matched: bool) -> Result<SearchCostOutcome, HarnessError> {
    let label = if matched { "matched" } else { "mismatched" };
    let mut report = ExperimentReport::new(format!("search_cost[{label}]"), seeds);
    let mut setup = setup.clone();
    if !matched {
        setup.top_n = Some((setup.n_queries / 10).max(setup.n_anchors));
    }
    let mut rows = Vec::new();
    let mut histogram = BTreeMap::new();
    let mut worst_allowed = usize::MAX;
    let mut bank_sizes = Vec::new();
    for &seed in seeds {
        let (sim, out) = setup.build(seed)?;
        bank_sizes.push(out.bank.len());
        worst_allowed = worst_allowed.min(max_search_requests(out.bank.len()));
        let queries: Vec<QueryId> = sim.universe().ids().cloned().collect();
        let batch = calibrate_batch_parallel(&queries, &out.bank, &sim, &SearchTolerance::default());
        for (k, v) in &batch.histogram {
            *histogram.entry(*k).or_insert(0) += v;
        }
        rows.extend(batch.results.iter().map(|r| SearchRow {
            seed,
            query: r.query.clone(),
            requests_used: r.requests_used,
            status: r.status,
        }));
    }
    let n = rows.len().max(1) as f64;
    let mean = rows.iter().map(|r| r.requests_used).sum::<usize>() as f64 / n;
    let max = rows.iter().map(|r| r.requests_used).max().unwrap_or(0);
    let max_bank = bank_sizes.iter().copied().max().unwrap_or(0);
    report.metric("queries", rows.len() as f64);
    report.metric("max_bank_size", max_bank as f64);
    report.metric("mean_requests", mean);
    report.metric("max_requests", max as f64);
    for (k, v) in &histogram {
        report.metric(&format!("requests_{k}"), *v as f64);
    }
    if matched {
        report.check("mean requests <= 3", mean <= 3.0, format!("mean {mean:.3}"));
        report.check(
            "worst case <= ceil(log2 n) + 1",
            max <= worst_allowed,
            format!("max {max}, bound {worst_allowed} (bank size up to {max_bank})"),
        );
    }
    Ok(SearchCostOutcome {
        report,
        rows,
        histogram,
    })
}

#[derive(Clone, PartialEq, Debug)]
pub struct OptimalityRow {
    pub seed: u64,
    pub query: QueryId,
    pub r_star: f64,
    pub eta_initial: f64,
    pub eta_optimized: f64,
    pub eta_theoretical: f64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct OptimalityOutcome {
    pub report: ExperimentReport,
    pub grid: Vec<EtaGridRow>,
    /// `(r*, argmin c)` per scanned span.
    pub argmins: Vec<(f64, f64)>,
    pub rows: Vec<OptimalityRow>,
}

impl OptimalityOutcome {
    pub fn write_rows(&self, out: impl Write) -> Result<(), FormatError> {
        let mut w = csv_out(out);
        w.write_record(["seed", "query", "r_star", "eta_initial", "eta_optimized", "eta_theoretical"])?;
        for r in &self.rows {
            w.write_record([
                r.seed.to_string(),
                r.query.to_string(),
                r.r_star.to_string(),
                r.eta_initial.to_string(),
                r.eta_optimized.to_string(),
                r.eta_theoretical.to_string(),
            ])?;
        }
        w.flush().map_err(|e| FormatError::Io {
            path: "<output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

pub const SPANS: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

/// Scan of the chain bound ratio over `c`, the closed-form optimum, and
/// optimized-versus-initial banks for every seed.
pub fn exp_optimality(seeds: &[u64], setup: &SimSetup) -> Result<OptimalityOutcome, HarnessError> {
    let params = OptimalityParams::default();
    let eps = params.rounding_half_width;
    let mut report = ExperimentReport::new("optimality", seeds);

    let cs = linear_grid(0.05, 0.95, 900);
    let grid = eta_grid(&cs, &SPANS, eps);
    let mut argmins = Vec::new();
    let mut all_in_band = true;
    for &r in &SPANS {
        let c = argmin_c(r, eps, &cs)?;
        all_in_band &= (0.33..=0.41).contains(&c);
        report.metric(&format!("argmin_c[r*={r:e}]"), c);
        argmins.push((r, c));
    }
    report.check(
        "argmin c in [0.33, 0.41] for r* = 1e-2 .. 1e-7",
        all_in_band,
        argmins.iter().map(|(r, c)| format!("{r:e}:{c:.3}")).collect::<Vec<_>>().join(" "),
    );
    let worst = theoretical_optimum(1e-7, eps)?;
    let step = step_factor(params.target_ratio, eps)?;
    report.metric("eta_bar(1e-7)", worst);
    report.metric("step_factor(1/e)", step);
    report.check("eta_bar(1e-7) < 1.55", worst < 1.55, format!("{worst:.5}"));
    report.check(
        "step factor at 1/e is 1.028 within 1e-3",
        (step - 1.028).abs() <= 1e-3,
        format!("{step:.7}"),
    );

    let mut rows = Vec::new();
    let mut dominated = 0;
    let mut near_optimal = 0;
    let mut banks = 0;
    for &seed in seeds {
        let (sim, out) = setup.build(seed)?;
        let opt = optimize_bank(&sim, &out.bank, Some(&out.graph), &RefineConfig::default())?;
        banks += 1;
        let reference = opt.bank.reference().clone();
        let (initial, _) = chains_to(&out.graph, &reference)?;
        for e in opt.bank.entries() {
            let truth = to_f64(&sim.universe().ratio(&e.query, &reference).expect("known"));
            let r_star = if truth > 1.0 { 1.0 / truth } else { truth };
            let eta_initial = initial
                .get(&e.query)
                .map(|c| c.estimate.eta.to_f64())
                .unwrap_or(f64::INFINITY);
            let row = OptimalityRow {
                seed,
                query: e.query.clone(),
                r_star,
                eta_initial,
                eta_optimized: to_f64(&e.eta),
                eta_theoretical: theoretical_optimum(r_star, eps)?,
            };
            dominated += usize::from(row.eta_optimized <= row.eta_initial);
            near_optimal += usize::from(row.eta_optimized <= 1.10 * row.eta_theoretical);
            rows.push(row);
        }
    }
    report.metric("banks", banks as f64);
    report.metric("anchors", rows.len() as f64);
    report.check(
        "optimized eta <= initial eta",
        dominated == rows.len(),
        format!("{dominated}/{} anchors over {banks} banks", rows.len()),
    );
    report.check(
        "optimized eta <= 1.10 x theoretical",
        near_optimal == rows.len(),
        format!("{near_optimal}/{} anchors", rows.len()),
    );
    Ok(OptimalityOutcome {
        report,
        grid,
        argmins,
        rows,
    })
}

/// Request count of the first round and the exact effect of the threshold.
pub fn exp_shingling(seed: u64, setup: &SimSetup) -> Result<ExperimentReport, HarnessError> {
    let mut report = ExperimentReport::new("shingling", &[seed]);
    let sim = setup.simulator(seed)?;
    let freq = setup.frequencies(&sim, seed)?;
    let config = setup.build_config(seed);
    let anchors = plan_anchors(&freq, &config)?;
    let requests = shingle_requests(&anchors, config.k, &config.region, config.timespan)?;
    let before = sim.calls();
    let responses = requests
        .iter()
        .map(|r| sim.fetch(r))
        .collect::<Result<Vec<_>, _>>()?;
    let issued = sim.calls() - before;
    let expected = anchors.len() - config.k + 1;
    report.metric("anchors", anchors.len() as f64);
    report.metric("requests", issued as f64);
    report.check(
        "n - k + 1 requests",
        issued == expected,
        format!("n={} k={} requests={issued}", anchors.len(), config.k),
    );

    let (kept, discarded, exact) = threshold_audit(&responses, config.tau)?;
    report.metric("pairs_kept", kept as f64);
    report.metric("pairs_discarded", discarded as f64);

    // Sorted shingles rarely put a small maximum next to a large one, so the
    // threshold is also audited on requests that mix both ends of the bank.
    let mut mixed = Vec::with_capacity(anchors.len());
    let (head, tail) = anchors.split_at(anchors.len() / 2);
    for (i, a) in head.iter().enumerate() {
        mixed.push(a.clone());
        if let Some(b) = tail.get(tail.len() - 1 - i) {
            mixed.push(b.clone());
        }
    }
    mixed.extend(tail[..tail.len().saturating_sub(head.len())].iter().cloned());
    let mixed_requests = shingle_requests(&mixed, config.k, &config.region, config.timespan)?;
    let mixed_responses = mixed_requests
        .iter()
        .map(|r| sim.fetch(r))
        .collect::<Result<Vec<_>, _>>()?;
    let (mkept, mdiscarded, mexact) = threshold_audit(&mixed_responses, config.tau)?;
    report.metric("mixed_pairs_kept", mkept as f64);
    report.metric("mixed_pairs_discarded", mdiscarded as f64);
    report.check(
        "threshold discards exactly the pairs with min maximum < tau",
        exact && mexact && mdiscarded > 0,
        format!(
            "tau={}: sorted kept {kept} discarded {discarded}; mixed kept {mkept} discarded {mdiscarded}",
            config.tau
        ),
    );
    Ok(report)
}

/// Per response, compares the ordered pairs emitted by the estimator with
/// those whose smaller maximum reaches `tau`. Returns kept and discarded
/// counts and whether every response matched.
fn threshold_audit(
    responses: &[anchorbank_core::ProviderResponse],
    tau: u32,
) -> Result<(usize, usize, bool), HarnessError> {
    let tau_r = Rational::from_integer(tau.into());
    let (mut kept, mut discarded, mut exact) = (0, 0, true);
    for resp in responses {
        let mut expected = std::collections::BTreeSet::new();
        for x in resp.series() {
            for y in resp.series() {
                if x.query() == y.query() {
                    continue;
                }
                if x.max_value().min(y.max_value()) < &tau_r {
                    discarded += 1;
                } else {
                    kept += 1;
                    expected.insert((x.query().clone(), y.query().clone()));
                }
            }
        }
        let emitted: Vec<_> = estimate_ratios(std::slice::from_ref(resp), tau)?
            .into_iter()
            .map(|e| (e.numerator, e.denominator))
            .collect();
        let emitted_set: std::collections::BTreeSet<_> = emitted.iter().cloned().collect();
        exact &= emitted.len() == emitted_set.len() && emitted_set == expected;
    }
    Ok((kept, discarded, exact))
}

/// Two independent builds must serialize to identical bytes, and a saved
/// bank must load back unchanged.
pub fn exp_determinism(seed: u64, setup: &SimSetup, dir: &Path) -> Result<ExperimentReport, HarnessError> {
    let mut report = ExperimentReport::new("determinism", &[seed]);
    let mut files = Vec::new();
    for run in 0..2 {
        let (_, out) = setup.build(seed)?;
        let mut file = BankFile::new(out.bank, setup.provenance(seed));
        file.round_one = Some(out.graph);
        let path = dir.join(format!("bank-run{run}.json"));
        save_bank(&file, &path)?;
        files.push((path, file));
    }
    let a = std::fs::read(&files[0].0).map_err(|e| crate::error::StoreError::io(&files[0].0, e))?;
    let b = std::fs::read(&files[1].0).map_err(|e| crate::error::StoreError::io(&files[1].0, e))?;
    report.metric("bytes", a.len() as f64);
    report.check("byte-identical bank files", a == b, format!("{} vs {} bytes", a.len(), b.len()));
    let loaded = load_bank(&files[0].0)?;
    report.check(
        "load(save(bank)) is exact",
        loaded == files[0].1,
        "bank, provenance and first-round graph compared exactly",
    );
    Ok(report)
}
