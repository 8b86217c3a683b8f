mod common;

use anchorbank::anchorbank_core::calibrator::calibrate_batch;
use anchorbank::anchorbank_core::model::rat;
use anchorbank::anchorbank_core::{
    AnchorBank, AnchorBankEntry, BankParams, QueryId, RoundingRule, SearchTolerance,
};
use anchorbank::harness::{exp_containment, exp_determinism, exp_search_cost, ExperimentReport, SimSetup};
use common::small_setup;

#[test]
fn report_rendering() {
    let mut r = ExperimentReport::new("demo", &[1, 2]);
    r.metric("x", 0.5);
    r.check("first", true, "fine");
    r.check("second", false, "broken");
    let text = r.render();
    assert!(text.starts_with("== demo (seeds 1,2)\n"));
    assert!(text.contains("PASS first: fine\n"));
    assert!(text.contains("FAIL second: broken\n"));
    assert!(!r.passed());
    assert_eq!(r.get("x"), Some(0.5));
    assert_eq!(r.get("y"), None);
}

#[test]
fn rows_reproduce_the_aggregates() {
    let out = exp_containment(&[7], &small_setup()).unwrap();
    let mut buf = Vec::new();
    out.write_rows(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let (mut scored, mut inside) = (0, 0);
    for row in rdr.records() {
        let row = row.unwrap();
        if &row[2] == "ok" {
            scored += 1;
            inside += usize::from(&row[7] == "true");
        }
    }
    assert_eq!(out.report.get("non_clamped"), Some(scored as f64));
    assert_eq!(out.report.get("containment_rate"), Some(inside as f64 / scored as f64));
    assert_eq!(inside, scored);
}

#[test]
fn floor_rounding_is_caught_on_a_small_world() {
    let out = exp_containment(&[7], &small_setup().with_rounding(RoundingRule::Floor)).unwrap();
    assert!(out.report.passed());
    assert!(out.report.get("containment_rate").unwrap() < 1.0);
}

#[test]
fn mismatched_workload_costs_more() {
    let setup = SimSetup::new(500, 6.0, 30);
    let matched = exp_search_cost(&[2], &setup, true).unwrap();
    let mismatched = exp_search_cost(&[2], &setup, false).unwrap();
    assert!(matched.report.passed());
    assert!(mismatched.report.checks.is_empty());
    let m = matched.report.get("mean_requests").unwrap();
    let mm = mismatched.report.get("mean_requests").unwrap();
    assert!(mm > m, "matched {m}, mismatched {mm}");
    let total: usize = mismatched.histogram.values().sum();
    assert_eq!(total, mismatched.rows.len());
}

#[test]
fn single_anchor_bank_needs_one_request() {
    let sim = small_setup().simulator(1).unwrap();
    let ids: Vec<QueryId> = sim.universe().ids().cloned().collect();
    let anchor = ids[150].clone();
    let config = small_setup().build_config(1);
    let bank = AnchorBank::new(
        vec![AnchorBankEntry::reference(anchor.clone())],
        anchor.clone(),
        anchor.clone(),
        "US",
        config.timespan,
        BankParams {
            k: 5,
            tau: 10,
            search_tolerance: rat(1, 10),
            seed: 0,
        },
    )
    .unwrap();
    let others: Vec<QueryId> = ids.iter().filter(|q| **q != anchor).take(40).cloned().collect();
    let batch = calibrate_batch(&others, &bank, &sim, &SearchTolerance::default());
    assert!(batch.errors.is_empty());
    assert_eq!(batch.histogram.keys().copied().collect::<Vec<_>>(), vec![1]);
}

#[test]
fn determinism_experiment_passes() {
    let dir = tempfile::tempdir().unwrap();
    let r = exp_determinism(3, &small_setup(), dir.path()).unwrap();
    assert!(r.passed(), "{}", r.render());
}
