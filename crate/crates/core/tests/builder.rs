mod common;

use std::collections::BTreeSet;

use anchorbank_core::bank_builder::{chains_to, plan_anchors};
use anchorbank_core::model::{int, rat};
use anchorbank_core::*;
use common::*;
use proptest::prelude::*;

fn ranked(n: usize) -> FrequencyList {
    FrequencyList::new((0..n).map(|i| (q(&format!("f{i:04}")), (n - i) as f64)).collect()).unwrap()
}

#[test]
fn stratified_sample_draws_one_per_stratum() {
    let freq = ranked(2000);
    let sample = sample_anchors(&freq, 2000, 100, 5).unwrap();
    assert_eq!(sample.len(), 100);
    for (i, id) in sample.iter().enumerate() {
        let rank: usize = id.as_str()[1..].parse().unwrap();
        assert!((20 * i..20 * i + 20).contains(&rank), "{i} {rank}");
    }
    assert_eq!(sample, sample_anchors(&freq, 2000, 100, 5).unwrap());
    assert_ne!(sample, sample_anchors(&freq, 2000, 100, 6).unwrap());
    assert!(sample_anchors(&freq, 2001, 100, 5).is_err());
    assert!(sample_anchors(&freq, 50, 100, 5).is_err());
}

#[test]
fn frequency_list_validation() {
    assert!(FrequencyList::new(vec![(q("a"), 1.0), (q("b"), 2.0)]).is_err());
    assert!(FrequencyList::new(vec![(q("a"), f64::NAN)]).is_err());
    assert!(FrequencyList::new(vec![(q("a"), 2.0), (q("a"), 1.0)]).is_err());
    let f = FrequencyList::from_unsorted(vec![(q("a"), 1.0), (q("b"), 2.0)]).unwrap();
    assert_eq!(f.entries()[0].0, q("b"));
}

#[test]
fn shingles_overlap_by_k_minus_one() {
    let anchors: Vec<QueryId> = (0..100).map(|i| q(&format!("a{i}"))).collect();
    let reqs = shingle_requests(&anchors, 5, "US", year()).unwrap();
    assert_eq!(reqs.len(), 96);
    for (i, w) in reqs.windows(2).enumerate() {
        assert_eq!(w[0].queries()[1..], w[1].queries()[..4], "window {i}");
    }
    let four: Vec<QueryId> = (0..4).map(|i| q(&format!("a{i}"))).collect();
    let reqs = shingle_requests(&four, 3, "US", year()).unwrap();
    assert_eq!(reqs.len(), 2);
    assert_eq!(reqs[1].queries(), &four[1..]);
    assert!(shingle_requests(&four, 6, "US", year()).is_err());
    assert!(shingle_requests(&four, 1, "US", year()).is_err());
}

#[test]
fn threshold_discards_small_pairs() {
    let resp = maxima_response(&[("a", 100), ("b", 9), ("c", 10), ("d", 40)]);
    let est = estimate_ratios(&[resp.clone()], 10).unwrap();
    // Ordered pairs among {a, c, d}.
    assert_eq!(est.len(), 6);
    assert!(est.iter().all(|e| e.numerator.as_str() != "b" && e.denominator.as_str() != "b"));
    assert_eq!(estimate_ratios(&[resp.clone()], 0).unwrap().len(), 12);
    assert_eq!(estimate_ratios(&[resp.clone()], 100).unwrap().len(), 0);
    assert!(estimate_ratios(&[resp], 101).is_err());
}

#[test]
fn zero_maxima_never_form_edges() {
    let resp = maxima_response(&[("a", 100), ("b", 0), ("c", 30)]);
    let est = estimate_ratios(&[resp], 0).unwrap();
    assert_eq!(est.len(), 2);
}

fn edge(x: &str, y: &str, r: Rational, eta: Rational) -> RatioEstimate {
    let lo = &r * int(2) / (int(1) + &eta);
    let hi = Bound::Finite(&lo * &eta);
    RatioEstimate::from_interval(q(x), q(y), r, lo, hi)
}

#[test]
fn graph_keeps_tightest_estimate() {
    let g = build_graph(&[
        edge("a", "b", rat(1, 2), rat(105, 100)),
        edge("b", "a", rat(2, 1), rat(102, 100)),
        edge("a", "b", rat(1, 2), rat(110, 100)),
    ]);
    assert_eq!(g.pair_count(), 1);
    assert_eq!(g.directed_edge_count(), 2);
    assert_eq!(g.estimate(&q("a"), &q("b")).unwrap().eta, Bound::Finite(rat(102, 100)));
    assert_eq!(g.estimate(&q("b"), &q("a")).unwrap().r, rat(2, 1));
}

/// Minimum (bound ratio, hops) over all simple paths from `from` to `to`.
fn brute_force(g: &ComparisonGraph, from: &QueryId, to: &QueryId) -> Option<(Rational, usize)> {
    fn go(
        g: &ComparisonGraph,
        at: &QueryId,
        to: &QueryId,
        seen: &mut BTreeSet<QueryId>,
        acc: Rational,
        hops: usize,
        best: &mut Option<(Rational, usize)>,
    ) {
        if at == to {
            if best.as_ref().map_or(true, |b| (&acc, hops) < (&b.0, b.1)) {
                *best = Some((acc, hops));
            }
            return;
        }
        let nodes: Vec<QueryId> = g.nodes().cloned().collect();
        for n in nodes {
            if seen.contains(&n) {
                continue;
            }
            if let Some(e) = g.estimate(at, &n) {
                let eta = e.eta.finite().unwrap().clone();
                seen.insert(n.clone());
                go(g, &n, to, seen, &acc * eta, hops + 1, best);
                seen.remove(&n);
            }
        }
    }
    let mut best = None;
    let mut seen = BTreeSet::from([from.clone()]);
    go(g, from, to, &mut seen, int(1), 0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn chains_match_exhaustive_search(
        n in 3usize..9,
        raw in prop::collection::vec((0usize..9, 0usize..9, 1i64..6), 4..24),
    ) {
        let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let mut g = ComparisonGraph::new();
        for s in &names {
            g.add_node(q(s));
        }
        for (a, b, w) in raw {
            let (a, b) = (a % n, b % n);
            if a == b {
                continue;
            }
            // Few distinct weights, so equal-eta ties are common.
            g.insert(&edge(&names[a], &names[b], rat(a as i64 + 1, b as i64 + 1), rat(100 + w, 100)));
        }
        let reference = q(&names[0]);
        let (chains, unreachable) = chains_to(&g, &reference).unwrap();
        for s in &names {
            let id = q(s);
            match brute_force(&g, &id, &reference) {
                None => prop_assert!(unreachable.contains(&id)),
                Some((eta, hops)) => {
                    let c = &chains[&id];
                    prop_assert_eq!(c.estimate.eta.finite().unwrap(), &eta);
                    prop_assert_eq!(c.path.len() - 1, hops);
                    prop_assert_eq!(c.path.first(), Some(&id));
                    prop_assert_eq!(c.path.last(), Some(&reference));
                }
            }
        }
    }
}

#[test]
fn noiseless_bank_is_exact() {
    let w = world(400, 5.0, ShapeFamily::Mixed, 2, RoundingRule::Disabled);
    let out = build_bank(&w.sim, &w.freq, &w.config).unwrap();
    let r = out.bank.reference().clone();
    for e in out.bank.entries() {
        assert_eq!(e.calibrated, ratio_to_ref(&w.sim, &e.query, &r));
        assert_eq!(e.lo, e.hi);
    }
}

#[test]
fn rounded_bank_contains_truth() {
    for seed in [1, 2, 3] {
        let w = world(1000, 6.0, ShapeFamily::Mixed, seed, RoundingRule::NearestHalfAway);
        let out = build_bank(&w.sim, &w.freq, &w.config).unwrap();
        assert_eq!(w.sim.calls(), 96);
        let r = out.bank.reference().clone();
        for e in out.bank.entries() {
            let truth = ratio_to_ref(&w.sim, &e.query, &r);
            assert!(e.lo <= truth && truth <= e.hi, "seed {seed} {}", e.query);
            assert!(e.lo <= e.calibrated && e.calibrated <= e.hi);
        }
        // Most popular reference: everything else is smaller.
        assert_eq!(out.bank.entries().last().unwrap().query, r);
    }
}

#[test]
fn reference_policies() {
    let mut w = world(500, 4.0, ShapeFamily::Flat, 4, RoundingRule::NearestHalfAway);
    w.config.reference = ReferencePolicy::CloseToMedian;
    let out = build_bank(&w.sim, &w.freq, &w.config).unwrap();
    // Chosen before tied anchors are removed, so only close to the middle.
    let idx = out.bank.index_of(out.bank.reference()).unwrap() as f64;
    let mid = (out.bank.len() - 1) as f64 / 2.0;
    assert!((idx - mid).abs() <= out.bank.len() as f64 / 10.0, "{idx} {mid}");

    let pick = out.bank.entries()[3].query.clone();
    w.config.reference = ReferencePolicy::Explicit(pick.clone());
    let out = build_bank(&w.sim, &w.freq, &w.config).unwrap();
    assert_eq!(out.bank.reference(), &pick);
    assert_eq!(out.bank.entry(&pick).unwrap().calibrated, int(1));

    w.config.reference = ReferencePolicy::Explicit(q("nope"));
    assert!(build_bank(&w.sim, &w.freq, &w.config).is_err());
}

#[test]
fn head_queries_lead_the_plan() {
    let w = world(300, 3.0, ShapeFamily::Flat, 1, RoundingRule::NearestHalfAway);
    let mut config = w.config.clone();
    let head = w.freq.entries()[0].0.clone();
    config.head_queries = vec![head.clone()];
    let plan = plan_anchors(&w.freq, &config).unwrap();
    assert_eq!(plan[0], head);
    assert_eq!(plan.iter().filter(|x| **x == head).count(), 1);
}

#[test]
fn disconnected_anchors() {
    // Two clusters six orders apart: with tau = 10 no request bridges them.
    let u = flat_universe(&[
        ("a", 1_000_000_000),
        ("b", 900_000_000),
        ("c", 800_000_000),
        ("d", 1_000),
        ("e", 900),
        ("f", 800),
    ]);
    let sim = Simulator::new(u, RoundingRule::NearestHalfAway);
    let freq = FrequencyList::from_unsorted(
        ["a", "b", "c", "d", "e", "f"].iter().zip([6.0, 5.0, 4.0, 3.0, 2.0, 1.0]).map(|(s, f)| (q(s), f)).collect(),
    )
    .unwrap();
    let mut config = BuildConfig::new("US", year());
    config.top_n = 6;
    config.sample_n = 6;
    config.k = 2;
    let err = build_bank(&sim, &freq, &config).unwrap_err();
    assert!(matches!(err, BuildError::Disconnected { .. }));
    config.on_disconnected = DisconnectedPolicy::Drop;
    let out = build_bank(&sim, &freq, &config).unwrap();
    assert_eq!(out.bank.len(), 3);
    assert_eq!(out.dropped.len(), 3);
}

#[test]
fn tied_anchors_are_dropped() {
    let u = flat_universe(&[("a", 2_000), ("b", 1_000), ("c", 1_000)]);
    let sim = Simulator::new(u, RoundingRule::Disabled);
    let freq = FrequencyList::from_unsorted(vec![(q("a"), 3.0), (q("b"), 2.0), (q("c"), 1.0)]).unwrap();
    let mut config = BuildConfig::new("US", year());
    config.top_n = 3;
    config.sample_n = 3;
    config.k = 3;
    let out = build_bank(&sim, &freq, &config).unwrap();
    assert_eq!(out.bank.len(), 2);
    assert_eq!(out.dropped, vec![q("c")]);
}

#[test]
fn full_sample_is_the_prefix() {
    let freq = ranked(30);
    let s = sample_anchors(&freq, 10, 10, 1).unwrap();
    let prefix: Vec<QueryId> = freq.entries()[..10].iter().map(|(q, _)| q.clone()).collect();
    assert_eq!(s, prefix);
}
