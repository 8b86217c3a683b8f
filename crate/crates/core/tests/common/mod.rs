#![allow(dead_code)]

use std::collections::BTreeMap;

use anchorbank_core::model::{int, rat, ResponseId};
use anchorbank_core::sim::Latent;
use anchorbank_core::*;
use chrono::{Days, NaiveDate};

pub fn q(s: &str) -> QueryId {
    QueryId::new(s).unwrap()
}

pub fn day(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 3).unwrap() + Days::new(7 * i)
}

/// 52 weekly points starting 2021-01-03.
pub fn year() -> Timespan {
    Timespan::new(day(0), day(51)).unwrap()
}

pub fn short(points: u64) -> Timespan {
    Timespan::new(day(0), day(points - 1)).unwrap()
}

/// A response of hand-written rounded readings, one series per query.
pub fn response(rows: &[(&str, &[u32])]) -> ProviderResponse {
    let ids: Vec<QueryId> = rows.iter().map(|(s, _)| q(s)).collect();
    let n = rows[0].1.len() as u64;
    let req = RequestSpec::new(ids, "US", short(n)).unwrap();
    let series = rows
        .iter()
        .map(|(s, vals)| {
            let pts = vals.iter().enumerate().map(|(i, v)| (day(i as u64), *v)).collect();
            InterestSeries::rounded(q(s), pts).unwrap()
        })
        .collect();
    let id = ResponseId(anchorbank_core::provider::fnv1a(req.canonical_key().as_bytes()));
    ProviderResponse::new(req, series, id).unwrap()
}

pub fn maxima_response(rows: &[(&str, u32)]) -> ProviderResponse {
    let owned: Vec<(&str, Vec<u32>)> = rows.iter().map(|(s, m)| (*s, vec![*m])).collect();
    let borrowed: Vec<(&str, &[u32])> = owned.iter().map(|(s, v)| (*s, v.as_slice())).collect();
    response(&borrowed)
}

/// Universe of flat series with the given maxima (in thousandths).
pub fn flat_universe(maxima: &[(&str, i64)]) -> GroundTruthUniverse {
    let latent: BTreeMap<QueryId, Latent> = maxima
        .iter()
        .map(|(s, m)| (q(s), Latent::flat(rat(*m, 1000), 52)))
        .collect();
    GroundTruthUniverse::from_latent(latent, 0).unwrap()
}

pub struct World {
    pub sim: Simulator,
    pub freq: FrequencyList,
    pub config: BuildConfig,
}

pub fn world(n: usize, range: f64, family: ShapeFamily, seed: u64, rounding: RoundingRule) -> World {
    let universe = make_universe(&UniverseSpec::new(n, range, family, seed)).unwrap();
    let freq = FrequencyList::from_unsorted(universe.frequency_proxy(0.3, seed)).unwrap();
    let mut config = BuildConfig::new("US", year());
    config.top_n = n.min(2000);
    config.sample_n = 100.min(n);
    config.seed = seed;
    config.on_disconnected = DisconnectedPolicy::Drop;
    World {
        sim: Simulator::new(universe, rounding),
        freq,
        config,
    }
}

pub fn ratio_to_ref(sim: &Simulator, x: &QueryId, reference: &QueryId) -> Rational {
    sim.universe().ratio(x, reference).unwrap()
}

pub fn hundred() -> Rational {
    int(100)
}
