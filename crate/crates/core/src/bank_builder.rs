//! Offline construction of the anchor bank.
//!
//! Anchors are sampled from a ranked frequency list, compared in
//! overlapping (shingled) requests, and calibrated against a reference by
//! chaining pairwise ratio estimates along the path of smallest total
//! bound ratio.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::BuildError;
use crate::model::{
    chain, pair_ratio, rat, AnchorBank, AnchorBankEntry, BankParams, QueryId, Rational,
    RatioEstimate, RequestSpec, Timespan, MAX_QUERIES_PER_REQUEST, SCALE_MAX,
};
use crate::provider::{Provider, ProviderResponse};

/// Candidate queries ranked by a popularity proxy, most frequent first.
#[derive(Clone, PartialEq, Debug)]
pub struct FrequencyList {
    entries: Vec<(QueryId, f64)>,
}

impl FrequencyList {
    /// Accepts an already sorted (descending) list with unique ids.
    pub fn new(entries: Vec<(QueryId, f64)>) -> Result<Self, BuildError> {
        let mut seen = BTreeSet::new();
        for (i, (q, f)) in entries.iter().enumerate() {
            if !f.is_finite() || *f < 0.0 {
                return Err(BuildError::InvalidFrequency(q.clone()));
            }
            if !seen.insert(q) {
                return Err(BuildError::Model(crate::error::ModelError::DuplicateQuery(
                    q.clone(),
                )));
            }
            if i > 0 && entries[i - 1].1 < *f {
                return Err(BuildError::UnsortedFrequencies(q.clone()));
            }
        }
        Ok(FrequencyList { entries })
    }

    /// Sorts descending by frequency, ties by id.
    pub fn from_unsorted(mut entries: Vec<(QueryId, f64)>) -> Result<Self, BuildError> {
        if let Some((q, _)) = entries.iter().find(|(_, f)| !f.is_finite() || *f < 0.0) {
            return Err(BuildError::InvalidFrequency(q.clone()));
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(QueryId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Stratified sample of `n` ids from the top `top_n` of `freq`.
///
/// The top-N prefix is cut into `n` contiguous rank strata of near-equal
/// size (`[i*N/n, (i+1)*N/n)`) and one id is drawn uniformly from each.
/// The result keeps the list's descending order.
pub fn sample_anchors(
    freq: &FrequencyList,
    top_n: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<QueryId>, BuildError> {
    if n == 0 || n > top_n || top_n > freq.len() {
        return Err(BuildError::SampleSize {
            n,
            top_n,
            available: freq.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| {
            let start = i * top_n / n;
            let end = (i + 1) * top_n / n;
            freq.entries[rng.gen_range(start..end)].0.clone()
        })
        .collect())
}

/// One request per window of `k` consecutive anchors: `n - k + 1` requests.
pub fn shingle_requests(
    anchors: &[QueryId],
    k: usize,
    region: &str,
    timespan: Timespan,
) -> Result<Vec<RequestSpec>, BuildError> {
    if k < 2 || k > MAX_QUERIES_PER_REQUEST || k > anchors.len() {
        return Err(BuildError::GroupSize {
            k,
            n: anchors.len(),
        });
    }
    anchors
        .windows(k)
        .map(|w| RequestSpec::new(w.to_vec(), region, timespan).map_err(BuildError::from))
        .collect()
}

/// Ratio estimates for every ordered pair co-occurring in a response whose
/// smaller maximum is at least `tau`.
///
/// Pairs involving a zero maximum are never emitted (only reachable with
/// `tau = 0`): their bound ratio is unbounded.
pub fn estimate_ratios(
    responses: &[ProviderResponse],
    tau: u32,
) -> Result<Vec<RatioEstimate>, BuildError> {
    if tau > SCALE_MAX {
        return Err(BuildError::Threshold(tau));
    }
    let tau = rat(tau as i64, 1);
    let mut out = Vec::new();
    for resp in responses {
        let series = resp.series();
        for x in series {
            for y in series {
                if x.query() == y.query() {
                    continue;
                }
                let (mx, my) = (x.max_value(), y.max_value());
                if mx.is_zero() || my.is_zero() || mx.min(my) < &tau {
                    continue;
                }
                out.push(pair_ratio(x, y)?);
            }
        }
    }
    Ok(out)
}

/// Undirected store of the tightest known estimate per query pair.
///
/// Each pair is kept once, oriented from the smaller to the larger id; the
/// reverse direction is derived on demand.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct ComparisonGraph {
    nodes: BTreeSet<QueryId>,
    edges: BTreeMap<(QueryId, QueryId), RatioEstimate>,
}

impl ComparisonGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, query: QueryId) {
        self.nodes.insert(query);
    }

    /// Inserts `estimate` unless the pair already holds one with a bound
    /// ratio at least as small. Zero or unbounded estimates are ignored.
    pub fn insert(&mut self, estimate: &RatioEstimate) {
        if estimate.r.is_zero() || !estimate.eta.is_finite() {
            return;
        }
        let canonical = if estimate.numerator < estimate.denominator {
            estimate.clone()
        } else {
            match estimate.inverse() {
                Ok(e) => e,
                Err(_) => return,
            }
        };
        self.nodes.insert(canonical.numerator.clone());
        self.nodes.insert(canonical.denominator.clone());
        let key = (canonical.numerator.clone(), canonical.denominator.clone());
        match self.edges.get(&key) {
            Some(existing) if existing.eta <= canonical.eta => {}
            _ => {
                self.edges.insert(key, canonical);
            }
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &QueryId> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, query: &QueryId) -> bool {
        self.nodes.contains(query)
    }

    /// Number of query pairs with an estimate (each pair counted once).
    pub fn pair_count(&self) -> usize {
        self.edges.len()
    }

    /// Directed edges: every pair in both orientations.
    pub fn directed_edge_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// Estimate of `x / y`, if the pair co-occurred.
    pub fn estimate(&self, x: &QueryId, y: &QueryId) -> Option<RatioEstimate> {
        if x < y {
            self.edges.get(&(x.clone(), y.clone())).cloned()
        } else {
            let e = self.edges.get(&(y.clone(), x.clone()))?;
            e.inverse().ok()
        }
    }

    /// All stored pair estimates, oriented smaller id over larger id.
    pub fn pairs(&self) -> impl Iterator<Item = &RatioEstimate> {
        self.edges.values()
    }

    /// Graph restricted to `keep`.
    pub fn restricted(&self, keep: &BTreeSet<QueryId>) -> ComparisonGraph {
        ComparisonGraph {
            nodes: self.nodes.intersection(keep).cloned().collect(),
            edges: self
                .edges
                .iter()
                .filter(|((a, b), _)| keep.contains(a) && keep.contains(b))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Keeps, per query pair, the estimate with the smallest bound ratio.
pub fn build_graph(estimates: &[RatioEstimate]) -> ComparisonGraph {
    let mut g = ComparisonGraph::new();
    for e in estimates {
        g.insert(e);
    }
    g
}

/// Tightest chain from an anchor to the reference.
#[derive(Clone, PartialEq, Debug)]
pub struct Chain {
    /// Node sequence, starting at the anchor and ending at the reference.
    pub path: Vec<QueryId>,
    pub estimate: RatioEstimate,
}

/// Chains for every node reachable from `reference`, plus the unreachable
/// remainder.
///
/// Paths minimize the product of bound ratios (equivalently the sum of
/// `log eta`), computed exactly. Among equally tight paths the one with
/// fewest hops wins, then the lexicographically smallest node sequence.
pub fn chains_to(
    graph: &ComparisonGraph,
    reference: &QueryId,
) -> Result<(BTreeMap<QueryId, Chain>, Vec<QueryId>), BuildError> {
    if !graph.contains(reference) {
        return Err(BuildError::UnknownReference(reference.clone()));
    }
    let nodes: Vec<&QueryId> = graph.nodes.iter().collect();
    let index: BTreeMap<&QueryId, usize> = nodes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
    let mut adj: Vec<Vec<(usize, Rational)>> = alloc::vec![Vec::new(); nodes.len()];
    for ((a, b), e) in &graph.edges {
        let (i, j) = (index[a], index[b]);
        let eta = e.eta.finite().expect("graph edges are bounded").clone();
        adj[i].push((j, eta.clone()));
        adj[j].push((i, eta));
    }
    for list in adj.iter_mut() {
        list.sort_by_key(|(j, _)| *j);
    }

    let src = index[reference];
    let mut best: Vec<Option<(Rational, usize)>> = alloc::vec![None; nodes.len()];
    let mut settled = alloc::vec![false; nodes.len()];
    let mut heap = BinaryHeap::new();
    best[src] = Some((Rational::one(), 0));
    heap.push(Reverse((Rational::one(), 0usize, src)));
    while let Some(Reverse((d, h, u))) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        for (v, eta) in &adj[u] {
            if settled[*v] {
                continue;
            }
            let cand = (&d * eta, h + 1);
            let better = match &best[*v] {
                None => true,
                Some(cur) => (&cand.0, cand.1) < (&cur.0, cur.1),
            };
            if better {
                heap.push(Reverse((cand.0.clone(), cand.1, *v)));
                best[*v] = Some(cand);
            }
        }
    }

    let mut chains = BTreeMap::new();
    let mut unreachable = Vec::new();
    for (i, q) in nodes.iter().enumerate() {
        if best[i].is_none() {
            unreachable.push((*q).clone());
            continue;
        }
        let mut path = alloc::vec![(*q).clone()];
        let mut cur = i;
        while cur != src {
            let (dc, hc) = best[cur].clone().expect("reachable");
            let next = adj[cur]
                .iter()
                .find(|(j, eta)| match &best[*j] {
                    Some((dj, hj)) => hj + 1 == hc && &(dj * eta) == &dc,
                    None => false,
                })
                .map(|(j, _)| *j)
                .expect("a tight predecessor exists on every shortest path");
            path.push(nodes[next].clone());
            cur = next;
        }
        let mut estimate: Option<RatioEstimate> = None;
        for hop in path.windows(2) {
            let e = graph.estimate(&hop[0], &hop[1]).expect("edge on path");
            estimate = Some(match estimate {
                None => e,
                Some(acc) => chain(&acc, &e)?,
            });
        }
        let estimate = estimate.unwrap_or_else(|| RatioEstimate::identity((*q).clone()));
        chains.insert((*q).clone(), Chain { path, estimate });
    }
    Ok((chains, unreachable))
}

/// Tightest chains from every node to `reference`; fails if any node is
/// unreachable.
pub fn tightest_chains(
    graph: &ComparisonGraph,
    reference: &QueryId,
) -> Result<BTreeMap<QueryId, Chain>, BuildError> {
    let (chains, unreachable) = chains_to(graph, reference)?;
    if !unreachable.is_empty() {
        return Err(BuildError::Disconnected { unreachable });
    }
    Ok(chains)
}

/// Metadata stamped onto a bank.
#[derive(Clone, PartialEq, Debug)]
pub struct BankMeta {
    pub region: String,
    pub timespan: Timespan,
    pub params: BankParams,
}

/// Sorted bank entries from chains. Anchors whose calibrated value exactly
/// ties an earlier one are dropped (the reference always survives).
pub fn entries_from_chains(
    chains: &BTreeMap<QueryId, Chain>,
    reference: &QueryId,
) -> (Vec<AnchorBankEntry>, Vec<QueryId>) {
    let mut entries: Vec<AnchorBankEntry> = chains
        .iter()
        .map(|(q, c)| {
            if q == reference {
                return AnchorBankEntry::reference(q.clone());
            }
            let e = &c.estimate;
            AnchorBankEntry {
                query: q.clone(),
                calibrated: e.r.clone(),
                lo: e.lo.clone(),
                hi: e.hi.finite().expect("bounded chain").clone(),
                eta: e.eta.finite().expect("bounded chain").clone(),
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        a.calibrated
            .cmp(&b.calibrated)
            .then_with(|| (&b.query == reference).cmp(&(&a.query == reference)))
            .then_with(|| a.query.cmp(&b.query))
    });
    let mut kept: Vec<AnchorBankEntry> = Vec::with_capacity(entries.len());
    let mut tied = Vec::new();
    for e in entries {
        match kept.last() {
            Some(prev) if prev.calibrated == e.calibrated => tied.push(e.query),
            _ => kept.push(e),
        }
    }
    (kept, tied)
}

/// Calibrates every node of `graph` against `reference`.
pub fn calibrate_bank(
    graph: &ComparisonGraph,
    reference: &QueryId,
    meta: &BankMeta,
) -> Result<AnchorBank, BuildError> {
    let chains = tightest_chains(graph, reference)?;
    let (entries, tied) = entries_from_chains(&chains, reference);
    if !tied.is_empty() {
        log::warn!("dropping {} anchors tied with another anchor: {:?}", tied.len(), tied);
    }
    let start = entries[(entries.len() - 1) / 2].query.clone();
    Ok(AnchorBank::new(
        entries,
        reference.clone(),
        start,
        meta.region.clone(),
        meta.timespan,
        meta.params.clone(),
    )?)
}

/// How the reference query is chosen.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ReferencePolicy {
    /// The anchor with the largest calibrated maximum (smallest id on ties).
    MostPopular,
    /// The anchor at the median of the calibrated maxima.
    CloseToMedian,
    Explicit(QueryId),
}

/// What to do with anchors that cannot be chained to the reference.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DisconnectedPolicy {
    Fail,
    Drop,
}

#[derive(Clone, PartialEq, Debug)]
pub struct BuildConfig {
    pub region: String,
    pub timespan: Timespan,
    pub k: usize,
    pub tau: u32,
    pub top_n: usize,
    pub sample_n: usize,
    pub seed: u64,
    pub search_tolerance: Rational,
    pub reference: ReferencePolicy,
    /// Extra high-popularity queries placed ahead of the sampled anchors.
    pub head_queries: Vec<QueryId>,
    pub on_disconnected: DisconnectedPolicy,
}

impl BuildConfig {
    pub const DEFAULT_K: usize = 5;
    pub const DEFAULT_TAU: u32 = 10;
    pub const DEFAULT_TOP_N: usize = 2000;
    pub const DEFAULT_SAMPLE_N: usize = 100;

    pub fn new(region: impl Into<String>, timespan: Timespan) -> Self {
        BuildConfig {
            region: region.into(),
            timespan,
            k: Self::DEFAULT_K,
            tau: Self::DEFAULT_TAU,
            top_n: Self::DEFAULT_TOP_N,
            sample_n: Self::DEFAULT_SAMPLE_N,
            seed: 0,
            search_tolerance: rat(1, 10),
            reference: ReferencePolicy::MostPopular,
            head_queries: Vec::new(),
            on_disconnected: DisconnectedPolicy::Fail,
        }
    }

    pub fn params(&self) -> BankParams {
        BankParams {
            k: self.k,
            tau: self.tau,
            search_tolerance: self.search_tolerance.clone(),
            seed: self.seed,
        }
    }

    pub fn meta(&self) -> BankMeta {
        BankMeta {
            region: self.region.clone(),
            timespan: self.timespan,
            params: self.params(),
        }
    }
}

/// Everything produced by the offline phase.
#[derive(Clone, PartialEq, Debug)]
pub struct BuildOutput {
    pub bank: AnchorBank,
    pub graph: ComparisonGraph,
    pub anchors: Vec<QueryId>,
    pub responses: Vec<ProviderResponse>,
    /// Anchors removed as all-zero, unreachable, or tied.
    pub dropped: Vec<QueryId>,
}

/// Ordered anchor list: head queries first, then the stratified sample.
pub fn plan_anchors(freq: &FrequencyList, config: &BuildConfig) -> Result<Vec<QueryId>, BuildError> {
    if config.tau > SCALE_MAX {
        return Err(BuildError::Threshold(config.tau));
    }
    let sampled = sample_anchors(freq, config.top_n, config.sample_n, config.seed)?;
    let mut anchors: Vec<QueryId> = Vec::with_capacity(sampled.len() + config.head_queries.len());
    for q in config.head_queries.iter().chain(sampled.iter()) {
        if !anchors.contains(q) {
            anchors.push(q.clone());
        }
    }
    if config.k < 2 || config.k > MAX_QUERIES_PER_REQUEST || config.k > anchors.len() {
        return Err(BuildError::GroupSize {
            k: config.k,
            n: anchors.len(),
        });
    }
    Ok(anchors)
}

/// Full offline phase against `provider`, fetching sequentially.
pub fn build_bank<P: Provider + ?Sized>(
    provider: &P,
    freq: &FrequencyList,
    config: &BuildConfig,
) -> Result<BuildOutput, BuildError> {
    let anchors = plan_anchors(freq, config)?;
    let requests = shingle_requests(&anchors, config.k, &config.region, config.timespan)?;
    let responses = requests
        .iter()
        .map(|r| provider.fetch(r))
        .collect::<Result<Vec<_>, _>>()?;
    build_from_responses(anchors, responses, config)
}

fn largest_component(graph: &ComparisonGraph) -> Vec<QueryId> {
    let mut adj: BTreeMap<&QueryId, Vec<&QueryId>> = graph.nodes.iter().map(|q| (q, Vec::new())).collect();
    for (a, b) in graph.edges.keys() {
        adj.get_mut(a).expect("node").push(b);
        adj.get_mut(b).expect("node").push(a);
    }
    let mut seen = BTreeSet::new();
    let mut best: Vec<QueryId> = Vec::new();
    for start in graph.nodes.iter() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = alloc::vec![start];
        seen.insert(start);
        while let Some(u) = stack.pop() {
            comp.push(u.clone());
            for v in &adj[u] {
                if seen.insert(*v) {
                    stack.push(v);
                }
            }
        }
        // Components are discovered in id order, so ties keep the one with
        // the smallest id.
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort();
    best
}

/// Offline phase from already fetched shingle responses.
pub fn build_from_responses(
    anchors: Vec<QueryId>,
    responses: Vec<ProviderResponse>,
    config: &BuildConfig,
) -> Result<BuildOutput, BuildError> {
    let mut dropped = Vec::new();
    let informative: BTreeSet<QueryId> = responses
        .iter()
        .flat_map(|r| r.series().iter())
        .filter(|s| !s.is_all_zero())
        .map(|s| s.query().clone())
        .collect();
    let mut kept: BTreeSet<QueryId> = BTreeSet::new();
    for a in &anchors {
        if informative.contains(a) {
            kept.insert(a.clone());
        } else {
            log::warn!("dropping anchor {a}: all-zero in every request");
            dropped.push(a.clone());
        }
    }
    if kept.is_empty() {
        return Err(BuildError::NoAnchors);
    }

    let estimates = estimate_ratios(&responses, config.tau)?;
    let mut graph = build_graph(&estimates);
    for a in &kept {
        graph.add_node(a.clone());
    }

    let reference = match &config.reference {
        ReferencePolicy::Explicit(q) => {
            if !kept.contains(q) {
                return Err(BuildError::UnknownReference(q.clone()));
            }
            q.clone()
        }
        policy => {
            let comp = largest_component(&graph);
            let provisional = comp.first().ok_or(BuildError::NoAnchors)?.clone();
            let (chains, _) = chains_to(&graph, &provisional)?;
            let mut ranked: Vec<(&Rational, &QueryId)> =
                chains.iter().map(|(q, c)| (&c.estimate.r, q)).collect();
            ranked.sort_by(|a, b| a.0.cmp(b.0).then_with(|| b.1.cmp(a.1)));
            match policy {
                ReferencePolicy::MostPopular => {
                    // Largest value; among ties the smallest id sorts last.
                    ranked.last().expect("non-empty component").1.clone()
                }
                _ => ranked[(ranked.len() - 1) / 2].1.clone(),
            }
        }
    };

    let (_, unreachable) = chains_to(&graph, &reference)?;
    if !unreachable.is_empty() {
        match config.on_disconnected {
            DisconnectedPolicy::Fail => return Err(BuildError::Disconnected { unreachable }),
            DisconnectedPolicy::Drop => {
                log::warn!("dropping {} unreachable anchors: {:?}", unreachable.len(), unreachable);
                for q in &unreachable {
                    kept.remove(q);
                }
                dropped.extend(unreachable);
                graph = graph.restricted(&kept);
            }
        }
    }

    let chains = tightest_chains(&graph, &reference)?;
    let (entries, tied) = entries_from_chains(&chains, &reference);
    if !tied.is_empty() {
        log::warn!("dropping {} anchors tied with another anchor: {:?}", tied.len(), tied);
        dropped.extend(tied);
    }
    let start = entries[(entries.len() - 1) / 2].query.clone();
    let meta = config.meta();
    let bank = AnchorBank::new(entries, reference, start, meta.region, meta.timespan, meta.params)?;
    Ok(BuildOutput {
        bank,
        graph,
        anchors,
        responses,
        dropped,
    })
}
