//! Deterministic simulated provider backed by a latent ground truth.
//!
//! Latent maxima and shapes are exact rationals, so the observation channel
//! (joint scaling to 100, then rounding) is reproduced without any floating
//! point error, and ratio oracles are exact.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, ProviderError};
use crate::model::{int, InterestSeries, QueryId, Rational, RequestSpec, ResponseId, SCALE_MAX};
use crate::provider::{fnv1a, Provider, ProviderResponse};

/// Resolution of simulated shape multipliers.
const SHAPE_RESOLUTION: i64 = 4096;
/// Latent maxima are multiples of 1/1000.
const MAX_RESOLUTION: i64 = 1000;
/// Default number of weekly timesteps in a shape.
pub const DEFAULT_POINTS: usize = 52;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ShapeFamily {
    Flat,
    /// Sinusoid over a 52-week period with random phase and amplitude.
    Seasonal,
    /// Constant baseline with a single-week spike.
    Impulse,
    /// One of the above, chosen per query.
    Mixed,
}

impl ShapeFamily {
    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Flat => "flat",
            ShapeFamily::Seasonal => "seasonal",
            ShapeFamily::Impulse => "impulse",
            ShapeFamily::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flat" => Some(ShapeFamily::Flat),
            "seasonal" => Some(ShapeFamily::Seasonal),
            "impulse" => Some(ShapeFamily::Impulse),
            "mixed" => Some(ShapeFamily::Mixed),
            _ => None,
        }
    }
}

/// Observation rule applied after scaling.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RoundingRule {
    /// Round half away from zero; the rule the interval algebra assumes.
    NearestHalfAway,
    /// Truncate; violates the assumed model (negative control).
    Floor,
    /// Report exact scaled values.
    Disabled,
}

/// Latent truth for one query.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Latent {
    /// Maximum search interest, strictly positive.
    pub max: Rational,
    /// Per-timestep multipliers in (0, 1], at least one equal to 1.
    pub shape: Vec<Rational>,
}

impl Latent {
    pub fn flat(max: Rational, points: usize) -> Self {
        Latent {
            max,
            shape: alloc::vec![Rational::one(); points.max(1)],
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct UniverseSpec {
    pub n_queries: usize,
    /// Orders of magnitude spanned by the latent maxima.
    pub log10_range: f64,
    pub shape_family: ShapeFamily,
    pub seed: u64,
    pub points: usize,
}

impl UniverseSpec {
    pub fn new(n_queries: usize, log10_range: f64, shape_family: ShapeFamily, seed: u64) -> Self {
        UniverseSpec {
            n_queries,
            log10_range,
            shape_family,
            seed,
            points: DEFAULT_POINTS,
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct GroundTruthUniverse {
    latent: BTreeMap<QueryId, Latent>,
    seed: u64,
}

impl GroundTruthUniverse {
    pub fn from_latent(latent: BTreeMap<QueryId, Latent>, seed: u64) -> Result<Self, ModelError> {
        for l in latent.values() {
            if l.max <= Rational::zero() {
                return Err(ModelError::DegenerateUniverse("latent maxima must be positive"));
            }
            let peak = l.shape.iter().max();
            let positive = l.shape.iter().all(|v| v > &Rational::zero());
            if peak != Some(&Rational::one()) || !positive {
                return Err(ModelError::DegenerateUniverse(
                    "shape values must lie in (0, 1] and reach 1",
                ));
            }
        }
        Ok(GroundTruthUniverse { latent, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.latent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latent.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &QueryId> {
        self.latent.keys()
    }

    pub fn get(&self, query: &QueryId) -> Option<&Latent> {
        self.latent.get(query)
    }

    pub fn max_of(&self, query: &QueryId) -> Option<&Rational> {
        self.latent.get(query).map(|l| &l.max)
    }

    /// Exact latent ratio `M*_x / M*_y`.
    pub fn ratio(&self, x: &QueryId, y: &QueryId) -> Option<Rational> {
        Some(self.max_of(x)? / self.max_of(y)?)
    }

    /// Same universe with every latent maximum multiplied by `factor`.
    pub fn scaled(&self, factor: &Rational) -> Self {
        let latent = self
            .latent
            .iter()
            .map(|(q, l)| {
                (
                    q.clone(),
                    Latent {
                        max: &l.max * factor,
                        shape: l.shape.clone(),
                    },
                )
            })
            .collect();
        GroundTruthUniverse {
            latent,
            seed: self.seed,
        }
    }

    /// Noisy popularity proxy for every query: `M* * exp(sigma * z)` with
    /// standard normal `z`. Returned in id order; callers sort.
    pub fn frequency_proxy(&self, sigma: f64, seed: u64) -> Vec<(QueryId, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3);
        self.latent
            .iter()
            .map(|(q, l)| {
                let z = standard_normal(&mut rng);
                let m = l.max.to_f64().unwrap_or(0.0);
                (q.clone(), m * libm::exp(sigma * z))
            })
            .collect()
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

/// Width of zero-padded ids for a universe of `n` queries.
fn id_width(n: usize) -> usize {
    let mut w = 1;
    let mut m = n.saturating_sub(1);
    while m >= 10 {
        m /= 10;
        w += 1;
    }
    w.max(5)
}

pub fn sim_query_id(i: usize, width: usize) -> QueryId {
    QueryId::new(format!("q{:0width$}", i, width = width)).expect("non-empty")
}

fn shape_from_raw(raw: Vec<i64>) -> Vec<Rational> {
    let top = *raw.iter().max().expect("non-empty shape");
    raw.into_iter()
        .map(|v| Rational::new(BigInt::from(v.max(1)), BigInt::from(top)))
        .collect()
}

fn make_shape(family: ShapeFamily, points: usize, rng: &mut ChaCha8Rng) -> Vec<Rational> {
    let family = match family {
        ShapeFamily::Mixed => match rng.gen_range(0..3) {
            0 => ShapeFamily::Flat,
            1 => ShapeFamily::Seasonal,
            _ => ShapeFamily::Impulse,
        },
        f => f,
    };
    match family {
        ShapeFamily::Flat | ShapeFamily::Mixed => alloc::vec![Rational::one(); points],
        ShapeFamily::Seasonal => {
            let amplitude: f64 = rng.gen_range(0.2..0.6);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let raw = (0..points)
                .map(|t| {
                    let s = libm::sin(2.0 * PI * t as f64 / 52.0 + phase);
                    libm::round(SHAPE_RESOLUTION as f64 * (1.0 + amplitude * s)) as i64
                })
                .collect();
            shape_from_raw(raw)
        }
        ShapeFamily::Impulse => {
            let baseline: f64 = rng.gen_range(0.05..0.4);
            let spike = rng.gen_range(0..points);
            let base = libm::round(SHAPE_RESOLUTION as f64 * baseline) as i64;
            let raw = (0..points)
                .map(|t| if t == spike { SHAPE_RESOLUTION } else { base })
                .collect();
            shape_from_raw(raw)
        }
    }
}

/// Samples a universe with log-uniform latent maxima in
/// `[1, 10^log10_range]`, reproducible from `spec.seed`.
pub fn make_universe(spec: &UniverseSpec) -> Result<GroundTruthUniverse, ModelError> {
    if spec.n_queries == 0 {
        return Err(ModelError::DegenerateUniverse("n_queries must be positive"));
    }
    if !(spec.log10_range >= 0.0 && spec.log10_range <= 15.0) {
        return Err(ModelError::DegenerateUniverse("log10_range must lie in [0, 15]"));
    }
    if spec.points == 0 {
        return Err(ModelError::DegenerateUniverse("shapes need at least one point"));
    }
    let mut max_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    max_rng.set_stream(1);
    let mut shape_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shape_rng.set_stream(2);

    let width = id_width(spec.n_queries);
    let mut latent = BTreeMap::new();
    for i in 0..spec.n_queries {
        let u: f64 = max_rng.gen::<f64>();
        let m = libm::pow(10.0, u * spec.log10_range);
        let num = libm::round(m * MAX_RESOLUTION as f64) as i64;
        let max = Rational::new(BigInt::from(num.max(1)), BigInt::from(MAX_RESOLUTION));
        let shape = make_shape(spec.shape_family, spec.points, &mut shape_rng);
        latent.insert(sim_query_id(i, width), Latent { max, shape });
    }
    GroundTruthUniverse::from_latent(latent, spec.seed)
}

/// Provider answering from a [`GroundTruthUniverse`].
#[derive(Debug)]
pub struct Simulator {
    universe: GroundTruthUniverse,
    rounding: RoundingRule,
    calls: AtomicUsize,
}

impl Simulator {
    pub fn new(universe: GroundTruthUniverse, rounding: RoundingRule) -> Self {
        Simulator {
            universe,
            rounding,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn universe(&self) -> &GroundTruthUniverse {
        &self.universe
    }

    pub fn rounding(&self) -> RoundingRule {
        self.rounding
    }

    /// Number of requests served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn observe(&self, scaled: Rational) -> Result<u32, ModelError> {
        let v = match self.rounding {
            RoundingRule::NearestHalfAway => (scaled + crate::model::half()).floor(),
            RoundingRule::Floor => scaled.floor(),
            RoundingRule::Disabled => unreachable!("exact readings are not rounded"),
        };
        let v = v.to_integer();
        let v = v.to_u32().ok_or(ModelError::OutOfRange(-1))?;
        if v > SCALE_MAX {
            return Err(ModelError::OutOfRange(v as i64));
        }
        Ok(v)
    }
}

impl Provider for Simulator {
    fn fetch(&self, request: &RequestSpec) -> Result<ProviderResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut latents = Vec::with_capacity(request.queries().len());
        for q in request.queries() {
            let l = self
                .universe
                .get(q)
                .ok_or_else(|| ProviderError::UnknownQuery(q.clone()))?;
            latents.push(l);
        }
        let dates = request.timespan().weekly_grid();
        let shape_at = |l: &Latent, t: usize| -> Rational { l.shape[t % l.shape.len()].clone() };

        // Peak latent value of each query on this grid.
        let peaks: Vec<Rational> = latents
            .iter()
            .map(|l| {
                let s = (0..dates.len()).map(|t| shape_at(l, t)).max().unwrap_or_else(Rational::one);
                &l.max * s
            })
            .collect();
        let joint = peaks.iter().max().cloned().expect("at least two queries");
        let hundred = int(SCALE_MAX as i64);

        let mut series = Vec::with_capacity(latents.len());
        for (q, l) in request.queries().iter().zip(&latents) {
            let factor = &hundred * &l.max / &joint;
            let scaled = (0..dates.len()).map(|t| &factor * shape_at(l, t));
            let s = match self.rounding {
                RoundingRule::Disabled => {
                    InterestSeries::exact(q.clone(), dates.iter().copied().zip(scaled).collect())?
                }
                _ => {
                    let mut pts = Vec::with_capacity(dates.len());
                    for (d, v) in dates.iter().zip(scaled) {
                        pts.push((*d, self.observe(v)?));
                    }
                    InterestSeries::rounded(q.clone(), pts)?
                }
            };
            series.push(s);
        }
        let id = ResponseId(fnv1a(request.canonical_key().as_bytes()));
        Ok(ProviderResponse::new(request.clone(), series, id)?)
    }
}
