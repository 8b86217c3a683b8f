//! Run configuration: TOML file, then command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anchorbank_core::bank_optimizer::OptimalityParams;
use anchorbank_core::{
    BuildConfig, DisconnectedPolicy, QueryId, Rational, ReferencePolicy, RoundingRule, ShapeFamily,
    Simulator, Timespan, UniverseSpec,
};
use serde::{Deserialize, Serialize};

use crate::codec::{parse_date, parse_rational};
use crate::error::ConfigError;
use crate::storage::{Provenance, UniverseDoc};

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub region: String,
    pub start: String,
    pub end: String,
    pub provider: ProviderConfig,
    pub paths: PathsConfig,
    pub params: ParamsConfig,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// `simulator` or `live`.
    pub kind: String,
    pub n_queries: usize,
    pub log10_range: f64,
    pub shape_family: String,
    pub seed: u64,
    /// `nearest`, `floor` or `none`.
    pub rounding: String,
    pub points: usize,
    /// Spread of the simulated frequency proxy around the latent maxima.
    pub sigma: f64,
}

#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub frequency_list: Option<PathBuf>,
    pub bank: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub queries: Option<PathBuf>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub k: usize,
    pub tau: u32,
    pub top_n: usize,
    pub sample_n: usize,
    /// Exact decimal or fraction, e.g. `"0.1"` or `"1/10"`.
    pub search_tolerance: String,
    pub target_ratio: f64,
    pub rounding_half_width: f64,
    pub seed: u64,
    /// `most-popular`, `median`, or a query id.
    pub reference: String,
    pub head_queries: Vec<String>,
    pub drop_unreachable: bool,
    pub reuse_round_one: bool,
    /// Worker threads for batch calibration; 0 picks a default.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            region: "US".into(),
            start: "2021-01-03".into(),
            end: "2021-12-26".into(),
            provider: ProviderConfig::default(),
            paths: PathsConfig::default(),
            params: ParamsConfig::default(),
        }
    }
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: "simulator".into(),
            n_queries: 2000,
            log10_range: 6.0,
            shape_family: "mixed".into(),
            seed: 1,
            rounding: "nearest".into(),
            points: anchorbank_core::sim::DEFAULT_POINTS,
            sigma: 0.3,
        }
    }
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let opt = OptimalityParams::default();
        ParamsConfig {
            k: BuildConfig::DEFAULT_K,
            tau: BuildConfig::DEFAULT_TAU,
            top_n: BuildConfig::DEFAULT_TOP_N,
            sample_n: BuildConfig::DEFAULT_SAMPLE_N,
            search_tolerance: "1/10".into(),
            target_ratio: opt.target_ratio,
            rounding_half_width: opt.rounding_half_width,
            seed: 0,
            reference: "most-popular".into(),
            head_queries: Vec::new(),
            drop_unreachable: false,
            reuse_round_one: true,
            threads: 0,
        }
    }
}

pub fn parse_rounding(s: &str) -> Result<RoundingRule, ConfigError> {
    match s {
        "nearest" => Ok(RoundingRule::NearestHalfAway),
        "floor" => Ok(RoundingRule::Floor),
        "none" => Ok(RoundingRule::Disabled),
        other => Err(ConfigError::Invalid(format!(
            "rounding {other:?} (expected nearest, floor or none)"
        ))),
    }
}

pub fn rounding_name(r: RoundingRule) -> &'static str {
    match r {
        RoundingRule::NearestHalfAway => "nearest",
        RoundingRule::Floor => "floor",
        RoundingRule::Disabled => "none",
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn is_live(&self) -> bool {
        self.provider.kind == "live"
    }

    pub fn timespan(&self) -> Result<Timespan, ConfigError> {
        let d = |s: &str| parse_date(s).map_err(|e| ConfigError::Invalid(e.to_string()));
        Timespan::new(d(&self.start)?, d(&self.end)?).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn search_tolerance(&self) -> Result<Rational, ConfigError> {
        parse_rational(&self.params.search_tolerance).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn universe_spec(&self) -> Result<UniverseSpec, ConfigError> {
        let p = &self.provider;
        let family = ShapeFamily::parse(&p.shape_family)
            .ok_or_else(|| ConfigError::Invalid(format!("shape family {:?}", p.shape_family)))?;
        let mut spec = UniverseSpec::new(p.n_queries, p.log10_range, family, p.seed);
        spec.points = p.points;
        Ok(spec)
    }

    pub fn simulator(&self) -> Result<Simulator, ConfigError> {
        let universe = anchorbank_core::make_universe(&self.universe_spec()?)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Simulator::new(universe, parse_rounding(&self.provider.rounding)?))
    }

    pub fn reference_policy(&self) -> Result<ReferencePolicy, ConfigError> {
        Ok(match self.params.reference.as_str() {
            "most-popular" => ReferencePolicy::MostPopular,
            "median" => ReferencePolicy::CloseToMedian,
            id => ReferencePolicy::Explicit(QueryId::new(id).map_err(|e| ConfigError::Invalid(e.to_string()))?),
        })
    }

    pub fn build_config(&self) -> Result<BuildConfig, ConfigError> {
        let p = &self.params;
        let mut c = BuildConfig::new(self.region.clone(), self.timespan()?);
        c.k = p.k;
        c.tau = p.tau;
        c.top_n = p.top_n;
        c.sample_n = p.sample_n;
        c.seed = p.seed;
        c.search_tolerance = self.search_tolerance()?;
        c.reference = self.reference_policy()?;
        c.head_queries = p
            .head_queries
            .iter()
            .map(|q| QueryId::new(q.as_str()).map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect::<Result<_, _>>()?;
        c.on_disconnected = if p.drop_unreachable {
            DisconnectedPolicy::Drop
        } else {
            DisconnectedPolicy::Fail
        };
        Ok(c)
    }

    /// Flat `name -> value` view of every parameter, for provenance.
    pub fn parameters(&self) -> BTreeMap<String, String> {
        let p = &self.params;
        let mut m = BTreeMap::new();
        m.insert("region".into(), self.region.clone());
        m.insert("start".into(), self.start.clone());
        m.insert("end".into(), self.end.clone());
        m.insert("k".into(), p.k.to_string());
        m.insert("tau".into(), p.tau.to_string());
        m.insert("top_n".into(), p.top_n.to_string());
        m.insert("sample_n".into(), p.sample_n.to_string());
        m.insert("search_tolerance".into(), p.search_tolerance.clone());
        m.insert("target_ratio".into(), p.target_ratio.to_string());
        m.insert("rounding_half_width".into(), p.rounding_half_width.to_string());
        m.insert("seed".into(), p.seed.to_string());
        m.insert("reference".into(), p.reference.clone());
        m.insert("head_queries".into(), p.head_queries.join(","));
        m.insert("drop_unreachable".into(), p.drop_unreachable.to_string());
        m.insert("reuse_round_one".into(), p.reuse_round_one.to_string());
        m
    }

    pub fn provenance(&self) -> Provenance {
        let pc = &self.provider;
        let universe = (!self.is_live()).then(|| UniverseDoc {
            n_queries: pc.n_queries,
            log10_range: pc.log10_range,
            shape_family: pc.shape_family.clone(),
            seed: pc.seed,
            points: pc.points,
            rounding: pc.rounding.clone(),
        });
        let fetched = self.is_live().then(|| {
            let today = chrono::Utc::now().date_naive().to_string();
            [today.clone(), today]
        });
        Provenance {
            provider: pc.kind.clone(),
            universe,
            fetched,
            parameters: self.parameters(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !matches!(self.provider.kind.as_str(), "simulator" | "live") {
            return Err(ConfigError::Invalid(format!("provider kind {:?}", self.provider.kind)));
        }
        self.timespan()?;
        self.build_config()?;
        parse_rounding(&self.provider.rounding)?;
        self.universe_spec()?;
        OptimalityParams {
            target_ratio: self.params.target_ratio,
            rounding_half_width: self.params.rounding_half_width,
        }
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
