//! Bank files.
//!
//! A bank file is UTF-8 text: the header line
//! `anchorbank-bank v1 sha256=<hex>` and a pretty-printed JSON body. Every
//! rational is a `[numerator, denominator]` pair of decimal strings, so
//! save/load is exact. See `docs/bank-format.md` for the field list.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anchorbank_core::model::BANK_SCHEMA_VERSION;
use anchorbank_core::{
    AnchorBank, AnchorBankEntry, BankParams, Bound, ComparisonGraph, QueryId, RatioEstimate,
};
use serde::{Deserialize, Serialize};

use crate::codec::{rational_from_pair, rational_to_pair, seal, unseal, RationalPair, TimespanDoc};
use crate::error::StoreError;

pub const BANK_KIND: &str = "anchorbank-bank";

/// Where a bank came from; embedded verbatim in the file.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// `simulator` or `live`.
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub universe: Option<UniverseDoc>,
    /// First and last fetch date of a live build.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched: Option<[String; 2]>,
    /// Run parameters as given, keyed by name.
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
    pub tool_version: String,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct UniverseDoc {
    pub n_queries: usize,
    pub log10_range: f64,
    pub shape_family: String,
    pub seed: u64,
    pub points: usize,
    pub rounding: String,
}

/// A bank plus what is needed to reproduce or refine it.
#[derive(Clone, PartialEq, Debug)]
pub struct BankFile {
    pub bank: AnchorBank,
    pub provenance: Provenance,
    /// First-round comparisons, kept so the optimizer can reuse them.
    pub round_one: Option<ComparisonGraph>,
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    k: usize,
    tau: u32,
    search_tolerance: RationalPair,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    query: String,
    #[serde(rename = "R")]
    calibrated: RationalPair,
    lo: RationalPair,
    hi: RationalPair,
    eta: RationalPair,
}

#[derive(Serialize, Deserialize)]
struct EstimateDoc {
    numerator: String,
    denominator: String,
    r: RationalPair,
    lo: RationalPair,
    hi: RationalPair,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<String>,
    edges: Vec<EstimateDoc>,
}

#[derive(Serialize, Deserialize)]
struct BankDoc {
    schema_version: u32,
    reference: String,
    search_start: String,
    region: String,
    timespan: TimespanDoc,
    params: ParamsDoc,
    entries: Vec<EntryDoc>,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    round_one: Option<GraphDoc>,
}

fn graph_to_doc(g: &ComparisonGraph) -> GraphDoc {
    GraphDoc {
        nodes: g.nodes().map(|q| q.to_string()).collect(),
        edges: g
            .pairs()
            .map(|e| EstimateDoc {
                numerator: e.numerator.to_string(),
                denominator: e.denominator.to_string(),
                r: rational_to_pair(&e.r),
                lo: rational_to_pair(&e.lo),
                hi: rational_to_pair(e.hi.finite().expect("graph edges are bounded")),
            })
            .collect(),
    }
}

fn graph_from_doc(doc: &GraphDoc) -> Result<ComparisonGraph, StoreError> {
    let mut g = ComparisonGraph::new();
    for n in &doc.nodes {
        g.add_node(QueryId::new(n.as_str())?);
    }
    for e in &doc.edges {
        let (lo, hi) = (rational_from_pair(&e.lo)?, rational_from_pair(&e.hi)?);
        let r = rational_from_pair(&e.r)?;
        if !(lo <= r && r <= hi) || lo <= Default::default() {
            return Err(StoreError::Invalid(format!(
                "edge {} / {} has an inconsistent interval",
                e.numerator, e.denominator
            )));
        }
        g.insert(&RatioEstimate::from_interval(
            QueryId::new(e.numerator.as_str())?,
            QueryId::new(e.denominator.as_str())?,
            r,
            lo,
            Bound::Finite(hi),
        ));
    }
    Ok(g)
}

impl BankFile {
    pub fn new(bank: AnchorBank, provenance: Provenance) -> Self {
        BankFile {
            bank,
            provenance,
            round_one: None,
        }
    }

    pub fn to_text(&self) -> String {
        let b = &self.bank;
        let p = b.params();
        let doc = BankDoc {
            schema_version: b.schema_version(),
            reference: b.reference().to_string(),
            search_start: b.search_start().to_string(),
            region: b.region().to_string(),
            timespan: TimespanDoc::from_timespan(b.timespan()),
            params: ParamsDoc {
                k: p.k,
                tau: p.tau,
                search_tolerance: rational_to_pair(&p.search_tolerance),
                seed: p.seed,
            },
            entries: b
                .entries()
                .iter()
                .map(|e| EntryDoc {
                    query: e.query.to_string(),
                    calibrated: rational_to_pair(&e.calibrated),
                    lo: rational_to_pair(&e.lo),
                    hi: rational_to_pair(&e.hi),
                    eta: rational_to_pair(&e.eta),
                })
                .collect(),
            provenance: self.provenance.clone(),
            round_one: self.round_one.as_ref().map(graph_to_doc),
        };
        let mut body = serde_json::to_string_pretty(&doc).expect("bank documents serialize");
        body.push('\n');
        seal(BANK_KIND, BANK_SCHEMA_VERSION, &body)
    }

    pub fn from_text(text: &str) -> Result<Self, StoreError> {
        let (version, body) = unseal(BANK_KIND, text)?;
        if version != BANK_SCHEMA_VERSION {
            return Err(StoreError::UnsupportedVersion {
                kind: "bank file",
                found: version,
                supported: BANK_SCHEMA_VERSION,
            });
        }
        let doc: BankDoc = serde_json::from_str(body)?;
        if doc.schema_version != BANK_SCHEMA_VERSION {
            return Err(StoreError::UnsupportedVersion {
                kind: "bank schema",
                found: doc.schema_version,
                supported: BANK_SCHEMA_VERSION,
            });
        }
        let entries = doc
            .entries
            .iter()
            .map(|e| {
                Ok(AnchorBankEntry {
                    query: QueryId::new(e.query.as_str())?,
                    calibrated: rational_from_pair(&e.calibrated)?,
                    lo: rational_from_pair(&e.lo)?,
                    hi: rational_from_pair(&e.hi)?,
                    eta: rational_from_pair(&e.eta)?,
                })
            })
            .collect::<Result<Vec<_>, StoreError>>()?;
        let params = BankParams {
            k: doc.params.k,
            tau: doc.params.tau,
            search_tolerance: rational_from_pair(&doc.params.search_tolerance)?,
            seed: doc.params.seed,
        };
        let bank = AnchorBank::new(
            entries,
            QueryId::new(doc.reference.as_str())?,
            QueryId::new(doc.search_start.as_str())?,
            &doc.region,
            doc.timespan.to_timespan()?,
            params,
        )?;
        let round_one = doc.round_one.as_ref().map(graph_from_doc).transpose()?;
        Ok(BankFile {
            bank,
            provenance: doc.provenance,
            round_one,
        })
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers see either the old or the new file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| StoreError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| StoreError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| StoreError::io(path, e))?;
    tmp.persist(path).map_err(|e| StoreError::io(path, e.error))?;
    Ok(())
}

pub fn save_bank(file: &BankFile, path: &Path) -> Result<(), StoreError> {
    write_atomic(path, file.to_text().as_bytes())
}

pub fn load_bank(path: &Path) -> Result<BankFile, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    BankFile::from_text(&text)
}
