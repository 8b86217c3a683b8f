//! The `anchorbank` command line.
//!
//! Exit codes: 0 success, 1 partial failure, 2 usage error, 3 runtime
//! failure. Settings come from the built-in defaults, then the `--config`
//! file, then flags.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anchorbank_core::bank_optimizer::{compare_eta, eta_grid, linear_grid, OptimalityParams};
use anchorbank_core::{
    make_universe, optimize_bank, BuildError, FrequencyList, OptimizerError, Provider, QueryId,
    RefineConfig, ShapeFamily, Simulator, UniverseSpec,
};
use clap::{Args, Parser, Subcommand};

use crate::cache::CachedProvider;
use crate::config::{parse_rounding, RunConfig};
use crate::formats::{
    file_stem_for, read_frequency_tsv, read_query_list, write_bank_csv, write_errors_csv,
    write_eta_comparison_csv, write_eta_grid_csv, write_histogram_csv, write_series_csv,
    write_summary_csv,
};
use crate::harness::{
    exp_containment, exp_determinism, exp_optimality, exp_search_cost, exp_shingling, ExperimentReport,
    SimSetup,
};
use crate::live::{LiveConfig, LiveProvider};
use crate::parallel::{build_bank_parallel, calibrate_batch_parallel};
use crate::storage::{load_bank, save_bank, write_atomic, BankFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Cache root for live responses when the config names none.
pub const ENV_CACHE_DIR: &str = "ANCHORBANK_CACHE_DIR";
const DEFAULT_CACHE_DIR: &str = ".anchorbank-cache";

#[derive(Debug, Parser)]
#[command(name = "anchorbank", version, about = "Calibrate rounded relative-popularity series against an anchor bank")]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Allow requests to the live endpoint.
    #[arg(long, global = true)]
    pub live: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an anchor bank from a frequency list.
    Build(BuildArgs),
    /// Thin a bank to near-equidistant anchors and refine it pairwise.
    Optimize(OptimizeArgs),
    /// Calibrate a list of queries against a bank.
    Calibrate(CalibrateArgs),
    /// Run the simulator experiments and print a pass/fail table.
    Eval(EvalArgs),
}

/// Flags shared by every subcommand that talks to a provider.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub region: Option<String>,
    /// First day of the timespan (YYYY-MM-DD).
    #[arg(long)]
    pub start: Option<String>,
    /// Last day of the timespan (YYYY-MM-DD).
    #[arg(long)]
    pub end: Option<String>,
    /// Simulator: number of queries in the universe.
    #[arg(long)]
    pub n_queries: Option<usize>,
    /// Simulator: orders of magnitude between least and most popular.
    #[arg(long)]
    pub log10_range: Option<f64>,
    /// Simulator: flat, seasonal, impulse or mixed.
    #[arg(long)]
    pub shape_family: Option<String>,
    /// Simulator: universe seed.
    #[arg(long)]
    pub sim_seed: Option<u64>,
    /// Simulator: nearest, floor or none.
    #[arg(long)]
    pub rounding: Option<String>,
    /// Worker threads; 0 picks a default.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Tab-separated `id<TAB>frequency` list. Without it the simulator
    /// supplies a noisy popularity proxy.
    #[arg(long)]
    pub freq: Option<PathBuf>,
    /// Bank file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Queries per request.
    #[arg(long)]
    pub k: Option<usize>,
    /// Pairs whose smaller maximum is below this are discarded.
    #[arg(long)]
    pub tau: Option<u32>,
    /// Anchors are drawn from this many top-ranked queries.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Number of anchors to draw.
    #[arg(long)]
    pub sample_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `most-popular`, `median`, or a query id.
    #[arg(long)]
    pub reference: Option<String>,
    /// Query to include ahead of the sample; repeatable.
    #[arg(long = "head")]
    pub head: Vec<String>,
    /// Drop anchors that cannot be chained to the reference instead of failing.
    #[arg(long)]
    pub drop_unreachable: bool,
    /// Acceptance band `t` for the binary search, e.g. `1/10`.
    #[arg(long)]
    pub search_tolerance: Option<String>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial bank file.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Optimized bank file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for the eta grid and comparison CSVs.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    #[arg(long)]
    pub target_ratio: Option<f64>,
    #[arg(long)]
    pub rounding_half_width: Option<f64>,
    /// Reference of the optimized bank (default: anchor closest to the median).
    #[arg(long)]
    pub reference: Option<String>,
    /// Always request every hop, even when a first-round estimate is as tight.
    #[arg(long)]
    pub no_reuse: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// One query id per line.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub search_tolerance: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated seeds for the containment and search experiments.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
    pub seeds: Vec<u64>,
    /// Number of banks for the optimizer experiment.
    #[arg(long, default_value_t = 20)]
    pub banks: u64,
    /// Queries per simulated universe.
    #[arg(long, default_value_t = 1000)]
    pub n_queries: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::SampleSize { .. } | BuildError::GroupSize { .. } | BuildError::Threshold(_) => usage(e),
            BuildError::Disconnected { ref unreachable } => {
                let list: Vec<&str> = unreachable.iter().map(|q| q.as_str()).collect();
                CliError::Runtime(format!(
                    "{} anchors cannot be chained to the reference (rerun with --drop-unreachable to drop them):\n  {}",
                    unreachable.len(),
                    list.join("\n  ")
                ))
            }
            other => runtime(other),
        }
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Domain(_) => usage(e),
            other => runtime(other),
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Build(a) => {
            apply_common(&mut config, &a.common);
            apply_build(&mut config, a);
            cmd_build(&config, cli.live, a)
        }
        Command::Optimize(a) => {
            apply_common(&mut config, &a.common);
            if let Some(v) = a.target_ratio {
                config.params.target_ratio = v;
            }
            if let Some(v) = a.rounding_half_width {
                config.params.rounding_half_width = v;
            }
            if a.no_reuse {
                config.params.reuse_round_one = false;
            }
            cmd_optimize(&config, cli.live, a)
        }
        Command::Calibrate(a) => {
            apply_common(&mut config, &a.common);
            if let Some(v) = &a.search_tolerance {
                config.params.search_tolerance = v.clone();
            }
            cmd_calibrate(&config, cli.live, a)
        }
        Command::Eval(a) => cmd_eval(&config, a),
    }
}

fn apply_common(config: &mut RunConfig, a: &CommonArgs) {
    if let Some(v) = &a.region {
        config.region = v.clone();
    }
    if let Some(v) = &a.start {
        config.start = v.clone();
    }
    if let Some(v) = &a.end {
        config.end = v.clone();
    }
    let p = &mut config.provider;
    if let Some(v) = a.n_queries {
        p.n_queries = v;
    }
    if let Some(v) = a.log10_range {
        p.log10_range = v;
    }
    if let Some(v) = &a.shape_family {
        p.shape_family = v.clone();
    }
    if let Some(v) = a.sim_seed {
        p.seed = v;
    }
    if let Some(v) = &a.rounding {
        p.rounding = v.clone();
    }
    if let Some(v) = a.threads {
        config.params.threads = v;
    }
}

fn apply_build(config: &mut RunConfig, a: &BuildArgs) {
    let p = &mut config.params;
    if let Some(v) = a.k {
        p.k = v;
    }
    if let Some(v) = a.tau {
        p.tau = v;
    }
    if let Some(v) = a.top_n {
        p.top_n = v;
    }
    if let Some(v) = a.sample_n {
        p.sample_n = v;
    }
    if let Some(v) = a.seed {
        p.seed = v;
    }
    if let Some(v) = &a.reference {
        p.reference = v.clone();
    }
    if !a.head.is_empty() {
        p.head_queries = a.head.clone();
    }
    if a.drop_unreachable {
        p.drop_unreachable = true;
    }
    if let Some(v) = &a.search_tolerance {
        p.search_tolerance = v.clone();
    }
    if let Some(v) = &a.freq {
        config.paths.frequency_list = Some(v.clone());
    }
    if let Some(v) = &a.out {
        config.paths.bank = Some(v.clone());
    }
}

fn init_threads(config: &RunConfig) {
    if config.params.threads > 0 {
        // Fails only if the pool was already set up, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.params.threads)
            .build_global();
    }
}

type DynProvider = dyn Provider + Sync;

/// Source of responses for a run: a simulator, or the cached live client.
enum Source {
    Sim(Simulator),
    Live(CachedProvider<LiveProvider>),
}

impl Source {
    fn provider(&self) -> &DynProvider {
        match self {
            Source::Sim(s) => s,
            Source::Live(p) => p,
        }
    }

    fn simulator(&self) -> Option<&Simulator> {
        match self {
            Source::Sim(s) => Some(s),
            Source::Live(_) => None,
        }
    }

    fn report(&self) {
        if let Source::Live(p) = self {
            let s = p.stats();
            log::info!("cache: {} hits, {} misses, {} corrupt", s.hits, s.misses, s.corrupt);
        }
    }
}

fn cache_dir(config: &RunConfig) -> PathBuf {
    config
        .paths
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(ENV_CACHE_DIR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

/// Picks the provider. The live endpoint is used only with `--live`; a
/// config asking for it without the flag is a usage error. A bank built on
/// the simulator is reopened against the universe it was built from.
fn open_source(config: &RunConfig, live: bool, bank: Option<&BankFile>) -> Result<Source, CliError> {
    if config.is_live() && !live {
        return Err(usage("the config selects the live provider; pass --live to allow network access"));
    }
    if live {
        let provider = LiveProvider::new(LiveConfig::from_env());
        let cached = CachedProvider::new(provider, cache_dir(config)).map_err(runtime)?;
        return Ok(Source::Live(cached));
    }
    if let Some(u) = bank.and_then(|b| b.provenance.universe.as_ref()) {
        let family = ShapeFamily::parse(&u.shape_family)
            .ok_or_else(|| runtime(format!("bank names unknown shape family {:?}", u.shape_family)))?;
        let mut spec = UniverseSpec::new(u.n_queries, u.log10_range, family, u.seed);
        spec.points = u.points;
        let universe = make_universe(&spec).map_err(runtime)?;
        return Ok(Source::Sim(Simulator::new(universe, parse_rounding(&u.rounding).map_err(runtime)?)));
    }
    Ok(Source::Sim(config.simulator().map_err(usage)?))
}

fn open_file(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_run_config(config: &RunConfig, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    write_atomic(&dir.join("run_config.toml"), config.to_toml().as_bytes()).map_err(runtime)
}

fn load_bank_arg(config: &RunConfig, flag: &Option<PathBuf>) -> Result<BankFile, CliError> {
    let path = flag
        .clone()
        .or_else(|| config.paths.bank.clone())
        .ok_or_else(|| usage("no bank file given (--bank or paths.bank)"))?;
    load_bank(&path).map_err(runtime)
}

fn cmd_build(config: &RunConfig, live: bool, _args: &BuildArgs) -> Result<i32, CliError> {
    config.validate().map_err(usage)?;
    init_threads(config);
    let build = config.build_config().map_err(usage)?;
    let source = open_source(config, live, None)?;
    let freq = match &config.paths.frequency_list {
        Some(path) => read_frequency_tsv(open_file(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))?,
        None => match source.simulator() {
            Some(sim) => FrequencyList::from_unsorted(sim.universe().frequency_proxy(config.provider.sigma, config.provider.seed))?,
            None => return Err(usage("a live build needs a frequency list (--freq)")),
        },
    };
    eprintln!(
        "build: k={} tau={} N={} n={} seed={} reference={}",
        build.k, build.tau, build.top_n, build.sample_n, build.seed, config.params.reference
    );
    let out = build_bank_parallel(source.provider(), &freq, &build)?;
    source.report();
    eprintln!(
        "build: {} anchors sampled, {} requests, {} comparable pairs, {} anchors in bank, reference {}",
        out.anchors.len(),
        out.responses.len(),
        out.graph.pair_count(),
        out.bank.len(),
        out.bank.reference()
    );
    if !out.dropped.is_empty() {
        let list: Vec<&str> = out.dropped.iter().map(|q| q.as_str()).collect();
        eprintln!("build: dropped {} anchors: {}", out.dropped.len(), list.join(", "));
    }
    let path = config.paths.bank.clone().unwrap_or_else(|| PathBuf::from("bank.json"));
    let mut file = BankFile::new(out.bank, config.provenance());
    file.round_one = Some(out.graph);
    save_bank(&file, &path).map_err(runtime)?;
    eprintln!("build: wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_optimize(config: &RunConfig, live: bool, args: &OptimizeArgs) -> Result<i32, CliError> {
    init_threads(config);
    let initial = load_bank_arg(config, &args.bank)?;
    let params = OptimalityParams {
        target_ratio: config.params.target_ratio,
        rounding_half_width: config.params.rounding_half_width,
    };
    params.validate()?;
    let mut refine = RefineConfig {
        params,
        reuse_round_one: config.params.reuse_round_one,
        ..RefineConfig::default()
    };
    if let Some(r) = &args.reference {
        let mut c = config.clone();
        c.params.reference = r.clone();
        refine.reference = c.reference_policy().map_err(usage)?;
    }
    let source = open_source(config, live, Some(&initial))?;
    let out = optimize_bank(source.provider(), &initial.bank, initial.round_one.as_ref(), &refine)?;
    source.report();
    eprintln!(
        "optimize: {} -> {} anchors, {} requests, {} hops reused, reference {}",
        initial.bank.len(),
        out.bank.len(),
        out.requests_issued,
        out.reused_hops,
        out.bank.reference()
    );
    for v in &out.band_violations {
        eprintln!(
            "optimize: warning: adjacent ratio {:.4} between {} and {} outside the target band",
            v.ratio, v.lower, v.upper
        );
    }

    let mut provenance = initial.provenance.clone();
    provenance
        .parameters
        .insert("optimized.target_ratio".into(), params.target_ratio.to_string());
    provenance
        .parameters
        .insert("optimized.rounding_half_width".into(), params.rounding_half_width.to_string());
    provenance
        .parameters
        .insert("optimized.reuse_round_one".into(), refine.reuse_round_one.to_string());
    let mut file = BankFile::new(out.bank, provenance);
    file.round_one = initial.round_one.clone();
    save_bank(&file, &args.out).map_err(runtime)?;
    eprintln!("optimize: wrote {}", args.out.display());

    if let Some(dir) = &args.csv_dir {
        let eps = params.rounding_half_width;
        let grid = eta_grid(&linear_grid(0.05, 0.95, 181), &crate::harness::SPANS, eps);
        write_eta_grid_csv(&grid, create_file(&dir.join("eta_grid.csv"))?).map_err(runtime)?;
        write_bank_csv(&file.bank, create_file(&dir.join("optimized_bank.csv"))?).map_err(runtime)?;
        match &initial.round_one {
            Some(g) => {
                let rows = compare_eta(g, &file.bank, eps)?;
                write_eta_comparison_csv(&rows, create_file(&dir.join("eta_comparison.csv"))?).map_err(runtime)?;
            }
            None => log::warn!("initial bank carries no first-round graph; skipping eta_comparison.csv"),
        }
        write_run_config(config, dir)?;
    }
    Ok(EXIT_OK)
}

fn cmd_calibrate(config: &RunConfig, live: bool, args: &CalibrateArgs) -> Result<i32, CliError> {
    init_threads(config);
    let queries_path = args
        .queries
        .clone()
        .or_else(|| config.paths.queries.clone())
        .ok_or_else(|| usage("no query list given (--queries or paths.queries)"))?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.paths.output_dir.clone())
        .ok_or_else(|| usage("no output directory given (--out-dir or paths.output_dir)"))?;
    let tolerance = config
        .search_tolerance()
        .map_err(usage)
        .and_then(|t| anchorbank_core::SearchTolerance::new(t).map_err(usage))?;
    let bank = load_bank_arg(config, &args.bank)?;
    let queries: Vec<QueryId> =
        read_query_list(open_file(&queries_path)?).map_err(|e| runtime(format!("{}: {e}", queries_path.display())))?;
    let source = open_source(config, live, Some(&bank))?;

    let batch = calibrate_batch_parallel(&queries, &bank.bank, source.provider(), &tolerance);
    source.report();

    let series_dir = out_dir.join("series");
    fs::create_dir_all(&series_dir).map_err(|e| runtime(format!("{}: {e}", series_dir.display())))?;
    for r in &batch.results {
        let path = series_dir.join(format!("{}.csv", file_stem_for(&r.query)));
        let mut w = create_file(&path)?;
        write_series_csv(r, &mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
    }
    write_summary_csv(&batch.results, create_file(&out_dir.join("summary.csv"))?).map_err(runtime)?;
    write_histogram_csv(&batch.histogram, create_file(&out_dir.join("histogram.csv"))?).map_err(runtime)?;
    write_errors_csv(&batch, create_file(&out_dir.join("errors.csv"))?).map_err(runtime)?;
    write_run_config(config, &out_dir)?;

    eprintln!(
        "calibrate: {} queries, {} calibrated, {} failed, mean requests {:.3}, max {}",
        queries.len(),
        batch.results.len(),
        batch.errors.len(),
        batch.mean_requests(),
        batch.max_requests()
    );
    for (q, e) in &batch.errors {
        eprintln!("calibrate: {q}: {e}");
    }
    Ok(if batch.errors.is_empty() {
        EXIT_OK
    } else if batch.results.is_empty() {
        EXIT_RUNTIME
    } else {
        EXIT_PARTIAL
    })
}

fn save_rows(dir: &Path, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> Result<(), crate::error::FormatError>) -> Result<(), CliError> {
    let mut w = create_file(&dir.join(name))?;
    write(&mut w).map_err(runtime)?;
    w.flush().map_err(runtime)
}

fn cmd_eval(config: &RunConfig, args: &EvalArgs) -> Result<i32, CliError> {
    if args.seeds.is_empty() || args.banks == 0 {
        return Err(usage("eval needs at least one seed and one bank"));
    }
    init_threads(config);
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.paths.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("eval"));
    fs::create_dir_all(&out_dir).map_err(|e| runtime(format!("{}: {e}", out_dir.display())))?;
    let n = args.n_queries;
    let seeds = &args.seeds;
    let mut reports: Vec<ExperimentReport> = Vec::new();

    for rounding in ["nearest", "none", "floor"] {
        let setup = SimSetup::new(n, 6.0, 100).with_rounding(parse_rounding(rounding).map_err(usage)?);
        let out = exp_containment(seeds, &setup).map_err(runtime)?;
        save_rows(&out_dir, &format!("containment_{rounding}.csv"), |w| out.write_rows(w))?;
        reports.push(out.report);
    }
    for matched in [true, false] {
        let out = exp_search_cost(seeds, &SimSetup::new(n, 6.0, 50), matched).map_err(runtime)?;
        let label = if matched { "matched" } else { "mismatched" };
        save_rows(&out_dir, &format!("search_cost_{label}.csv"), |w| out.write_rows(w))?;
        save_rows(&out_dir, &format!("search_histogram_{label}.csv"), |w| write_histogram_csv(&out.histogram, w))?;
        reports.push(out.report);
    }
    let bank_seeds: Vec<u64> = (1..=args.banks).collect();
    let out = exp_optimality(&bank_seeds, &SimSetup::new(n.min(800), 6.0, 100)).map_err(runtime)?;
    save_rows(&out_dir, "optimality.csv", |w| out.write_rows(w))?;
    save_rows(&out_dir, "eta_grid.csv", |w| write_eta_grid_csv(&out.grid, w))?;
    reports.push(out.report);
    reports.push(exp_shingling(seeds[0], &SimSetup::new(n, 6.0, 100)).map_err(runtime)?);
    let det_dir = out_dir.join("determinism");
    fs::create_dir_all(&det_dir).map_err(|e| runtime(format!("{}: {e}", det_dir.display())))?;
    reports.push(exp_determinism(seeds[0], &SimSetup::new(n, 6.0, 100), &det_dir).map_err(runtime)?);

    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.render());
    }
    let failed: usize = reports.iter().map(|r| r.checks.iter().filter(|c| !c.passed).count()).sum();
    let total: usize = reports.iter().map(|r| r.checks.len()).sum();
    text.push_str(&format!("{} of {total} checks passed\n", total - failed));
    write_atomic(&out_dir.join("report.txt"), text.as_bytes()).map_err(runtime)?;
    write_run_config(config, &out_dir)?;
    print!("{text}");
    Ok(if failed == 0 { EXIT_OK } else { EXIT_PARTIAL })
}
