use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anchorbank::storage::load_bank;

const BIN: &str = env!("CARGO_BIN_EXE_anchorbank");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("ANCHORBANK_CACHE_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--n-queries", "300", "--top-n", "300", "--sample-n", "60", "--log10-range", "5"];

fn build(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["build", "--out", out];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run(dir, &args)
}

#[test]
fn build_echoes_defaults_and_writes_a_bank() {
    let dir = tempfile::tempdir().unwrap();
    let o = build(dir.path(), "bank.json", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("k=5 tau=10"), "{err}");
    assert!(err.contains("n=60"), "{err}");
    let file = load_bank(&dir.path().join("bank.json")).unwrap();
    assert_eq!(file.provenance.parameters["k"], "5");
    assert_eq!(file.provenance.universe.as_ref().unwrap().n_queries, 300);
    assert!(file.round_one.is_some());
}

#[test]
fn full_default_sizes_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["build", "--out", "bank.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("k=5 tau=10 N=2000 n=100"), "{}", stderr(&o));
}

#[test]
fn builds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&build(dir.path(), "a.json", &["--seed", "9"])), 0);
    assert_eq!(code(&build(dir.path(), "b.json", &["--seed", "9"])), 0);
    assert_eq!(
        fs::read(dir.path().join("a.json")).unwrap(),
        fs::read(dir.path().join("b.json")).unwrap()
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["build", "--out", "x.json", "--n-queries", "300", "--top-n", "300", "--sample-n", "3"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("k=5, n=3"));
    assert_eq!(code(&build(dir.path(), "x.json", &["--k", "1"])), 2);
    assert_eq!(code(&run(dir.path(), &["build", "--no-such-flag"])), 2);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&run(dir.path(), &["calibrate", "--bank", "b.json"])), 2);
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn live_config_requires_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("live.toml"), "[provider]\nkind = \"live\"\n").unwrap();
    let o = run(dir.path(), &["--config", "live.toml", "build", "--out", "x.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--live"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[params]\nkay = 5\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["--config", "c.toml", "build"])), 2);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "[provider]\nn_queries = 300\nlog10_range = 5.0\n[params]\ntop_n = 300\nsample_n = 60\nk = 4\ntau = 8\n",
    )
    .unwrap();
    let o = run(dir.path(), &["--config", "c.toml", "build", "--out", "b.json", "--tau", "12"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = &load_bank(&dir.path().join("b.json")).unwrap().bank;
    assert_eq!((p.params().k, p.params().tau), (4, 12));
}

#[test]
fn frequency_file_input() {
    let dir = tempfile::tempdir().unwrap();
    // The simulator's ids are q00000..q00299, most popular first.
    let mut tsv = String::from("id\tfrequency\n");
    for i in 0..300 {
        tsv.push_str(&format!("q{i:05}\t{}\n", 1e9 / (i as f64 + 1.0)));
    }
    fs::write(dir.path().join("freq.tsv"), tsv).unwrap();
    let o = build(dir.path(), "b.json", &["--freq", "freq.tsv", "--drop-unreachable"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn missing_bank_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("q.txt"), "").unwrap();
    let o = run(dir.path(), &["calibrate", "--bank", "nope.json", "--queries", "q.txt", "--out-dir", "out"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn calibrate_outputs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&build(d, "bank.json", &[])), 0);
    let bank = load_bank(&d.join("bank.json")).unwrap().bank;
    let reference = bank.reference().to_string();

    // Reference alone: R = 1 exactly.
    fs::write(d.join("ref.txt"), format!("{reference}\n")).unwrap();
    let o = run(d, &["calibrate", "--bank", "bank.json", "--queries", "ref.txt", "--out-dir", "ref"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(d.join("ref/summary.csv")).unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!((&row[0], &row[1], &row[4], &row[7], &row[8]), (reference.as_str(), "ok", "1", "1", "1"));

    // Empty list: headers only, success.
    fs::write(d.join("empty.txt"), "").unwrap();
    let o = run(d, &["calibrate", "--bank", "bank.json", "--queries", "empty.txt", "--out-dir", "empty"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(d.join("empty/summary.csv")).unwrap().lines().count(), 1);
    assert_eq!(fs::read_dir(d.join("empty/series")).unwrap().count(), 0);
    assert!(d.join("empty/run_config.toml").exists());

    // A batch: one CSV per query and a histogram.
    let ids: String = (0..300).step_by(3).map(|i| format!("q{i:05}\n")).collect();
    fs::write(d.join("batch.txt"), &ids).unwrap();
    let o = run(d, &["calibrate", "--bank", "bank.json", "--queries", "batch.txt", "--out-dir", "batch"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_dir(d.join("batch/series")).unwrap().count(), 100);
    let mut rdr = csv::Reader::from_path(d.join("batch/histogram.csv")).unwrap();
    let (mut n, mut total) = (0usize, 0usize);
    for r in rdr.records() {
        let r = r.unwrap();
        let (k, v): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        n += v;
        total += k * v;
    }
    assert_eq!(n, 100);
    assert!((total as f64 / n as f64) <= 3.0);

    // Unknown queries: partial failure, then total failure.
    fs::write(d.join("mixed.txt"), "q00001\nnot-a-query\n").unwrap();
    let o = run(d, &["calibrate", "--bank", "bank.json", "--queries", "mixed.txt", "--out-dir", "mixed"]);
    assert_eq!(code(&o), 1);
    let errors = fs::read_to_string(d.join("mixed/errors.csv")).unwrap();
    assert!(errors.contains("not-a-query"));
    fs::write(d.join("bad.txt"), "not-a-query\n").unwrap();
    let o = run(d, &["calibrate", "--bank", "bank.json", "--queries", "bad.txt", "--out-dir", "bad"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn optimize_writes_bank_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&build(d, "bank.json", &[])), 0);
    let o = run(d, &["optimize", "--bank", "bank.json", "--out", "opt.json", "--csv-dir", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let initial = load_bank(&d.join("bank.json")).unwrap();
    let opt = load_bank(&d.join("opt.json")).unwrap();
    assert!(opt.bank.len() < initial.bank.len());
    assert_eq!(opt.provenance.parameters["optimized.reuse_round_one"], "true");
    let mut rdr = csv::Reader::from_path(d.join("csv/eta_comparison.csv")).unwrap();
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let (init, opt): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(opt <= init);
        rows += 1;
    }
    assert_eq!(rows, opt.bank.len());
    assert!(d.join("csv/eta_grid.csv").exists());

    let o = run(d, &["optimize", "--bank", "bank.json", "--out", "o2.json", "--target-ratio", "2"]);
    assert_eq!(code(&o), 2);
}
