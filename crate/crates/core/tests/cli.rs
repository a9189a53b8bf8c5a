use std::path::Path;
use std::process::{Command, Output};

use drd::bench::parse_csv;
use drd::datasets::DatasetBundle;
use drd::model::ValidationOptions;
use drd::RunResult;

fn drd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drd"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("drd binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_synthetic_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("s.json");
    let out = drd(&["generate", "--kind", "synthetic", "--regions", "100", "--problems", "3", "--seed", "7", "--out", path(&bundle)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let b = DatasetBundle::read_json(&bundle, ValidationOptions::default()).unwrap();
    assert_eq!(b.instance.num_regions(), 100);
    assert_eq!(b.ground_truths.len(), 3);
    assert_eq!(b.provenance.as_ref().unwrap().seed, 7);

    let out = drd(&["run", "--bundle", path(&bundle), "--policy", "bisect:maxprob", "--problem", "2", "--trace"]);
    assert_eq!(code(&out), 0);
    let res: RunResult = serde_json::from_slice(&out.stdout).unwrap();
    let traj = res.fdrd_trajectory.unwrap();
    assert_eq!(traj.len(), res.trace.len());
    assert!(traj.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn generate_disparity_instance() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("d.json");
    let out = drd(&["generate", "--kind", "disparity", "--problems", "1", "--seed", "1", "--out", path(&bundle)]);
    assert_eq!(code(&out), 0);
    let b = DatasetBundle::read_json(&bundle, ValidationOptions::default()).unwrap();
    assert_eq!(b.instance.num_tests(), 11);
    assert!((b.instance.bias()[1] - 0.99061).abs() < 1e-5);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("d.json");
    let missing_seed = drd(&["generate", "--kind", "disparity", "--out", path(&bundle)]);
    assert_eq!(code(&missing_seed), 2);
    assert!(String::from_utf8_lossy(&missing_seed.stderr).contains("seed"));

    assert_eq!(code(&drd(&["generate", "--kind", "disparity", "--seed", "1", "--out", path(&bundle)])), 0);
    assert_eq!(code(&drd(&["run", "--bundle", path(&bundle), "--policy", "nope:maxprob"])), 2);
    assert_eq!(code(&drd(&["run", "--bundle", path(&bundle), "--policy", "mvoi:unconstrained"])), 2);
    let report = dir.path().join("r.txt");
    assert_eq!(
        code(&drd(&["bench", "--bundle", path(&bundle), "--seed", "1", "--format", "xml", "--out", path(&report)])),
        2
    );
    assert_eq!(code(&drd(&["bench", "--bundle", path(&bundle), "--out", path(&report)])), 2);
    assert_eq!(code(&drd(&["frobnicate"])), 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&drd(&["run", "--bundle", path(&missing)])), 1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"num_tests": 1, "bias": [1.5], "regions": [[0]]}"#).unwrap();
    assert_eq!(code(&drd(&["run", "--bundle", path(&bad), "--truth", "1"])), 1);
    // The same file is accepted once biases are clamped.
    assert_eq!(code(&drd(&["run", "--bundle", path(&bad), "--truth", "1", "--clamp-bias"])), 0);
}

#[test]
fn bench_from_config_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("drd.toml");
    std::fs::write(
        &config,
        r#"
seed = 5
problems = 20
[dataset]
kind = "synthetic"
num_tests = 40
num_regions = 30
[bench]
policies = ["bisect:unconstrained", "maxtally:unconstrained", "bisect:maxprob"]
resamples = 500
"#,
    )
    .unwrap();
    let bundle = dir.path().join("b.json");
    assert_eq!(code(&drd(&["generate", "--config", path(&config), "--out", path(&bundle)])), 0);
    let report = dir.path().join("r.csv");
    let plot = dir.path().join("p.csv");
    let out = drd(&[
        "bench",
        "--config",
        path(&config),
        "--bundle",
        path(&bundle),
        "--out",
        path(&report),
        "--plot-data",
        path(&plot),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    let base = rows.iter().find(|r| r.policy == "bisect" && r.selector == "unconstrained").unwrap();
    assert_eq!((base.norm_lo, base.norm_hi), (0.0, 0.0));
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(plot.lines().count(), 1 + 3 * 20);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\nproblem = 3\n").unwrap();
    assert_eq!(code(&drd(&["generate", "--config", path(&bad), "--out", path(&bundle)])), 2);
}

#[test]
fn verify_passes_and_catches_a_broken_objective() {
    let ok = drd(&["verify", "--suite", "equivalence", "--suite", "argmax", "--samples", "50"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);

    let broken = drd(&["verify", "--suite", "equivalence", "--samples", "50", "--inject-sign-flip"]);
    assert_eq!(code(&broken), 1);
    assert!(String::from_utf8_lossy(&broken.stdout).starts_with("FAIL"));

    assert_eq!(code(&drd(&["verify", "--suite", "bogus"])), 2);
}
