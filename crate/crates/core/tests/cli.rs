use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rescue_core::datagen::{generate_trial, StreamSeed};
use rescue_core::estimators::estimate_corrected;
use rescue_core::model::format_scenarios;
use rescue_core::{Dataset, Estimates, Mode, Scenario};

fn rescue(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rescue")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn scenario() -> Scenario {
    Scenario::reference(0.0, 1.0, 0.0, 1.0, 1.0, 0.0)
}

fn dataset_file(dir: &Path) -> (PathBuf, Dataset) {
    let d = generate_trial(&scenario(), StreamSeed::new(11, 0)).unwrap();
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    (write(dir, "data.csv", std::str::from_utf8(&buf).unwrap()), d)
}

fn csv_estimates(out: &str) -> Vec<String> {
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some(Estimates::CSV_HEADER));
    lines.next().unwrap().split(',').map(str::to_string).collect()
}

const TABLE1: &str = "stratum,proportion,mean_control,mean_treatment\n\
00,0.6,0,1\n01,0.1,0,3\n10,0.1,1,1\n11,0.2,1,3\n";

#[test]
fn strata_reports_itt_and_stratum_effect() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "strata.csv", TABLE1);
    let out = rescue(&["--format", "csv", "strata", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!((value("itt,") - 1.3).abs() < 1e-12);
    assert!((value("00_effect,") - 1.0).abs() < 1e-12);
}

#[test]
fn strata_rejects_proportions_not_summing_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "strata.csv", &TABLE1.replace("11,0.2", "11,0.1"));
    let out = rescue(&["strata", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sum"), "{}", stderr(&out));
}

#[test]
fn estimate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, data) = dataset_file(dir.path());
    let out = rescue(&["--format", "csv", "estimate", path.to_str().unwrap(), "-c", "-0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let fields = csv_estimates(&stdout(&out));
    let want = estimate_corrected(&data, -0.5, Mode::PlugIn, None).unwrap();
    assert_eq!(fields[0], "plug-in");
    assert_eq!(fields[3].parse::<f64>().unwrap(), want.corrected);
    assert_eq!(fields[1].parse::<f64>().unwrap(), want.itt);
}

#[test]
fn estimate_with_oracle_file() {
    let dir = tempfile::tempdir().unwrap();
    let (path, data) = dataset_file(dir.path());
    let oracle = write(dir.path(), "scenario.txt", &format_scenarios(&[scenario()]));
    let out = rescue(&[
        "--format",
        "csv",
        "estimate",
        path.to_str().unwrap(),
        "-c",
        "-0.5",
        "--oracle",
        oracle.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let fields = csv_estimates(&stdout(&out));
    let want = estimate_corrected(&data, -0.5, Mode::Oracle, Some(&scenario())).unwrap();
    assert_eq!(fields[0], "oracle");
    assert_eq!(fields[3].parse::<f64>().unwrap(), want.corrected);
    assert_eq!(fields[4], "");
}

#[test]
fn seed_is_reported_and_bootstrap_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = dataset_file(dir.path());
    let args =
        ["--seed", "99", "--format", "csv", "bootstrap", path.to_str().unwrap(), "-c", "-0.5", "--resamples", "300"];
    let a = rescue(&args);
    let b = rescue(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stderr(&a).contains("99"));
}

#[test]
fn simulate_emits_a_dataset_that_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "scenario.txt", &format_scenarios(&[scenario()]));
    let out = rescue(&["--seed", "5", "simulate", sc.to_str().unwrap(), "--emit-dataset"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let parsed = Dataset::read_csv(out.stdout.as_slice(), -0.5).unwrap();
    assert_eq!(parsed, generate_trial(&scenario(), StreamSeed::new(5, 0)).unwrap());
    let path = write(dir.path(), "sim.csv", &stdout(&out));
    let v = rescue(&["validate", path.to_str().unwrap(), "-c", "-0.5"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).contains("no violations"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rescue(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rescue(&["--help"]).status.code(), Some(0));
    let missing = dir.path().join("missing.csv");
    assert_eq!(rescue(&["validate", missing.to_str().unwrap(), "-c", "0"]).status.code(), Some(4));

    let garbled = write(dir.path(), "garbled.csv", "id,z,y1,r,y2\n1,2,0.1,0,0.3\n");
    let out = rescue(&["estimate", garbled.to_str().unwrap(), "-c", "0"]);
    assert_eq!(out.status.code(), Some(2));

    // every treatment subject rescued: no non-rescued outcomes to correct
    let degenerate = write(
        dir.path(),
        "degenerate.csv",
        "id,z,y1,r,y2\n1,0,1.0,0,0.1\n2,0,2.0,0,0.2\n3,0,1.5,0,0.4\n4,1,-1.0,1,0.3\n5,1,-2.0,1,0.5\n6,1,-1.5,1,0.2\n",
    );
    let out = rescue(&["estimate", degenerate.to_str().unwrap(), "-c", "0"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn reproduce_writes_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t3.csv");
    let out = rescue(&[
        "--seed",
        "4",
        "--replicates",
        "200",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
        "reproduce",
        "table3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().skip(1).all(|l| l.contains(",plug-in,200,")));
}
