use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use tempfile::TempDir;

fn casecross(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_casecross")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two years of a pollutant that moves every day, plus a constant one.
fn write_series(dir: &Path) -> std::path::PathBuf {
    let start = NaiveDate::from_ymd_opt(2004, 4, 1).unwrap();
    let mut s = String::from("date,no2,flat\n");
    for i in 0..731 {
        let x = 20.0 + 5.0 * (i as f64 * 0.37).sin() + (i % 11) as f64;
        s += &format!("{},{x},3\n", start + Duration::days(i));
    }
    let path = dir.join("series.csv");
    fs::write(&path, s).unwrap();
    path
}

fn write_events(dir: &Path) -> std::path::PathBuf {
    let start = NaiveDate::from_ymd_opt(2004, 4, 3).unwrap();
    let mut s = String::from("date\n");
    for i in 0..400 {
        s += &format!("{}\n", start + Duration::days((i * 7919) % 720));
    }
    let path = dir.join("events.csv");
    fs::write(&path, s).unwrap();
    path
}

#[test]
fn referents_of_a_date() {
    let o = casecross(&["referents", "--date", "2005-06-15"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "2005-06-01\n2005-06-08\n2005-06-22\n2005-06-29\n"
    );
}

#[test]
fn decompose_writes_the_documented_columns_and_a_manifest() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path());
    let before = fs::read(&input).unwrap();
    let out = dir.path().join("out");
    let o = casecross(&["decompose", "--input", p(&input), "--column", "no2", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("decomposition.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "date,value,yearly,monthly,weekly,daily");
    assert_eq!(csv.lines().count(), 732);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command = decompose"));
    assert!(manifest.contains("input.series.sha256 = "));
    assert_eq!(fs::read(&input).unwrap(), before, "input was modified");
}

#[test]
fn analyze_and_calibrate_produce_their_tables() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path());
    let events = write_events(dir.path());
    let out = dir.path().join("cal");
    let o = casecross(&[
        "calibrate", "--input", p(&input), "--column", "no2", "--events", p(&events),
        "--model", "1", "--B", "20", "--seed", "4", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["fits.csv", "calibration.csv", "null_estimates.csv", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(out.join("manifest.txt")).unwrap().contains("seed = 4"));
}

#[test]
fn exit_codes_distinguish_usage_data_and_numerical_failures() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path());
    let events = write_events(dir.path());
    let out = dir.path().join("out");

    assert_eq!(code(&casecross(&["bogus"])), 1);
    assert_eq!(code(&casecross(&["analyze", "--input", p(&input)])), 1);

    let missing = dir.path().join("nope.csv");
    let o = casecross(&["decompose", "--input", p(&missing), "--column", "no2", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));

    let o = casecross(&["decompose", "--input", p(&input), "--column", "so2", "--out", p(&out)]);
    assert_eq!(code(&o), 2);

    // A constant pollutant has no interquartile range to standardize by.
    let o = casecross(&[
        "analyze", "--input", p(&input), "--column", "flat", "--events", p(&events), "--out", p(&out),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_is_reproducible_and_records_a_drawn_seed() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&casecross(&["synth", "--seed", "5", "--out", p(&a)])), 0);
    assert_eq!(code(&casecross(&["synth", "--seed", "5", "--out", p(&b)])), 0);
    for f in ["series.csv", "events.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    assert_eq!(code(&casecross(&["synth", "--out", p(&c)])), 0);
    let manifest = fs::read_to_string(c.join("manifest.txt")).unwrap();
    let seed = manifest
        .lines()
        .find_map(|l| l.strip_prefix("seed = "))
        .expect("drawn seed is recorded");
    let d = dir.path().join("d");
    assert_eq!(code(&casecross(&["synth", "--seed", seed, "--out", p(&d)])), 0);
    assert_eq!(fs::read(c.join("events.csv")).unwrap(), fs::read(d.join("events.csv")).unwrap());
}
