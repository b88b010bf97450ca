use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aeromob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeromob")).args(args).output().expect("spawn aeromob")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_writes_every_output_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = aeromob(&["run", "--scenario", "pci_confusion", "--out", p(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.json", "events.csv", "trace.csv", "uav_trace.csv", "cells.csv", "nrt_stats.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let events = fs::read_to_string(a.join("events.csv")).unwrap();
    assert!(events.contains("FailureConfusion"));
}

#[test]
fn mitigation_and_seed_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let o = aeromob(&[
        "run",
        "--scenario",
        "pci_confusion",
        "--mitigations",
        "always_resolve_ecgi",
        "--seed",
        "9",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["mitigations"]["always_resolve_ecgi"], true);
    assert!(!fs::read_to_string(dir.path().join("events.csv")).unwrap().contains("FailureConfusion"));
}

#[test]
fn validation_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, aeromob::scenarios::COLLISION.replacen('{', "{\"extra\": true,", 1)).unwrap();
    let negative_dt = dir.path().join("dt.json");
    fs::write(&negative_dt, aeromob::scenarios::COLLISION.replacen('{', "{\"dt_s\": -1,", 1)).unwrap();
    let out = dir.path().join("out");
    for scenario in [p(&bad_json), p(&unknown), p(&negative_dt), "no-such-scenario"] {
        let o = aeromob(&["run", "--scenario", scenario, "--out", p(&out)]);
        assert_eq!(code(&o), 2, "{scenario}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = aeromob(&["run", "--scenario", "collision", "--mitigations", "teleport", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    let o = aeromob(&["sweep", "--scenario", "reference", "--altitudes", "30,-5", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("taken");
    fs::write(&file, "").unwrap();
    let o = aeromob(&["run", "--scenario", "collision", "--out", p(&file)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn analyze_reads_an_exported_trace() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    assert_eq!(code(&aeromob(&["run", "--scenario", "far_cell", "--out", p(&run_dir)])), 0);
    let out = dir.path().join("analysis");
    let o = aeromob(&[
        "analyze",
        "--trace",
        p(&run_dir.join("uav_trace.csv")),
        "--cells",
        p(&run_dir.join("cells.csv")),
        "--events",
        p(&run_dir.join("events.csv")),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let nth = fs::read_to_string(out.join("nth_closest.csv")).unwrap();
    assert!(nth.starts_with("bin,n,fraction"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ho_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["per_kind"]["UAV"]["failures"]["FailureBlockListed"], 2);

    // malformed and missing inputs
    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "track,timestamp_s,x_m,y_m,z_m,cells\n1,0,0,0,30,99:-70\n").unwrap();
    let o = aeromob(&["analyze", "--trace", p(&broken), "--cells", p(&run_dir.join("cells.csv")), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = aeromob(&["analyze", "--trace", p(&dir.path().join("nope.csv")), "--cells", p(&broken), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_writes_the_plot_tables() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("short.json");
    let mut cfg = aeromob::scenarios::load("reference").unwrap();
    cfg.duration_s = 60.0;
    fs::write(&scenario, cfg.to_json()).unwrap();
    let out = dir.path().join("report");
    let o = aeromob(&["report", "--scenario", p(&scenario), "--altitudes", "30,120", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let nth = fs::read_to_string(out.join("nth_closest.csv")).unwrap();
    // header + 5 buckets per altitude
    assert_eq!(nth.lines().count(), 11);
    let rates = fs::read_to_string(out.join("changes_per_min.csv")).unwrap();
    assert_eq!(rates.lines().count(), 3);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ho_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
    assert!(out.join("nrt_stats.csv").exists());
}

#[test]
fn plan_pci_output_runs_without_the_collision_drop() {
    let dir = tempfile::tempdir().unwrap();
    let planned = dir.path().join("planned.json");
    let o = aeromob(&["plan-pci", "--scenario", "collision", "--out", p(&planned)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("1 colliding pairs before, 0 after"), "{text}");
    let run_dir = dir.path().join("run");
    assert_eq!(code(&aeromob(&["run", "--scenario", p(&planned), "--out", p(&run_dir)])), 0);
    assert!(!fs::read_to_string(run_dir.join("events.csv")).unwrap().contains("RLF"));
}
