use std::fs;
use std::process::{Command, Output};

fn nrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrs")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_star_flood_static() {
    let o = nrs(&["simulate", "--graph", "star:4", "--protocol", "flood:8", "--sim", "static", "--p", "0", "--seed", "1", "--no-timestamp"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("graph,Δ,n,T,p,"));
    assert_eq!(lines[1].split(',').nth(10), Some("1"));
}

#[test]
fn simulate_noisy_general_seed_range() {
    let o = nrs(&["simulate", "--graph", "path:8", "--protocol", "silent:4", "--sim", "general", "--p", "0.3", "--seeds", "1..100", "--no-timestamp"]);
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 100);
    let verified = rows.iter().filter(|r| r.ends_with(",1")).count();
    assert!(verified >= 99, "{verified} verified");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["simulate", "--graph", "dibip:4", "--protocol", "rr:4", "--sim", "static"][..],
        &["simulate", "--graph", "star:4", "--protocol", "flood:4", "--sim", "static", "--p", "1.5"],
        &["simulate", "--graph", "star:4", "--protocol", "flood:4", "--sim", "progress", "--oracle-mode"],
        &["simulate", "--graph", "star:4", "--protocol", "flood:4", "--sim", "static", "--const", "c9=1"],
        &["simulate", "--graph", "nope:4", "--protocol", "flood:4", "--sim", "static"],
        &["accept", "--criteria", "11"],
    ] {
        assert_eq!(nrs(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn timestamp_line_is_suppressible() {
    let base = ["simulate", "--graph", "cycle:5", "--protocol", "rr:4", "--sim", "progress", "--p", "0.2", "--seeds", "1..3"];
    let stamped = stdout(&nrs(&base));
    assert!(stamped.starts_with("# generated"));
    let mut args = base.to_vec();
    args.push("--no-timestamp");
    let a = stdout(&nrs(&args));
    let b = stdout(&nrs(&args));
    assert_eq!(a, b);
    assert_eq!(stamped.split_once('\n').unwrap().1, a);
}

#[test]
fn transcript_dump_matches_the_jsonl_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.jsonl");
    let o = nrs(&[
        "simulate", "--graph", "star:3", "--protocol", "flood:2", "--sim", "general", "--p", "0", "--seed", "4",
        "--transcript", path.to_str().unwrap(), "--no-timestamp",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    // Three leaves each hear two payloads from the center.
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.starts_with("{\"node\":") && l.contains("\"round\":") && l.contains("\"payload\":")));
}

#[test]
fn experiment_sweep_writes_reports_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.ini");
    fs::write(
        &spec,
        "[experiment]\nname = overhead-sweep\ngraphs = star:4, path:6\nprotocol = flood:4\nsim = static\np = 0\nseeds = 1..2\n",
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    let o = nrs(&[
        "experiment", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--emit-gnuplot", "--no-timestamp",
        "--const", "c1=5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("r-summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().skip(1).all(|l| l.contains(",static,0,1..2,0,5,")));
    assert!(dir.path().join("r-summary.gp").exists());
    assert_eq!(fs::read_to_string(dir.path().join("r-runs-static.csv")).unwrap().lines().count(), 5);
}

#[test]
fn experiment_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("t.ini");
    fs::write(&spec, "[experiment]\nname = directed-bipartite\ndelta = 8\np = 0.5\nseeds = 1..4\n").unwrap();
    let o = nrs(&["experiment", spec.to_str().unwrap(), "--p", "0", "--seeds", "1..2", "--no-timestamp"]);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().skip(1).all(|l| l.starts_with("8,0,") && l.split(',').nth(3) == Some("8")));
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("x.ini");
    fs::write(&spec, "[experiment]\nname = teleport\n").unwrap();
    assert_eq!(nrs(&["experiment", spec.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(nrs(&["experiment", "/nonexistent/spec.ini"]).status.code(), Some(2));
}

#[test]
fn accept_verdicts_and_exit_codes() {
    let o = nrs(&["accept", "--criteria", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().next().unwrap().starts_with("criterion  5 PASS"));
    let o = nrs(&["accept", "--criteria", "1", "--const", "c1=0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("criterion  1 FAIL"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("criteria 1"));
    let o = nrs(&["accept", "--criteria", "1,5", "--p", "0"]);
    assert_eq!(o.status.code(), Some(0));
}
