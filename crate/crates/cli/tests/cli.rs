use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pnc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn every_counterexample_reproduces() {
    for name in [
        "cbr-service",
        "cbr-strict",
        "cbr-output",
        "cbr-backlog",
        "sp-service",
        "concat-delay",
    ] {
        let out = pnc(&["counterexample", name, "--no-timestamp"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(json(&out)["reproduced"], true);
    }
}

#[test]
fn cbr_service_report() {
    let v = json(&pnc(&["counterexample", "cbr-service"]));
    let w = &v["faulty"]["violation"];
    assert_eq!(w["kind"], "service");
    assert_eq!(w["t"]["exact"], "1");
    assert_eq!(w["required"]["exact"], "1");
    assert_eq!(w["provided"]["exact"], "0");
    assert!(v["generated_at"].is_string());
}

#[test]
fn failed_reproduction_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // with l^Ml as large as the packet the fluid SP curve happens to hold
    let cfg = write(dir.path(), "cfg.json", r#"{"l_max_lo": 2}"#);
    let out = pnc(&["counterexample", "sp-service", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["reproduced"], false);
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(pnc(&["counterexample", "nope"]).status.code(), Some(2));
    assert_eq!(pnc(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"rho": "abc"}"#);
    assert_eq!(pnc(&["bounds", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(dir.path(), "unstable.json", r#"{"rho": 3}"#);
    assert_eq!(pnc(&["verify", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(pnc(&["bounds", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn bounds_defaults_and_tandem() {
    let v = json(&pnc(&["bounds", "--no-timestamp"]));
    assert_eq!(v["corrected"]["delay_bound"]["exact"], "4");
    assert_eq!(v["packetizer"]["delay_bound"]["exact"], "2");
    assert_eq!(v["faulty"]["delay_bound"]["exact"], "2");
    assert_eq!(v["corrected"]["backlog_bound"]["exact"], "10/3");
    let v = json(&pnc(&["bounds", "--setting", "tandem"]));
    assert_eq!(v["corrected"]["delay_bound"]["exact"], "3");
    assert!(v["packetizer"].is_null());
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.json", r#"{"rho": 0}"#);
    let v = json(&pnc(&["bounds", "--config", &cfg]));
    assert_eq!(v["corrected"]["backlog_bound"]["exact"], "2");
}

#[test]
fn verify_campaigns() {
    let out = pnc(&["verify", "--seeds", "10", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["runs"].as_array().unwrap().len(), 10);
    let out = pnc(&["verify", "--setting", "sp", "--seeds", "20", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["runs"][0]["seed"], 3);
    assert!(v["naive_strict_failures"].as_u64().unwrap() >= 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "empty.json",
        r#"{"max_packets": 0, "seeds": 2}"#,
    );
    assert_eq!(pnc(&["verify", "--config", &cfg]).status.code(), Some(0));
}

#[test]
fn reports_are_deterministic_without_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = pnc(&[
            "verify",
            "--setting",
            "sp",
            "--seeds",
            "5",
            "--no-timestamp",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(
        fs::read(a.join("verify.json")).unwrap(),
        fs::read(b.join("verify.json")).unwrap()
    );
}

#[test]
fn simulate_periodic_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(
        dir.path(),
        "trace.csv",
        "flow_id,priority,arrival,length\nf0,0,0,2\nf0,0,3/2,1\nf0,0,3,1\nf0,0,9/2,1\nf0,0,6,1\n",
    );
    let out_dir = dir.path().join("out");
    let out = pnc(&[
        "simulate",
        &trace,
        "--rate",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("departures.csv")).unwrap();
    let departures: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap())
        .collect();
    assert_eq!(departures, ["2", "3", "4", "11/2", "7"]);
    assert!(csv.starts_with("flow_id,index,arrival,departure,delay\n"));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["max_backlog"]["exact"], "3");
    assert_eq!(summary["max_delay"]["exact"], "2");
}

#[test]
fn simulate_tandem_and_priority() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(
        dir.path(),
        "t.csv",
        "flow_id,priority,arrival,length\nlo,1,0,10\nhi,0,1,2\n",
    );
    let out_dir = dir.path().join("sp");
    let out = pnc(&[
        "simulate",
        &trace,
        "--discipline",
        "sp",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["max_delay"]["exact"], "11");
    let out_dir = dir.path().join("tandem");
    let single = write(
        dir.path(),
        "one.csv",
        "flow_id,priority,arrival,length\nf,0,0,1\n",
    );
    let out = pnc(&[
        "simulate",
        &single,
        "--rates",
        "1,1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["max_delay"]["exact"], "2");
}

#[test]
fn simulate_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "flow_id,priority,arrival,length\n");
    let out_dir = dir.path().join("empty");
    let out = pnc(&["simulate", &empty, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("departures.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);

    let bad = write(
        dir.path(),
        "bad.csv",
        "flow_id,priority,arrival,length\nf,0,0,1\nf,0,1,0\n",
    );
    let out = pnc(&["simulate", &bad, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = pnc(&[
        "simulate",
        &empty,
        "--rate",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        pnc(&["simulate", "/nonexistent/trace.csv"]).status.code(),
        Some(2)
    );
}
