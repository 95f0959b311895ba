use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpiseq"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("sim");
    let mut args = vec!["simulate", "--kinds", "mixed", "--c", "4", "--n", "200", "--seed", "7", "--out-dir", s(&out)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["analyze", "--alpha", "x"])), 1);
    assert_eq!(code(&run(&["analyze"])), 1);
}

#[test]
fn simulate_writes_data_schema_and_truth() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), &[]);
    let csv = std::fs::read_to_string(sim.join("data.csv")).unwrap();
    assert!(csv.starts_with("# "));
    assert!(csv.contains("# config_sha256: "));
    assert_eq!(body(&sim.join("data.csv")).lines().count(), 201);

    let schema: Value = serde_json::from_str(&std::fs::read_to_string(sim.join("schema.json")).unwrap()).unwrap();
    assert_eq!(schema["columns"].as_array().unwrap().len(), 5);
    assert_eq!(schema["metadata"]["tool"], "cpiseq");
    let truth: Value = serde_json::from_str(&std::fs::read_to_string(sim.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["truth"]["relevant"], serde_json::json!([false, false, true, true]));
    assert_eq!(truth["metadata"]["seed"], 7);
}

#[test]
fn simulate_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let sa = simulate(a.path(), &[]);
    let sb = simulate(b.path(), &[]);
    assert_eq!(body(&sa.join("data.csv")), body(&sb.join("data.csv")));
}

#[test]
fn analyze_outputs_cpi_rows_with_metadata() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), &[]);
    let out = dir.path().join("res.json");
    let csv = dir.path().join("res.csv");
    let o = run(&[
        "analyze", "--data", s(&sim.join("data.csv")), "--schema", s(&sim.join("schema.json")),
        "--target", "Y", "--learner", "rf(trees=20)", "--out", s(&out), "--csv", s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let meta = &doc["metadata"];
    for key in ["tool", "version", "command", "seed", "config_sha256", "config", "method_params"] {
        assert!(!meta[key].is_null(), "missing {key}");
    }
    assert_eq!(meta["method_params"]["loss"], "mse");
    let rows = doc["results"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let p = r["p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(r["p_adjusted"].as_f64().unwrap() >= p);
    }
    let table = body(&csv);
    assert!(table.starts_with("group,cpi,se,t,p,ci_lower,p_adjusted,n_test"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn analyze_groups_and_config_merge() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), &[]);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "data": sim.join("data.csv"),
            "schema": sim.join("schema.json"),
            "target": "Y",
            "learner": "linear",
            "method": "loco",
            "groups": ["pair=X1,X2", "X3"],
        })
        .to_string(),
    )
    .unwrap();
    let o = run(&["analyze", "--config", s(&cfg), "--method", "pfi"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["method"], "pfi");
    let groups: Vec<&str> = doc["results"].as_array().unwrap().iter().map(|r| r["group"].as_str().unwrap()).collect();
    assert_eq!(groups, ["pair", "X3"]);
    assert_eq!(doc["metadata"]["config"]["learner"], "linear");
}

#[test]
fn config_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    let o = run(&["analyze", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let sim = simulate(dir.path(), &[]);
    let (data, schema) = (sim.join("data.csv"), sim.join("schema.json"));
    let base = ["analyze", "--data", s(&data), "--schema", s(&schema), "--target", "Y"];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        code(&run(&a))
    };
    assert_eq!(with(&["--learner", "svm"]), 1);
    assert_eq!(with(&["--method", "shap"]), 1);
    assert_eq!(with(&["--train-fraction", "1.5"]), 1);
    assert_eq!(with(&["--learner", "logistic"]), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), &[]);
    let o = run(&["analyze", "--data", "missing.csv", "--schema", s(&sim.join("schema.json")), "--target", "Y"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
    let o = run(&["analyze", "--data", s(&sim.join("data.csv")), "--schema", s(&sim.join("schema.json")), "--target", "Z"]);
    assert_eq!(code(&o), 2);

    let bad = dir.path().join("bad.csv");
    let mut text = std::fs::read_to_string(sim.join("data.csv")).unwrap();
    let last = text.lines().last().unwrap().to_string();
    let mut cells: Vec<&str> = last.split(',').collect();
    cells[1] = "notanumber";
    text.push_str(&cells.join(","));
    text.push('\n');
    std::fs::write(&bad, text).unwrap();
    let o = run(&["analyze", "--data", s(&bad), "--schema", s(&sim.join("schema.json")), "--target", "Y"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("notanumber"));
}

#[test]
fn constant_target_exits_three() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    let schema = dir.path().join("s.json");
    let mut csv = String::from("x,y\n");
    for i in 0..60 {
        csv.push_str(&format!("{},1\n", i as f64 / 7.0));
    }
    std::fs::write(&data, csv).unwrap();
    std::fs::write(&schema, r#"[{"name":"x","kind":"continuous"},{"name":"y","kind":"continuous"}]"#).unwrap();
    let o = run(&["analyze", "--data", s(&data), "--schema", s(&schema), "--target", "y", "--learner", "linear", "--method", "pfi"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn knockoff_diagnostics_reports_both_samplers() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), &[]);
    for sampler in ["sequential", "gaussian"] {
        let o = run(&[
            "knockoff-diagnostics", "--data", s(&sim.join("data.csv")), "--schema", s(&sim.join("schema.json")),
            "--target", "Y", "--sampler", sampler, "--threshold", "10",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
        let d = &doc["diagnostics"];
        assert_eq!(d["n_rows"], 200);
        assert!(d["flagged"].as_array().unwrap().is_empty());
        assert!(d["max_mean_diff"].as_f64().unwrap().is_finite());
    }
}

fn bench_args<'a>(out: &'a Path, reps: &'a str, workers: &'a str) -> Vec<&'a str> {
    vec![
        "benchmark", "--kinds", "mixed", "--c", "4", "--n-list", "200,240", "--replicates", reps,
        "--learner", "rf(trees=15)", "--methods", "cpi-seq,pfi", "--seed", "11",
        "--workers", workers, "--out", s(out),
    ]
}

#[test]
fn benchmark_is_worker_invariant_and_resumable() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one.csv");
    let many = dir.path().join("many.csv");
    let resumed = dir.path().join("resumed.csv");
    assert_eq!(code(&run(&bench_args(&one, "2", "1"))), 0);
    assert_eq!(code(&run(&bench_args(&many, "2", "8"))), 0);
    assert_eq!(body(&one), body(&many));
    let raw_one = PathBuf::from(format!("{}.raw.csv", one.display()));
    let raw_many = PathBuf::from(format!("{}.raw.csv", many.display()));
    assert_eq!(body(&raw_one), body(&raw_many));

    assert_eq!(code(&run(&bench_args(&resumed, "1", "1"))), 0);
    assert_eq!(code(&run(&bench_args(&resumed, "2", "1"))), 0);
    assert_eq!(body(&resumed), body(&one));

    let summary = body(&one);
    assert!(summary.contains("dag,200,cpi-seq,*,auc_mean,"));
    assert!(summary.contains("dag,240,pfi,X3,top_k_rate,"));
    assert!(!summary.contains("pfi,X3,rejection_rate"));

    // a changed model setting must not silently mix with stored rows
    let mut other = bench_args(&resumed, "2", "1");
    other[10] = "rf(trees=16)";
    assert_eq!(code(&run(&other)), 1);
}

/// Serves `payload` once per connection for `conns` connections.
fn serve(payload: Vec<u8>, status: &'static str, conns: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().take(conns) {
            let mut stream = stream.unwrap();
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            let head = format!("HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", payload.len());
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(&payload).unwrap();
        }
    });
    format!("http://{addr}/file.csv")
}

#[test]
fn fetch_verifies_checksum() {
    let payload: Vec<u8> = (0..200_000u32).map(|i| (i % 251) as u8).collect();
    let digest = hex::encode(Sha256::digest(&payload));
    let url = serve(payload.clone(), "200 OK", 2);
    let dir = TempDir::new().unwrap();

    let good = dir.path().join("sub/good.bin");
    let o = run(&["fetch", "--url", &url, "--out", s(&good), "--sha256", &digest.to_uppercase()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&good).unwrap(), payload);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["sha256"], digest);
    assert_eq!(doc["bytes"], 200_000);

    let bad = dir.path().join("bad.bin");
    let o = run(&["fetch", "--url", &url, "--out", s(&bad), "--sha256", &"0".repeat(64)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum mismatch"));
    assert!(!bad.exists());
    assert!(!dir.path().join("bad.bin.part").exists());
}

#[test]
fn fetch_http_error_exits_two() {
    let url = serve(b"nope".to_vec(), "404 Not Found", 1);
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let o = run(&["fetch", "--url", &url, "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert_eq!(code(&run(&["fetch", "--url", &url, "--out", s(&out), "--sha256", "abc"])), 1);
}
