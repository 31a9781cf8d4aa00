use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_aprank");

fn aprank(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

const E1_QUARTIC: &str = r#"{"n": 3, "d": 4, "coeffs": [{"alpha": [4, 0, 0], "value": 1.0}]}"#;

#[test]
fn eval_and_hs_norm_of_a_power() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("q.json"), E1_QUARTIC).unwrap();
    let o = aprank(dir.path(), &["eval", "-i", "q.json", "-x", "1,0,0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).parse::<f64>().unwrap(), 1.0);
    let o = aprank(dir.path(), &["norm", "-i", "q.json", "--kind", "hs"]);
    assert!((stdout(&o).parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn decompose_then_measure_residual() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let gen = ["generate", "--m", "5", "--n", "3", "--two-d", "4", "--epsilon", "0.3", "-o", "f.json", "--seed", "3"];
    assert!(aprank(p, &gen).status.success());
    let o = aprank(p, &["decompose", "-i", "f.json", "-o", "d.json", "--epsilon", "0.3", "--r", "4", "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("d.json.report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    assert_eq!(report["seed"], 4);
    assert!(report["outputs"]["rank"].as_u64().unwrap() as f64 <= report["outputs"]["loop_bound"].as_f64().unwrap());

    let o = aprank(p, &["norm", "-i", "f.json", "--minus", "d.json", "--kind", "l4", "--seed", "1", "--report", "n.json"]);
    assert!(o.status.success());
    assert!(stdout(&o).parse::<f64>().unwrap() < 0.3);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(aprank(dir.path(), &["decompose", "--bogus"]).status.code(), Some(1));
    assert_eq!(aprank(dir.path(), &["eval", "-i", "missing.json", "-x", "1"]).status.code(), Some(1));
    assert_eq!(aprank(dir.path(), &["--version"]).status.code(), Some(0));
    std::fs::write(dir.path().join("q.json"), E1_QUARTIC).unwrap();
    let o = aprank(dir.path(), &["eval", "-i", "q.json", "-x", "1,0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(BIN)
        .current_dir(dir.path())
        .env("APRANK_THREADS", "lots")
        .args(["eval", "-i", "q.json", "-x", "1,0,0"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn contract_failure_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("t.json"),
        r#"{"n": 2, "d": 2, "coeffs": [{"alpha": [2, 0], "value": 5.0}, {"alpha": [0, 2], "value": -5.0}]}"#,
    )
    .unwrap();
    let args = [
        "decompose", "-i", "t.json", "--method", "fw", "--nuclear", "0.01", "--epsilon", "0.5", "--seed", "0",
        "--trace", "trace.csv", "--report", "r.json",
    ];
    let o = aprank(p, &args);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "contract-failure");
    assert!(std::fs::read_to_string(p.join("trace.csv")).unwrap().starts_with("k,delta"));
}

#[test]
fn bench_rejects_oversized_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("b.json"),
        r#"{"method": "maurey", "epsilon": 0.5, "specs": [
            {"m": 3, "n": 2, "two_d": 4, "epsilon": 0.3, "seed": 1},
            {"m": 14, "n": 12, "two_d": 10, "epsilon": 0.3}]}"#,
    )
    .unwrap();
    let o = aprank(p, &["bench", "--config", "b.json", "-o", "b.csv", "--seed", "2"]);
    assert!(o.status.success());
    let mut rows = csv::Reader::from_path(p.join("b.csv")).unwrap();
    let status: Vec<String> = rows.records().map(|r| r.unwrap()[7].to_string()).collect();
    assert_eq!(status, ["ok", "rejected"]);
}
