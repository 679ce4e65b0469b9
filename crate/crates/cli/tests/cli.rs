use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cfx(args: &[&str], seed: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cfx"));
    c.args(args).env_remove("TOOL_SEED");
    if let Some(s) = seed {
        c.env("TOOL_SEED", s);
    }
    c.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SEEDED: &str = r#"{"dimension": 5, "seed": 1, "norm1": "linf", "attack": "cf-nondiff", "trials": 4}"#;

#[test]
fn demo_prints_worked_examples() {
    let out = cfx(&["demo"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("x_CF = (2, 1)"));
    assert!(text.contains("x_RCF = (1.333333333333, 1.666666666667)"));
    assert!(text.contains("(1, -0.5, 1.5): kept"));
}

#[test]
fn extract_writes_canonical_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SEEDED);
    let out = dir.path().join("r.json");
    let ledger = dir.path().join("l.jsonl");
    let args = ["extract", "--config", &cfg, "--out", out.to_str().unwrap(), "--ledger", ledger.to_str().unwrap()];
    assert!(cfx(&args, None).status.success());
    let first = fs::read_to_string(&out).unwrap();
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["budget"]["expected"]["cf"], 6);
    assert_eq!(fs::read_to_string(&ledger).unwrap().lines().count(), 7);
    assert!(cfx(&args, None).status.success());
    assert_eq!(first, fs::read_to_string(&out).unwrap());
}

#[test]
fn seed_variable_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SEEDED);
    let run = |seed| {
        let out = cfx(&["extract", "--config", &cfg], seed);
        assert!(out.status.success());
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    assert_eq!(run(None)["seed"], 1);
    let other = run(Some("99"));
    assert_eq!(other["seed"], 99);
    assert_ne!(run(None)["trials"][0]["hidden"], other["trials"][0]["hidden"]);
    assert_eq!(cfx(&["extract", "--config", &cfg], Some("x")).status.code(), Some(2));
}

#[test]
fn regions_from_ledger_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"dimension": 2, "model": {"a": [2, -1], "b": 3}, "norm1": "linf", "attack": "cf-nondiff",
            "raster": {"lo": [-5, -5], "hi": [5, 5], "resolution": 30}, "samples": 200}"#,
    );
    let ledger = dir.path().join("l.jsonl");
    assert!(cfx(&["extract", "--config", &cfg, "--ledger", ledger.to_str().unwrap()], None).status.success());
    let csv = dir.path().join("out.csv");
    let out = cfx(&["regions", "--config", &cfg, "--ledger", ledger.to_str().unwrap(), "--raster", csv.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["sampler"]["violations"], 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 900);
}

#[test]
fn raster_subcommand_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"dimension": 2, "seed": 4, "norm1": "l2", "attack": "cf-diff", "raster": {"lo": [-3, -3], "hi": [3, 3], "resolution": 20}}"#,
    );
    let csv = dir.path().join("g.csv");
    assert!(cfx(&["raster", "--config", &cfg, "--out", csv.to_str().unwrap()], None).status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 401);
}

#[test]
fn invalid_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"dimension": 2, "norm1": "l1", "attack": "cf-diff"}"#);
    let out = cfx(&["extract", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
