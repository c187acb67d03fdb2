use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cloudhodge_cli::config::RunConfig;
use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudhodge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn sphere(m: usize) -> Value {
    json!({
        "schema_version": 1,
        "manifold": { "kind": "sphere", "n": 2, "radius": 1.0 },
        "m": m,
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn results(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("results.json")).unwrap()).unwrap()
}

#[test]
fn config_errors() {
    let mut empty = sphere(100);
    empty["sweep"] = json!({ "ms": [], "quantity": "tangent" });
    let err = RunConfig::from_json(&empty.to_string()).unwrap_err();
    assert!(format!("{err:#}").contains("sweep grid is empty"));

    let mut both = sphere(100);
    both["input"] = json!({ "path": "cloud.bin" });
    assert!(format!("{:#}", RunConfig::from_json(&both.to_string()).unwrap_err()).contains("not both"));

    let neither = json!({ "schema_version": 1 });
    assert!(RunConfig::from_json(&neither.to_string()).is_err());

    let mut version = sphere(100);
    version["schema_version"] = json!(7);
    assert!(format!("{:#}", RunConfig::from_json(&version.to_string()).unwrap_err()).contains("schema version"));

    let mut unknown = sphere(100);
    unknown["bandwidth"] = json!(0.1);
    assert!(RunConfig::from_json(&unknown.to_string()).is_err());

    let mut mismatched = sphere(100);
    mismatched["sweep"] = json!({ "ms": [100, 200], "ts": [0.1, 0.2, 0.3], "quantity": "tangent" });
    assert!(RunConfig::from_json(&mismatched.to_string()).is_err());
}

#[test]
fn empty_sweep_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sphere(100);
    cfg["sweep"] = json!({ "ms": [], "quantity": "tangent" });
    let path = write_config(dir.path(), "c.json", &cfg);
    let o = run(&[
        "sweep",
        "--config",
        &path,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep grid is empty"), "{}", stderr(&o));
}

#[test]
fn defaults_are_recorded_in_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &sphere(400));
    let out = dir.path().join("o");
    let o = run(&[
        "generate",
        "--config",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], json!(9));
    assert_eq!(resolved["eigen_count"], json!(10));
    assert_eq!(resolved["quad_order"], json!(2));
    assert!(resolved["eigen"]["tol"].is_number());
    assert!(out.join("cloud.bin").exists());
    assert!(out.join("timing.json").exists());
}

#[test]
fn identical_runs_give_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sphere(500);
    cfg["seed"] = json!(4);
    let path = write_config(dir.path(), "c.json", &cfg);
    for verb in ["tangents", "spectrum"] {
        let mut bytes = Vec::new();
        for run_id in 0..2 {
            let out = dir.path().join(format!("{verb}{run_id}"));
            let o = run(&[verb, "--config", &path, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", stderr(&o));
            bytes.push(fs::read(out.join("results.json")).unwrap());
        }
        assert_eq!(bytes[0], bytes[1], "{verb}");
    }
}

#[test]
fn spectrum_table_lists_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &sphere(800));
    let out = dir.path().join("o");
    let o = run(&["spectrum", "--config", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = results(&out);
    let oracle = r["degrees"][0]["oracle"].as_array().unwrap();
    // ℓ(ℓ+1) with multiplicity 2ℓ+1
    let want = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0, 12.0];
    for (o, w) in oracle.iter().zip(want) {
        assert_eq!(o.as_f64().unwrap(), w);
    }
    let table = fs::read_to_string(out.join("spectrum_k0.csv")).unwrap();
    assert!(table.starts_with("index,eigenvalue,residual,oracle"));
    assert_eq!(table.lines().count(), 11);
}

#[test]
fn export_then_ingest_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &sphere(300));
    let first = dir.path().join("a");
    assert!(run(&["generate", "--config", &path, "--out", first.to_str().unwrap()])
        .status
        .success());
    let ingest = json!({
        "schema_version": 1,
        "input": { "path": first.join("cloud.bin") },
    });
    let path2 = write_config(dir.path(), "d.json", &ingest);
    let second = dir.path().join("b");
    let o = run(&["generate", "--config", &path2, "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("cloud.bin")).unwrap(),
        fs::read(second.join("cloud.bin")).unwrap()
    );
}

#[test]
fn csv_with_nan_reports_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "1,0,0\n0,1,0\n0,NaN,1\n").unwrap();
    let cfg = json!({ "schema_version": 1, "input": { "path": csv, "intrinsic_dim": 2 } });
    let path = write_config(dir.path(), "c.json", &cfg);
    let o = run(&[
        "tangents",
        "--config",
        &path,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("row 2") && msg.contains("non-finite"), "{msg}");
}

#[test]
fn sweep_fits_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sphere(500);
    cfg["sweep"] = json!({ "ms": [500, 1000, 2000], "quantity": "tangent", "expected_slope": [-10.0, 10.0] });
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("ok");
    let o = run(&["sweep", "--config", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = results(&out);
    assert_eq!(r["points"].as_array().unwrap().len(), 3);
    assert!(r["fit"]["slope"].is_number());
    assert!(out.join("rates.json").exists());

    // an unattainable window fails the run
    cfg["sweep"]["expected_slope"] = json!([50.0, 60.0]);
    let path = write_config(dir.path(), "c2.json", &cfg);
    let o = run(&[
        "sweep",
        "--config",
        &path,
        "--out",
        dir.path().join("bad").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_point_sweep_has_no_fit() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sphere(500);
    cfg["sweep"] = json!({ "ms": [500], "quantity": "tangent" });
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("o");
    let o = run(&["sweep", "--config", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(results(&out)["fit"].is_null());
    assert!(stderr(&o).contains("no rate fit"));
}

#[test]
fn fixed_t_sweep_bypasses_the_scaling_rule() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sphere(600);
    cfg["sweep"] = json!({ "ms": [600], "ts": [0.05, 0.1, 0.2], "quantity": "density" });
    cfg["holdout"] = json!(50);
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("o");
    let o = run(&["sweep", "--config", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ts: Vec<f64> = results(&out)["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["t"].as_f64().unwrap())
        .collect();
    assert_eq!(ts, vec![0.05, 0.1, 0.2]);
}

#[test]
fn presets_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = run(&["check", "--preset", "degenerate-inputs", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("PASS criterion 12"), "{stdout}");
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("checks.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], json!(true));

    assert_eq!(run(&["spectrum", "--preset", "no-such-preset"]).status.code(), Some(2));
    // a preset bound to another verb is refused
    assert_eq!(run(&["spectrum", "--preset", "torus-ring"]).status.code(), Some(2));
    assert_eq!(run(&["check", "--only", "99"]).status.code(), Some(2));
    let listing = String::from_utf8_lossy(&run(&["presets"]).stdout).into_owned();
    assert!(listing.contains("sphere-spectrum") && listing.contains("gauge-ring"));
}

#[test]
fn curvature_writes_the_requested_tensors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &sphere(300));
    let out = dir.path().join("o");
    let o = run(&[
        "curvature",
        "--config",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--tensors",
        "r,w1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("tensors.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 300);
    let last = &lines[299];
    assert_eq!(last["index"], json!(299));
    assert_eq!(last["B"].as_array().unwrap().len(), 27);
    assert_eq!(last["H"].as_array().unwrap().len(), 3);
    assert_eq!(last["R"].as_array().unwrap().len(), 81);
    assert_eq!(last["W_1"].as_array().unwrap().len(), 9);
    assert!(last.get("W_2").is_none());

    let o = run(&[
        "curvature",
        "--config",
        &path,
        "--out",
        dir.path().join("x").to_str().unwrap(),
        "--tensors",
        "q",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
