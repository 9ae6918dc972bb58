//! End-to-end tests of the binary: flag surface, report shapes, exit codes
//! and byte determinism.

use std::process::{Command, Output};

fn thinfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = thinfield(args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 output")
}

#[test]
fn gen_tree_emits_adjacency_document() {
    let text = stdout(&[
        "gen-tree",
        "--tree",
        r#"{"kind":"regular","root_children":3,"children":2,"depth":2}"#,
    ]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["n"], 10);
    assert_eq!(doc["parent"][0], serde_json::Value::Null);
    assert_eq!(doc["depth"][9], 2);
}

#[test]
fn peierls_bound_row() {
    let text = stdout(&["peierls", "--d-min", "2", "--d-max", "2", "--p", "0.999"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "p,d_min,d_max,bound,convergent");
    assert_eq!(lines[2], "999/1000,2,2,1/270,true");
    // Divergent density reports an empty bound cell.
    let text = stdout(&["peierls", "--d-min", "2", "--d-max", "2", "--p", "0.9"]);
    assert!(text.lines().nth(2).unwrap().ends_with(",,false"));
}

#[test]
fn cutsets_enumerate_record_count() {
    let text = stdout(&["cutsets", "enumerate", "--type", "0", "--max-n", "2"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 19);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["type"], 0);
    assert_eq!(first["n"], 0);
    assert_eq!(first["interior"], serde_json::json!([0]));
    assert_eq!(first["n_repl"], 1);
}

#[test]
fn cutsets_verify_passes() {
    let out = thinfield(&["cutsets", "verify", "--max-interior", "10", "--max-n", "3"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn selftest_small_budget() {
    let out = thinfield(&["selftest", "--budget", "small"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("first-layer-oracle: PASS"));
}

#[test]
fn relation_json_shape() {
    let text = stdout(&["relation", "--p", "0.5", "--radius", "1"]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let check = &doc["checks"][0];
    assert_eq!(check["R"], 1);
    assert_eq!(check["p"], "1/2");
    assert_eq!(check["lhs"], check["rhs"]);
    assert_eq!(check["rel_err"], 0.0);
}

#[test]
fn reports_are_byte_deterministic() {
    let args = [
        "sweep", "--p", "0.999", "--radius", "4,5", "--mode", "log", "--seed", "9",
    ];
    assert_eq!(stdout(&args), stdout(&args));
    // Parallel evaluation must not change bytes either.
    let parallel = stdout(&[
        "ratio",
        "--p-grid",
        "0.999,0.9995",
        "--radius",
        "2",
        "--mode",
        "log",
        "--jobs",
        "4",
    ]);
    let serial = stdout(&[
        "ratio",
        "--p-grid",
        "0.999,0.9995",
        "--radius",
        "2",
        "--mode",
        "log",
        "--jobs",
        "1",
    ]);
    assert_eq!(parallel, serial);
}

#[test]
fn config_file_fallback_and_flag_override() {
    let dir = std::env::temp_dir().join(format!("thinfield-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("run.json");
    std::fs::write(&config, r#"{"p": "0.5", "radius": [1], "mode": "exact"}"#).unwrap();
    let from_file = stdout(&["nu", "--config", config.to_str().unwrap()]);
    assert!(from_file.contains("1/2,1,0,1/2,1/2"));
    // An explicit flag overrides the file value.
    let overridden = stdout(&["nu", "--config", config.to_str().unwrap(), "--p", "0.2"]);
    assert!(overridden.contains("1/5,1,0,4/5,1/5"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_input_exits_two() {
    let out = thinfield(&["nu", "--p", "1.5", "--radius", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = thinfield(&["nu", "--radius", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = thinfield(&["sweep", "--p", "0.5", "--radius", "99"]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown flags are a usage error (clap exits 2).
    let out = thinfield(&["nu", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thin_reports_cluster_stats() {
    let text = stdout(&[
        "thin",
        "--p",
        "0.5",
        "--seed",
        "7",
        "--tree",
        r#"{"kind":"regular","root_children":3,"children":2,"depth":3}"#,
    ]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let before = doc["stats_before"]["occupied"].as_u64().unwrap();
    let after = doc["stats_after"]["occupied"].as_u64().unwrap();
    let removed = doc["removed_isolated"].as_u64().unwrap();
    assert_eq!(before - after, removed);
    // Identical seeds reproduce identical samples.
    let again = stdout(&[
        "thin",
        "--p",
        "0.5",
        "--seed",
        "7",
        "--tree",
        r#"{"kind":"regular","root_children":3,"children":2,"depth":3}"#,
    ]);
    assert_eq!(text, again);
}

#[test]
fn denom_rows_pass() {
    let text = stdout(&["denom", "--p", "0.7", "--radius", "2", "--which", "both"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "tree_id,p,R,case,proxy,c_p,pass");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].ends_with("true") && lines[3].ends_with("true"));
}
