//! End-to-end checks of the binary: bundled manifests run clean, reports
//! are deterministic, and malformed input produces the right exit codes.

use std::path::Path;
use std::process::Command;

fn tetrad() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tetrad"))
}

fn run_manifest(path: &Path, out: &Path) -> std::process::Output {
    tetrad()
        .arg(path)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn emit_examples_writes_six_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let status = tetrad()
        .arg("--emit-examples")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    assert!(names[0].starts_with("01-") && names[5].starts_with("06-"));
}

#[test]
fn every_bundled_manifest_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    tetrad()
        .arg("--emit-examples")
        .arg(dir.path())
        .status()
        .unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let out = dir.path().join("report.json");
        let result = run_manifest(&path, &out);
        assert!(
            result.status.success(),
            "manifest {} failed: {}",
            path.display(),
            String::from_utf8_lossy(&result.stderr)
        );
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
        for task in report["tasks"].as_array().unwrap() {
            assert_eq!(task["status"], "ok", "task failed in {}", path.display());
        }
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    tetrad()
        .arg("--emit-examples")
        .arg(dir.path())
        .status()
        .unwrap();
    for name in ["03-engel.json", "06-elliptic-family.json"] {
        let manifest = dir.path().join(name);
        let out1 = dir.path().join("a.json");
        let out2 = dir.path().join("b.json");
        assert!(run_manifest(&manifest, &out1).status.success());
        assert!(run_manifest(&manifest, &out2).status.success());
        let a = std::fs::read(&out1).unwrap();
        let b = std::fs::read(&out2).unwrap();
        assert_eq!(a, b, "report for {} is not deterministic", name);
    }
}

#[test]
fn malformed_expression_exits_two_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.json");
    std::fs::write(
        &manifest,
        r#"{
  "schema": 1,
  "chart": { "dim": 4, "vars": ["x1", "x2", "x3", "x4"] },
  "objects": {
    "v": { "kind": "vector", "components": ["1", "x2 +", "0", "0"] }
  },
  "grid": { "lattice": { "min": [0,0,0,0], "max": [1,1,1,1], "counts": [2,2,2,2] }, "random": 0, "seed": 1 },
  "tasks": []
}"#,
    )
    .unwrap();
    let out = tetrad().arg(&manifest).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("byte"), "stderr must carry a byte offset: {}", err);
}

#[test]
fn unknown_manifest_field_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("extra.json");
    std::fs::write(
        &manifest,
        r#"{
  "schema": 1,
  "chart": { "dim": 4, "vars": ["x1", "x2", "x3", "x4"] },
  "objects": {},
  "grid": { "lattice": { "min": [0,0,0,0], "max": [1,1,1,1], "counts": [2,2,2,2] }, "random": 0, "seed": 1 },
  "tasks": [],
  "surprise": true
}"#,
    )
    .unwrap();
    let out = tetrad().arg(&manifest).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_variable_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("badvar.json");
    std::fs::write(
        &manifest,
        r#"{
  "schema": 1,
  "chart": { "dim": 3, "vars": ["x1", "x2", "x3"] },
  "objects": {
    "v": { "kind": "vector", "components": ["x4", "0", "0"] }
  },
  "grid": { "lattice": { "min": [0,0,0], "max": [1,1,1], "counts": [2,2,2] }, "random": 0, "seed": 1 },
  "tasks": []
}"#,
    )
    .unwrap();
    let out = tetrad().arg(&manifest).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x4"), "stderr must name the variable: {}", err);
}

#[test]
fn missing_object_marks_task_error_and_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("missing.json");
    std::fs::write(
        &manifest,
        r#"{
  "schema": 1,
  "chart": { "dim": 4, "vars": ["x1", "x2", "x3", "x4"] },
  "objects": {
    "pi": { "kind": "distribution", "spans": [["0","0","1","0"],["0","0","0","1"]] }
  },
  "grid": { "lattice": { "min": [0,0,0,0], "max": [1,1,1,1], "counts": [2,2,2,2] }, "random": 0, "seed": 1 },
  "tasks": [
    { "cmd": "classify-dist", "dist": "pi" },
    { "cmd": "classify-dist", "dist": "ghost" }
  ]
}"#,
    )
    .unwrap();
    let out_path = dir.path().join("report.json");
    let out = run_manifest(&manifest, &out_path);
    assert_eq!(out.status.code(), Some(3));
    // the report is still emitted, with the first task completed
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    let tasks = report["tasks"].as_array().unwrap();
    assert_eq!(tasks[0]["status"], "ok");
    assert_eq!(tasks[1]["status"], "error");
}

#[test]
fn grid_and_seed_overrides_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    tetrad()
        .arg("--emit-examples")
        .arg(dir.path())
        .status()
        .unwrap();
    let manifest = dir.path().join("01-integrable.json");
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    assert!(tetrad()
        .arg(&manifest)
        .arg("--out")
        .arg(&out1)
        .arg("--grid")
        .arg("2x2x2x2")
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out1).unwrap()).unwrap();
    assert_eq!(report["grid_points"], 16 + 16);
    assert!(tetrad()
        .arg(&manifest)
        .arg("--out")
        .arg(&out2)
        .arg("--seed")
        .arg("7")
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out2).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
}

#[test]
fn tolerance_override_accepts_known_keys_only() {
    let dir = tempfile::tempdir().unwrap();
    tetrad()
        .arg("--emit-examples")
        .arg(dir.path())
        .status()
        .unwrap();
    let manifest = dir.path().join("01-integrable.json");
    let ok = tetrad()
        .arg(&manifest)
        .arg("--tol")
        .arg("rank_rel=1e-7")
        .arg("--out")
        .arg(dir.path().join("c.json"))
        .status()
        .unwrap();
    assert!(ok.success());
    let bad = tetrad()
        .arg(&manifest)
        .arg("--tol")
        .arg("nonsense=1")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn procomplex_check_task_runs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("pro.json");
    // block structure with an x1-dependent complex structure on (d3, d4)
    std::fs::write(
        &manifest,
        r#"{
  "schema": 1,
  "chart": { "dim": 4, "vars": ["x1", "x2", "x3", "x4"] },
  "objects": {
    "j": { "kind": "endo", "rows": [
      ["0", "-1", "0", "0"],
      ["1", "0", "0", "0"],
      ["0", "0", "sin(x1)", "1+sin(x1)^2"],
      ["0", "0", "-1", "-sin(x1)"]
    ] }
  },
  "grid": { "lattice": { "min": [-1,-1,-1,-1], "max": [1,1,1,1], "counts": [3,3,3,3] }, "random": 8, "seed": 42 },
  "tasks": [ { "cmd": "procomplex-check", "acs": "j", "t_axis": 1 } ]
}"#,
    )
    .unwrap();
    let out_path = dir.path().join("report.json");
    let out = run_manifest(&manifest, &out_path);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    let task = &report["tasks"][0];
    assert_eq!(task["status"], "ok");
    assert_eq!(task["data"]["rank_ok"], true);
    let res: f64 = task["data"]["anticommutation_residual"]
        .as_f64()
        .unwrap();
    assert!(res <= 1e-9);
}

#[test]
fn swap_labels_flag_flips_orientation() {
    let dir = tempfile::tempdir().unwrap();
    tetrad()
        .arg("--emit-examples")
        .arg(dir.path())
        .status()
        .unwrap();
    let manifest = dir.path().join("03-engel.json");
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    assert!(run_manifest(&manifest, &out1).status.success());
    assert!(tetrad()
        .arg(&manifest)
        .arg("--out")
        .arg(&out2)
        .arg("--swap-ut-labels")
        .status()
        .unwrap()
        .success());
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(&out1).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(&out2).unwrap()).unwrap();
    let utxi_a = a["tasks"].as_array().unwrap().iter().find(|t| t["cmd"] == "utxi").unwrap();
    let utxi_b = b["tasks"].as_array().unwrap().iter().find(|t| t["cmd"] == "utxi").unwrap();
    assert_eq!(utxi_a["data"]["labels_swapped"], false);
    assert_eq!(utxi_b["data"]["labels_swapped"], true);
    let t_a = utxi_a["data"]["per_point"][0]["t_orientation"].as_i64().unwrap();
    let t_b = utxi_b["data"]["per_point"][0]["t_orientation"].as_i64().unwrap();
    assert_eq!(t_a, -t_b);
}

#[test]
fn numeric_bracket_mode_agrees_with_symbolic() {
    let dir = tempfile::tempdir().unwrap();
    tetrad()
        .arg("--emit-examples")
        .arg(dir.path())
        .status()
        .unwrap();
    let manifest = dir.path().join("06-elliptic-family.json");
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    assert!(run_manifest(&manifest, &out1).status.success());
    assert!(tetrad()
        .arg(&manifest)
        .arg("--out")
        .arg(&out2)
        .arg("--numeric-bracket")
        .status()
        .unwrap()
        .success());
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(&out1).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(&out2).unwrap()).unwrap();
    let fa = a["tasks"].as_array().unwrap().iter().find(|t| t["cmd"] == "ma-frame").unwrap();
    let fb = b["tasks"].as_array().unwrap().iter().find(|t| t["cmd"] == "ma-frame").unwrap();
    assert_eq!(fa["data"]["bracket_mode"], "symbolic");
    assert_eq!(fb["data"]["bracket_mode"], "numeric-fd");
    // Q1 depends on the bracket; the two modes must agree to fd accuracy
    let qa = fa["data"]["per_point"][0]["q1"].as_array().unwrap();
    let qb = fb["data"]["per_point"][0]["q1"].as_array().unwrap();
    for (x, y) in qa.iter().zip(qb) {
        let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
        assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
    }
}
