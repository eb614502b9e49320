use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ncmaj(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncmaj"))
        .args(args)
        .current_dir(cwd)
        .env("NCMAJ_MEMO_DIR", cwd.join("memo"))
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, rows: &[&[f64]]) {
    let entries: Vec<Vec<[f64; 2]>> = rows.iter().map(|r| r.iter().map(|&x| [x, 0.0]).collect()).collect();
    let doc = serde_json::json!({ "order": rows.len(), "entries": entries, "hermitian": true });
    fs::write(dir.join(name), doc.to_string()).unwrap();
}

#[test]
fn majorize_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncmaj(&["check", "majorize", "--x", "3,3", "--y", "4,2"], dir.path());
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["verdict"], "Feasible");
    assert!(v["conventions-version"].as_str().unwrap().starts_with("ncmaj-1"));
    assert!(v["tolerances"]["hermitian"].is_number());

    let out = ncmaj(&["check", "majorize", "--x", "4,2", "--y", "3,3"], dir.path());
    assert_eq!(code(&out), 1);
    assert_eq!(json_of(&out)["certificate"]["kind"], "majorization");
}

#[test]
fn klyachko_sum_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncmaj(&["check", "klyachko-sum", "--l0", "2,2", "--li", "1,0", "--li", "3,0"], dir.path());
    assert_eq!(code(&out), 1);
    let v = json_of(&out);
    assert_eq!(v["verdict"], "Infeasible");
    assert_eq!(v["certificate"]["kind"], "inequality");
    assert_eq!(v["certificate"]["subsets"].as_array().unwrap().len(), 3);

    let out = ncmaj(&["check", "klyachko-dominated", "--l0", "4,1", "--li", "1,0", "--li", "3,0"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn ext_majorize_with_full_list_needs_equal_spectra() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "A.json", &[&[1.0, 0.0], &[0.0, 2.0]]);
    write(dir.path(), "B.json", &[&[1.0, 1.0], &[1.0, 1.0]]);
    write(dir.path(), "C.json", &[&[1.5, 0.5], &[0.5, 1.5]]);
    let out = ncmaj(&["check", "ext-majorize", "--list", "2:1", "A.json", "B.json"], dir.path());
    assert_eq!(code(&out), 1);
    let out = ncmaj(&["check", "ext-majorize", "--list", "2:1", "A.json", "C.json"], dir.path());
    assert_eq!(code(&out), 0);
    let out = ncmaj(&["check", "ext-submajorize", "--list", "1:1,1:1", "B.json", "C.json"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn block_and_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncmaj(&["check", "block", "--ranks", "2", "--spectrum", "4,2", "--target", "3,3"], dir.path());
    assert_eq!(code(&out), 1);
    let out = ncmaj(&["check", "block", "--ranks", "1,1", "--spectrum", "4,2", "--target", "3", "--target", "3"], dir.path());
    assert_eq!(code(&out), 0);
    let out = ncmaj(
        &["check", "block", "--ranks", "1,1", "--mode", "contractive", "--spectrum", "4,2", "--target", "3", "--target", "3"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let out = ncmaj(&["check", "partial-trace", "--d", "1", "--m", "3", "--spectrum", "1,-2,4", "--target", "3"], dir.path());
    assert_eq!(code(&out), 0);
    let out = ncmaj(&["check", "partial-trace", "--d", "1", "--m", "3", "--spectrum", "1,-2,4", "--target", "2"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ncmaj(&["check", "majorize", "--x", "1"], dir.path())), 64);
    assert_eq!(code(&ncmaj(&["check", "majorize", "--x", "1,a", "--y", "1,2"], dir.path())), 64);
    assert_eq!(code(&ncmaj(&["frobnicate"], dir.path())), 64);
    fs::write(dir.path().join("bad.json"), r#"{"order": 2, "entries": [[[1,0]]]}"#).unwrap();
    write(dir.path(), "A.json", &[&[1.0, 0.0], &[0.0, 2.0]]);
    assert_eq!(code(&ncmaj(&["check", "ext-majorize", "--list", "2:1", "bad.json", "A.json"], dir.path())), 64);
    write(dir.path(), "N.json", &[&[1.0, 3.0], &[0.0, 2.0]]);
    assert_eq!(code(&ncmaj(&["check", "ext-majorize", "--list", "2:1", "N.json", "A.json"], dir.path())), 64);
    assert_eq!(code(&ncmaj(&["admissible", "--n", "8", "--m", "2"], dir.path())), 64);
    assert_eq!(code(&ncmaj(&["--help"], dir.path())), 0);
}

#[test]
fn admissible_listings() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncmaj(&["admissible", "--n", "1", "--m", "2"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());

    let first = ncmaj(&["admissible", "--n", "2", "--m", "2"], dir.path());
    let second = ncmaj(&["admissible", "--n", "2", "--m", "2"], dir.path());
    assert_eq!(first.stdout, second.stdout);
    let listed: Vec<String> = String::from_utf8(first.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(listed, ["1;1;1", "2;1;1", "2;1;2", "2;2;1"]);
    let memo = fs::read_to_string(dir.path().join("memo").join("admissible-n2-m2-r1.txt")).unwrap();
    let stored: Vec<&str> = memo.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(stored, listed);
}

#[test]
fn schur_horn_document_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncmaj(&["construct", "schur-horn", "--x", "1,1,1", "--y", "3,0,0", "-o", "A.json"], dir.path());
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert!(v["verification"]["diagonal_residual"].as_f64().unwrap() < 1e-9);
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("A.json")).unwrap()).unwrap();
    assert_eq!(doc["order"], 3);
    let reparsed: Value = serde_json::from_str(&doc.to_string()).unwrap();
    assert_eq!(doc, reparsed);

    let out = ncmaj(&["construct", "schur-horn", "--x", "3,0,0", "--y", "1,1,1"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn nc_horn_writes_u_and_d() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "A.json", &[&[2.0, 1.0, 0.0, 0.0], &[1.0, 3.0, 0.5, 0.0], &[0.0, 0.5, 2.0, 0.5], &[0.0, 0.0, 0.5, 1.0]]);
    let out = ncmaj(&["construct", "nc-horn", "--d", "2", "--m", "2", "A.json", "--out-dir", "out"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert!(v["verification"]["block_residual"].as_f64().unwrap() < 1e-10);
    assert!(v["verification"]["trace_residual"].as_f64().unwrap() < 1e-10);
    assert!(dir.path().join("out/U.json").exists() && dir.path().join("out/D.json").exists());
}

#[test]
fn counterexample_emits_objects_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncmaj(&["construct", "counterexample", "--n", "2", "--ranks", "2"], dir.path());
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["decision"]["verdict"], "Infeasible");
    assert!(v["decision"]["certificate"].is_object());
    assert_eq!(v["verification"]["midpoint_residual"], 0.0);
    for name in ["S.json", "V.json", "T.json"] {
        assert!(dir.path().join(name).exists());
    }
    assert_eq!(code(&ncmaj(&["construct", "counterexample", "--n", "2", "--ranks", "1,1"], dir.path())), 64);
}

#[test]
fn transport_and_bourin() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "B.json", &[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 1.0]]);
    write(dir.path(), "W.json", &[&[0.5, 0.0, 0.0], &[0.0, 0.6, 0.2], &[0.1, 0.0, 0.7]]);
    let out = ncmaj(&["construct", "transport", "--ranks", "1,2", "B.json", "W.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json_of(&out)["verification"]["compression_residual"].as_f64().unwrap() < 1e-7);

    write(dir.path(), "A.json", &[&[1.0, 0.5, 0.0], &[0.5, 1.0, 0.0], &[0.0, 0.0, 0.2]]);
    for f in ["square", "hinge", "texp"] {
        let out = ncmaj(&["construct", "bourin", "--f", f, "A.json", "B.json"], dir.path());
        assert_eq!(code(&out), 0, "{f}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(json_of(&out)["verification"]["min_eigenvalue"].as_f64().unwrap() >= -1e-7);
    }
}

#[test]
fn expectation_witness() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "B.json", &[&[3.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 1.0]]);
    write(dir.path(), "A.json", &[&[2.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 2.0]]);
    let out = ncmaj(&["construct", "witness", "--list", "1:1,1:1,1:1", "A.json", "B.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json_of(&out)["verification"]["expectation_residual"].as_f64().unwrap() < 1e-9);
    assert!(dir.path().join("U.json").exists());
}

#[test]
fn validate_reports_no_hard_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncmaj(&["validate", "--n", "2", "--samples", "10", "--seed", "7"], dir.path());
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["samples"], 10);
    assert!(v["hard_failures"].as_array().unwrap().is_empty());
}
