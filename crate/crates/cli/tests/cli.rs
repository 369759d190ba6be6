use std::path::Path;
use std::process::{Command, Output};

fn phlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phlab"))
        .args(args)
        .env_remove("PHLAB_CACHE_DIR")
        .output()
        .expect("spawn phlab")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const QUARTIC: &str = r#"{"rows": [[0,0,0,-1],[1,0,0,1],[0,1,0,1],[0,0,1,1]]}"#;
const SYMPLECTIC: &str = "[[0,0,1,0],[0,0,0,1],[-1,0,2,1],[0,-1,1,-1]]";

fn manifest(perturbation: &str) -> String {
    format!(
        r#"{{"matrix": {{"rows": {SYMPLECTIC}}}, "perturbation": {perturbation},
            "solver": {{"grid_n": 8}},
            "diagnostics": {{"samples": 10, "growth_steps": 20, "orbits": 1}}, "seed": 3}}"#
    )
}

#[test]
fn classify_quartic_companion() {
    let dir = tempfile::tempdir().unwrap();
    let out = phlab(&["classify", &write(dir.path(), "m.json", QUARTIC)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], "phlab.classification/1");
    let c = &v["classification"];
    assert_eq!(c["irreducible"], true);
    assert_eq!(c["ergodic"], true);
    assert_eq!(c["totally_irreducible"], true);
    assert_eq!((c["dim_stable"].as_u64(), c["dim_center"].as_u64(), c["dim_unstable"].as_u64()), (Some(1), Some(2), Some(1)));
    assert_eq!(v["r_l"], 1.0);
}

#[test]
fn identity_is_not_ergodic() {
    let dir = tempfile::tempdir().unwrap();
    let out = phlab(&["classify", &write(dir.path(), "id.json", "[[1,0],[0,1]]")]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["classification"]["ergodic"], false);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"rows": [[1, 2"#);
    assert_eq!(phlab(&["classify", &bad]).status.code(), Some(2));
    let rect = write(dir.path(), "rect.json", r#"{"rows": [[1, 2, 3], [4, 5, 6]]}"#);
    assert_eq!(phlab(&["classify", &rect]).status.code(), Some(2));
    let empty = write(dir.path(), "empty.json", r#"{"rows": []}"#);
    assert_eq!(phlab(&["classify", &empty]).status.code(), Some(2));
    assert_eq!(phlab(&["run", &bad, "--out", "x"]).status.code(), Some(2));
    assert_eq!(phlab(&["classify"]).status.code(), Some(2));
}

#[test]
fn large_epsilon_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", &manifest(r#"{"kind": "symplectic", "epsilon": 10.0}"#));
    let out_dir = dir.path().join("bundle");
    let out = phlab(&["run", &m, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out_dir.join("certificate.json").exists());
    assert!(!out_dir.join("report.json").exists());
    assert_eq!(phlab(&["certify", &m]).status.code(), Some(3));
}

#[test]
fn run_bundle_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", &manifest(r#"{"translation": [0.01, -0.02, 0.03, 0.005]}"#));
    let b = dir.path().join("b");
    let out = phlab(&["run", &m, "--out", b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for entry in std::fs::read_dir(&b).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
            assert!(v["schema"].as_str().unwrap().starts_with("phlab."), "{}", p.display());
        }
    }
    let conj: serde_json::Value = serde_json::from_slice(&std::fs::read(b.join("conjugacy.json")).unwrap()).unwrap();
    let expected = &conj["translation_expected"];
    let err = |got: &serde_json::Value, want: &serde_json::Value| (got[0].as_f64().unwrap() - want[0].as_f64().unwrap()).abs();
    assert!(err(&conj["h_s_mean"], &expected[0]) < 1e-10);
    assert!(err(&conj["h_u_mean"], &expected[1]) < 1e-10);

    let csv = phlab(&["plotdata", b.to_str().unwrap(), "exponents"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("step,lambda1,lambda2,lambda3,lambda4\n"));
    let pairs = String::from_utf8(phlab(&["plotdata", b.to_str().unwrap(), "pairings"]).stdout).unwrap();
    assert!(pairs.starts_with("j,c1,c2\n"));
    let defects = String::from_utf8(phlab(&["plotdata", b.to_str().unwrap(), "defects"]).stdout).unwrap();
    assert!(defects.starts_with("delta_s,delta_u,gap_c_norm\n"));
    assert_eq!(defects.lines().count(), 11);
    assert_eq!(phlab(&["plotdata", b.to_str().unwrap(), "histogram"]).status.code(), Some(2));
}

fn bundle_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run_info.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", &manifest(r#"{"kind": "symplectic", "epsilon": 0.01}"#));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, threads) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let o = phlab(&["--force", "--threads", threads, "run", &m, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fa = bundle_files(&a);
    assert!(fa.len() >= 12);
    assert_eq!(fa, bundle_files(&b));
    assert_eq!(fa, bundle_files(&c));
}

#[test]
fn global_flags_override_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", &manifest(r#"{"kind": "symplectic", "epsilon": 0.001}"#));
    let out = phlab(&["solve", &m, "--grid", "6", "--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["h_u"]["grid_n"], 6);
    assert_eq!(v["field"]["leaf_conjugacy"], true);
    let hc = phlab(&["solve", &m, "--grid", "6", "--leaf-conjugacy", "false"]);
    assert_eq!(hc.status.code(), Some(0), "{}", String::from_utf8_lossy(&hc.stderr));
    let v: serde_json::Value = serde_json::from_slice(&hc.stdout).unwrap();
    assert_eq!(v["field"]["leaf_conjugacy"], false);
}
