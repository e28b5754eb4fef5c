use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dirichlet-lattice"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn eigen_writes_pair_sidecar_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ball.json", r#"{"kind":"ball","radius":1.0,"dim":2,"N":12}"#);
    let out = tmp.path().join("run");
    let (code, err) = run(&["eigen", "--config", &cfg, "--tol", "1e-12", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let side = json(&out.join("pair.json"));
    let lambda = side["lambda"].as_f64().unwrap();
    assert!(lambda > 0.9 && lambda < 1.0);
    let csv = fs::read_to_string(out.join("pair.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,phi\n"));
    assert_eq!(csv.lines().count() - 1, side["sites"].as_u64().unwrap() as usize);
    // 17 significant digits
    let first = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap();
    assert_eq!(first.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);

    let manifest = json(&out.join("manifest.json"));
    let listed: BTreeSet<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, listing(&out));
    assert_eq!(manifest["subcommand"], "eigen");
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"kind":"ball","radius":-1.0,"dim":2,"N":8}"#);
    let (code, err) = run(&["eigen", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("radius"), "{err}");
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["--no-such-flag"]).0, 64);
    assert_eq!(run(&["frobnicate"]).0, 64);
    assert_eq!(run(&["eigen"]).0, 64);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn spectral_guard_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let (code, err) = run(&["oracle", "exit", "--R", "8", "--tilt", "40", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("tilt exceeds principal eigenvalue budget"), "{err}");
}

#[test]
fn box_study_reports_exact_shape() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "box.json", r#"{"kind":"box","half_widths":[1.0,1.0],"dim":2,"N":4}"#);
    let report = tmp.path().join("report.json");
    let (code, err) = run(&["verify", "bounds", "--config", &cfg, "--scales", "32,64", "--out", report.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v = json(&report);
    for row in v["rows"].as_array().unwrap() {
        assert!(row["shape_error"].as_f64().unwrap() <= 1e-8, "{row}");
    }
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ball.json", r#"{"kind":"ball","radius":1.0,"dim":2,"N":6}"#);
    let outputs: Vec<(String, String)> = (0..2)
        .map(|k| {
            let dir = tmp.path().join(format!("r{k}"));
            let d = dir.to_str().unwrap();
            assert_eq!(run(&["eigen", "--config", &cfg, "--out", d]).0, 0);
            let pair = dir.join("pair.csv");
            let path = dir.join("path.csv");
            assert_eq!(
                run(&[
                    "confined", "sample", "--pair", pair.to_str().unwrap(), "--start", "0,0", "--steps", "500",
                    "--seed", "7", "--out", path.to_str().unwrap(),
                ])
                .0,
                0
            );
            let mc = dir.join("ruin.json");
            assert_eq!(
                run(&[
                    "mc", "ruin", "--d", "3", "--R", "4", "--alpha", "2", "--x", "5,0,0", "--replicas", "500",
                    "--seed", "1", "--out", mc.to_str().unwrap(),
                ])
                .0,
                0
            );
            let mut all = String::new();
            for f in ["pair.csv", "pair.json", "path.csv", "ruin.json"] {
                all.push_str(&fs::read_to_string(dir.join(f)).unwrap());
            }
            (all, fs::read_to_string(dir.join("path.csv")).unwrap())
        })
        .collect();
    assert_eq!(outputs[0].0, outputs[1].0);
    let path = &outputs[0].1;
    assert!(path.starts_with("step,x1,x2\n0,0,0\n"));
    assert_eq!(path.lines().count(), 502);
}

#[test]
fn mc_ruin_reports_estimate_and_oracle() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ruin.json");
    let (code, err) = run(&[
        "mc", "ruin", "--d", "3", "--R", "6", "--alpha", "2", "--x", "7,0,0", "--replicas", "4000", "--seed", "3",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    for key in ["estimate", "ci_low", "ci_high", "oracle", "bound_ratio"] {
        assert!(v[key].is_number(), "missing {key}: {v}");
    }
    let est = v["estimate"].as_f64().unwrap();
    let half = est - v["ci_low"].as_f64().unwrap();
    assert!((est - v["oracle"].as_f64().unwrap()).abs() <= 4.0 * half);
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "box.json", r#"{"kind":"box","half_widths":[2.0,2.0],"dim":2,"N":1}"#);
    let dir = tmp.path().join("env-out");
    let status = bin()
        .args(["discretize", "--config", &cfg])
        .env("DIRICHLET_LATTICE_OUT", &dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(dir.join("domain.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,is_boundary,dist\n"));
    let sites = csv.lines().skip(1).filter(|l| l.split(',').nth(2) == Some("0")).count();
    assert_eq!(sites, 9);
}

#[test]
fn confined_check_on_small_box() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "box.json", r#"{"kind":"box","half_widths":[2.0,2.0],"dim":2,"N":1}"#);
    let out = tmp.path().join("check.json");
    let (code, err) = run(&["confined", "check", "--config", &cfg, "--which", "all", "--steps", "20000", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    assert!(v["kernel"]["max_row_defect"].as_f64().unwrap() < 1e-12);
    assert!(v["survival"]["max_relative_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["conditioning"]["rows"].as_array().unwrap().len(), 50);
    assert!(v["occupation"]["total_variation"].as_f64().unwrap() < 0.05);
}
