use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rdx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdx")).args(args).output().expect("binary runs")
}

fn envelope(args: &[&str]) -> (Value, i32) {
    let out = rdx(args);
    let v: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not json ({e}): {}", String::from_utf8_lossy(&out.stdout)));
    (v, out.status.code().unwrap())
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn exponents_example() {
    let (v, code) =
        envelope(&["--json", "exponents", "--m", "2", "--p", "3", "--N", "3", "--sigma1", "1", "--sigma2", "2"]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "rdx/1");
    assert_eq!(v["status"], "ok");
    assert_eq!(num(&v["payload"]["exponents"]["p_F"]), 3.0);
    assert_eq!(num(&v["payload"]["exponents"]["mu"]), 4.0);
}

#[test]
fn exponents_csv_rows() {
    let out = rdx(&["exponents", "--csv", "--m", "2", "--p", "3", "--N", "3", "--sigma1", "1", "--sigma2", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["name", "value", "defined", "citation"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let p_f = rows.iter().find(|r| &r[0] == "p_F").expect("p_F row");
    assert_eq!(&p_f[1], "3");
    assert_eq!(&p_f[2], "true");
}

#[test]
fn transform_example() {
    let (v, code) =
        envelope(&["--json", "transform", "--kind", "main", "--m", "2", "--N", "3", "--sigma1", "2", "--sigma2", "2"]);
    assert_eq!(code, 0);
    let p = &v["payload"];
    assert_eq!(num(&p["theta"]), 2.0);
    assert_eq!(num(&p["Nbar"]), 2.5);
    assert_eq!(num(&p["sigma"]), 0.0);
}

#[test]
fn transform_apply_writes_mapped_samples() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("in.csv");
    std::fs::write(&src, "r,t,u\n1,0.5,2\n2,0.5,3\n").unwrap();
    let out = dir.path().join("out");
    let (v, code) = envelope(&[
        "--json",
        "--out",
        out.to_str().unwrap(),
        "transform",
        "--kind",
        "main",
        "--m",
        "2",
        "--N",
        "3",
        "--sigma1",
        "2",
        "--sigma2",
        "2",
        "--apply",
        src.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(out.join("transformed.csv")).unwrap();
    // z = r^2 / 2 and u is unchanged
    assert_eq!(text, "z,tau,w\n0.5,0.5,2\n2,0.5,3\n");
    assert_eq!(v["artifacts"].as_array().unwrap().len(), 1);
}

#[test]
fn verify_stationary_example() {
    let (v, code) = envelope(&[
        "--json",
        "verify",
        "--solution",
        "stationary",
        "--m",
        "1",
        "--N",
        "4",
        "--sigma2",
        "0",
        "--p",
        "3",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "ok");
    assert!(num(&v["payload"]["max_residual"]) < 1e-6);
}

#[test]
fn verify_random_points_depend_on_seed() {
    let args = |seed: &'static str| {
        [
            "--json",
            "--seed",
            seed,
            "verify",
            "--solution",
            "stationary",
            "--m",
            "1",
            "--N",
            "4",
            "--p",
            "3",
            "--random",
            "7",
        ]
    };
    let a = rdx(&args("1")).stdout;
    let b = rdx(&args("1")).stdout;
    let c = rdx(&args("2")).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn verify_sampled_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rdx(&[
        "--out",
        d,
        "solution",
        "--name",
        "explicit-p1",
        "--m",
        "2",
        "--sigma1",
        "1",
        "--T",
        "1",
        "--r-min",
        "0.3",
        "--r-max",
        "1.2",
        "--nr",
        "201",
        "--times",
        "0.3,0.305,0.31,0.315,0.32",
    ]);
    assert!(out.status.success());
    let csv = dir.path().join("solution.csv");
    let (v, code) = envelope(&[
        "--json",
        "verify",
        "--samples",
        csv.to_str().unwrap(),
        "--m",
        "2",
        "--N",
        "4",
        "--sigma1",
        "1",
        "--sigma2",
        "5.89897948557",
        "--p",
        "1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(num(&v["payload"]["points"]), 199.0 * 3.0);
    assert!(num(&v["payload"]["max_residual"]) < 2e-5, "{}", v["payload"]);
}

#[test]
fn identical_argv_gives_identical_bytes() {
    let args = ["--json", "classify", "--m", "2", "--p", "3", "--N", "3", "--sigma1", "1", "--sigma2", "2"];
    assert_eq!(rdx(&args).stdout, rdx(&args).stdout);
    let dir = tempfile::tempdir().unwrap();
    let config = data("sweep.json");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = rdx(&[
            "--json",
            "--out",
            out.to_str().unwrap(),
            "simulate",
            "--sweep",
            "--config",
            config.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(out.join("run_001/snapshots.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn usage_errors_exit_2() {
    let out = rdx(&["exponents", "--m", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--N"));
    assert_eq!(rdx(&["frobnicate"]).status.code(), Some(2));
    let (v, code) = envelope(&["--json", "exponents", "--nonsense"]);
    assert_eq!(code, 2);
    assert_eq!(v["payload"]["error"]["kind"], "UsageError");
}

#[test]
fn domain_errors_exit_1_with_module_name() {
    let (v, code) = envelope(&["--json", "exponents", "--m", "0.5", "--N", "3"]);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "error");
    assert_eq!(v["payload"]["error"]["kind"], "InvalidParameter");

    let (v, code) = envelope(&[
        "--json",
        "profile",
        "--m",
        "2",
        "--p",
        "2",
        "--N",
        "3",
        "--sigma2",
        "1.2",
        "--form",
        "separate",
        "--behavior",
        "pos_origin",
        "--param-min",
        "1e-6",
        "--param-max",
        "1e6",
        "--scan-points",
        "60",
    ]);
    assert_eq!(code, 1);
    assert_eq!(v["payload"]["error"]["kind"], "NoBracketing");

    let (v, code) = envelope(&["--json", "simulate", "--config", "/nonexistent/run.json"]);
    assert_eq!(code, 1);
    assert_eq!(v["payload"]["error"]["kind"], "ConfigError");
}

#[test]
fn simulate_lists_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let (v, code) = envelope(&[
        "--json",
        "--out",
        dir.path().to_str().unwrap(),
        "simulate",
        "--config",
        data("blowup.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let listed: Vec<PathBuf> =
        v["artifacts"].as_array().unwrap().iter().map(|a| PathBuf::from(a.as_str().unwrap())).collect();
    let mut written: Vec<PathBuf> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    written.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, written);
    let p = &v["payload"];
    assert_eq!(p["blowup"]["detected"], true);
    assert_eq!(num(&p["blowup"]["location"]), 0.0);
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.starts_with("t,sup,argmax,L1;0\n"));
}

#[test]
fn profile_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (v, code) = envelope(&[
        "--json",
        "--out",
        dir.path().to_str().unwrap(),
        "profile",
        "--m",
        "2",
        "--p",
        "2",
        "--N",
        "3",
        "--sigma2",
        "0.3",
        "--form",
        "separate",
        "--behavior",
        "pos_origin",
        "--target",
        "compact-support",
        "--param-min",
        "1e-6",
        "--param-max",
        "1e6",
        "--scan-points",
        "60",
    ]);
    assert_eq!(code, 0);
    assert!((num(&v["payload"]["xi0"]) - 7.2481).abs() < 1e-3);
    let text = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(text.starts_with("xi,f,fprime\n"));
}

#[test]
fn text_mode_is_key_value() {
    let out = rdx(&["exponents", "--m", "2", "--p", "3", "--N", "3", "--sigma1", "1", "--sigma2", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next() == Some("status = ok"));
    assert!(text.lines().any(|l| l == "exponents.mu = 4"));
}
