use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn rdstab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rdstab"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("RDS_STAB_THREADS", n),
        None => cmd.env_remove("RDS_STAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn run(command: &str, model: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    rdstab(&args, None)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn single_state_kelly_is_dividends() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("solve-kelly", &fixture("single_state.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let kelly = fs::read_to_string(dir.path().join("kelly.csv")).unwrap();
    assert_eq!(kelly, "state,lambda_0,lambda_1\n0,0.3,0.7\n");
    let r = report(dir.path());
    assert_eq!(r["details"]["kelly"][0][1].as_f64(), Some(0.7));
}

#[test]
fn persistent_fixture_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("certify", &fixture("persistent.json"), dir.path(), &["--horizon", "20000", "--seeds", "1,2,3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "certified-stable");
    assert!((r["rate"].as_f64().unwrap() - -0.3074428141608082).abs() < 1e-12);
    assert!(r["gamma"].as_f64().unwrap() > 0.0);
    let seeds = fs::read_to_string(dir.path().join("seeds.csv")).unwrap();
    assert!(seeds.starts_with("seed,slope,c_exact,verdict\n"));
    assert_eq!(seeds.lines().count(), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict certified-stable"));
}

#[test]
fn kelly_rival_is_not_certified() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("certify", &fixture("kelly_rival.json"), dir.path(), &["--horizon", "5000", "--seeds", "4"]);
    assert_eq!(out.status.code(), Some(3));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "not-certified");
    assert_eq!(r["rate"].as_f64(), Some(0.0));
}

fn invalid(edit: impl Fn(&str) -> String) -> (Option<i32>, String) {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, edit(&fs::read_to_string(fixture("persistent.json")).unwrap())).unwrap();
    let out = run("basin", &model, &dir.path().join("out"), &["--seeds", "1"]);
    (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn non_stochastic_row_is_reported() {
    let (code, err) = invalid(|t| t.replacen("[0.02, 0.98]", "[0.02, 0.97]", 1));
    assert_eq!(code, Some(2));
    assert!(err.contains("line 5: NON_STOCHASTIC_ROW"), "{err}");
}

#[test]
fn negative_dividend_is_reported() {
    let (code, err) = invalid(|t| t.replacen("[0.01, 0.99]", "[-0.01, 1.01]", 1));
    assert_eq!(code, Some(2));
    assert!(err.contains("line 13: NOT_IN_SIMPLEX"), "{err}");
}

#[test]
fn reducible_chain_is_reported() {
    let (code, err) = invalid(|t| t.replacen("[0.98, 0.02]", "[1.0, 0.0]", 1));
    assert_eq!(code, Some(2));
    assert!(err.contains("REDUCIBLE_CHAIN"), "{err}");
}

#[test]
fn malformed_json_is_reported() {
    let (code, err) = invalid(|t| t.replacen("\"seed\": 42,", "\"seed\": 42", 1));
    assert_eq!(code, Some(2));
    assert!(err.contains("MALFORMED_JSON"), "{err}");
}

#[test]
fn short_horizon_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("estimate-rate", &fixture("persistent.json"), dir.path(), &["--horizon", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn csv_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("sample.json");
    let cases = [
        ("simulate", "path_seed7.csv", "t,state,x_0"),
        ("estimate-rate", "rate.csv", "seed,estimate,stderr,c_exact"),
        ("fk-ladder", "ladder_seed7.csv", "t,estimate,stderr"),
    ];
    for (cmd, file, head) in cases {
        let out_dir = dir.path().join(cmd);
        let out = run(cmd, &model, &out_dir, &["--horizon", "1000", "--seeds", "7"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(out_dir.join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(head));
    }
    let path = fs::read_to_string(dir.path().join("simulate/path_seed7.csv")).unwrap();
    assert_eq!(path.lines().count(), 1002);
    assert!(path.lines().nth(1).unwrap().ends_with(",0.001"));
}

#[test]
fn rerun_from_echo_reproduces_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("sample.json");
    let before = fs::read(&model).unwrap();
    for cmd in ["simulate", "certify", "holder", "fk-ladder"] {
        let first = dir.path().join(format!("{cmd}-a"));
        let second = dir.path().join(format!("{cmd}-b"));
        let out = run(cmd, &model, &first, &["--horizon", "2000", "--seeds", "3,1,2", "--sup-samples", "8", "--margin", "2.5"]);
        assert!(matches!(out.status.code(), Some(0 | 3)), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let echo = report(&first);
        assert_eq!(echo["config"]["run"]["tolerances"]["margin"].as_f64(), Some(2.5));
        assert_eq!(echo["config"]["run"]["tolerances"]["sup_samples"].as_u64(), Some(8));
        assert_eq!(echo["config"]["model"]["analysis"]["M"].as_u64(), Some(4));
        let again = rdstab(
            &["rerun", "--report", first.join("report.json").to_str().unwrap(), "--out", second.to_str().unwrap()],
            Some("1"),
        );
        assert_eq!(again.status.code(), out.status.code());
        let (a, b) = (csv_files(&first), csv_files(&second));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{cmd}");
    }
    assert_eq!(fs::read(&model).unwrap(), before);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("persistent.json");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(threads);
        let args = ["certify", "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap(), "--horizon", "3000", "--seeds", "5,6,7,8"];
        assert_eq!(rdstab(&args, Some(threads)).status.code(), Some(0));
        outputs.push(csv_files(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
}
