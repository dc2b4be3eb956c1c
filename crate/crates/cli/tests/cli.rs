use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sashpcfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sashpcfe")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("study.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const UNIT_CUBE: &str = r#"[
  {"name": "X1", "kind": "uniform", "lo": 0.0, "hi": 1.0},
  {"name": "X2", "kind": "uniform", "lo": 0.0, "hi": 1.0},
  {"name": "X3", "kind": "uniform", "lo": 0.0, "hi": 1.0},
  {"name": "X4", "kind": "uniform", "lo": 0.0, "hi": 1.0}
]"#;

fn external_study(dir: &Path) -> String {
    fs::write(dir.join("model.json"), UNIT_CUBE).unwrap();
    write_config(
        dir,
        r#"{
  "limit_state": {"command": ["awk", "-F,", "{ printf \"%.17g\\n\", 1.2 - $1*$1 - $2 }"]},
  "model": "model.json",
  "methods": ["mcs", "sas-hpcfe"],
  "seed": 9,
  "mcs": {"n_mcs": 50000},
  "sas_hpcfe": {"n_train": 40, "n_mcs": 50000, "n_preview": 100}
}"#,
    )
}

#[test]
fn unknown_benchmark_is_a_config_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"methods\": [\"mcs\"],\n  \"benchmark\": \"sobol-g7\"\n}\n");
    let out = sashpcfe(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("study.json:3:"), "{msg}");
    assert!(msg.contains("sobol-g7"), "{msg}");
}

#[test]
fn malformed_and_invalid_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("{\n  \"benchmark\": \"beam\",\n  \"methods\": [\"mcs\"],\n  \"colour\": 1\n}", "study.json:4:"),
        ("{\n  \"benchmark\": \"beam\",\n  \"methods\": [\"monte-carlo\"]\n}", "study.json:3:"),
        ("{\n  \"benchmark\": \"beam\",\n  \"methods\": [\"mcs\"],\n  \"sas_hpcfe\": {\"mu\": 1.5}\n}", "study.json:4:"),
        ("{\n  \"benchmark\": \"beam\",\n  \"methods\": []\n}", "study.json:3:"),
        ("{\n  \"methods\": [\"mcs\"]\n}", "missing benchmark"),
    ];
    for (text, expect) in cases {
        let cfg = write_config(dir.path(), text);
        let out = sashpcfe(&["run", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(stderr(&out).contains(expect), "{text}: {}", stderr(&out));
    }
}

#[test]
fn mcs_on_sobol_m10() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"benchmark": "sobol-m10", "methods": ["mcs"], "output": "out"}"#);
    let out = sashpcfe(&["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "mcs");
    let pf: f64 = row[1].parse().unwrap();
    assert!((0.0160..=0.0196).contains(&pf), "pf {pf}");
    assert_eq!(row[3], "100000");
}

#[test]
fn external_limit_state_with_error_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = external_study(dir.path());
    let o = dir.path().join("o");
    let out = sashpcfe(&["run", "--config", &cfg, "--out", o.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(o.join("results.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,pf,beta,n_model_evals,n_surrogate_evals,cov,r,seed,eps_percent");
    let sas: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(sas[0], "sas-hpcfe");
    assert_eq!(sas[3], "40");
    assert_eq!(sas[6], "2");
    let eps: f64 = sas[8].parse().unwrap();
    assert!(eps < 3.0, "eps {eps}");
    for f in ["spce.json", "active_subspace.json", "hpcfe.json", "eigenvalues.csv", "reduced_scatter.csv"] {
        assert!(o.join(f).exists(), "{f}");
    }
    let scatter = fs::read_to_string(o.join("reduced_scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 101);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = external_study(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        assert!(sashpcfe(&["run", "--config", &cfg, "--out", o.to_str().unwrap()]).status.success());
    }
    for f in ["results.csv", "eigenvalues.csv", "reduced_scatter.csv", "hpcfe.json", "spce.json", "active_subspace.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    sashpcfe(&["run", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "10"]);
    assert_ne!(fs::read(a.join("results.csv")).unwrap(), fs::read(c.join("results.csv")).unwrap());
}

#[test]
fn failing_command_is_a_numerical_error_and_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("model.json"), UNIT_CUBE).unwrap();
    // fine for the 1000-row MCS batch, broken for anything else
    let cfg = write_config(
        dir.path(),
        r#"{
  "limit_state": {"command": ["awk", "-F,", "{ n++; print 1 - $1 } END { if (n != 1000) exit 1 }"]},
  "model": "model.json",
  "methods": ["mcs", "spce"],
  "mcs": {"n_mcs": 1000},
  "spce": {"n_train": 30, "n_mcs": 1000}
}"#,
    );
    let o = dir.path().join("o");
    let out = sashpcfe(&["run", "--config", &cfg, "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let text = fs::read_to_string(o.join("results.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn report_on_empty_and_filled_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = sashpcfe(&["report", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("no results"));

    let cfg = external_study(dir.path());
    let o = dir.path().join("o");
    assert!(sashpcfe(&["run", "--config", &cfg, "--out", o.to_str().unwrap()]).status.success());
    fs::remove_file(o.join("hpcfe.json")).unwrap();
    let out = sashpcfe(&["report", o.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let methods: Vec<&str> = text.lines().skip(1).filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(methods, ["mcs", "sas-hpcfe", "missing"]);
    assert!(text.contains("missing hpcfe.json"));

    let out = sashpcfe(&["report", dir.path().join("nope").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
