//! End-to-end runs of the `relosc` binary.

use std::path::Path;
use std::process::{Command, Output};

fn relosc(args: &[&str]) -> Output {
    relosc_env(args, &[])
}

fn relosc_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_relosc"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).expect("column present");
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn harmonic_limit_levels_as_csv() {
    let out = relosc(&[
        "levels", "--omega", "1e-6", "--levels", "0-3", "--y", "1", "--blocks", "16", "--no-timing",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(records(&text).len(), 4);
    for (n, e) in column(&text, "E").iter().enumerate() {
        let e: f64 = e.parse().unwrap();
        assert!((e - (2 * n + 1) as f64).abs() < 1e-4, "n = {n}: {e}");
    }
    assert!(column(&text, "schema_version").iter().all(|v| v == "1"));
    assert!(column(&text, "wall_time_s").iter().all(|v| v.is_empty()));
    // full configured precision in the decimal string
    let e0 = &column(&text, "E")[0];
    assert!(e0.trim_start_matches('-').replace('.', "").len() >= 40, "{e0}");
}

#[test]
fn json_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levels.json");
    let out = relosc(&[
        "levels", "--omega", "0.002", "--y", "1", "--blocks", "20", "--format", "json", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row["schema_version"], 1);
    assert_eq!(row["frame"], "t");
    assert_eq!(row["digits"], 40);
    assert!(row["E"].as_str().unwrap().starts_with("1.00050176199551455179"));
    assert!(!row["wall_time_s"].as_str().unwrap().is_empty());
}

#[test]
fn empty_omega_list_is_an_empty_table() {
    let out = relosc(&["levels", "--omega", ""]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("schema_version,omega,n,frame"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["verify", "bogus"],
        vec!["levels", "--omega", "0.002", "--frame", "q"],
        vec!["levels", "--omega", "-0.1"],
        vec!["levels", "--omega", "0.002", "--digits", "10"],
        vec!["levels", "--no-such-flag"],
        vec!["resonance", "--omega", "0.002", "--theta", "0.7"],
    ] {
        let out = relosc(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn solver_failures_are_recorded_and_exit_one() {
    let out = relosc(&["levels", "--omega", "0.5", "--blocks", "4", "--no-timing"]);
    assert_eq!(out.status.code(), Some(1));
    let errors = column(&stdout(&out), "error");
    assert_eq!(errors.len(), 1);
    assert!(!errors[0].is_empty());
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, "omega = [\"1e-6\"]\nlevels = [0, 1]\ndigits = 45\nblocks = 12\ny = 1.0\n");
    let out = relosc(&["levels", "--config", cfg.to_str().unwrap(), "--digits", "50", "--no-timing"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(column(&text, "digits").iter().all(|d| d == "50"));
    assert!(column(&text, "basis_blocks").iter().all(|b| b == "12"));
    assert_eq!(column(&text, "n"), ["0", "1"]);

    write(&cfg, "omega = [\"1e-6\"]\nunknown_key = 3\n");
    let out = relosc(&["levels", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let args = [
        "sweep", "--omega", "0.002,0.003", "--levels", "0,1", "--frame", "t,d", "--y", "1", "--blocks", "20",
        "--no-timing",
    ];
    let one = relosc_env(&args, &[("RAYON_NUM_THREADS", "1")]);
    let four = relosc_env(&args, &[("RAYON_NUM_THREADS", "4")]);
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, four.stdout);
    let text = stdout(&one);
    let keys: Vec<(String, String, String)> = records(&text)
        .iter()
        .map(|r| (r[1].to_string(), r[2].to_string(), r[3].to_string()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| {
        let w = |s: &str| s.parse::<f64>().unwrap();
        w(&a.0).total_cmp(&w(&b.0)).then(a.1.cmp(&b.1)).then((a.2 == "d").cmp(&(b.2 == "d")))
    });
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), 8);
}

#[test]
fn single_omega_diagnostics_skip_fits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diag.csv");
    let out = relosc(&[
        "diagnostics", "--omega", "0.02", "--digits", "50", "--blocks", "30", "--y", "2", "--curve-blocks", "20,30",
        "--no-timing", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let text = std::fs::read_to_string(&path).unwrap();
    let lambda: f64 = column(&text, "Lambda")[0].parse().unwrap();
    let reference: f64 = column(&text, "minus_two_ln_im")[0].parse().unwrap();
    assert!((lambda / reference - 1.0).abs() < 0.01, "{lambda} vs {reference}");
    assert!(column(&text, "kappa_fit_slope")[0].is_empty());
    let curve = std::fs::read_to_string(dir.path().join("diag_lambda_curve.csv")).unwrap();
    assert_eq!(column(&curve, "n"), ["20", "30"]);
}

#[test]
fn quick_verify_passes() {
    let out = relosc(&["verify", "quick"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(column(&text, "status").iter().all(|s| s == "PASS"));
}
