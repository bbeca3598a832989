use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_perpetuity"));
    c.env_remove("PERPETUITY_WORKERS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join("configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("perpetuity-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows as maps from column name to cell.
fn rows(csv: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn cell<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == name).unwrap_or_else(|| panic!("no column {name}")).1
}

#[test]
fn estimate_is_byte_identical_across_reruns_and_workers() {
    let cfg = configs().join("regvar.json");
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (scratch("est_a.csv"), scratch("est_b.csv"));
    let args = ["estimate", "--config", cfg, "--N", "4000", "--n", "2,5"];
    stdout(&run(&[&args[..], &["--out", a.to_str().unwrap()]].concat()));
    let o = bin()
        .args(args)
        .args(["--out", b.to_str().unwrap()])
        .env("PERPETUITY_WORKERS", "3")
        .output()
        .unwrap();
    stdout(&o);
    let (sa, sb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(sa, sb);
    assert!(sa.starts_with("# schema=v1\n"));
    assert!(sa.contains("# seed=7"));
    assert!(rows(&sa).iter().all(|r| cell(r, "wall_time_s") == "NA"));
}

#[test]
fn compare_ratio_is_estimate_over_prediction() {
    let cfg = configs().join("atom_at_zero.json");
    let out = stdout(&run(&["compare", "--config", cfg.to_str().unwrap(), "--N", "20000"]));
    let rows = rows(&out);
    assert!(!rows.is_empty());
    for r in &rows {
        let p: f64 = cell(r, "p_hat").parse().unwrap();
        let pred: f64 = cell(r, "prediction").parse().unwrap();
        let ratio: f64 = cell(r, "ratio").parse().unwrap();
        assert_eq!(ratio, p / pred, "{r:?}");
    }
}

#[test]
fn oracle_reports_the_coin_law() {
    let cfg = configs().join("coin.json");
    let out = stdout(&run(&["oracle", "--config", cfg.to_str().unwrap(), "--n", "2"]));
    let got: Vec<(f64, f64)> = rows(&out)
        .iter()
        .map(|r| (cell(r, "value").parse().unwrap(), cell(r, "prob").parse().unwrap()))
        .collect();
    assert_eq!(got, vec![(1.0, 0.5), (3.0, 0.25), (7.0, 0.25)]);
}

#[test]
fn predict_matches_the_documented_value() {
    let cfg = configs().join("regvar_h.json");
    let out = stdout(&run(&["predict", "--config", cfg.to_str().unwrap(), "--x", "e^10"]));
    let rows = rows(&out);
    let stationary = rows
        .iter()
        .find(|r| cell(r, "n") == "inf" && cell(r, "lower_form") == "false")
        .unwrap();
    let v: f64 = cell(stationary, "prediction").parse().unwrap();
    assert!((v - 0.1).abs() < 1e-9, "{v}");
}

fn error_line(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {line}"))
}

#[test]
fn exit_codes_follow_error_classes() {
    let missing = run(&["estimate", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(error_line(&missing)["exit_code"], 2);

    let dependent = configs().join("signed_b_dependent.json");
    let o = run(&["predict", "--config", dependent.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let e = error_line(&o);
    assert_eq!(e["command"], "predict");
    assert!(e["message"].as_str().unwrap().contains("D_{n+1} = A_n (D_n - c)"));

    let bounded = scratch("bounded.json");
    std::fs::write(
        &bounded,
        r#"{"schema":"v1","law":{"structure":"IndependentProduct","a":{"constant":0.5},"b":{"constant":1.0}},
            "x_grid":["e^10"],"n_grid":[20],"N":2000,"d0":1.0,"bigjump":{"c":2.0,"epsilon":0.05}}"#,
    )
    .unwrap();
    let o = run(&["bigjump", "--config", bounded.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_line(&o)["error"], "TooFewHits");

    let o = run(&["estimate", "--config", bounded.to_str().unwrap(), "--N", "5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_trace_csv() {
    let cfg = configs().join("regvar.json");
    let out = stdout(&run(&["simulate", "--config", cfg.to_str().unwrap(), "--n", "10"]));
    let rows = rows(&out);
    assert_eq!(rows.len(), 11);
    assert_eq!(cell(&rows[0], "A"), "NA");
    assert_eq!(cell(&rows[10], "k"), "10");
}
