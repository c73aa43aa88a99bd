use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use misselect::simbench::{generate, Scenario, ScenarioConfig};
use misselect::{qmle, Family};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_misselect"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn report_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing from report"))
}

#[test]
fn gaussian_toy_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "x.csv", "1\n1\n");
    write(d, "y.csv", "1\n3\n");
    let out = run(d, &["fit", "--design", "x.csv", "--response", "y.csv", "--family", "gaussian", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = d.join("o");
    let beta: f64 = report_value(&o, "beta_hat").parse().unwrap();
    assert!((beta - 2.0).abs() < 1e-12);
    let ll: f64 = report_value(&o, "loglik").parse().unwrap();
    assert!((ll - 4.0).abs() < 1e-12);
    assert_eq!(report_value(&o, "converged"), "true");
    for key in ["score_inf_norm", "trace_h", "logdet_h", "aic", "bic", "gaic", "gbic", "gbicp_l", "gbicp"] {
        report_value(&o, key).parse::<f64>().unwrap();
    }
    let coefs = fs::read_to_string(o.join("coefficients.csv")).unwrap();
    let mut lines = coefs.lines();
    assert_eq!(lines.next(), Some("term,coefficient"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "x0");
    assert!((row[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn separable_logistic_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "x.csv", "1\n2\n-1\n-2\n");
    write(d, "y.csv", "1\n1\n0\n0\n");
    let out = run(d, &["fit", "--design", "x.csv", "--response", "y.csv", "--family", "bernoulli"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn exact_fit_has_degenerate_contrast() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "x.csv", "1\n2\n");
    write(d, "y.csv", "2\n4\n");
    let out = run(d, &["fit", "--design", "x.csv", "--response", "y.csv", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    let o = d.join("o");
    assert_eq!(report_value(&o, "status"), "degenerate_contrast");
    assert_eq!(report_value(&o, "gbicp"), "NA");
    report_value(&o, "bic").parse::<f64>().unwrap();
}

#[test]
fn malformed_csv_names_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "x.csv", "1,2\n3,oops\n");
    write(d, "y.csv", "1\n2\n");
    let out = run(d, &["fit", "--design", "x.csv", "--response", "y.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x.csv:2:2"), "{err}");
}

#[test]
fn unknown_config_keys_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "c.cfg", "[simulate]\nscenarios = multiple_index\np = 20\nreps = 1\n[path]\nalpha = 2\n");
    let out = run(d, &["simulate", "--config", "c.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[simulate] reps") && err.contains("[path] alpha"), "{err}");
}

#[test]
fn bad_usage_exits_1() {
    let out = bin().args(["fit", "--design"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

const SIM_CONFIG: &str = "\
# tiny run
seed = 11
[simulate]
scenarios = multiple_index
p = 20
n_reps = 1
test_size = 500
[path]
n_lambda = 30
";

#[test]
fn simulate_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "c.cfg", SIM_CONFIG);
    let out = run(d, &["simulate", "--config", "c.cfg", "--out", "s"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs: Vec<_> = fs::read_dir(d.join("s"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs, vec!["multiple_index_20.csv".to_string()]);
    let text = fs::read_to_string(d.join("s/multiple_index_20.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "criterion,consistent_pct,inclusion_pct,median_err,rsd_err,median_fp,median_fn_strong,median_fn_weak"
    );
    assert_eq!(lines.len(), 8);
    assert!(lines.iter().all(|l| l.split(',').count() == 8));
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["AIC", "BIC", "GAIC", "GBIC", "GBICp-L", "GBICp", "Oracle"]);
    let manifest = fs::read_to_string(d.join("s/manifest.txt")).unwrap();
    assert!(manifest.contains("master_seed=11\n"));
    assert!(manifest.contains("toolkit_version="));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = SIM_CONFIG.replace("n_reps = 1", "n_reps = 4");
    write(d, "c.cfg", &cfg);
    for (out, workers) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let o = run(d, &["simulate", "--config", "c.cfg", "--out", out, "--workers", workers]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(d.join("a/multiple_index_20.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b/multiple_index_20.csv")).unwrap());
    assert_eq!(a, fs::read(d.join("c/multiple_index_20.csv")).unwrap());
}

fn export(dir: &Path, x: &nalgebra::DMatrix<f64>, y: &nalgebra::DVector<f64>) {
    let mut xs = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v:e}")).collect();
        xs.push_str(&row.join(","));
        xs.push('\n');
    }
    fs::write(dir.join("x.csv"), xs).unwrap();
    let ys: String = y.iter().map(|v| format!("{v:e}\n")).collect();
    fs::write(dir.join("y.csv"), ys).unwrap();
}

#[test]
fn exported_scenario_refit_matches_in_process() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut config = ScenarioConfig::new(Scenario::MultipleIndex, 30);
    config.test_size = 1;
    let data = generate(&config, 3).unwrap();
    export(d, &data.x, &data.y);

    let support = &data.oracle.m0;
    let expected = qmle::fit_support(&Family::gaussian(), &data.y, &data.x, support).unwrap();
    let spec: Vec<String> = support.iter().map(usize::to_string).collect();
    let out = run(d, &["fit", "--design", "x.csv", "--response", "y.csv", "--support", &spec.join(","), "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ll: f64 = report_value(&d.join("o"), "loglik").parse().unwrap();
    assert!((ll - expected.loglik).abs() <= 1e-12, "{ll} vs {}", expected.loglik);
}

#[test]
fn path_and_score_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut config = ScenarioConfig::new(Scenario::MultipleIndex, 15);
    config.test_size = 1;
    let data = generate(&config, 0).unwrap();
    export(d, &data.x, &data.y);
    write(d, "c.cfg", "[path]\nn_lambda = 40\n");

    let out = run(d, &["path", "--design", "x.csv", "--response", "y.csv", "--config", "c.cfg", "--out", "p"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cands = fs::read_to_string(d.join("p/candidates.csv")).unwrap();
    let lines: Vec<&str> = cands.lines().collect();
    assert!(lines[0].starts_with("id,lambda,size,support"));
    assert!(lines.len() > 2);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 14));
    let selected = fs::read_to_string(d.join("p/selected.txt")).unwrap();
    assert_eq!(selected.lines().count(), 6);
    assert!(selected.starts_with("AIC="));

    write(d, "cands.txt", "# candidates\nnone\n0 1 2 3 4\n0,1,2,3,4,7\n");
    let out = run(d, &["score", "--design", "x.csv", "--response", "y.csv", "--candidates", "cands.txt", "--out", "s"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let scores = fs::read_to_string(d.join("s/scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 4);
    let selected = fs::read_to_string(d.join("s/selected.txt")).unwrap();
    assert!(selected.contains("GBICp=0 1 2 3 4\n"), "{selected}");
}

#[test]
fn diagnose_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(
        d,
        "c.cfg",
        "[diagnose]\nscenario = multiple_index\nd = 3\nkl_n = 100\nkl_reps = 20\nnormality_n = 200\nnormality_reps = 100\n",
    );
    let out = run(d, &["diagnose", "--config", "c.cfg", "--out", "g"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.join("g/diagnostics.txt")).unwrap();
    assert!(text.contains("kl_rel_gap=") && text.contains("ks_pass="));

    write(d, "bad.cfg", "[diagnose]\nnormality_reps = 10\n");
    let out = run(d, &["diagnose", "--config", "bad.cfg", "--out", "g"]);
    assert_eq!(out.status.code(), Some(1));
}
