use std::path::Path;
use std::process::{Command, Output};

use tvvar::series::{load_csv, CsvOptions};

fn tvvar(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvvar"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TVVAR_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn simulate(out: &Path, p: &str, n: &str) -> String {
    let data = out.join("sim.csv");
    let o = tvvar(out, &["simulate", "--p", p, "--n", n, "--seed", "11", "--data", data.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    data.to_str().unwrap().to_string()
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn simulate_fit_metrics_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let data = simulate(out, "2", "300");
    assert_eq!(code(&tvvar(out, &["fit", "--data", &data, "--d", "2"])), 0);
    assert_eq!(code(&tvvar(out, &["forecast", "--horizon", "4"])), 0);
    assert_eq!(code(&tvvar(out, &["metrics", "--data", &data, "--horizons", "1,2,3"])), 0);
    let (header, rows) = read_table(&out.join("forecast.csv"));
    assert_eq!(header[..5], ["h", "mean_s1", "lower_s1", "upper_s1", "sd_s1"]);
    assert_eq!(rows.len(), 4);
    let (_, rows) = read_table(&out.join("forecast_metrics.csv"));
    assert_eq!(rows.len(), 3);

    // every emitted table loads back as a series frame
    for entry in std::fs::read_dir(out).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            load_csv(&path, &CsvOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}

#[test]
fn single_cell_select_matches_fit_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let data = simulate(out, "2", "250");
    let cell = ["--d", "2", "--delta", "0.97", "--beta", "0.92"];
    for cmd in ["select", "fit", "metrics"] {
        let mut args = vec![cmd, "--data", &data];
        args.extend(cell);
        assert_eq!(code(&tvvar(out, &args)), 0);
    }
    let (header, rows) = read_table(&out.join("likelihood_grid.csv"));
    assert_eq!(header, ["rank", "d", "delta", "beta", "loglik", "msse_s1", "msse_s2", "mae_s1", "mae_s2"]);
    assert_eq!(rows.len(), 1);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("fit_summary.json")).unwrap()).unwrap();
    let loglik: f64 = rows[0][4].parse().unwrap();
    assert_eq!(loglik, summary["loglik"].as_f64().unwrap());
    let (_, mrows) = read_table(&out.join("forecast_metrics.csv"));
    assert_eq!(&rows[0][5..9], &mrows[0][4..8]);
}

#[test]
fn equal_weight_backtest_on_eight_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let data = simulate(out, "8", "120");
    assert_eq!(code(&tvvar(out, &["backtest", "--data", &data, "--strategies", "ewp"])), 0);
    let (header, rows) = read_table(&out.join("weights_ewp.csv"));
    assert_eq!(header.len(), 9);
    assert!(rows.iter().all(|r| r[1..].iter().all(|w| w.parse::<f64>().unwrap() == 0.125)));
    let (header, _) = read_table(&out.join("portfolio_summary.csv"));
    assert_eq!(header, ["d", "delta", "beta", "EWP"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(code(&tvvar(out, &["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&tvvar(out, &["fit"])), 1);
    assert_eq!(code(&tvvar(out, &["fit", "--data", "/missing.csv"])), 2);

    let bad = out.join("bad.csv");
    std::fs::write(&bad, "t,a,b\n1,0.1,0.2\n2,,0.3\n").unwrap();
    let o = tvvar(out, &["fit", "--data", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3") && err.contains("column a"), "{err}");

    let data = simulate(out, "2", "50");
    assert_eq!(code(&tvvar(out, &["fit", "--data", &data, "--delta", "1.5"])), 1);
    let o = tvvar(out, &["simulate", "--p", "1", "--ar", "1.5", "--guard", "100", "--n", "400"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn config_file_supplies_defaults_and_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let data = simulate(out, "2", "200");
    let cfg = out.join("run.json");
    std::fs::write(&cfg, format!(r#"{{"data": "{data}", "grid": {{"d": [1, 2], "delta": [0.95, 0.99]}}, "model": {{"beta": 0.9}}}}"#)).unwrap();
    assert_eq!(code(&tvvar(out, &["select", "--config", cfg.to_str().unwrap()])), 0);
    let (_, rows) = read_table(&out.join("likelihood_grid.csv"));
    assert_eq!(rows.len(), 4);
    // flags win over the file
    assert_eq!(code(&tvvar(out, &["select", "--config", cfg.to_str().unwrap(), "--d", "1"])), 0);
    let (_, rows) = read_table(&out.join("likelihood_grid.csv"));
    assert_eq!(rows.len(), 2);

    std::fs::write(&cfg, r#"{"modle": {}}"#).unwrap();
    let o = tvvar(out, &["select", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("modle"));
}

#[test]
fn outputs_are_reproducible_and_schedule_independent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "4")] {
        std::fs::create_dir_all(out).unwrap();
        let data = simulate(out, "3", "150");
        let o = tvvar(out, &["select", "--data", &data, "--d", "1,2,3", "--delta", "0.9,0.98", "--beta", "0.9", "--jobs", jobs]);
        assert_eq!(code(&o), 0);
    }
    for name in ["sim.csv", "truth_sigma.csv", "likelihood_grid.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}
