use serde_json::Value;
use tvvar_wasm::{backtest_json, bayes_factor_json, forecast_json};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("demo call failed")).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn forecast_shapes_and_bands() {
    let out = parse(forecast_json(r#"{"horizon": 6, "sim": {"n": 300, "seed": 4}}"#));
    assert_eq!(out["series"].as_array().unwrap().len(), 2);
    assert_eq!(floats(&out["series"][0]).len(), 300);
    assert_eq!(floats(&out["one_step"][1]).len(), 298);
    assert_eq!(floats(&out["vol_sd"][0]).len(), 298);
    assert_eq!(floats(&out["true_vol_sd"][0]).len(), 298);
    for j in 0..2 {
        let (lo, mid, hi) = (floats(&out["lower"][j]), floats(&out["mean"][j]), floats(&out["upper"][j]));
        assert_eq!(mid.len(), 6);
        for h in 0..6 {
            assert!(lo[h] < mid[h] && mid[h] < hi[h]);
        }
        assert!((0..6).all(|h| (hi[h] - lo[h]).is_finite()));
    }
    // fixed true volatility 0.01; the late posterior estimate should be near it
    let est = *floats(&out["vol_sd"][0]).last().unwrap();
    assert!((est / 0.01 - 1.0).abs() < 0.5, "estimated sd {est}");
}

#[test]
fn bayes_trace_prefers_the_generating_order() {
    let out = parse(bayes_factor_json(r#"{"sim": {"n": 600, "seed": 9, "lags": [0.0, 0.7]}}"#));
    let t: Vec<u64> = out["t"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(t.first(), Some(&2));
    assert_eq!(t.len(), 598);
    let cum = floats(&out["cumulative_log_bayes_factor"]);
    assert!(*cum.last().unwrap() > 0.0);
}

#[test]
fn backtest_reports_every_strategy() {
    let out = parse(backtest_json(r#"{"sim": {"n": 200}}"#));
    let paths = out["paths"].as_array().unwrap();
    let names: Vec<&str> = paths.iter().map(|p| p["strategy"].as_str().unwrap()).collect();
    assert_eq!(names, ["UP", "CP", "EWP"]);
    let n_trades = out["t"].as_array().unwrap().len();
    assert_eq!(n_trades, 200 - 2);
    for p in paths {
        assert_eq!(floats(&p["cumulative"]).len(), n_trades);
        assert!(p["summary"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn bad_parameters_are_errors() {
    assert!(forecast_json("{not json").is_err());
    assert!(forecast_json(r#"{"lags": [0.5]}"#).is_err());
    assert!(forecast_json(r#"{"sim": {"p": 0}}"#).is_err());
    assert!(forecast_json(r#"{"delta": 1.5}"#).is_err());
    assert!(backtest_json(r#"{"d": 0, "sim": {"n": 1}}"#).is_err());
}
