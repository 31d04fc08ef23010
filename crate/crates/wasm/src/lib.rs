//! Browser bindings for the demo page. Each exported function takes a JSON
//! parameter object and returns a JSON result; the `*_json` functions hold the
//! logic and run natively as well.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use tvvar::forecast::{credible_bounds, forecast_path, HorizonDiscount};
use tvvar::portfolio::{backtest, Cumulation, Strategy};
use tvvar::selection::compare_models;
use tvvar::simulate::{generate, var_coefficients, SimSpec, VolatilityMode};
use tvvar::{default_prior, run_filter, ModelConfig, Prior, SeriesFrame};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub p: usize,
    pub n: usize,
    /// Diagonal coefficient of each true lag.
    pub lags: Vec<f64>,
    pub intercept: f64,
    /// Volatility of every component at the start.
    pub sigma: f64,
    /// Let the true volatility wander (singular beta evolution).
    pub stochastic_vol: bool,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { p: 2, n: 400, lags: vec![0.2, 0.5], intercept: 0.0, sigma: 0.01, stochastic_vol: false, seed: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastParams {
    pub sim: SimParams,
    pub d: usize,
    pub delta: f64,
    pub beta: f64,
    pub horizon: usize,
    pub level: f64,
}

impl Default for ForecastParams {
    fn default() -> Self {
        ForecastParams { sim: SimParams::default(), d: 2, delta: 0.98, beta: 0.9, horizon: 10, level: 0.9 }
    }
}

#[derive(Debug, Serialize)]
pub struct ForecastOutput {
    pub series: Vec<Vec<f64>>,
    /// One-step forecast means, aligned with `t = d+1..N`.
    pub one_step: Vec<Vec<f64>>,
    /// Posterior volatility standard deviations per component.
    pub vol_sd: Vec<Vec<f64>>,
    pub true_vol_sd: Vec<Vec<f64>>,
    pub true_first_t: usize,
    pub first_t: usize,
    pub mean: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesParams {
    pub sim: SimParams,
    pub d_a: usize,
    pub d_b: usize,
    pub delta: f64,
    pub beta: f64,
}

impl Default for BayesParams {
    fn default() -> Self {
        BayesParams { sim: SimParams::default(), d_a: 2, d_b: 1, delta: 0.98, beta: 0.9 }
    }
}

#[derive(Debug, Serialize)]
pub struct BayesOutput {
    pub t: Vec<usize>,
    pub log_bayes_factor: Vec<f64>,
    pub cumulative_log_bayes_factor: Vec<f64>,
    pub mean_log_bayes_factor: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestParams {
    pub sim: SimParams,
    pub d: usize,
    pub delta: f64,
    pub beta: f64,
    pub target: f64,
    pub compound: bool,
}

impl Default for BacktestParams {
    fn default() -> Self {
        BacktestParams {
            sim: SimParams { p: 3, n: 500, lags: vec![0.1], intercept: 0.001, sigma: 0.01, ..SimParams::default() },
            d: 1,
            delta: 0.98,
            beta: 0.9,
            target: 0.001,
            compound: false,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BacktestPathOutput {
    pub strategy: String,
    pub cumulative: Vec<f64>,
    pub summary: f64,
    pub flagged: usize,
}

#[derive(Debug, Serialize)]
pub struct BacktestOutput {
    pub t: Vec<usize>,
    pub paths: Vec<BacktestPathOutput>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn simulate(params: &SimParams, beta: f64) -> Result<(SeriesFrame, Vec<DMatrix<f64>>), String> {
    let p = params.p;
    if p == 0 || params.lags.is_empty() {
        return Err("need at least one series and one lag".into());
    }
    let eye = DMatrix::identity(p, p);
    let lags: Vec<_> = params.lags.iter().map(|&a| &eye * a).collect();
    let phi = var_coefficients(&DVector::from_element(p, params.intercept), &lags);
    let config = ModelConfig::new(p, lags.len(), 0.99, beta).map_err(err)?;
    let q = config.state_dim();
    let mode = if params.stochastic_vol { VolatilityMode::BetaEvolution } else { VolatilityMode::Fixed };
    let spec = SimSpec::new(config, phi, &eye * params.sigma.powi(2), params.n, params.seed)
        .with_volatility(mode)
        .with_pstar(DMatrix::zeros(q, q));
    let sim = generate(&spec).map_err(err)?;
    Ok((sim.series, sim.sigma))
}

/// Default prior with the volatility scale matched to the sample variance, so
/// the first updates are not dominated by a unit-scale guess.
fn scaled_prior(series: &SeriesFrame, config: &ModelConfig) -> Result<Prior, String> {
    let mut prior = default_prior(config, None).map_err(err)?;
    let values = series.values();
    let rows = values.nrows().max(2) as f64;
    for j in 0..series.dim() {
        let col = values.column(j);
        let mean = col.mean();
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (rows - 1.0);
        prior.s[(j, j)] = var.max(1e-12) * (config.n() - 2.0).max(1.0);
    }
    Ok(prior)
}

fn columns(rows: impl Iterator<Item = DVector<f64>>, p: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); p];
    for r in rows {
        for (j, x) in r.iter().enumerate() {
            out[j].push(*x);
        }
    }
    out
}

fn diag_sd(m: &DMatrix<f64>) -> DVector<f64> {
    m.diagonal().map(f64::sqrt)
}

pub fn forecast_json(params: &str) -> Result<String, String> {
    let params: ForecastParams = serde_json::from_str(params).map_err(err)?;
    let (series, truth) = simulate(&params.sim, params.beta)?;
    let p = series.dim();
    let config = ModelConfig::new(p, params.d, params.delta, params.beta).map_err(err)?;
    let prior = scaled_prior(&series, &config)?;
    let run = run_filter(&series, &config, &prior).map_err(err)?;
    let path = forecast_path(&run.final_state, &config, params.horizon, HorizonDiscount::Recursive).map_err(err)?;
    let mut bands = Vec::with_capacity(path.len());
    for f in &path {
        bands.push(credible_bounds(f, params.level).map_err(err)?);
    }
    let true_lags = params.sim.lags.len();
    let true_first_t = (params.d + 1).max(true_lags);
    let output = ForecastOutput {
        series: columns((1..=series.len()).map(|t| series.observation(t)), p),
        one_step: columns(run.diagnostics.iter().map(|s| s.mean.clone()), p),
        vol_sd: columns(run.snapshots.iter().skip(1).map(|s| diag_sd(&s.vol_posterior_mean(&config))), p),
        true_vol_sd: columns(truth.iter().skip(true_first_t - true_lags).map(diag_sd), p),
        true_first_t,
        first_t: params.d + 1,
        mean: columns(path.iter().map(|f| f.mean.clone()), p),
        lower: columns(bands.iter().map(|b| b.0.clone()), p),
        upper: columns(bands.iter().map(|b| b.1.clone()), p),
    };
    serde_json::to_string(&output).map_err(err)
}

pub fn bayes_factor_json(params: &str) -> Result<String, String> {
    let params: BayesParams = serde_json::from_str(params).map_err(err)?;
    let (series, _) = simulate(&params.sim, params.beta)?;
    let p = series.dim();
    let config_a = ModelConfig::new(p, params.d_a, params.delta, params.beta).map_err(err)?;
    let config_b = ModelConfig::new(p, params.d_b, params.delta, params.beta).map_err(err)?;
    let prior_a = scaled_prior(&series, &config_a)?;
    let prior_b = scaled_prior(&series, &config_b)?;
    let trace = compare_models(&series, &config_a, &config_b, &prior_a, &prior_b).map_err(err)?;
    let cumulative = trace
        .log_bayes_factor
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let output = BayesOutput {
        t: trace.t,
        log_bayes_factor: trace.log_bayes_factor,
        cumulative_log_bayes_factor: cumulative,
        mean_log_bayes_factor: trace.mean_log_bayes_factor,
    };
    serde_json::to_string(&output).map_err(err)
}

pub fn backtest_json(params: &str) -> Result<String, String> {
    let params: BacktestParams = serde_json::from_str(params).map_err(err)?;
    let (series, _) = simulate(&params.sim, params.beta)?;
    let config = ModelConfig::new(series.dim(), params.d, params.delta, params.beta).map_err(err)?;
    let prior = scaled_prior(&series, &config)?;
    let cumulation = if params.compound { Cumulation::Compound } else { Cumulation::Additive };
    let report = backtest(&series, &config, &prior, params.target, &Strategy::ALL, cumulation).map_err(err)?;
    let output = BacktestOutput {
        t: report.t.clone(),
        paths: report
            .paths
            .into_iter()
            .map(|path| BacktestPathOutput {
                strategy: path.strategy.name().to_string(),
                cumulative: path.cumulative,
                summary: path.summary,
                flagged: path.flagged.len(),
            })
            .collect(),
    };
    serde_json::to_string(&output).map_err(err)
}

/// Simulate, fit and forecast with credible bands and volatility paths.
#[wasm_bindgen]
pub fn simulate_forecast(params: &str) -> Result<String, JsValue> {
    forecast_json(params).map_err(|e| JsValue::from_str(&e))
}

/// Sequential log Bayes factors of one order against another.
#[wasm_bindgen]
pub fn bayes_factor_trace(params: &str) -> Result<String, JsValue> {
    bayes_factor_json(params).map_err(|e| JsValue::from_str(&e))
}

/// Cumulative returns of the three allocation strategies.
#[wasm_bindgen]
pub fn portfolio_backtest(params: &str) -> Result<String, JsValue> {
    backtest_json(params).map_err(|e| JsValue::from_str(&e))
}
