//! Multi-step forecasts of the series and the volatility, credible bounds
//! and the MSSE / MAE / ME goodness-of-fit measures.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvvarError};
use crate::filter::{run_filter, FilterRun, PosteriorState};
use crate::linalg;
use crate::model::{ModelConfig, Prior};
use crate::series::SeriesFrame;
use crate::student_t::t_quantile;

/// How the coefficient spread is propagated beyond one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonDiscount {
    /// `R_t(h) = Δ^{-h/2} P_t Δ^{-h/2}`.
    #[default]
    Recursive,
    /// `R_t(h) = P_t + h (Δ^{-1/2} P_t Δ^{-1/2} − P_t)`.
    Constant,
}

/// `h`-step forecast of `y_{t+h}` given `y^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub h: usize,
    /// Forecast mean `y_t(h) = m'_t F̂_{t+h}`.
    pub mean: DVector<f64>,
    /// Student t forecast scale `Q*_t(h) = (F̂'R_t(h)F̂ + 1) k⁻¹ S_t`.
    pub scale: DMatrix<f64>,
    /// Forecast covariance `Q_t(h) = Q*_t(h)/(βn − 2)`.
    pub covariance: DMatrix<f64>,
    /// Degrees of freedom `βn`.
    pub dof: f64,
    /// Volatility forecast `S_t(h) = (1−β)k⁻¹/(3β−2) S_t`.
    pub vol_forecast: DMatrix<f64>,
    /// Estimated design vector `F̂_{t+h}`.
    pub design: DVector<f64>,
}

/// Propagated spread `R_t(h)`.
pub fn horizon_spread(spread: &DMatrix<f64>, config: &ModelConfig, h: usize, mode: HorizonDiscount) -> DMatrix<f64> {
    let q = spread.nrows();
    match mode {
        HorizonDiscount::Recursive => {
            let w = config.inflation(h as u32);
            DMatrix::from_fn(q, q, |i, j| w[i] * spread[(i, j)] * w[j])
        }
        HorizonDiscount::Constant => {
            let w = config.inflation(1);
            let step = DMatrix::from_fn(q, q, |i, j| w[i] * spread[(i, j)] * w[j]) - spread;
            spread + step * h as f64
        }
    }
}

/// Forecasts for every horizon `1..=max_h` in one pass of the chained-mean
/// recursion.
pub fn forecast_path(
    state: &PosteriorState,
    config: &ModelConfig,
    max_h: usize,
    mode: HorizonDiscount,
) -> Result<Vec<ForecastResult>> {
    if max_h < 1 {
        return Err(TvvarError::InvalidConfig("forecast horizon must be at least 1".into()));
    }
    let p = config.p();
    let d = config.d();
    if state.history.len() != d || state.location.shape() != (config.state_dim(), p) {
        return Err(TvvarError::Dimension("posterior state does not match the model".into()));
    }
    let k_inv_s = &state.vol_scale / config.k();
    let dof = config.predictive_dof();
    let vol_forecast = vol_forecast_mean(state, config);
    let mut means: Vec<DVector<f64>> = Vec::with_capacity(max_h);
    let mut out = Vec::with_capacity(max_h);
    for h in 1..=max_h {
        let mut f = DVector::zeros(config.state_dim());
        f[0] = 1.0;
        for lag in 1..=d {
            // y_{t+h-lag}: a forecast when h-lag ≥ 1, otherwise observed
            let y = if h > lag { &means[h - lag - 1] } else { &state.history[lag - h] };
            f.rows_mut(1 + (lag - 1) * p, p).copy_from(y);
        }
        let mean = state.location.transpose() * &f;
        let r = horizon_spread(&state.spread, config, h, mode);
        let bracket = f.dot(&(&r * &f)) + 1.0;
        let scale = linalg::symmetrize(&(&k_inv_s * bracket));
        let covariance = &scale / (dof - 2.0);
        means.push(mean.clone());
        out.push(ForecastResult { h, mean, scale, covariance, dof, vol_forecast: vol_forecast.clone(), design: f });
    }
    Ok(out)
}

/// `h`-step forecast with the recursive horizon discount.
pub fn forecast(state: &PosteriorState, config: &ModelConfig, h: usize) -> Result<ForecastResult> {
    forecast_with(state, config, h, HorizonDiscount::Recursive)
}

pub fn forecast_with(state: &PosteriorState, config: &ModelConfig, h: usize, mode: HorizonDiscount) -> Result<ForecastResult> {
    let mut path = forecast_path(state, config, h, mode)?;
    Ok(path.pop().expect("non-empty path"))
}

/// Volatility forecast `E(Σ_{t+h} | y^t) = (1−β)k⁻¹/(3β−2) S_t`, the same
/// for every horizon.
pub fn vol_forecast_mean(state: &PosteriorState, config: &ModelConfig) -> DMatrix<f64> {
    &state.vol_scale * config.vol_mean_factor()
}

/// Correlation matrix implied by [`vol_forecast_mean`].
pub fn correlation_forecast(state: &PosteriorState, config: &ModelConfig) -> Result<DMatrix<f64>> {
    if config.p() < 2 {
        return Err(TvvarError::InvalidConfig("correlation needs p ≥ 2".into()));
    }
    correlation_of(&vol_forecast_mean(state, config))
}

/// Normalizes a covariance matrix to unit diagonal.
pub fn correlation_of(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sd: Vec<f64> = cov.diagonal().iter().map(|&v| v.sqrt()).collect();
    if sd.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(TvvarError::Numerical { t: 0, msg: "degenerate volatility scale (zero diagonal)".into() });
    }
    Ok(DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        if i == j {
            1.0
        } else {
            (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
        }
    }))
}

/// Componentwise `100·level %` credible bounds `mean ± q sqrt(Q*_ii/ν)`,
/// with `q` the upper `(1+level)/2` quantile of the standard t.
pub fn credible_bounds(result: &ForecastResult, level: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(TvvarError::InvalidConfig(format!("credible level {level} outside (0, 1)")));
    }
    if !(result.dof > 2.0) {
        return Err(TvvarError::InvalidConfig("credible bounds need βn > 2".into()));
    }
    let q = t_quantile(result.dof, 0.5 * (1.0 + level))?;
    let half = result.scale.diagonal().map(|v| q * (v / result.dof).sqrt());
    Ok((&result.mean - &half, &result.mean + &half))
}

/// MSSE, MAE and ME for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub h: usize,
    pub msse: DVector<f64>,
    pub mae: DVector<f64>,
    pub me: DVector<f64>,
    /// Number of forecast errors averaged, `N − d − h + 1`.
    pub count: usize,
}

/// Runs the filter and computes the metrics for horizon `h`.
pub fn rolling_metrics(series: &SeriesFrame, config: &ModelConfig, prior: &Prior, h: usize) -> Result<FitMetrics> {
    let mut v = rolling_metrics_multi(series, config, prior, &[h])?;
    Ok(v.remove(0))
}

/// Metrics for several horizons from a single filter pass.
pub fn rolling_metrics_multi(series: &SeriesFrame, config: &ModelConfig, prior: &Prior, horizons: &[usize]) -> Result<Vec<FitMetrics>> {
    let max_h = horizons.iter().copied().max().unwrap_or(0);
    let needed = config.d() + max_h + 1;
    if max_h < 1 || series.len() < needed {
        return Err(TvvarError::InsufficientData { needed: needed.max(config.d() + 2), got: series.len() });
    }
    let run = run_filter(series, config, prior)?;
    metrics_from_run(&run, series, config, horizons, HorizonDiscount::Recursive)
}

/// Metrics for several horizons from an existing complete filter run.
/// Forecast origins run over `t = d..N−h`.
pub fn metrics_from_run(
    run: &FilterRun,
    series: &SeriesFrame,
    config: &ModelConfig,
    horizons: &[usize],
    mode: HorizonDiscount,
) -> Result<Vec<FitMetrics>> {
    if !run.is_complete() {
        return Err(TvvarError::InvalidConfig("metrics need the full snapshot trajectory (thinning = 1)".into()));
    }
    let n = series.len();
    let d = config.d();
    let p = config.p();
    let max_h = horizons.iter().copied().max().unwrap_or(0);
    if max_h < 1 || horizons.contains(&0) {
        return Err(TvvarError::InvalidConfig("horizons must be ≥ 1".into()));
    }
    if n < d + max_h + 1 {
        return Err(TvvarError::InsufficientData { needed: d + max_h + 1, got: n });
    }
    let mut acc: Vec<(DVector<f64>, DVector<f64>, DVector<f64>, usize)> =
        horizons.iter().map(|_| (DVector::zeros(p), DVector::zeros(p), DVector::zeros(p), 0)).collect();
    for t in d..=n - 1 {
        let state = run
            .state_at(t)
            .ok_or_else(|| TvvarError::InvalidConfig(format!("missing posterior snapshot at t={t}")))?;
        let reach = max_h.min(n - t);
        let path = forecast_path(state, config, reach, mode)?;
        for (slot, &h) in horizons.iter().enumerate() {
            if t + h > n {
                continue;
            }
            let fc = &path[h - 1];
            let e = series.observation(t + h) - &fc.mean;
            let v = linalg::sym_inv_sqrt(&fc.covariance)
                .map_err(|_| TvvarError::Numerical { t, msg: format!("forecast covariance at h={h} is not positive definite") })?
                * &e;
            let (msse, mae, me, count) = &mut acc[slot];
            *msse += v.map(|x| x * x);
            *mae += e.map(f64::abs);
            *me += &e;
            *count += 1;
        }
    }
    Ok(horizons
        .iter()
        .zip(acc)
        .map(|(&h, (msse, mae, me, count))| {
            let c = count as f64;
            FitMetrics { h, msse: msse / c, mae: mae / c, me: me / c, count }
        })
        .collect())
}
