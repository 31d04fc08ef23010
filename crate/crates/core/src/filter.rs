//! Conjugate filtering of the coefficient matrix and the volatility scale.
//!
//! Given the posterior at `t−1`,
//!
//! ```text
//! R = Δ^{-1/2} P Δ^{-1/2}        Q = F'RF + 1        e = y − m'F
//! K = RF / Q                      m ← m + K e'
//! P ← R − RFF'R / Q               S ← k⁻¹ S + e e' / Q
//! ```
//!
//! and the one-step predictive of `y_t` is a `p`-variate Student t with
//! `βn` degrees of freedom, location `m'F` and forecast scale
//! `Q* = Q k⁻¹ S`.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvvarError};
use crate::linalg;
use crate::model::{build_design, DesignVector, ModelConfig, Prior};
use crate::series::SeriesFrame;
use crate::student_t::MvStudentT;

/// Posterior of the coefficients and volatility after absorbing `y_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    /// 1-based time index of the latest absorbed observation.
    pub t: usize,
    /// `(dp+1) x p` coefficient location `m_t`.
    pub location: DMatrix<f64>,
    /// `(dp+1) x (dp+1)` coefficient spread `P_t`.
    pub spread: DMatrix<f64>,
    /// `p x p` volatility scale `S_t`.
    pub vol_scale: DMatrix<f64>,
    /// Last `d` observations, most recent first.
    pub history: Vec<DVector<f64>>,
}

impl PosteriorState {
    /// State at `t = d` built from the prior and the first `d` observations
    /// (`history` most recent first).
    pub fn initial(prior: &Prior, history: Vec<DVector<f64>>, config: &ModelConfig) -> Result<Self> {
        prior.validate(config)?;
        if history.len() != config.d() || history.iter().any(|y| y.len() != config.p()) {
            return Err(TvvarError::Dimension(format!(
                "initial history needs {} observations of dimension {}",
                config.d(),
                config.p()
            )));
        }
        Ok(PosteriorState {
            t: config.d(),
            location: prior.m.clone(),
            spread: prior.p.clone(),
            vol_scale: prior.s.clone(),
            history,
        })
    }

    /// Initial state from the first `d` rows of a series.
    pub fn from_series_start(series: &SeriesFrame, config: &ModelConfig, prior: &Prior) -> Result<Self> {
        if series.len() < config.d() {
            return Err(TvvarError::InsufficientData { needed: config.d(), got: series.len() });
        }
        let history = (1..=config.d()).rev().map(|t| series.observation(t)).collect();
        Self::initial(prior, history, config)
    }

    /// Design vector `F_{t+1}` for the next observation.
    pub fn next_design(&self, config: &ModelConfig) -> Result<DesignVector> {
        build_design(&self.history, config.p(), config.d())
    }

    /// Posterior volatility mean `E(Σ_t | y^t) = S_t/(n−2)`.
    pub fn vol_posterior_mean(&self, config: &ModelConfig) -> DMatrix<f64> {
        &self.vol_scale / (config.n() - 2.0)
    }

    fn check(&self, config: &ModelConfig) -> Result<()> {
        let q = config.state_dim();
        let p = config.p();
        if self.location.shape() != (q, p)
            || self.spread.shape() != (q, q)
            || self.vol_scale.shape() != (p, p)
            || self.history.len() != config.d()
        {
            return Err(TvvarError::Dimension(format!("posterior state at t={} does not match the model", self.t)));
        }
        Ok(())
    }
}

/// Per-step quantities of one filter update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Time index of the observation absorbed in this step.
    pub t: usize,
    /// One-step forecast location `m'_{t−1} F_t`.
    pub mean: DVector<f64>,
    /// One-step forecast error `e_t`.
    pub error: DVector<f64>,
    /// `Q_t = F'RF + 1`.
    pub q: f64,
    /// Adaptive vector `K_t = RF/Q`.
    pub gain: DVector<f64>,
    /// Prior spread `R_t`; only retained by [`run_filter_with`] when
    /// requested.
    pub prior_spread: Option<DMatrix<f64>>,
    /// One-step forecast scale `Q*_{t−1}(1) = Q k⁻¹ S_{t−1}`.
    pub forecast_scale: DMatrix<f64>,
    /// Log one-step predictive density of `y_t`.
    pub logpred: f64,
    /// Jitter escalations applied to `P_t` and `S_t` respectively.
    pub jitter: (u32, u32),
}

/// Numerical knobs of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    /// Keep every `thinning`-th posterior snapshot (1 keeps all).
    pub thinning: usize,
    /// Jitter base: `base * trace / dim` is added on Cholesky failure.
    pub jitter_base: f64,
    pub max_jitter_escalations: u32,
    /// Log a warning when `Q_t` exceeds this value.
    pub q_warn_threshold: f64,
    /// Retain `R_t` in each [`StepDiagnostics`].
    pub keep_prior_spread: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            thinning: 1,
            jitter_base: 1e-10,
            max_jitter_escalations: 3,
            q_warn_threshold: 1e12,
            keep_prior_spread: false,
        }
    }
}

/// Time-`t` prior spread `R = Δ^{-1/2} P Δ^{-1/2}` and volatility scale
/// `k⁻¹ S`.
pub fn evolve(state: &PosteriorState, config: &ModelConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let w = config.inflation(1);
    let r = DMatrix::from_fn(state.spread.nrows(), state.spread.ncols(), |i, j| w[i] * state.spread[(i, j)] * w[j]);
    (r, &state.vol_scale / config.k())
}

/// One conjugate update with default [`FilterOptions`].
pub fn update(state: &PosteriorState, y: &DVector<f64>, config: &ModelConfig) -> Result<(PosteriorState, StepDiagnostics)> {
    update_with(state, y, config, &FilterOptions::default())
}

pub fn update_with(
    state: &PosteriorState,
    y: &DVector<f64>,
    config: &ModelConfig,
    opts: &FilterOptions,
) -> Result<(PosteriorState, StepDiagnostics)> {
    state.check(config)?;
    let t = state.t + 1;
    if y.len() != config.p() {
        return Err(TvvarError::Dimension(format!("observation at t={t} has dimension {}, expected {}", y.len(), config.p())));
    }
    let f = state.next_design(config)?.into_inner();
    let (r, s_prior) = evolve(state, config);

    let rf = &r * &f;
    let q = f.dot(&rf) + 1.0;
    if !q.is_finite() {
        return Err(TvvarError::Numerical { t, msg: format!("non-finite Q = {q}") });
    }
    if q > opts.q_warn_threshold {
        warn!("t={t}: Q = {q:e} exceeds {:e}", opts.q_warn_threshold);
    }
    let mean = state.location.transpose() * &f;
    let error = y - &mean;
    let gain = &rf / q;

    let location = &state.location + &gain * error.transpose();
    let spread_raw = &r - (&rf * rf.transpose()) / q;
    let scale_raw = &s_prior + (&error * error.transpose()) / q;

    let spread = linalg::ensure_spd(&spread_raw, opts.jitter_base, opts.max_jitter_escalations)
        .ok_or_else(|| TvvarError::Numerical { t, msg: "state spread P lost positive definiteness".into() })?;
    let scale = linalg::ensure_spd(&scale_raw, opts.jitter_base, opts.max_jitter_escalations)
        .ok_or_else(|| TvvarError::Numerical { t, msg: "volatility scale S lost positive definiteness".into() })?;
    if spread.jitter_steps + scale.jitter_steps > 0 {
        debug!("t={t}: jitter applied (P: {}, S: {})", spread.jitter_steps, scale.jitter_steps);
    }

    let forecast_scale = linalg::symmetrize(&(&s_prior * q));
    let logpred = MvStudentT::from_forecast_scale(config.predictive_dof(), mean.clone(), &forecast_scale)
        .map_err(|e| TvvarError::Numerical { t, msg: format!("one-step predictive: {e}") })?
        .ln_pdf(y);

    let mut history = Vec::with_capacity(config.d());
    history.push(y.clone());
    history.extend(state.history.iter().take(config.d() - 1).cloned());

    let next = PosteriorState { t, location, spread: spread.matrix, vol_scale: scale.matrix, history };
    let diag = StepDiagnostics {
        t,
        mean,
        error,
        q,
        gain,
        prior_spread: Some(r),
        forecast_scale,
        logpred,
        jitter: (spread.jitter_steps, scale.jitter_steps),
    };
    Ok((next, diag))
}

/// Output of [`run_filter`].
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub final_state: PosteriorState,
    /// One entry per update, `t = d+1..N`.
    pub diagnostics: Vec<StepDiagnostics>,
    /// Posterior snapshots starting with the prior state at `t = d`.
    pub snapshots: Vec<PosteriorState>,
    pub thinning: usize,
}

impl FilterRun {
    /// True when every state `t = d..N` is retained.
    pub fn is_complete(&self) -> bool {
        self.thinning == 1
    }

    /// Snapshot with time index `t`, if retained.
    pub fn state_at(&self, t: usize) -> Option<&PosteriorState> {
        let first = self.snapshots.first()?.t;
        if self.thinning == 1 {
            return self.snapshots.get(t.checked_sub(first)?);
        }
        self.snapshots.iter().find(|s| s.t == t)
    }
}

/// Runs the filter over `t = d+1..N` with default options.
pub fn run_filter(series: &SeriesFrame, config: &ModelConfig, prior: &Prior) -> Result<FilterRun> {
    run_filter_with(series, config, prior, &FilterOptions::default())
}

pub fn run_filter_with(series: &SeriesFrame, config: &ModelConfig, prior: &Prior, opts: &FilterOptions) -> Result<FilterRun> {
    if series.dim() != config.p() {
        return Err(TvvarError::Dimension(format!("series has {} columns, model expects {}", series.dim(), config.p())));
    }
    let d = config.d();
    if series.len() < d + 1 {
        return Err(TvvarError::InsufficientData { needed: d + 1, got: series.len() });
    }
    let thinning = opts.thinning.max(1);
    let mut state = PosteriorState::from_series_start(series, config, prior)?;
    let mut snapshots = vec![state.clone()];
    let mut diagnostics = Vec::with_capacity(series.len() - d);
    for t in d + 1..=series.len() {
        let (next, mut diag) = update_with(&state, &series.observation(t), config, opts)?;
        if !opts.keep_prior_spread {
            diag.prior_spread = None;
        }
        diagnostics.push(diag);
        state = next;
        if (t - d).is_multiple_of(thinning) || t == series.len() {
            snapshots.push(state.clone());
        }
    }
    Ok(FilterRun { final_state: state, diagnostics, snapshots, thinning })
}
