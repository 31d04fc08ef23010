//! Model comparison: sequential Bayes factors, the plug-in log-likelihood
//! of the volatility path, and order/discount selection over a grid.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, TvvarError};
use crate::filter::{run_filter, PosteriorState, StepDiagnostics};
use crate::forecast::{metrics_from_run, HorizonDiscount};
use crate::linalg;
use crate::model::{default_prior, ModelConfig, Prior};
use crate::series::SeriesFrame;

/// Relative eigenvalue threshold used for the non-zero spectrum of
/// `I − B̂_t`, scaled by the larger spectral radius of `B̂_t` and `I − B̂_t`.
pub const EIGEN_REL_TOL: f64 = 1e-10;

/// Log Bayes factor of model 1 against model 2 for the observation
/// `y_next`, from each model's one-step forecast location and scale.
///
/// With `ν = βn` and density scales `A_i = Q*_i/ν`,
/// `log H = ½ log(|A₂|/|A₁|) − (ν+p)/2 · log((ν + z₁'A₁⁻¹z₁)/(ν + z₂'A₂⁻¹z₂))`.
pub fn log_bayes_factor_step(
    diag1: &StepDiagnostics,
    diag2: &StepDiagnostics,
    y_next: &DVector<f64>,
    config: &ModelConfig,
) -> Result<f64> {
    let p = config.p();
    if diag1.mean.len() != p || diag2.mean.len() != p || y_next.len() != p {
        return Err(TvvarError::Dimension("Bayes factor inputs do not share p".into()));
    }
    let nu = config.predictive_dof();
    let term = |dg: &StepDiagnostics| -> Result<(f64, f64)> {
        let a = &dg.forecast_scale / nu;
        let chol = linalg::cholesky_lower(&a)
            .map_err(|_| TvvarError::NotPositiveDefinite(format!("forecast scale at t={}", dg.t)))?;
        let z = y_next - &dg.mean;
        let w = chol.solve_lower_triangular(&z).expect("positive diagonal");
        let log_det = 2.0 * chol.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        Ok((log_det, w.norm_squared()))
    };
    let (ld1, q1) = term(diag1)?;
    let (ld2, q2) = term(diag2)?;
    Ok(0.5 * (ld2 - ld1) - 0.5 * (nu + p as f64) * ((nu + q1).ln() - (nu + q2).ln()))
}

/// Bayes factor `H_t(1)` of model 1 against model 2.
pub fn bayes_factor_step(
    diag1: &StepDiagnostics,
    diag2: &StepDiagnostics,
    y_next: &DVector<f64>,
    config: &ModelConfig,
) -> Result<f64> {
    log_bayes_factor_step(diag1, diag2, y_next, config).map(f64::exp)
}

/// Sequential comparison of two models on one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTrace {
    /// Forecast origin `t` of each factor (the predicted value is `y_{t+1}`).
    pub t: Vec<usize>,
    pub bayes_factor: Vec<f64>,
    pub log_bayes_factor: Vec<f64>,
    /// Running mean of `H_t(1)`.
    pub running_mean: Vec<f64>,
    pub logpred_a: Vec<f64>,
    pub logpred_b: Vec<f64>,
    pub mean_bayes_factor: f64,
    pub mean_log_bayes_factor: f64,
}

/// Runs both filters and emits `H_t(1)` of model A against model B for
/// every origin where both models have a data-based forecast.
pub fn compare_models(
    series: &SeriesFrame,
    config_a: &ModelConfig,
    config_b: &ModelConfig,
    prior_a: &Prior,
    prior_b: &Prior,
) -> Result<ComparisonTrace> {
    if config_a.p() != config_b.p() {
        return Err(TvvarError::InvalidConfig("compared models must share p".into()));
    }
    if config_a.beta() != config_b.beta() {
        return Err(TvvarError::InvalidConfig(
            "Bayes factors need a common beta; compare across beta with the log-likelihood".into(),
        ));
    }
    let run_a = run_filter(series, config_a, prior_a)?;
    let run_b = run_filter(series, config_b, prior_b)?;
    let start = config_a.d().max(config_b.d()) + 1;
    let mut trace = ComparisonTrace {
        t: vec![],
        bayes_factor: vec![],
        log_bayes_factor: vec![],
        running_mean: vec![],
        logpred_a: vec![],
        logpred_b: vec![],
        mean_bayes_factor: f64::NAN,
        mean_log_bayes_factor: f64::NAN,
    };
    let mut sum = 0.0;
    for t in start..=series.len() {
        let da = &run_a.diagnostics[t - config_a.d() - 1];
        let db = &run_b.diagnostics[t - config_b.d() - 1];
        debug_assert_eq!((da.t, db.t), (t, t));
        let lh = log_bayes_factor_step(da, db, &series.observation(t), config_a)?;
        let h = lh.exp();
        sum += h;
        trace.t.push(t - 1);
        trace.bayes_factor.push(h);
        trace.log_bayes_factor.push(lh);
        trace.running_mean.push(sum / trace.t.len() as f64);
        trace.logpred_a.push(da.logpred);
        trace.logpred_b.push(db.logpred);
    }
    let m = trace.t.len() as f64;
    trace.mean_bayes_factor = sum / m;
    trace.mean_log_bayes_factor = trace.log_bayes_factor.iter().sum::<f64>() / m;
    Ok(trace)
}

/// Condition number of `LL'` from its Cholesky factor.
fn condition(l: &DMatrix<f64>) -> f64 {
    let d = l.diagonal().map(f64::abs);
    let ratio = d.max() / d.min();
    ratio * ratio
}

/// Contribution of one time step to the log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodTerm {
    pub t: usize,
    /// `e_t' Σ̂_t⁻¹ e_t` (enters with factor −½).
    pub quadratic: f64,
    /// `log |Σ̂_{t−1}|`.
    pub log_det_prev: f64,
    /// `log |Σ̂_t|`.
    pub log_det_curr: f64,
    /// `log |L_t|`, sum of logs of the surviving eigenvalues.
    pub log_abs_l: f64,
    /// Number of eigenvalues of `I − B̂_t` above the threshold.
    pub survived: usize,
}

/// Evaluated log-likelihood of the volatility path with its breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub total: f64,
    pub constant: f64,
    /// `−½ Σ e'Σ̂⁻¹e`.
    pub quadratic: f64,
    /// `(n−p)/2 Σ log|Σ̂_{t−1}|`.
    pub log_det_prev: f64,
    /// `−(n−p)/2 Σ log|Σ̂_t|`.
    pub log_det_curr: f64,
    /// `−(p/2) Σ log|L_t|`.
    pub eigen: f64,
    pub terms: Vec<LikelihoodTerm>,
    /// True when some multivariate-gamma argument was ≤ 0 and `log|Γ|`
    /// was used.
    pub gamma_reflected: bool,
    pub note: String,
}

/// `log |Γ(x)|`, valid for non-positive non-integer `x` as well.
fn ln_abs_gamma(x: f64) -> f64 {
    if x >= 0.5 {
        ln_gamma(x)
    } else {
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().abs().ln() - ln_gamma(1.0 - x)
    }
}

/// `log Γ_p(a)` (absolute value of the gamma factors).
pub fn ln_multivariate_gamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (1..=p).map(|j| ln_abs_gamma(a + (1.0 - j as f64) / 2.0)).sum::<f64>()
}

/// Additive constant `c` of the log-likelihood for `N` observations.
pub fn likelihood_constant(config: &ModelConfig, n_obs: usize) -> f64 {
    let p = config.p() as f64;
    let n = config.n();
    let big_n = n_obs as f64;
    let pi = std::f64::consts::PI;
    -(big_n * p / 2.0) * (2.0 * pi * pi).ln() - (big_n * p * (n - p) / 2.0) * config.k().ln()
        + big_n * (ln_multivariate_gamma(config.p(), (n + 1.0) / 2.0) - ln_multivariate_gamma(config.p(), n / 2.0))
}

/// Plugs `Σ̂_t = S_t/(n−2)` into the log-likelihood of `Σ_{d+1}, …, Σ_N`.
///
/// `snapshots` must hold every posterior state `t = d..N` in order.
pub fn evaluate_log_likelihood(snapshots: &[PosteriorState], series: &SeriesFrame, config: &ModelConfig) -> Result<LikelihoodReport> {
    let d = config.d();
    let n_obs = series.len();
    let contiguous = snapshots.len() == n_obs - d + 1 && snapshots.iter().enumerate().all(|(i, s)| s.t == d + i);
    if n_obs < d + 1 || !contiguous {
        return Err(TvvarError::InvalidConfig(
            "log-likelihood needs the full, unthinned snapshot trajectory t = d..N".into(),
        ));
    }
    let p = config.p();
    let n = config.n();
    let k = config.k();
    let mut terms = Vec::with_capacity(n_obs - d);
    for w in snapshots.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let t = cur.t;
        let f = prev.next_design(config)?.into_inner();
        let e = series.observation(t) - prev.location.transpose() * &f;
        let sig_prev = prev.vol_posterior_mean(config);
        let sig_cur = cur.vol_posterior_mean(config);
        let numerical = |what: &str| TvvarError::Numerical { t, msg: format!("{what} is not positive definite") };

        let prec_cur = linalg::inverse_spd(&sig_cur).map_err(|_| numerical("posterior volatility mean"))?;
        let quadratic = e.dot(&(&prec_cur * &e));
        let log_det_prev = linalg::log_det_spd(&sig_prev).map_err(|_| numerical("previous volatility mean"))?;
        let log_det_curr = linalg::log_det_spd(&sig_cur).map_err(|_| numerical("volatility mean"))?;

        // I − k⁻¹ U'⁻¹ Σ̂_t⁻¹ U⁻¹ with U'U = Σ̂_{t−1}⁻¹. The spectrum depends on U
        // only through U'U, so U⁻¹ = L' with LL' = Σ̂_{t−1} gives
        // B̂ = k⁻¹ X'X, X = M⁻¹L, MM' = Σ̂_t, without forming any inverse.
        let l_prev = linalg::cholesky_lower(&sig_prev).map_err(|_| numerical("previous volatility mean"))?;
        let l_cur = linalg::cholesky_lower(&sig_cur).map_err(|_| numerical("volatility mean"))?;
        let x = l_cur
            .solve_lower_triangular(&l_prev)
            .ok_or_else(|| numerical("Cholesky factor of the volatility mean"))?;
        let b_hat = x.tr_mul(&x) / k;
        let complement = DMatrix::identity(p, p) - &b_hat;
        let eig = nalgebra::SymmetricEigen::new(complement).eigenvalues;
        // thresholds are relative to the spectral scale of B̂ (about one) and
        // of I − B̂, whose one genuine eigenvalue can be tiny; rounding in B̂
        // grows with the conditioning of the volatility means
        let scale = eig
            .iter()
            .fold(linalg::spectral_radius_sym(&b_hat), |a, &l| a.max(l.abs()));
        let noise = 100.0 * f64::EPSILON * condition(&l_prev).max(condition(&l_cur));
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -(1e-8 + noise) * scale.max(1.0) {
            return Err(TvvarError::Numerical {
                t,
                msg: format!("I − B̂ has a negative eigenvalue {min:e} (spectral scale {scale:e})"),
            });
        }
        let survivors: Vec<f64> = eig.iter().copied().filter(|&l| l > EIGEN_REL_TOL.max(noise) * scale).collect();
        let log_abs_l = survivors.iter().map(|l| l.ln()).sum::<f64>();
        terms.push(LikelihoodTerm { t, quadratic, log_det_prev, log_det_curr, log_abs_l, survived: survivors.len() });
    }
    let pf = p as f64;
    let quadratic = -0.5 * terms.iter().map(|x| x.quadratic).sum::<f64>();
    let log_det_prev = 0.5 * (n - pf) * terms.iter().map(|x| x.log_det_prev).sum::<f64>();
    let log_det_curr = -0.5 * (n - pf) * terms.iter().map(|x| x.log_det_curr).sum::<f64>();
    let eigen = -0.5 * pf * terms.iter().map(|x| x.log_abs_l).sum::<f64>();
    let constant = likelihood_constant(config, n_obs);
    let gamma_reflected = (n / 2.0) - (pf - 1.0) / 2.0 <= 0.0;
    Ok(LikelihoodReport {
        total: constant + quadratic + log_det_prev + log_det_curr + eigen,
        constant,
        quadratic,
        log_det_prev,
        log_det_curr,
        eigen,
        terms,
        gamma_reflected,
        note: "constant uses the multivariate gamma ratio Γ_p((n+1)/2)/Γ_p(n/2); comparisons across beta shift by it".into(),
    })
}

/// Grid of candidate hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: Vec<usize>,
    pub delta: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Grid {
    /// Cells in `d`-major, then `delta`, then `beta` order.
    pub fn cells(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &delta in &self.delta {
                for &beta in &self.beta {
                    out.push((d, delta, beta));
                }
            }
        }
        out
    }
}

/// Scores of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub loglik: f64,
    pub msse1: DVector<f64>,
    pub mae1: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub d: usize,
    pub delta: f64,
    pub beta: f64,
    /// Scores, or the failure message of this cell.
    pub outcome: std::result::Result<CellScore, String>,
}

impl GridCell {
    fn msse_distance(&self) -> f64 {
        match &self.outcome {
            Ok(s) => s.msse1.iter().map(|m| (m - 1.0) * (m - 1.0)).sum::<f64>().sqrt(),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn loglik(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.loglik)
    }
}

/// Log-likelihood, MSSE(1) and MAE(1) of one configuration.
pub fn evaluate_cell(series: &SeriesFrame, config: &ModelConfig, prior: &Prior) -> Result<CellScore> {
    let run = run_filter(series, config, prior)?;
    let lik = evaluate_log_likelihood(&run.snapshots, series, config)?;
    let m = metrics_from_run(&run, series, config, &[1], HorizonDiscount::Recursive)?.remove(0);
    Ok(CellScore { loglik: lik.total, msse1: m.msse, mae1: m.mae })
}

/// Orders cells by log-likelihood (descending); ties go to the MSSE(1)
/// closest to one, then to the smaller `d`. Failed cells sort last.
pub fn rank_cells(cells: &mut [GridCell]) {
    let key = |c: &GridCell| c.loglik().filter(|l| !l.is_nan()).unwrap_or(f64::NEG_INFINITY);
    cells.sort_by(|a, b| {
        let (fa, fb) = (a.outcome.is_err(), b.outcome.is_err());
        fa.cmp(&fb)
            .then_with(|| key(b).partial_cmp(&key(a)).unwrap_or(Ordering::Equal))
            .then_with(|| a.msse_distance().partial_cmp(&b.msse_distance()).unwrap_or(Ordering::Equal))
            .then_with(|| a.d.cmp(&b.d))
    });
}

/// Scores every grid cell with the default prior and ranks them.
pub fn grid_search(series: &SeriesFrame, grid: &Grid) -> Result<Vec<GridCell>> {
    grid_search_with(series, grid, |c| default_prior(c, None))
}

pub fn grid_search_with<F>(series: &SeriesFrame, grid: &Grid, prior_for: F) -> Result<Vec<GridCell>>
where
    F: Fn(&ModelConfig) -> Result<Prior>,
{
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(TvvarError::InvalidConfig("empty grid".into()));
    }
    let mut out: Vec<GridCell> = cells
        .into_iter()
        .map(|(d, delta, beta)| {
            let outcome = ModelConfig::new(series.dim(), d, delta, beta)
                .and_then(|c| prior_for(&c).and_then(|pr| evaluate_cell(series, &c, &pr)))
                .map_err(|e| e.to_string());
            GridCell { d, delta, beta, outcome }
        })
        .collect();
    rank_cells(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::update;
    use crate::model::default_prior;
    use approx::assert_relative_eq;

    fn series() -> SeriesFrame {
        let vals: Vec<f64> = (0..80)
            .map(|i| {
                let x = i as f64;
                (0.37 * x).sin() + 0.3 * (1.7 * x).cos() + 0.05 * ((x * 7.3).sin() * 43758.5453).fract()
            })
            .collect();
        let mut two = Vec::new();
        for (i, v) in vals.iter().enumerate() {
            two.push(*v);
            two.push(0.5 * v + 0.2 * (i as f64 * 0.11).cos());
        }
        SeriesFrame::from_matrix(DMatrix::from_row_slice(80, 2, &two)).unwrap()
    }

    #[test]
    fn identical_models_give_unit_factor_and_reciprocity() {
        let s = series();
        let c = ModelConfig::new(2, 1, 0.98, 0.9).unwrap();
        let pr = default_prior(&c, None).unwrap();
        let tr = compare_models(&s, &c, &c, &pr, &pr).unwrap();
        assert!(tr.bayes_factor.iter().all(|&h| (h - 1.0).abs() < 1e-14));
        assert_relative_eq!(tr.mean_bayes_factor, 1.0, epsilon = 1e-14);

        let c2 = ModelConfig::new(2, 2, 0.95, 0.9).unwrap();
        let pr2 = default_prior(&c2, None).unwrap();
        let ab = compare_models(&s, &c, &c2, &pr, &pr2).unwrap();
        let ba = compare_models(&s, &c2, &c, &pr2, &pr).unwrap();
        for (x, y) in ab.bayes_factor.iter().zip(&ba.bayes_factor) {
            assert_relative_eq!(x * y, 1.0, epsilon = 1e-10);
        }
        assert_eq!(ab.t.first(), Some(&2));
    }

    #[test]
    fn factor_equals_density_ratio() {
        let s = series();
        let c1 = ModelConfig::new(2, 1, 0.98, 0.9).unwrap();
        let c2 = ModelConfig::new(2, 3, 0.9, 0.9).unwrap();
        let tr = compare_models(&s, &c1, &c2, &default_prior(&c1, None).unwrap(), &default_prior(&c2, None).unwrap()).unwrap();
        for i in 0..tr.t.len() {
            assert!((tr.log_bayes_factor[i] - (tr.logpred_a[i] - tr.logpred_b[i])).abs() < 1e-8);
        }
        // telescoping over a window
        let w = 10..40;
        let lhs: f64 = tr.log_bayes_factor[w.clone()].iter().sum();
        let rhs: f64 = tr.logpred_a[w.clone()].iter().sum::<f64>() - tr.logpred_b[w].iter().sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn compare_rejects_mismatched_beta() {
        let s = series();
        let a = ModelConfig::new(2, 1, 0.98, 0.9).unwrap();
        let b = ModelConfig::new(2, 1, 0.98, 0.95).unwrap();
        let pa = default_prior(&a, None).unwrap();
        assert!(compare_models(&s, &a, &b, &pa, &pa).is_err());
    }

    #[test]
    fn scalar_eigen_term_matches_direct_formula() {
        let vals: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let s = SeriesFrame::from_matrix(DMatrix::from_column_slice(40, 1, &vals)).unwrap();
        let c = ModelConfig::new(1, 1, 0.95, 0.9).unwrap();
        let run = run_filter(&s, &c, &default_prior(&c, None).unwrap()).unwrap();
        let rep = evaluate_log_likelihood(&run.snapshots, &s, &c).unwrap();
        for (term, w) in rep.terms.iter().zip(run.snapshots.windows(2)) {
            let sig_prev = w[0].vol_scale[(0, 0)] / (c.n() - 2.0);
            let sig_cur = w[1].vol_scale[(0, 0)] / (c.n() - 2.0);
            let direct = (1.0 - sig_prev / (c.k() * sig_cur)).ln();
            assert_relative_eq!(term.log_abs_l, direct, epsilon = 1e-9, max_relative = 1e-9);
            assert_eq!(term.survived, 1);
        }
        let sum = rep.constant + rep.quadratic + rep.log_det_prev + rep.log_det_curr + rep.eigen;
        assert_relative_eq!(rep.total, sum, epsilon = 1e-9);
    }

    #[test]
    fn likelihood_terms_are_local() {
        let s = series();
        let c = ModelConfig::new(2, 1, 0.98, 0.9).unwrap();
        let run = run_filter(&s, &c, &default_prior(&c, None).unwrap()).unwrap();
        let base = evaluate_log_likelihood(&run.snapshots, &s, &c).unwrap();
        let mut snaps = run.snapshots.clone();
        let idx = 30;
        snaps[idx].location[(0, 0)] += 0.1;
        snaps[idx].spread *= 2.0;
        let changed = evaluate_log_likelihood(&snaps, &s, &c).unwrap();
        let t = snaps[idx].t;
        for (a, b) in base.terms.iter().zip(&changed.terms) {
            if a.t == t + 1 {
                assert_ne!(a.quadratic, b.quadratic);
                assert_eq!(a.log_abs_l, b.log_abs_l);
            } else {
                assert_eq!(a, b);
            }
        }
        let bad: Vec<_> = base.terms.iter().filter(|x| x.survived != 1).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn inconsistent_volatility_path_is_reported() {
        let s = series();
        let c = ModelConfig::new(2, 1, 0.98, 0.9).unwrap();
        let run = run_filter(&s, &c, &default_prior(&c, None).unwrap()).unwrap();
        let mut snaps = run.snapshots.clone();
        // a volatility that shrinks faster than discounting allows
        snaps[30].vol_scale *= 0.5;
        let err = evaluate_log_likelihood(&snaps, &s, &c).unwrap_err();
        assert!(matches!(err, TvvarError::Numerical { t, .. } if t == snaps[30].t));
    }

    #[test]
    fn ill_conditioned_volatility_keeps_rank_one_term() {
        use crate::simulate::{generate, var_coefficients, SimSpec, VolatilityMode};
        // a drifting volatility path leaves S with condition number ~1e8
        let truth = ModelConfig::new(3, 2, 0.98, 0.9).unwrap();
        let eye = DMatrix::identity(3, 3);
        let phi = var_coefficients(&DVector::zeros(3), &[&eye * 0.5, DMatrix::zeros(3, 3)]);
        let spec = SimSpec::new(truth, phi, &eye * 1e-4, 800, 7)
            .with_volatility(VolatilityMode::BetaEvolution)
            .with_pstar(DMatrix::zeros(7, 7));
        let s = generate(&spec).unwrap().series;
        let c = ModelConfig::new(3, 3, 0.98, 0.9).unwrap();
        let run = run_filter(&s, &c, &default_prior(&c, None).unwrap()).unwrap();
        let rep = evaluate_log_likelihood(&run.snapshots, &s, &c).unwrap();
        assert!(rep.total.is_finite());
        assert!(rep.terms.iter().all(|x| x.survived == 1));
    }

    #[test]
    fn likelihood_requires_full_trajectory() {
        let s = series();
        let c = ModelConfig::new(2, 1, 0.98, 0.9).unwrap();
        let run = run_filter(&s, &c, &default_prior(&c, None).unwrap()).unwrap();
        let mut snaps = run.snapshots.clone();
        snaps.remove(5);
        assert!(evaluate_log_likelihood(&snaps, &s, &c).is_err());
    }

    #[test]
    fn single_cell_grid_equals_direct_evaluation() {
        let s = series();
        let grid = Grid { d: vec![2], delta: vec![0.98], beta: vec![0.9] };
        let cells = grid_search(&s, &grid).unwrap();
        let c = ModelConfig::new(2, 2, 0.98, 0.9).unwrap();
        let direct = evaluate_cell(&s, &c, &default_prior(&c, None).unwrap()).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].outcome.as_ref().unwrap(), &direct);
    }

    #[test]
    fn failing_cells_are_recorded_and_ranked_last() {
        let s = series();
        let grid = Grid { d: vec![1], delta: vec![0.98, 1.5], beta: vec![0.9] };
        let cells = grid_search(&s, &grid).unwrap();
        assert!(cells[0].outcome.is_ok());
        assert!(cells[1].outcome.is_err());
        assert!(grid_search(&s, &Grid { d: vec![], delta: vec![0.9], beta: vec![0.9] }).is_err());
    }

    #[test]
    fn ranking_tie_breaks() {
        let mk = |d, ll: f64, m: f64| GridCell {
            d,
            delta: 0.9,
            beta: 0.9,
            outcome: Ok(CellScore { loglik: ll, msse1: DVector::from_vec(vec![m]), mae1: DVector::zeros(1) }),
        };
        let mut cells = vec![mk(3, -5.0, 1.0), mk(2, -5.0, 1.0), mk(1, -5.0, 1.4), mk(4, -1.0, 3.0)];
        rank_cells(&mut cells);
        let order: Vec<usize> = cells.iter().map(|c| c.d).collect();
        assert_eq!(order, vec![4, 2, 3, 1]);
    }

    #[test]
    fn multivariate_gamma_p1_is_gamma() {
        assert_relative_eq!(ln_multivariate_gamma(1, 3.5), ln_gamma(3.5), epsilon = 1e-12);
        // Γ_2(a) = π^{1/2} Γ(a) Γ(a − 1/2)
        let a = 4.2;
        let expect = 0.5 * std::f64::consts::PI.ln() + ln_gamma(a) + ln_gamma(a - 0.5);
        assert_relative_eq!(ln_multivariate_gamma(2, a), expect, epsilon = 1e-12);
        // reflection branch: |Γ(−0.5)| = 2√π
        assert_relative_eq!(ln_abs_gamma(-0.5), (2.0 * std::f64::consts::PI.sqrt()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn bayes_factor_step_from_single_updates() {
        let c = ModelConfig::new(1, 1, 0.98, 0.9).unwrap();
        let pr = default_prior(&c, None).unwrap();
        let s0 = PosteriorState::initial(&pr, vec![DVector::from_vec(vec![0.2])], &c).unwrap();
        let y = DVector::from_vec(vec![0.7]);
        let (_, d1) = update(&s0, &y, &c).unwrap();
        let mut s0b = s0.clone();
        s0b.spread *= 0.5;
        let (_, d2) = update(&s0b, &y, &c).unwrap();
        let h = bayes_factor_step(&d1, &d2, &y, &c).unwrap();
        assert!(h > 0.0);
        assert_relative_eq!(h.ln(), d1.logpred - d2.logpred, epsilon = 1e-12);
    }
}
