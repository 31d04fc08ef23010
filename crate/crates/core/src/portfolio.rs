//! Minimum-variance allocation on one-step forecasts and a sequential
//! backtest over the filter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvvarError};
use crate::filter::run_filter;
use crate::forecast::forecast;
use crate::linalg;
use crate::model::{ModelConfig, Prior};
use crate::series::SeriesFrame;

/// Relative tolerance below which `f'Q⁻¹f` or the two-constraint
/// determinant counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Default per-period target return.
pub const DEFAULT_TARGET: f64 = 0.001;

/// One allocation problem: forecast mean `f`, forecast covariance `q` and
/// target return `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationInput {
    pub f: DVector<f64>,
    pub q: DMatrix<f64>,
    pub m: f64,
}

impl AllocationInput {
    pub fn new(f: DVector<f64>, q: DMatrix<f64>, m: f64) -> Result<Self> {
        if q.shape() != (f.len(), f.len()) {
            return Err(TvvarError::Dimension("forecast covariance does not match the mean".into()));
        }
        if !m.is_finite() {
            return Err(TvvarError::InvalidConfig("target return must be finite".into()));
        }
        Ok(AllocationInput { f, q, m })
    }

    fn factor(&self) -> Result<DMatrix<f64>> {
        linalg::cholesky_lower(&self.q)
    }
}

fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("positive diagonal");
    l.transpose().solve_upper_triangular(&y).expect("positive diagonal")
}

/// Unconstrained rule: minimum `a'Qa` subject to `a'f = m`.
pub fn allocate_up(input: &AllocationInput) -> Result<DVector<f64>> {
    let l = input.factor()?;
    let w = chol_solve(&l, &input.f);
    let c = input.f.dot(&w);
    let scale = input.f.norm_squared() / input.q.trace().abs().max(f64::MIN_POSITIVE);
    if !(c > DEGENERACY_TOL * scale) {
        return Err(TvvarError::InfeasibleTarget(c));
    }
    Ok(w * (input.m / c))
}

/// Constrained rule: minimum `a'Qa` subject to `a'f = m` and `a'1 = 1`.
pub fn allocate_cp(input: &AllocationInput) -> Result<DVector<f64>> {
    let p = input.f.len();
    let l = input.factor()?;
    let ones = DVector::from_element(p, 1.0);
    let w_f = chol_solve(&l, &input.f);
    let w_1 = chol_solve(&l, &ones);
    let a = ones.dot(&w_1);
    let b = 0.5 * (ones.dot(&w_f) + input.f.dot(&w_1));
    let c = input.f.dot(&w_f);
    let det = a * c - b * b;
    if !(det > DEGENERACY_TOL * a * c) {
        return Err(TvvarError::DegenerateConstraints(det));
    }
    let lambda = (input.m * a - b) / det;
    let mu = (c - input.m * b) / det;
    Ok(w_f * lambda + w_1 * mu)
}

/// Equal weights `1/p`.
pub fn allocate_ewp(p: usize) -> Result<DVector<f64>> {
    if p < 2 {
        return Err(TvvarError::InvalidConfig("equal-weight portfolio needs at least two assets".into()));
    }
    Ok(DVector::from_element(p, 1.0 / p as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Up,
    Cp,
    Ewp,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Up, Strategy::Cp, Strategy::Ewp];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Up => "UP",
            Strategy::Cp => "CP",
            Strategy::Ewp => "EWP",
        }
    }

    pub fn allocate(self, input: &AllocationInput) -> Result<DVector<f64>> {
        match self {
            Strategy::Up => allocate_up(input),
            Strategy::Cp => allocate_cp(input),
            Strategy::Ewp => allocate_ewp(input.f.len()),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = TvvarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "up" => Ok(Strategy::Up),
            "cp" => Ok(Strategy::Cp),
            "ewp" => Ok(Strategy::Ewp),
            other => Err(TvvarError::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}

/// How realized returns are accumulated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cumulation {
    /// `c_t = Σ r_s`.
    #[default]
    Additive,
    /// `c_t = Π (1 + r_s) − 1`.
    Compound,
}

/// Backtest path of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPath {
    pub strategy: Strategy,
    pub weights: Vec<DVector<f64>>,
    pub returns: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Times at which the allocation failed and nothing was invested.
    pub flagged: Vec<usize>,
    /// `100 × mean(c_t)`.
    pub summary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    /// Trading times `t = d+2..N`.
    pub t: Vec<usize>,
    pub target: f64,
    pub cumulation: Cumulation,
    pub paths: Vec<StrategyPath>,
}

impl BacktestReport {
    pub fn path(&self, strategy: Strategy) -> Option<&StrategyPath> {
        self.paths.iter().find(|p| p.strategy == strategy)
    }
}

/// Runs the filter once and trades each strategy from `t = d+2` on, using
/// the one-step forecast mean and covariance made at `t−1`.
pub fn backtest(
    series: &SeriesFrame,
    config: &ModelConfig,
    prior: &Prior,
    target: f64,
    strategies: &[Strategy],
    cumulation: Cumulation,
) -> Result<BacktestReport> {
    let d = config.d();
    let n_obs = series.len();
    if n_obs < d + 2 {
        return Err(TvvarError::InsufficientData { needed: d + 2, got: n_obs });
    }
    if !target.is_finite() {
        return Err(TvvarError::InvalidConfig("target return must be finite".into()));
    }
    let run = run_filter(series, config, prior)?;
    let mut report = BacktestReport {
        t: (d + 2..=n_obs).collect(),
        target,
        cumulation,
        paths: strategies
            .iter()
            .map(|&strategy| StrategyPath {
                strategy,
                weights: vec![],
                returns: vec![],
                cumulative: vec![],
                flagged: vec![],
                summary: f64::NAN,
            })
            .collect(),
    };
    for &t in &report.t {
        let state = run.state_at(t - 1).expect("complete run keeps every state");
        let fc = forecast(state, config, 1)?;
        let input = AllocationInput::new(fc.mean, fc.covariance, target)?;
        let y = series.observation(t);
        for path in &mut report.paths {
            let a = match path.strategy.allocate(&input) {
                Ok(a) => a,
                Err(e) if matches!(e, TvvarError::InfeasibleTarget(_) | TvvarError::DegenerateConstraints(_)) => {
                    log::warn!("{} allocation skipped at t={t}: {e}", path.strategy.name());
                    path.flagged.push(t);
                    DVector::zeros(config.p())
                }
                Err(e) => return Err(e),
            };
            let r = a.dot(&y);
            let prev = path.cumulative.last().copied().unwrap_or(0.0);
            path.cumulative.push(match cumulation {
                Cumulation::Additive => prev + r,
                Cumulation::Compound => (1.0 + prev) * (1.0 + r) - 1.0,
            });
            path.returns.push(r);
            path.weights.push(a);
        }
    }
    for path in &mut report.paths {
        path.summary = 100.0 * path.cumulative.iter().sum::<f64>() / path.cumulative.len() as f64;
    }
    Ok(report)
}
