//! Model configuration, discount constants, priors and the regression
//! design vector.
//!
//! The state is the `(dp+1) x p` coefficient matrix whose transpose stacks
//! the intercept and the `d` lag matrices. Coefficients follow a random
//! walk whose spread is inflated each step by the diagonal discount matrix
//! `Δ = diag(δ_1, …, δ_{dp+1})`; the observation covariance follows a
//! multiplicative inverted-Wishart random walk governed by `β`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvvarError};

/// Lower bound (exclusive) of the volatility discount factor. Multi-step
/// forecast covariances need `3β − 2 > 0`.
pub const BETA_MIN: f64 = 2.0 / 3.0;

/// State discount factors, either one value shared by every state row or
/// one value per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Discount {
    Scalar(f64),
    PerState(Vec<f64>),
}

impl From<f64> for Discount {
    fn from(v: f64) -> Self {
        Discount::Scalar(v)
    }
}

/// Validated model dimensions and hyperparameters together with the
/// derived volatility constants `n` and `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfigSpec", into = "ModelConfigSpec")]
pub struct ModelConfig {
    p: usize,
    d: usize,
    delta: Vec<f64>,
    beta: f64,
    n: f64,
    k: f64,
}

/// Serialized form of [`ModelConfig`]; `n` and `k` are always re-derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfigSpec {
    pub p: usize,
    pub d: usize,
    pub delta: Discount,
    pub beta: f64,
}

impl TryFrom<ModelConfigSpec> for ModelConfig {
    type Error = TvvarError;

    fn try_from(s: ModelConfigSpec) -> Result<Self> {
        ModelConfig::new(s.p, s.d, s.delta, s.beta)
    }
}

impl From<ModelConfig> for ModelConfigSpec {
    fn from(c: ModelConfig) -> Self {
        let delta = if c.delta.iter().all(|&x| x == c.delta[0]) {
            Discount::Scalar(c.delta[0])
        } else {
            Discount::PerState(c.delta.clone())
        };
        ModelConfigSpec { p: c.p, d: c.d, delta, beta: c.beta }
    }
}

impl ModelConfig {
    pub fn new(p: usize, d: usize, delta: impl Into<Discount>, beta: f64) -> Result<Self> {
        if d < 1 {
            return Err(TvvarError::InvalidConfig("autoregressive order d must be at least 1".into()));
        }
        let (n, k) = derive_constants(p, beta)?;
        let dim = d * p + 1;
        let delta = match delta.into() {
            Discount::Scalar(v) => vec![v; dim],
            Discount::PerState(v) => v,
        };
        if delta.len() != dim {
            return Err(TvvarError::InvalidConfig(format!(
                "expected {dim} discount factors (dp+1), got {}",
                delta.len()
            )));
        }
        if let Some(bad) = delta.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(TvvarError::InvalidConfig(format!("discount factor {bad} outside (0, 1]")));
        }
        Ok(ModelConfig { p, d, delta, beta, n, k })
    }

    /// Series dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Autoregressive order.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of state rows, `dp + 1`.
    pub fn state_dim(&self) -> usize {
        self.d * self.p + 1
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Volatility degrees-of-freedom parameter `n = 1/(1−β)`.
    pub fn n(&self) -> f64 {
        self.n
    }

    /// Volatility scaling constant `k`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Degrees of freedom `βn` of the one-step predictive Student t.
    pub fn predictive_dof(&self) -> f64 {
        self.beta * self.n
    }

    /// Factor turning a volatility scale `S` into the predictive
    /// volatility mean `(1−β)k⁻¹/(3β−2)`.
    pub fn vol_mean_factor(&self) -> f64 {
        (1.0 - self.beta) / (self.k * (3.0 * self.beta - 2.0))
    }

    /// `Δ^{-h/2}` as a vector of diagonal entries.
    pub fn inflation(&self, h: u32) -> Vec<f64> {
        self.delta.iter().map(|&x| x.powf(-(h as f64) / 2.0)).collect()
    }
}

/// Volatility constants `n = 1/(1−β)` and `k = (β(1−p)+p)/(β(2−p)+p−1)`.
pub fn derive_constants(p: usize, beta: f64) -> Result<(f64, f64)> {
    if p < 1 {
        return Err(TvvarError::InvalidConfig("series dimension p must be at least 1".into()));
    }
    if !(beta > BETA_MIN && beta < 1.0) {
        return Err(TvvarError::InvalidConfig(format!(
            "volatility discount beta = {beta} outside (2/3, 1)"
        )));
    }
    let pf = p as f64;
    let n = 1.0 / (1.0 - beta);
    let k = (beta * (1.0 - pf) + pf) / (beta * (2.0 - pf) + pf - 1.0);
    Ok((n, k))
}

/// Conjugate prior at time `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    /// `(dp+1) x p` state location.
    pub m: DMatrix<f64>,
    /// `(dp+1) x (dp+1)` state spread.
    pub p: DMatrix<f64>,
    /// `p x p` volatility scale.
    pub s: DMatrix<f64>,
}

impl Prior {
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        let q = config.state_dim();
        let p = config.p();
        if self.m.shape() != (q, p) || self.p.shape() != (q, q) || self.s.shape() != (p, p) {
            return Err(TvvarError::Dimension(format!(
                "prior shapes m {:?}, P {:?}, S {:?} do not match dp+1 = {q}, p = {p}",
                self.m.shape(),
                self.p.shape(),
                self.s.shape()
            )));
        }
        crate::linalg::cholesky_lower(&self.p)
            .map_err(|_| TvvarError::InvalidConfig("prior state spread is not positive definite".into()))?;
        crate::linalg::cholesky_lower(&self.s)
            .map_err(|_| TvvarError::InvalidConfig("prior volatility scale is not positive definite".into()))?;
        Ok(())
    }
}

/// Weakly informative prior: `m = belief` (or zero), `P = 1000 I`, `S = I`.
pub fn default_prior(config: &ModelConfig, initial_belief: Option<DMatrix<f64>>) -> Result<Prior> {
    let q = config.state_dim();
    let p = config.p();
    let m = match initial_belief {
        Some(b) if b.shape() != (q, p) => {
            return Err(TvvarError::Dimension(format!(
                "initial belief is {:?}, expected ({q}, {p})",
                b.shape()
            )))
        }
        Some(b) => b,
        None => DMatrix::zeros(q, p),
    };
    Ok(Prior { m, p: DMatrix::identity(q, q) * 1000.0, s: DMatrix::identity(p, p) })
}

/// Regression vector `[1, y'_{t−1}, …, y'_{t−d}]'`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector(DVector<f64>);

impl DesignVector {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Builds the design vector from the last `d` observations, ordered
/// most-recent-first.
pub fn build_design(history: &[DVector<f64>], p: usize, d: usize) -> Result<DesignVector> {
    if history.len() != d {
        return Err(TvvarError::Dimension(format!("expected {d} lagged observations, got {}", history.len())));
    }
    let mut f = DVector::zeros(d * p + 1);
    f[0] = 1.0;
    for (lag, y) in history.iter().enumerate() {
        if y.len() != p {
            return Err(TvvarError::Dimension(format!("lag {} has dimension {}, expected {p}", lag + 1, y.len())));
        }
        f.rows_mut(1 + lag * p, p).copy_from(y);
    }
    Ok(DesignVector(f))
}
