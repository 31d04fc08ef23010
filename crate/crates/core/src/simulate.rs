//! Synthetic data from the generative model, including the singular
//! matrix-beta evolution of the volatility.
//!
//! The beta variate driving `Σ_t⁻¹ = k U' B U` is drawn with `βn + p − 1`
//! Wishart degrees of freedom. That value makes `E(Σ_t⁻¹) = Σ_{t−1}⁻¹`
//! hold exactly with `k = (βn+p−1)/(n+p−1)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvvarError};
use crate::linalg;
use crate::model::{build_design, ModelConfig};
use crate::series::SeriesFrame;

/// Deterministic generator used by every sampler in the crate.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "path")]
pub enum VolatilityMode {
    /// `Σ_t = Σ_d` throughout.
    Fixed,
    /// Singular-beta random walk on the precision.
    BetaEvolution,
    /// User-supplied `Σ_{d+1}, …, Σ_N`.
    UserPath(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub config: ModelConfig,
    /// `(dp+1) x p` coefficient matrix at `t = d`.
    pub phi0: DMatrix<f64>,
    /// Volatility at `t = d`.
    pub sigma0: DMatrix<f64>,
    /// Series length `N`.
    pub n: usize,
    pub seed: u64,
    pub volatility: VolatilityMode,
    /// Nominal spread behind the coefficient drift
    /// `W = Δ^{-1/2} P* Δ^{-1/2} − P*`. Zero disables drift.
    pub pstar: DMatrix<f64>,
    /// Abort once `|y_t|` exceeds this.
    pub guard: f64,
}

impl SimSpec {
    /// Spec with `P* = 0.01 I`, fixed volatility and a `1e6` guard.
    pub fn new(config: ModelConfig, phi0: DMatrix<f64>, sigma0: DMatrix<f64>, n: usize, seed: u64) -> Self {
        let q = config.state_dim();
        SimSpec {
            config,
            phi0,
            sigma0,
            n,
            seed,
            volatility: VolatilityMode::Fixed,
            pstar: DMatrix::identity(q, q) * 0.01,
            guard: 1e6,
        }
    }

    pub fn with_volatility(mut self, mode: VolatilityMode) -> Self {
        self.volatility = mode;
        self
    }

    pub fn with_pstar(mut self, pstar: DMatrix<f64>) -> Self {
        self.pstar = pstar;
        self
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let (p, q) = (c.p(), c.state_dim());
        if self.phi0.shape() != (q, p) || self.sigma0.shape() != (p, p) || self.pstar.shape() != (q, q) {
            return Err(TvvarError::Dimension("simulation spec does not match the model dimensions".into()));
        }
        linalg::cholesky_lower(&self.sigma0)?;
        if self.n <= c.d() {
            return Err(TvvarError::InvalidConfig(format!("series length {} must exceed d = {}", self.n, c.d())));
        }
        if let VolatilityMode::UserPath(path) = &self.volatility {
            if path.len() != self.n - c.d() || path.iter().any(|s| s.shape() != (p, p)) {
                return Err(TvvarError::Dimension(format!("volatility path needs {} matrices of size {p}", self.n - c.d())));
            }
        }
        if !(self.guard > 0.0) {
            return Err(TvvarError::InvalidConfig("explosion guard must be positive".into()));
        }
        Ok(())
    }
}

/// Draw `M + L_U Z L_V'` with `L_U L_U' = U`, `L_V L_V' = V`.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    location: &DMatrix<f64>,
    row_spread: &DMatrix<f64>,
    col_spread: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (r, c) = location.shape();
    if row_spread.shape() != (r, r) || col_spread.shape() != (c, c) {
        return Err(TvvarError::Dimension("matrix normal spreads do not match the location".into()));
    }
    let lu = linalg::psd_factor(row_spread)?;
    let lv = linalg::psd_factor(col_spread)?;
    let z = DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(location + lu * z * lv.transpose())
}

/// Multivariate normal draw with covariance `cov`.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let l = linalg::psd_factor(cov)?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + l * z)
}

/// Wishart `W_p(dof, I)` by the Bartlett decomposition; `dof > p − 1`.
pub fn sample_wishart_identity<R: Rng + ?Sized>(p: usize, dof: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if !(dof > p as f64 - 1.0) {
        return Err(TvvarError::InvalidConfig(format!("Wishart dof {dof} must exceed {}", p as f64 - 1.0)));
    }
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(dof - i as f64)
            .map_err(|e| TvvarError::InvalidConfig(format!("chi-square dof {}: {e}", dof - i as f64)))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(&a * a.transpose())
}

/// Singular matrix beta with `dof/2` and `1/2` degrees of freedom.
///
/// With `G ~ W_p(dof, I)`, `γ ~ N_p(0, I)` and `T'T = G + γγ'` (`T` upper
/// triangular), `B = T'⁻¹ G T⁻¹`; `I − B = T'⁻¹ γγ' T⁻¹` has rank one.
pub fn sample_singular_beta<R: Rng + ?Sized>(p: usize, dof: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let g = sample_wishart_identity(p, dof, rng)?;
    let gamma = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let h = &g + &gamma * gamma.transpose();
    let t = linalg::cholesky_upper(&h)
        .map_err(|_| TvvarError::Numerical { t: 0, msg: "Cholesky of G + γγ' failed".into() })?;
    let lower = t.transpose();
    // X = T'⁻¹ G, then B = X T⁻¹ = (T'⁻¹ X')'
    let x = lower.solve_lower_triangular(&g).expect("positive diagonal");
    let b = lower.solve_lower_triangular(&x.transpose()).expect("positive diagonal");
    Ok(linalg::symmetrize(&b))
}

/// Number of eigenvalues of `I − B` above `1e-10` times the spectral
/// radius of `B`.
pub fn complement_rank(b: &DMatrix<f64>) -> usize {
    let p = b.nrows();
    let scale = linalg::spectral_radius_sym(b).max(f64::MIN_POSITIVE);
    linalg::eigenvalues_above(&(DMatrix::identity(p, p) - b), 1e-10, scale).len()
}

/// Wishart degrees of freedom of the beta variate, `βn + p − 1`.
pub fn beta_dof(config: &ModelConfig) -> f64 {
    config.predictive_dof() + config.p() as f64 - 1.0
}

/// One step of the precision random walk: `k U' B U` with `U'U = prec_prev`.
pub fn evolve_precision<R: Rng + ?Sized>(prec_prev: &DMatrix<f64>, config: &ModelConfig, rng: &mut R) -> Result<DMatrix<f64>> {
    let u = linalg::cholesky_upper(prec_prev)?;
    let b = sample_singular_beta(config.p(), beta_dof(config), rng)?;
    Ok(linalg::symmetrize(&(u.transpose() * b * u * config.k())))
}

/// Draws `Σ_t` given `Σ_{t−1}`.
pub fn sample_singular_beta_evolution<R: Rng + ?Sized>(
    sigma_prev: &DMatrix<f64>,
    config: &ModelConfig,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let prec = linalg::inverse_spd(sigma_prev)?;
    let next = evolve_precision(&prec, config, rng)?;
    Ok(linalg::symmetrize(&linalg::inverse_spd(&next)?))
}

/// Generated series with the true coefficient and volatility paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub series: SeriesFrame,
    /// `Φ_t` for `t = d..N`.
    pub phi: Vec<DMatrix<f64>>,
    /// `Σ_t` for `t = d..N`.
    pub sigma: Vec<DMatrix<f64>>,
    /// Time index of the first truth entry (`d`).
    pub truth_start: usize,
}

impl Simulation {
    pub fn phi_at(&self, t: usize) -> Option<&DMatrix<f64>> {
        t.checked_sub(self.truth_start).and_then(|i| self.phi.get(i))
    }

    pub fn sigma_at(&self, t: usize) -> Option<&DMatrix<f64>> {
        t.checked_sub(self.truth_start).and_then(|i| self.sigma.get(i))
    }
}

pub fn generate(spec: &SimSpec) -> Result<Simulation> {
    spec.validate()?;
    let config = &spec.config;
    let (p, d) = (config.p(), config.d());
    let mut rng = seeded_rng(spec.seed);

    let inflate = DVector::from_vec(config.inflation(1));
    let drift = linalg::symmetrize(&(spec.pstar.component_mul(&(&inflate * inflate.transpose())) - &spec.pstar));
    let drift_on = drift.iter().any(|&x| x != 0.0);

    let zero_p = DVector::zeros(p);
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(spec.n);
    for _ in 0..d {
        rows.push(sample_mvn(&zero_p, &spec.sigma0, &mut rng)?);
    }
    let mut phi = spec.phi0.clone();
    let mut sigma = spec.sigma0.clone();
    let mut phis = vec![phi.clone()];
    let mut sigmas = vec![sigma.clone()];
    let zero_loc = DMatrix::zeros(config.state_dim(), p);

    for t in d + 1..=spec.n {
        sigma = match &spec.volatility {
            VolatilityMode::Fixed => sigma,
            VolatilityMode::BetaEvolution => sample_singular_beta_evolution(&sigma, config, &mut rng)
                .map_err(|e| TvvarError::Numerical { t, msg: e.to_string() })?,
            VolatilityMode::UserPath(path) => path[t - d - 1].clone(),
        };
        if drift_on {
            phi += sample_matrix_normal(&zero_loc, &drift, &sigma, &mut rng)?;
        }
        let history: Vec<DVector<f64>> = rows.iter().rev().take(d).cloned().collect();
        let f = build_design(&history, p, d)?.into_inner();
        let y = phi.transpose() * f + sample_mvn(&zero_p, &sigma, &mut rng)?;
        let norm = y.norm();
        if !(norm <= spec.guard) {
            return Err(TvvarError::Explosive { t, norm, seed: spec.seed });
        }
        rows.push(y);
        phis.push(phi.clone());
        sigmas.push(sigma.clone());
    }
    Ok(Simulation { series: SeriesFrame::from_observations(&rows)?, phi: phis, sigma: sigmas, truth_start: d })
}

/// Coefficient matrix of a VAR with intercept `c` and lag matrices `A_i`
/// (each `p x p`, acting as `y_t = c + Σ A_i y_{t−i}`), laid out as the
/// `(dp+1) x p` state.
pub fn var_coefficients(intercept: &DVector<f64>, lags: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = intercept.len();
    let mut phi = DMatrix::zeros(lags.len() * p + 1, p);
    phi.row_mut(0).copy_from(&intercept.transpose());
    for (i, a) in lags.iter().enumerate() {
        phi.view_mut((1 + i * p, 0), (p, p)).copy_from(&a.transpose());
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ar1_spec(n: usize, seed: u64) -> SimSpec {
        let c = ModelConfig::new(1, 1, 0.98, 0.9).unwrap();
        let phi = var_coefficients(&DVector::zeros(1), &[DMatrix::from_element(1, 1, 0.5)]);
        SimSpec::new(c, phi, DMatrix::identity(1, 1), n, seed).with_pstar(DMatrix::zeros(2, 2))
    }

    #[test]
    fn zero_row_spread_returns_location() {
        let mut rng = seeded_rng(3);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let draw = sample_matrix_normal(&m, &DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), &mut rng).unwrap();
        assert_eq!(draw, m);
    }

    #[test]
    fn matrix_normal_rejects_indefinite() {
        let mut rng = seeded_rng(3);
        let bad = linalg::diag(&[1.0, -1.0]);
        assert!(sample_matrix_normal(&DMatrix::zeros(2, 1), &bad, &DMatrix::identity(1, 1), &mut rng).is_err());
    }

    #[test]
    fn wishart_mean_is_dof_identity() {
        let mut rng = seeded_rng(11);
        let (p, dof, m) = (3, 4.5, 20_000);
        let mut acc = DMatrix::zeros(p, p);
        for _ in 0..m {
            acc += sample_wishart_identity(p, dof, &mut rng).unwrap();
        }
        acc /= m as f64;
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { dof } else { 0.0 };
                // Var(W_ii) = 2 dof, Var(W_ij) = dof
                let se = if i == j { (2.0 * dof / m as f64).sqrt() } else { (dof / m as f64).sqrt() };
                assert!((acc[(i, j)] - target).abs() < 5.0 * se, "entry ({i},{j}) = {}", acc[(i, j)]);
            }
        }
        assert!(sample_wishart_identity(3, 2.0, &mut rng).is_err());
    }

    #[test]
    fn singular_beta_has_rank_one_complement() {
        let mut rng = seeded_rng(5);
        for &(p, dof) in &[(1usize, 9.0), (2, 10.0), (3, 29.1), (5, 13.0)] {
            for _ in 0..200 {
                let b = sample_singular_beta(p, dof, &mut rng).unwrap();
                assert_eq!(complement_rank(&b), 1);
                let eig = nalgebra::SymmetricEigen::new(b).eigenvalues;
                assert!(eig.iter().all(|&l| l > 0.0 && l < 1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn scalar_evolution_stays_positive() {
        let c = ModelConfig::new(1, 1, 0.98, 0.9).unwrap();
        let mut rng = seeded_rng(8);
        let mut s = DMatrix::from_element(1, 1, 2.0);
        for _ in 0..500 {
            s = sample_singular_beta_evolution(&s, &c, &mut rng).unwrap();
            assert!(s[(0, 0)] > 0.0 && s[(0, 0)].is_finite());
        }
    }

    #[test]
    fn ar1_autocorrelation() {
        let sim = generate(&ar1_spec(20_000, 42)).unwrap();
        let y = sim.series.values().column(0).clone_owned();
        let mean = y.mean();
        let num: f64 = (1..y.len()).map(|i| (y[i] - mean) * (y[i - 1] - mean)).sum();
        let den: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((num / den - 0.5).abs() < 0.05, "lag-1 autocorrelation {}", num / den);
    }

    #[test]
    fn generation_is_deterministic_and_indexed() {
        let c = ModelConfig::new(2, 2, 0.98, 0.9).unwrap();
        let phi = var_coefficients(&DVector::zeros(2), &[DMatrix::identity(2, 2) * 0.3, DMatrix::identity(2, 2) * 0.1]);
        let spec = SimSpec::new(c, phi, DMatrix::identity(2, 2) * 1e-2, 300, 7).with_volatility(VolatilityMode::BetaEvolution);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series.len(), 300);
        assert_eq!(a.phi.len(), 299);
        assert_eq!(a.sigma.len(), 299);
        assert!(a.sigma.iter().all(|s| linalg::cholesky_lower(s).is_ok()));
        assert_eq!(a.phi_at(2), Some(&spec.phi0));
        let other = generate(&SimSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.series, other.series);
    }

    #[test]
    fn explosive_paths_abort_with_seed() {
        let c = ModelConfig::new(1, 1, 0.98, 0.9).unwrap();
        let phi = var_coefficients(&DVector::zeros(1), &[DMatrix::from_element(1, 1, 1.5)]);
        let spec = SimSpec::new(c, phi, DMatrix::identity(1, 1), 500, 99).with_guard(1e3);
        assert!(matches!(generate(&spec), Err(TvvarError::Explosive { seed: 99, .. })));
    }

    #[test]
    fn user_path_is_used_verbatim() {
        let spec = ar1_spec(6, 1);
        let path: Vec<DMatrix<f64>> = (0..5).map(|i| DMatrix::from_element(1, 1, 1.0 + i as f64)).collect();
        let sim = generate(&spec.clone().with_volatility(VolatilityMode::UserPath(path.clone()))).unwrap();
        assert_eq!(&sim.sigma[1..], &path[..]);
        assert!(generate(&spec.with_volatility(VolatilityMode::UserPath(path[..3].to_vec()))).is_err());
    }

    #[test]
    fn var_coefficient_layout() {
        let a1 = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let phi = var_coefficients(&DVector::from_vec(vec![1.0, 2.0]), &[a1.clone()]);
        let f = DVector::from_vec(vec![1.0, 5.0, 7.0]);
        let y = phi.transpose() * f;
        let expect = DVector::from_vec(vec![1.0, 2.0]) + a1 * DVector::from_vec(vec![5.0, 7.0]);
        assert_relative_eq!(y, expect, epsilon = 1e-14);
    }
}
