//! Multivariate Student t used for one-step and multi-step predictives.
//!
//! The density with `ν` degrees of freedom, location `μ` and scale `A` is
//!
//! ```text
//! Γ((ν+p)/2) ν^{ν/2}
//! ------------------ |A|^{-1/2} (ν + z'A⁻¹z)^{-(ν+p)/2},   z = x − μ,
//!   Γ(ν/2) π^{p/2}
//! ```
//!
//! with covariance `ν A / (ν − 2)`. Predictive distributions of the filter
//! are reported through a *forecast scale* `Q* = (F'RF + 1) k⁻¹ S` whose
//! covariance is `Q* / (ν − 2)`; the matching density scale is `Q* / ν`,
//! see [`MvStudentT::from_forecast_scale`].

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, TvvarError};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct MvStudentT {
    dof: f64,
    location: DVector<f64>,
    scale: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl MvStudentT {
    pub fn new(dof: f64, location: DVector<f64>, scale: DMatrix<f64>) -> Result<Self> {
        if !(dof > 0.0) || !dof.is_finite() {
            return Err(TvvarError::InvalidConfig(format!("Student t dof {dof} must be positive")));
        }
        if scale.shape() != (location.len(), location.len()) {
            return Err(TvvarError::Dimension("Student t scale does not match location".into()));
        }
        let chol = linalg::cholesky_lower(&scale)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(MvStudentT { dof, location, scale, chol, log_det })
    }

    /// Predictive with forecast scale `Q*` (covariance `Q*/(ν−2)`).
    pub fn from_forecast_scale(dof: f64, location: DVector<f64>, forecast_scale: &DMatrix<f64>) -> Result<Self> {
        Self::new(dof, location, forecast_scale / dof)
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn location(&self) -> &DVector<f64> {
        &self.location
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// Covariance `ν A/(ν−2)`; requires `ν > 2`.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        (self.dof > 2.0).then(|| &self.scale * (self.dof / (self.dof - 2.0)))
    }

    /// `z'A⁻¹z` for `z = x − μ`.
    pub fn mahalanobis(&self, x: &DVector<f64>) -> f64 {
        let z = x - &self.location;
        let w = self
            .chol
            .solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        w.norm_squared()
    }

    pub fn ln_pdf(&self, x: &DVector<f64>) -> f64 {
        let nu = self.dof;
        let p = self.dim() as f64;
        log_normalizer(nu, p) - 0.5 * self.log_det - 0.5 * (nu + p) * (nu + self.mahalanobis(x)).ln()
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.ln_pdf(x).exp()
    }
}

/// `log[Γ((ν+p)/2) ν^{ν/2} / (Γ(ν/2) π^{p/2})]`.
pub fn log_normalizer(nu: f64, p: f64) -> f64 {
    ln_gamma((nu + p) / 2.0) - ln_gamma(nu / 2.0) + 0.5 * nu * nu.ln() - 0.5 * p * std::f64::consts::PI.ln()
}

/// Upper `prob` quantile of the standard univariate t with `nu` degrees of
/// freedom.
pub fn t_quantile(nu: f64, prob: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, nu)
        .map_err(|e| TvvarError::InvalidConfig(format!("Student t with dof {nu}: {e}")))?;
    Ok(dist.inverse_cdf(prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn univariate_matches_statrs() {
        use statrs::distribution::Continuous;
        let t = MvStudentT::new(7.0, DVector::from_vec(vec![0.5]), DMatrix::from_element(1, 1, 4.0)).unwrap();
        let reference = StudentsT::new(0.5, 2.0, 7.0).unwrap();
        for &x in &[-3.0, 0.0, 0.5, 2.2, 10.0] {
            assert_relative_eq!(t.ln_pdf(&DVector::from_vec(vec![x])), reference.ln_pdf(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn forecast_scale_gives_forecast_covariance() {
        let qstar = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let t = MvStudentT::from_forecast_scale(9.0, DVector::zeros(2), &qstar).unwrap();
        assert_relative_eq!(t.covariance().unwrap(), qstar / 7.0, epsilon = 1e-14);
    }

    #[test]
    fn quantile_is_symmetric() {
        let q = t_quantile(9.0, 0.95).unwrap();
        assert_relative_eq!(q, -t_quantile(9.0, 0.05).unwrap(), epsilon = 1e-9);
        assert_relative_eq!(q, 1.833112933, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MvStudentT::new(0.0, DVector::zeros(1), DMatrix::identity(1, 1)).is_err());
        assert!(MvStudentT::new(3.0, DVector::zeros(2), DMatrix::identity(1, 1)).is_err());
        assert!(MvStudentT::new(3.0, DVector::zeros(1), DMatrix::from_element(1, 1, -1.0)).is_err());
    }
}
