//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here works on symmetric matrices: the filter, forecast and
//! simulation code only ever factorizes covariance-like quantities.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, TvvarError};

/// Returns `(m + m') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Lower Cholesky factor `L` with `L L' = m`, or an error if `m` is not
/// numerically positive definite.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| TvvarError::NotPositiveDefinite(format!("{}x{} matrix", m.nrows(), m.ncols())))
}

/// Upper Cholesky factor `U` with `U' U = m`.
pub fn cholesky_upper(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cholesky_lower(m).map(|l| l.transpose())
}

/// Outcome of [`ensure_spd`].
#[derive(Debug, Clone)]
pub struct Conditioned {
    pub matrix: DMatrix<f64>,
    /// Number of diagonal jitter escalations that were needed (0 if the
    /// symmetrized input factorized directly).
    pub jitter_steps: u32,
}

/// Symmetrizes `m` and checks that it factorizes. On failure a diagonal
/// jitter of `base * trace / dim` is added, escalating by a factor of ten
/// up to `max_escalations` times.
pub fn ensure_spd(m: &DMatrix<f64>, base: f64, max_escalations: u32) -> Option<Conditioned> {
    let sym = symmetrize(m);
    if sym.clone().cholesky().is_some() {
        return Some(Conditioned { matrix: sym, jitter_steps: 0 });
    }
    let dim = sym.nrows().max(1) as f64;
    let scale = (sym.trace().abs() / dim).max(f64::MIN_POSITIVE);
    let mut eps = base * scale;
    for step in 1..=max_escalations {
        let mut candidate = sym.clone();
        for i in 0..candidate.nrows() {
            candidate[(i, i)] += eps;
        }
        if candidate.clone().cholesky().is_some() {
            return Some(Conditioned { matrix: candidate, jitter_steps: step });
        }
        eps *= 10.0;
    }
    None
}

/// `log |m|` for a symmetric positive-definite matrix.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_lower(m)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Solves `m x = b` for symmetric positive-definite `m`.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| TvvarError::NotPositiveDefinite(format!("{}x{} system", m.nrows(), m.ncols())))?;
    Ok(chol.solve(b))
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| TvvarError::NotPositiveDefinite(format!("{}x{} matrix", m.nrows(), m.ncols())))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Symmetric inverse square root `m^{-1/2}` through the eigendecomposition.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return Err(TvvarError::NotPositiveDefinite("inverse square root of a non-PD matrix".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt().recip()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Factor `L` with `L L' = m` for a symmetric positive-semidefinite `m`.
///
/// Uses Cholesky when it succeeds and falls back to a clamped
/// eigendecomposition otherwise, so that singular spreads (including the
/// zero matrix) are accepted. Eigenvalues below `-1e-10 * max|λ|` are
/// rejected as genuinely indefinite.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(TvvarError::NotPositiveDefinite("non-finite entries".into()));
    }
    let sym = symmetrize(m);
    if let Some(c) = sym.clone().cholesky() {
        return Ok(c.l());
    }
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(TvvarError::NotPositiveDefinite("matrix is indefinite".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d)
}

/// Eigenvalues of a symmetric matrix that exceed `rel_tol * scale`, where
/// `scale` is supplied by the caller.
pub fn eigenvalues_above(m: &DMatrix<f64>, rel_tol: f64, scale: f64) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().copied().filter(|&l| l > rel_tol * scale).collect()
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_radius_sym(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()))
}

/// Diagonal matrix with entries `v`.
pub fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}
