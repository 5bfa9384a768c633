use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{PdrError, Result};

/// Affine set `{x : A x = b}` with a cached Cholesky factor of `A Aᵀ`.
#[derive(Debug, Clone)]
pub struct AffineSetHandle {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: Cholesky<f64, Dyn>,
}

impl AffineSetHandle {
    /// Fails with [`PdrError::RankDeficient`] when `A` does not have full row rank.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(PdrError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let gram = factor_spd(&a * a.transpose())?;
        Ok(AffineSetHandle { a, b, gram })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `½ d_C(x)²`.
    pub fn half_dist_sq(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - project_affine(x, self)).norm_squared()
    }
}

/// Cholesky factor that also rejects numerically singular pivots.
pub(crate) fn factor_spd(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().amax();
    let chol = Cholesky::new(m).ok_or(PdrError::RankDeficient)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |acc, &d| acc.min(d * d));
    if !(min_pivot > 1e-12 * scale) {
        return Err(PdrError::RankDeficient);
    }
    Ok(chol)
}

/// Euclidean projection `x + Aᵀ(AAᵀ)⁻¹(b − Ax)`.
pub fn project_affine(x: &DVector<f64>, set: &AffineSetHandle) -> DVector<f64> {
    let residual = &set.b - &set.a * x;
    let multipliers = set.gram.solve(&residual);
    x + set.a.tr_mul(&multipliers)
}

/// Proximal map of `½ d_C²`: `(x + γ P_C(x)) / (1 + γ)`.
pub fn dist_prox(x: &DVector<f64>, set: &AffineSetHandle, gamma: f64) -> DVector<f64> {
    (x + project_affine(x, set) * gamma) / (1.0 + gamma)
}
