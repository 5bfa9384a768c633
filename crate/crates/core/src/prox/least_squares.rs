use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{PdrError, Result};
use crate::prox::affine::factor_spd;

/// Immutable least-squares data `(A, b)` with the products every solve needs.
#[derive(Debug, Clone)]
pub struct LeastSquaresData {
    a: DMatrix<f64>,
    b: DVector<f64>,
    atb: DVector<f64>,
    /// `A Aᵀ` when `A` is wide, `Aᵀ A` otherwise.
    gram: DMatrix<f64>,
    lambda_max: f64,
}

impl LeastSquaresData {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(PdrError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let atb = a.tr_mul(&b);
        let gram = if a.nrows() < a.ncols() {
            &a * a.transpose()
        } else {
            a.tr_mul(&a)
        };
        let lambda_max = power_iteration(&gram).value;
        if !(lambda_max > 0.0) {
            return Err(PdrError::NonPositiveLipschitz(lambda_max));
        }
        Ok(LeastSquaresData {
            a,
            b,
            atb,
            gram,
            lambda_max,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// `λ_max(AᵀA)`, the Lipschitz modulus of `∇ ½‖Az − b‖²`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn is_wide(&self) -> bool {
        self.a.nrows() < self.a.ncols()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * (&self.a * z - &self.b).norm_squared()
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(&(&self.a * z - &self.b))
    }
}

#[derive(Debug, Clone)]
struct ShiftedFactor {
    gamma: f64,
    shift: f64,
    chol: Cholesky<f64, Dyn>,
}

/// Solves `(σ I + γ AᵀA) u = rhs` with a factorization cached per `(γ, σ)`.
///
/// Wide matrices factor the `m × m` matrix `σ I + γ AAᵀ` and use
/// `u = (rhs − γ Aᵀ (σI + γAAᵀ)⁻¹ A rhs) / σ`; tall ones factor the `n × n` system.
#[derive(Debug, Clone)]
pub struct LsProxHandle<'a> {
    data: &'a LeastSquaresData,
    factor: Option<ShiftedFactor>,
}

impl<'a> LsProxHandle<'a> {
    pub fn new(data: &'a LeastSquaresData) -> Self {
        LsProxHandle { data, factor: None }
    }

    pub fn data(&self) -> &'a LeastSquaresData {
        self.data
    }

    pub fn prepared_gamma(&self) -> Option<f64> {
        self.factor.as_ref().map(|f| f.gamma)
    }

    /// Prepare solves with `γ AᵀA + I`.
    pub fn prepare(&mut self, gamma: f64) -> Result<()> {
        self.prepare_shifted(gamma, 1.0)
    }

    pub fn prepare_shifted(&mut self, gamma: f64, shift: f64) -> Result<()> {
        if !(gamma >= 0.0) || !(shift > 0.0) {
            return Err(PdrError::InvalidParameter(format!(
                "need gamma >= 0 and shift > 0, got gamma = {gamma}, shift = {shift}"
            )));
        }
        if let Some(f) = &self.factor {
            if f.gamma == gamma && f.shift == shift {
                return Ok(());
            }
        }
        let mut system = &self.data.gram * gamma;
        for i in 0..system.nrows() {
            system[(i, i)] += shift;
        }
        let chol = factor_spd(system)?;
        self.factor = Some(ShiftedFactor { gamma, shift, chol });
        Ok(())
    }

    /// Solve `(σ I + γ AᵀA) u = rhs` for the prepared `(γ, σ)`.
    pub fn solve_shifted(&self, rhs: &DVector<f64>, gamma: f64, shift: f64) -> Result<DVector<f64>> {
        let f = self.factor.as_ref().ok_or(PdrError::NotPrepared)?;
        if f.gamma != gamma || f.shift != shift {
            return Err(PdrError::StaleFactorization {
                cached: f.gamma,
                requested: gamma,
            });
        }
        let a = &self.data.a;
        if self.data.is_wide() {
            let inner = f.chol.solve(&(a * rhs));
            Ok((rhs - a.tr_mul(&inner) * gamma) / shift)
        } else {
            Ok(f.chol.solve(rhs))
        }
    }

    /// Proximal map of `½‖Au − b‖²`: the solution of `(γAᵀA + I) u = γAᵀb + x`.
    pub fn ls_prox(&self, x: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
        let rhs = &self.data.atb * gamma + x;
        self.solve_shifted(&rhs, gamma, 1.0)
    }
}

/// Outcome of the power iteration behind [`lambda_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when the relative change was still above `1e-6` at the iteration cap.
    pub converged: bool,
}

const POWER_MAX_ITER: usize = 5000;
const POWER_TOL: f64 = 1e-6;

fn power_iteration(gram: &DMatrix<f64>) -> PowerEstimate {
    let n = gram.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut value = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let w = gram * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        change = (next - value).abs() / next.abs().max(f64::MIN_POSITIVE);
        value = next;
        v = w / norm;
        // iterate well past the reporting tolerance; the Rayleigh quotient is cheap
        if change < POWER_TOL * 1e-6 {
            return PowerEstimate {
                value,
                iterations: it,
                converged: true,
            };
        }
    }
    PowerEstimate {
        value,
        iterations: POWER_MAX_ITER,
        converged: change <= POWER_TOL,
    }
}

/// Largest eigenvalue of `AᵀA` by power iteration on the smaller Gram matrix, started
/// from the normalized all-ones vector.
pub fn lambda_max(a: &DMatrix<f64>) -> PowerEstimate {
    let gram = if a.nrows() < a.ncols() {
        a * a.transpose()
    } else {
        a.tr_mul(a)
    };
    power_iteration(&gram)
}
