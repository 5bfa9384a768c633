use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PdrError, Result};
use crate::prox::svd::jacobi_svd;

/// Matrices whose smaller side reaches this size use subspace iteration for rank projection.
pub const DENSE_SVD_LIMIT: usize = 2000;

const SUBSPACE_TOL: f64 = 1e-8;
const SUBSPACE_MAX_ITER: usize = 500;
const SUBSPACE_OVERSAMPLE: usize = 10;
const SVD_EPS: f64 = 5.0 * f64::EPSILON;
// Relative Frobenius recomposition error above which bidiagonal factors are rejected.
const RECOMPOSE_TOL: f64 = 1e-10;
const SUBSPACE_SEED: u64 = 0x5eed_5eed_u64;

/// Observed entries `Ω` of an `rows × cols` matrix with their values, sorted row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledEntries {
    rows: usize,
    cols: usize,
    coords: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl SampledEntries {
    /// Entries are sorted; duplicates and out-of-range indices are rejected.
    pub fn new(rows: usize, cols: usize, mut entries: Vec<((usize, usize), f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(PdrError::InvalidParameter(format!(
                    "duplicate observed entry {:?}",
                    w[0].0
                )));
            }
        }
        if let Some(((i, j), _)) = entries.iter().find(|((i, j), _)| *i >= rows || *j >= cols) {
            return Err(PdrError::InvalidParameter(format!(
                "observed entry ({i}, {j}) outside {rows} x {cols}"
            )));
        }
        let (coords, values) = entries.into_iter().unzip();
        Ok(SampledEntries {
            rows,
            cols,
            coords,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(row-major linear index, observed value)` pairs.
    pub fn iter_linear(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coords
            .iter()
            .zip(&self.values)
            .map(move |(&(i, j), &m)| (i * self.cols + j, m))
    }

    /// `‖P_Ω(X) − P_Ω(M)‖_F` for a row-major flattened `X`.
    pub fn residual_norm(&self, x: &DVector<f64>) -> f64 {
        self.iter_linear()
            .map(|(k, m)| (x[k] - m) * (x[k] - m))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖P_Ω(M)‖_F`.
    pub fn observed_norm(&self) -> f64 {
        self.values.iter().map(|m| m * m).sum::<f64>().sqrt()
    }
}

type SvdFactors = (DMatrix<f64>, Vec<f64>, DMatrix<f64>);

fn bidiagonal_svd(x: &DMatrix<f64>) -> Option<SvdFactors> {
    let svd = SVD::try_new_unordered(x.clone(), true, true, SVD_EPS, 1_000_000)?;
    Some((svd.u?, svd.singular_values.as_slice().to_vec(), svd.v_t?))
}

fn recomposes(x: &DMatrix<f64>, (u, s, v_t): &SvdFactors) -> bool {
    let err = (reconstruct(u, s, v_t) - x).norm();
    err <= RECOMPOSE_TOL * x.norm().max(f64::MIN_POSITIVE)
}

/// Thin SVD with singular values in descending order. Equal values keep the order in
/// which the decomposition produced them.
///
/// The bidiagonal solver is tried first and its factors are checked by recomposition;
/// when the check fails (seen on rank-deficient inputs) one-sided Jacobi is used. Only the
/// singular vectors of nonzero singular values are guaranteed orthonormal.
pub fn sorted_svd(x: &DMatrix<f64>) -> Result<SvdFactors> {
    if !x.iter().all(|e| e.is_finite()) {
        return Err(PdrError::SvdFailure("matrix has non-finite entries".into()));
    }
    let (u, sigma, v_t) = match bidiagonal_svd(x) {
        Some(f) if recomposes(x, &f) => f,
        _ => jacobi_svd(x),
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let u_sorted = u.select_columns(order.iter());
    let v_t_sorted = v_t.select_rows(order.iter());
    let s_sorted = order.iter().map(|&i| sigma[i]).collect();
    Ok((u_sorted, s_sorted, v_t_sorted))
}

fn reconstruct(u: &DMatrix<f64>, weights: &[f64], v_t: &DMatrix<f64>) -> DMatrix<f64> {
    let k = weights.len();
    let mut left = u.columns(0, k).into_owned();
    for (j, w) in weights.iter().enumerate() {
        left.column_mut(j).scale_mut(*w);
    }
    left * v_t.rows(0, k)
}

fn orthonormal_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Leading `r` singular triplets by block subspace iteration.
///
/// Stops once `‖X V_r − U_r Σ_r‖_F ≤ 1e-8 · σ₁`. The start block is drawn from a fixed
/// seed so results are reproducible.
pub fn truncated_svd_subspace(
    x: &DMatrix<f64>,
    r: usize,
) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (n1, n2) = x.shape();
    let k = (r + SUBSPACE_OVERSAMPLE).min(n1.min(n2));
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSPACE_SEED);
    let start = DMatrix::from_fn(n2, k, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormal_columns(x * start);
    let mut last = None;
    for _ in 0..SUBSPACE_MAX_ITER {
        let b = q.tr_mul(x);
        let (w, sigma, v_t) = sorted_svd(&b)?;
        let u_r = &q * w.columns(0, r);
        let v_r_t = v_t.rows(0, r).into_owned();
        let mut residual = x * v_r_t.transpose();
        for (j, s) in sigma[..r].iter().enumerate() {
            residual.column_mut(j).axpy(-s, &u_r.column(j), 1.0);
        }
        let sigma_r: Vec<f64> = sigma[..r].to_vec();
        if residual.norm() <= SUBSPACE_TOL * sigma[0].max(f64::MIN_POSITIVE) {
            return Ok((u_r, sigma_r, v_r_t));
        }
        last = Some((u_r, sigma_r, v_r_t));
        let z = orthonormal_columns(x.tr_mul(&q));
        q = orthonormal_columns(x * z);
    }
    last.ok_or_else(|| PdrError::SvdFailure("subspace iteration did not run".into()))
}

fn check_rank(x: &DMatrix<f64>, r: usize) -> Result<()> {
    let limit = x.nrows().min(x.ncols());
    if r == 0 || r > limit {
        return Err(PdrError::InvalidParameter(format!(
            "rank {r} outside 1..={limit}"
        )));
    }
    Ok(())
}

/// Best rank-`r` approximation in Frobenius norm.
pub fn project_rank(x: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    check_rank(x, r)?;
    if x.nrows().min(x.ncols()) >= DENSE_SVD_LIMIT {
        let (u, s, v_t) = truncated_svd_subspace(x, r)?;
        return Ok(reconstruct(&u, &s, &v_t));
    }
    let (u, s, v_t) = sorted_svd(x)?;
    Ok(reconstruct(&u, &s[..r], &v_t))
}

/// [`project_rank`] on a row-major flattened `rows × cols` matrix.
pub fn project_rank_flat(x: &DVector<f64>, rows: usize, cols: usize, r: usize) -> Result<DVector<f64>> {
    // Column-major storage of Xᵀ is the row-major storage of X.
    let xt = DMatrix::from_column_slice(cols, rows, x.as_slice());
    let pt = project_rank(&xt, r)?;
    Ok(DVector::from_column_slice(pt.as_slice()))
}

/// Singular value soft-thresholding, the proximal map of `τ‖·‖_*`.
pub fn svt_shrink(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let (u, s, v_t) = sorted_svd(x)?;
    let kept: Vec<f64> = s.iter().take_while(|&&sv| sv > tau).map(|sv| sv - tau).collect();
    if kept.is_empty() {
        return Ok(DMatrix::zeros(x.nrows(), x.ncols()));
    }
    Ok(reconstruct(&u, &kept, &v_t))
}

/// [`svt_shrink`] on a row-major flattened matrix.
pub fn svt_shrink_flat(x: &DVector<f64>, rows: usize, cols: usize, tau: f64) -> Result<DVector<f64>> {
    let xt = DMatrix::from_column_slice(cols, rows, x.as_slice());
    let yt = svt_shrink(&xt, tau)?;
    Ok(DVector::from_column_slice(yt.as_slice()))
}

/// Proximal map of `½‖P_Ω(X) − P_Ω(M)‖²` on a row-major flattened `X`.
pub fn masked_quadratic_prox(x: &DVector<f64>, observed: &SampledEntries, gamma: f64) -> DVector<f64> {
    let mut out = x.clone();
    let scale = 1.0 / (1.0 + gamma);
    for (k, m) in observed.iter_linear() {
        out[k] = (x[k] + gamma * m) * scale;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn diagonal_rank_projection() {
        let p = project_rank(&diag(&[5.0, 3.0, 1.0]), 2).unwrap();
        assert!((p - diag(&[5.0, 3.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn low_rank_input_is_fixed() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let b = DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 0.5, 2.0]);
        let x = &a * &b;
        let p = project_rank(&x, 2).unwrap();
        assert!((p - &x).norm() <= 1e-9 * x.norm());
    }

    #[test]
    fn rank_bounds_are_checked() {
        let x = DMatrix::<f64>::zeros(3, 2);
        assert!(project_rank(&x, 0).is_err());
        assert!(project_rank(&x, 3).is_err());
    }

    #[test]
    fn flat_projection_matches_matrix_projection() {
        let x = DMatrix::from_fn(4, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin());
        let flat = DVector::from_iterator(12, (0..4).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| x[(i, j)]));
        let p = project_rank(&x, 1).unwrap();
        let pf = project_rank_flat(&flat, 4, 3, 1).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                assert!((p[(i, j)] - pf[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn svt_examples() {
        let y = svt_shrink(&diag(&[10.0, 2.0]), 5.0).unwrap();
        assert!((y - diag(&[5.0, 0.0])).norm() < 1e-12);
        let y = svt_shrink(&diag(&[1.0, 0.5]), 3.0).unwrap();
        assert_eq!(y, DMatrix::zeros(2, 2));
        let y = svt_shrink(&DMatrix::from_element(1, 1, 3.0), 1.0).unwrap();
        assert!((y[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn masked_prox_examples() {
        let empty = SampledEntries::new(2, 2, vec![]).unwrap();
        let x = DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(masked_quadratic_prox(&x, &empty, 0.5), x);
        let one = SampledEntries::new(2, 2, vec![((1, 0), 2.0)]).unwrap();
        let x = DVector::from_column_slice(&[0.0, 0.0, 4.0, 7.0]);
        let out = masked_quadratic_prox(&x, &one, 1.0);
        assert_eq!(out.as_slice(), &[0.0, 0.0, 3.0, 7.0]);
    }

    #[test]
    fn sampled_entries_validation() {
        assert!(SampledEntries::new(2, 2, vec![((0, 0), 1.0), ((0, 0), 2.0)]).is_err());
        assert!(SampledEntries::new(2, 2, vec![((2, 0), 1.0)]).is_err());
        let s = SampledEntries::new(2, 3, vec![((1, 2), 1.0), ((0, 1), 2.0)]).unwrap();
        assert_eq!(s.coords(), &[(0, 1), (1, 2)]);
        assert_eq!(s.iter_linear().collect::<Vec<_>>(), vec![(1, 2.0), (5, 1.0)]);
    }

    #[test]
    fn subspace_path_matches_dense_svd() {
        let a = DMatrix::from_fn(60, 4, |i, j| ((i * 7 + j * 3) as f64 * 0.37).sin());
        let b = DMatrix::from_fn(4, 50, |i, j| ((i * 5 + j * 11) as f64 * 0.23).cos());
        let noise = DMatrix::from_fn(60, 50, |i, j| 1e-3 * ((i * 13 + j * 17) as f64).sin());
        let x = a * b + noise;
        let (u, s, v_t) = truncated_svd_subspace(&x, 3).unwrap();
        let approx = reconstruct(&u, &s, &v_t);
        let (du, ds, dv) = sorted_svd(&x).unwrap();
        let dense = reconstruct(&du, &ds[..3], &dv);
        assert!((approx - dense).norm() < 1e-6 * x.norm());
    }
}
