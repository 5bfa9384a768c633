use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 80;

/// Thin SVD by one-sided Jacobi rotations, singular values unsorted.
///
/// Returns `(U, σ, Vᵀ)` with `U` of size `rows × k`, `Vᵀ` of size `k × cols` and
/// `k = min(rows, cols)`. Columns of `U` belonging to zero singular values are completed
/// to an orthonormal set.
pub(crate) fn jacobi_svd(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if x.nrows() < x.ncols() {
        let (u, s, v_t) = jacobi_svd(&x.transpose());
        return (v_t.transpose(), s, u.transpose());
    }
    let (m, n) = x.shape();
    let mut a = x.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON * (m as f64).sqrt();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = a.column(p);
                    let cq = a.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let scale = sigma.iter().cloned().fold(0.0, f64::max);
    let mut u = a;
    let mut missing = Vec::new();
    for (j, &s) in sigma.iter().enumerate() {
        if s > f64::MIN_POSITIVE && s > scale * f64::EPSILON * 1e-3 {
            u.column_mut(j).unscale_mut(s);
        } else {
            missing.push(j);
        }
    }
    for j in missing {
        complete_column(&mut u, j);
    }
    (u, sigma, v.transpose())
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.nrows();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (ep, eq) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*ep, *eq);
        *ep = c * a - s * b;
        *eq = s * a + c * b;
    }
}

/// Replace column `j` by a unit vector orthogonal to every other nonzero column.
fn complete_column(u: &mut DMatrix<f64>, j: usize) {
    let (m, n) = u.shape();
    u.column_mut(j).fill(0.0);
    for e in 0..m {
        let mut cand = nalgebra::DVector::<f64>::zeros(m);
        cand[e] = 1.0;
        // two passes of Gram–Schmidt for stability
        for _ in 0..2 {
            for k in 0..n {
                if k != j {
                    let col = u.column(k);
                    let proj = col.dot(&cand);
                    cand.axpy(-proj, &col, 1.0);
                }
            }
        }
        let norm = cand.norm();
        if norm > 0.5 {
            u.set_column(j, &(cand / norm));
            return;
        }
    }
}
