use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use pdr_core::prox::*;
use proptest::prelude::*;

/// Squared distance from `x` to the box-clipped candidate supported on `support`.
fn support_cost(x: &[f64], support: &[usize], bound: f64) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            if support.contains(&i) {
                let c = xi.clamp(-bound, bound);
                (xi - c) * (xi - c)
            } else {
                xi * xi
            }
        })
        .sum()
}

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for i in 0..n {
        let extended: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut t = s.clone();
                t.push(i);
                t
            })
            .collect();
        out.extend(extended);
    }
    out
}

fn gaussian_matrix(rows: usize, cols: usize, seed: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| seed[(i * cols + j) % seed.len()] * (1.0 + (i + 2 * j) as f64 * 0.01))
}

fn eigen_singular_squares(x: &DMatrix<f64>) -> Vec<f64> {
    let gram = if x.nrows() >= x.ncols() { x.tr_mul(x) } else { x * x.transpose() };
    let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().map(|e| e.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

proptest! {
    #[test]
    fn sparsity_projection_matches_enumeration(
        x in prop::collection::vec(-3.0f64..3.0, 1..=10),
        r in 1usize..=4,
        small_bound in any::<bool>(),
    ) {
        let n = x.len();
        let r = r.min(n);
        let bound = if small_bound { 0.5 } else { 1e6 };
        let p = project_sparsity_box(&DVector::from_vec(x.clone()), &SparsityBox::new(r, bound).unwrap()).unwrap();
        let costs: Vec<f64> = subsets(n, r).iter().map(|s| support_cost(&x, s, bound)).collect();
        let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let ours = (&p - DVector::from_vec(x.clone())).norm_squared();
        prop_assert!((ours - best).abs() <= 1e-12 * (1.0 + best));
        prop_assert!(p.iter().filter(|z| **z != 0.0).count() <= r);
        prop_assert!(p.amax() <= bound);
    }

    #[test]
    fn rank_projection_satisfies_eckart_young(
        data in prop::collection::vec(-5.0f64..5.0, 48),
        r in 1usize..=5,
        tall in any::<bool>(),
    ) {
        let x = if tall { DMatrix::from_row_slice(8, 6, &data) } else { DMatrix::from_row_slice(6, 8, &data) };
        let p = project_rank(&x, r).unwrap();
        let tail: f64 = eigen_singular_squares(&x)[r..].iter().sum();
        let resid = (&x - &p).norm_squared();
        prop_assert!((resid - tail).abs() <= 1e-8 * (1.0 + x.norm_squared()), "{resid} vs {tail}");
        let sv = eigen_singular_squares(&p);
        prop_assert!(sv[r..].iter().all(|&s| s <= 1e-12 * (1.0 + sv[0])));
    }

    #[test]
    fn sorted_svd_recomposes(rows in 1usize..9, cols in 1usize..9, data in prop::collection::vec(-4.0f64..4.0, 64)) {
        let x = DMatrix::from_fn(rows, cols, |i, j| data[i * 8 + j]);
        let (u, s, v_t) = sorted_svd(&x).unwrap();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let back = &u * DMatrix::from_diagonal(&DVector::from_vec(s.clone())) * &v_t;
        prop_assert!((back - &x).norm() <= 1e-10 * (1.0 + x.norm()));
        let k = s.iter().filter(|&&z| z > 1e-10 * s[0]).count();
        let uk = u.columns(0, k);
        prop_assert!((uk.tr_mul(&uk) - DMatrix::identity(k, k)).norm() <= 1e-9);
    }

    #[test]
    fn shrink_is_nuclear_prox(data in prop::collection::vec(-3.0f64..3.0, 36), tau in 0.05f64..4.0) {
        let x = DMatrix::from_row_slice(6, 6, &data);
        let y = svt_shrink(&x, tau).unwrap();
        // (X − Y)/τ must be a subgradient of ‖·‖_* at Y
        let g = (&x - &y) / tau;
        let spectral = eigen_singular_squares(&g)[0].sqrt();
        prop_assert!(spectral <= 1.0 + 1e-8);
        let nuclear: f64 = SVD::new(y.clone(), false, false).singular_values.sum();
        prop_assert!((g.dot(&y) - nuclear).abs() <= 1e-8 * (1.0 + nuclear));
    }

    #[test]
    fn ls_prox_matches_direct_solve(
        data in prop::collection::vec(-2.0f64..2.0, 100),
        wide in any::<bool>(),
        gamma in 0.01f64..10.0,
    ) {
        let (m, n) = if wide { (5, 20) } else { (20, 5) };
        let a = DMatrix::from_row_slice(m, n, &data);
        let b = DVector::from_fn(m, |i, _| data[(3 * i + 1) % 100]);
        let x = DVector::from_fn(n, |i, _| data[(7 * i + 2) % 100]);
        let ls = LeastSquaresData::new(a.clone(), b.clone()).unwrap();
        let mut h = LsProxHandle::new(&ls);
        h.prepare(gamma).unwrap();
        let u = h.ls_prox(&x, gamma).unwrap();
        let lhs = a.tr_mul(&a) * gamma + DMatrix::identity(n, n);
        let rhs = a.tr_mul(&b) * gamma + &x;
        let direct = lhs.clone().lu().solve(&rhs).unwrap();
        prop_assert!((&lhs * &u - &rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
        prop_assert!((&u - &direct).norm() <= 1e-9 * (1.0 + direct.norm()));
    }

    #[test]
    fn affine_projection_is_orthogonal(data in prop::collection::vec(-2.0f64..2.0, 60)) {
        let a = DMatrix::from_row_slice(4, 10, &data[..40]);
        let truth = DVector::from_column_slice(&data[40..50]);
        let b = &a * &truth;
        let h = AffineSetHandle::new(a.clone(), b.clone()).unwrap();
        let x = DVector::from_column_slice(&data[50..60]) * 3.0;
        let p = project_affine(&x, &h);
        prop_assert!((&a * &p - &b).norm() <= 1e-8 * (1.0 + b.norm()));
        // null-space direction from an independent normal-equation solve
        let z = DVector::from_fn(10, |i, _| data[(11 * i + 5) % 60]);
        let w = (&a * a.transpose()).lu().solve(&(&a * &z)).unwrap();
        let d = &z - a.tr_mul(&w);
        prop_assert!((&a * &d).norm() <= 1e-9 * (1.0 + z.norm()));
        prop_assert!((&x - &p).dot(&d).abs() <= 1e-9 * (1.0 + x.norm() * d.norm()));
        prop_assert!((project_affine(&p, &h) - &p).norm() <= 1e-10 * (1.0 + p.norm()));
    }
}

#[test]
fn spec_sparsity_examples() {
    let d = SparsityBox::with_default_bound(2).unwrap();
    let p = project_sparsity_box(&DVector::from_column_slice(&[3.0, -1.0, 2.0]), &d).unwrap();
    assert_eq!(p.as_slice(), &[3.0, 0.0, 2.0]);
    let d = SparsityBox::new(1, 3.0).unwrap();
    let p = project_sparsity_box(&DVector::from_column_slice(&[5.0, 4.0]), &d).unwrap();
    assert_eq!(p.as_slice(), &[3.0, 0.0]);
}

#[test]
fn lambda_max_matches_eigensolver() {
    let seed: Vec<f64> = (0..97).map(|i| ((i * 37 % 97) as f64 / 48.5) - 1.0).collect();
    for (m, n) in [(5, 20), (20, 5), (12, 12)] {
        let a = gaussian_matrix(m, n, &seed);
        let est = lambda_max(&a);
        let exact = eigen_singular_squares(&a)[0];
        assert!(est.converged);
        assert!((est.value - exact).abs() <= 1e-6 * exact, "{} vs {exact}", est.value);
    }
    assert!((lambda_max(&DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0, 1.0]))).value - 9.0).abs() < 1e-9);
}

#[test]
fn masked_prox_only_touches_observed_entries() {
    let obs = SampledEntries::new(2, 3, vec![((0, 1), 4.0), ((1, 2), -2.0)]).unwrap();
    let x = DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let u = masked_quadratic_prox(&x, &obs, 1.0);
    assert_eq!(u.as_slice(), &[1.0, 3.0, 3.0, 4.0, 5.0, 2.0]);
}
