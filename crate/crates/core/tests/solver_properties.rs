use nalgebra::{DMatrix, DVector};
use pdr_core::datagen::{gen_completion, gen_feasibility, gen_sparse_ls, Seed};
use pdr_core::problems::*;
use pdr_core::prox::{project_rank, SparsityBox};
use pdr_core::splitting::*;
use proptest::prelude::*;

fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

/// Reference projection onto the sparsity box: sort by gain, smallest index first on ties.
fn reference_sparse_projection(x: &DVector<f64>, set: &SparsityBox) -> DVector<f64> {
    let clip = |z: f64| z.clamp(-set.bound, set.bound);
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| {
        let gi = x[i] * x[i] - (x[i] - clip(x[i])).powi(2);
        let gj = x[j] * x[j] - (x[j] - clip(x[j])).powi(2);
        gj.total_cmp(&gi).then(i.cmp(&j))
    });
    let mut out = DVector::zeros(x.len());
    for &i in &idx[..set.r] {
        out[i] = clip(x[i]);
    }
    out
}

fn affine_projection(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let w = (a * a.transpose()).lu().solve(&(b - a * x)).unwrap();
    x + a.tr_mul(&w)
}

#[test]
fn one_dimensional_box_example() {
    let alpha = 1.9;
    let scheme = ClosureScheme::new(1, alpha, 1.0)
        .with_f(|u| 0.5 * (u[0] - 3.0).powi(2), |u| u.add_scalar(-3.0), |x, g| (x.add_scalar(3.0 * g)) / (1.0 + g))
        .with_g(
            |v| if (0.0..=10.0).contains(&v[0]) { 0.0 } else { f64::INFINITY },
            move |w, _| w.map(|z| (z / (alpha - 1.0)).clamp(0.0, 10.0)),
        )
        .regularized(true);
    let mut scheme = scheme;
    let g0 = gamma_threshold(alpha, 1.0, 0.0).unwrap();
    let cfg = PdrConfig { alpha, tol: 1e-12, max_iter: 100_000, ..Default::default() };
    let trace = run_solver(&mut scheme, &DVector::zeros(1), &cfg, g0, true).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    let s = &trace.final_state;
    assert!((s.u[0] - 3.0).abs() < 1e-8 && (s.v[0] - 3.0).abs() < 1e-8);
    assert!(trace.merit_history.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0)));
}

#[test]
fn quadratic_with_zero_g_converges_to_center() {
    let c = DVector::from_column_slice(&[4.0, -2.0]);
    let cc = c.clone();
    let mut scheme = ClosureScheme::new(2, 2.0, 1.0).with_f(
        move |u| 0.5 * (u - &cc).norm_squared(),
        |u| u.clone(),
        move |x, g| (x + &c * g) / (1.0 + g),
    );
    let s0 = IterateTriple::start(&DVector::zeros(2));
    let s1 = scheme.step(&s0, 1.0).unwrap();
    assert_eq!(s1.u.as_slice(), &[2.0, -1.0]);
    assert_eq!(s1.v.as_slice(), &[4.0, -2.0]);
    assert_eq!(s1.x.as_slice(), &[2.0, -1.0]);
    let cfg = PdrConfig { alpha: 2.0, tol: 1e-12, max_iter: 1000, ..Default::default() };
    let trace = run_solver(&mut scheme, &DVector::zeros(2), &cfg, 1.0, false).unwrap();
    let s = &trace.final_state;
    assert!((&s.x - DVector::from_column_slice(&[4.0, -2.0])).norm() < 1e-9);
}

#[test]
fn alpha_two_closure_step_is_bitwise_dr() {
    let prox_f = |x: &DVector<f64>, g: f64| x.map(|z| (z + 0.7 * g) / (1.0 + g));
    let prox_g = |w: &DVector<f64>, _g: f64| w.map(|z| z.clamp(-1.0, 1.0));
    let mut scheme = ClosureScheme::new(5, 2.0, 1.0).with_f(|_| 0.0, |u| u.clone(), prox_f).with_g(|_| 0.0, prox_g);
    for k in 0..100 {
        let x = DVector::from_fn(5, |i, _| ((k * 7 + i * 13) as f64).sin() * 3.0);
        let gamma = 0.01 + (k as f64) * 0.05;
        let next = scheme.step(&IterateTriple::start(&x), gamma).unwrap();
        let u = prox_f(&x, gamma);
        let v = prox_g(&(&u * 2.0 - &x), gamma);
        assert_eq!(next.x, &x + (&v - &u));
        assert_eq!(next.u, u);
        assert_eq!(next.v, v);
    }
}

fn compare_with_reference<S: SplittingScheme>(
    scheme: &mut S,
    x0: DVector<f64>,
    gamma: f64,
    mut reference: impl FnMut(&DVector<f64>) -> (DVector<f64>, DVector<f64>),
) {
    let mut state = IterateTriple::start(&x0);
    let mut x = x0;
    for _ in 0..50 {
        state = scheme.step(&state, gamma).unwrap();
        let (u, v) = reference(&x);
        x = &x + (&v - &u);
        assert!(close(&state.u, &u, 1e-12) && close(&state.v, &v, 1e-12) && close(&state.x, &x, 1e-12));
    }
}

#[test]
fn alpha_two_matches_reference_dr_on_every_family() {
    for seed in 0..10 {
        let inst = gen_sparse_ls(10, 30, Seed(seed)).unwrap();
        let gamma = 0.5 * gamma_threshold(2.0, inst.lambda_max(), 0.0).unwrap() * (1 + seed) as f64;
        let mut scheme = build_sparse_ls(&inst, &SchemeVariant::dr(), gamma).unwrap();
        let (a, b) = (inst.data().a().clone(), inst.data().b().clone());
        let lhs = (a.tr_mul(&a) * gamma + DMatrix::identity(30, 30)).lu();
        let set = *inst.set();
        compare_with_reference(&mut scheme, DVector::zeros(30), gamma, |x| {
            let u = lhs.solve(&(a.tr_mul(&b) * gamma + x)).unwrap();
            let v = reference_sparse_projection(&(&u * 2.0 - x), &set);
            (u, v)
        });

        let (inst, _) = gen_feasibility(5, 20, Seed(seed)).unwrap();
        let gamma = 0.05 * (1 + seed) as f64;
        let mut scheme = build_feasibility(&inst, &SchemeVariant::dr(), gamma).unwrap();
        let (a, b) = (inst.affine().a().clone(), inst.affine().b().clone());
        let set = *inst.set();
        compare_with_reference(&mut scheme, DVector::from_element(20, 0.1), gamma, |x| {
            let u = (x + affine_projection(&a, &b, x) * gamma) / (1.0 + gamma);
            let v = reference_sparse_projection(&(&u * 2.0 - x), &set);
            (u, v)
        });

        let inst = gen_completion(8, 2, 0.5, Seed(seed)).unwrap();
        let gamma = 0.1 * (1 + seed) as f64;
        let mut scheme = build_completion(&inst, &SchemeVariant::dr(), gamma).unwrap();
        let mask: Vec<(usize, f64)> = inst.observed().iter_linear().collect();
        compare_with_reference(&mut scheme, DVector::zeros(64), gamma, |x| {
            let mut u = x.clone();
            for &(k, m) in &mask {
                u[k] = (x[k] + gamma * m) / (1.0 + gamma);
            }
            let w = DMatrix::from_row_slice(8, 8, (&u * 2.0 - x).as_slice());
            let p = project_rank(&w, 2).unwrap();
            (u, DVector::from_column_slice(p.transpose().as_slice()))
        });
    }
}

/// Merit descent, the per-step decrease bound and the `x`/`u` step relation along a run
/// with constant `γ = 0.9 γ₀`.
fn check_descent<S: SplittingScheme>(mut scheme: S, alpha: f64, lipschitz: f64, gamma0: f64) -> Result<(), TestCaseError> {
    let gamma = 0.9 * gamma0;
    scheme.set_gamma(gamma).unwrap();
    let cfg = PdrConfig { alpha, max_iter: 300, ..Default::default() };
    let x0 = DVector::zeros(scheme.dim());
    let trace = run_solver(&mut scheme, &x0, &cfg, gamma, true).unwrap();
    prop_assert!(trace.constant_gamma());
    prop_assert_eq!(trace.merit_history.len(), trace.iterations);
    let a = descent_constant(alpha, gamma, lipschitz, 0.0);
    prop_assert!(a > 0.0);
    let m = &trace.merit_history;
    let steps = &trace.step_history;
    for i in 1..m.len() {
        prop_assert!(m[i] <= m[i - 1] + 1e-10 * m[i - 1].abs().max(1.0), "merit rose at {}: {} -> {}", i, m[i - 1], m[i]);
        prop_assert!(m[i - 1] - m[i] >= a * steps[i].du.powi(2) - 1e-8);
        prop_assert!(steps[i - 1].dx <= (1.0 + gamma * lipschitz) * steps[i].du + 1e-10);
    }
    if trace.termination == Termination::Converged {
        let s = &trace.final_state;
        prop_assert!((&s.v - &s.u).norm() <= 10.0 * cfg.tol * s.x.norm().max(1.0));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sparse_ls_merit_descends(seed in any::<u64>(), m in 10usize..20, extra in 5usize..40, alpha in 1.55f64..=2.0) {
        let inst = gen_sparse_ls(m, m + extra, Seed(seed)).unwrap();
        let l = inst.lambda_max();
        let g0 = gamma_threshold(alpha, l, 0.0).unwrap();
        let scheme = build_sparse_ls(&inst, &SchemeVariant::PdrRegularizedG { alpha }, 0.9 * g0).unwrap();
        check_descent(scheme, alpha, l, g0)?;
    }

    #[test]
    fn feasibility_merit_descends(seed in any::<u64>(), m in 5usize..12, extra in 5usize..38, alpha in 1.55f64..=2.0) {
        let (inst, _) = gen_feasibility(m, m + extra, Seed(seed)).unwrap();
        let g0 = gamma_threshold(alpha, 1.0, 0.0).unwrap();
        let scheme = build_feasibility(&inst, &SchemeVariant::PdrRegularizedG { alpha }, 0.9 * g0).unwrap();
        check_descent(scheme, alpha, 1.0, g0)?;
    }
}

#[test]
fn safeguard_only_shrinks_toward_threshold() {
    let inst = gen_sparse_ls(20, 80, Seed(4)).unwrap();
    let variant = SchemeVariant::PdrRegularizedG { alpha: 1.8 };
    let trace = solve(&inst, &variant, &SolveOptions::with_k(50.0)).unwrap();
    let g0 = gamma_threshold(1.8, inst.lambda_max(), 0.0).unwrap();
    let gammas: Vec<f64> = trace.gamma_history.iter().map(|&(_, g)| g).collect();
    assert!((gammas[0] - 50.0 * g0).abs() <= 1e-12 * gammas[0]);
    assert!(gammas.windows(2).all(|w| w[1] < w[0]));
    assert!(*gammas.last().unwrap() >= 0.9999 * g0 * (1.0 - 1e-12));
}

#[test]
fn pr_guard_holds_along_run() {
    let inst = gen_sparse_ls(20, 80, Seed(6)).unwrap();
    let trace = solve(&inst, &SchemeVariant::PrShifted { beta: DEFAULT_BETA }, &SolveOptions::with_k(1.0)).unwrap();
    let l = inst.lambda_max();
    assert!((trace.gamma_history[0].1 - PR_START_FACTOR / (DEFAULT_BETA * l)).abs() < 1e-12 / l);
    assert!(trace.gamma_history.iter().all(|&(_, g)| 1.0 - DEFAULT_BETA * l * g > 0.0));
}

#[test]
fn iterates_of_alpha_methods_stay_feasible() {
    let inst = gen_sparse_ls(10, 40, Seed(1)).unwrap();
    let g0 = gamma_threshold(1.7, inst.lambda_max(), 0.0).unwrap();
    let mut scheme = build_sparse_ls(&inst, &SchemeVariant::PdrRegularizedG { alpha: 1.7 }, 20.0 * g0).unwrap();
    let mut s = IterateTriple::start(&DVector::zeros(40));
    for _ in 0..40 {
        s = scheme.step(&s, 20.0 * g0).unwrap();
        assert!(inst.set().contains(&s.v));
    }
}
