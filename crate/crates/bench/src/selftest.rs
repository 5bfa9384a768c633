//! Brute-force oracle suites, coded independently of the solver library.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use pdr_core::datagen::{gen_completion, gen_feasibility, gen_sparse_ls, Seed};
use pdr_core::problems::{build_completion, build_feasibility, build_sparse_ls, svp_step, svt_step, SchemeVariant};
use pdr_core::prox::{project_rank, project_sparsity_box, svt_shrink, SparsityBox};
use pdr_core::splitting::{gamma_threshold, merit_forms, IterateTriple, SplittingScheme};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Result of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    /// First few failure descriptions; empty on success.
    pub failures: Vec<String>,
    pub elapsed: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const MAX_REPORTED: usize = 5;

struct Suite {
    name: &'static str,
    cases: usize,
    failed: usize,
    failures: Vec<String>,
    started: Instant,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite { name, cases: 0, failed: 0, failures: Vec::new(), started: Instant::now() }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_REPORTED {
                self.failures.push(describe());
            }
        }
    }

    fn finish(mut self) -> SuiteReport {
        if self.failed > self.failures.len() {
            self.failures.push(format!("{} more failure(s) not shown", self.failed - self.failures.len()));
        }
        SuiteReport { name: self.name, cases: self.cases, failures: self.failures, elapsed: self.started.elapsed().as_secs_f64() }
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    Seed(seed).stream(stream)
}

fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Smallest squared distance from `x` to the sparsity box, by enumerating every support of size `r`.
fn enumerate_sparse_distance(x: &DVector<f64>, set: &SparsityBox) -> f64 {
    let n = x.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != set.r {
            continue;
        }
        let d: f64 = (0..n)
            .map(|i| {
                let keep = mask >> i & 1 == 1;
                let z = if keep { x[i].clamp(-set.bound, set.bound) } else { 0.0 };
                (x[i] - z).powi(2)
            })
            .sum();
        best = best.min(d);
    }
    best
}

/// Sparsity-box projection against exhaustive support enumeration.
pub fn projection_enumeration(cases: usize, seed: u64) -> SuiteReport {
    let mut suite = Suite::new("sparsity projection vs enumeration");
    let mut rng = rng(seed, 11);
    for case in 0..cases {
        let n = rng.random_range(1..=12);
        let r = rng.random_range(1..=n.min(4));
        let bound = if rng.random_bool(0.5) { 0.5 } else { 1e6 };
        let set = SparsityBox::new(r, bound).expect("valid box");
        let x = uniform_vector(&mut rng, n, 3.0);
        match project_sparsity_box(&x, &set) {
            Ok(p) => {
                let got = (&x - &p).norm_squared();
                let best = enumerate_sparse_distance(&x, &set);
                let nnz = p.iter().filter(|z| **z != 0.0).count();
                let in_box = p.iter().all(|z| z.abs() <= bound);
                suite.check((got - best).abs() <= 1e-12 * best.max(1.0) && nnz <= r && in_box, || {
                    format!("case {case}: n={n} r={r} bound={bound}: distance {got} vs {best}, nnz {nnz}")
                });
            }
            Err(e) => suite.check(false, || format!("case {case}: {e}")),
        }
    }
    suite.finish()
}

/// Direct evaluation of the merit from its defining expression.
fn merit_reference(f_u: f64, g_v: f64, u: &DVector<f64>, v: &DVector<f64>, x: &DVector<f64>, gamma: f64, alpha: f64) -> f64 {
    let d = v - u;
    f_u + g_v - d.norm_squared() / (2.0 * gamma)
        + (x - u * (alpha - 1.0)).dot(&d) / gamma
        + (2.0 - alpha) * u.norm_squared() / (2.0 * gamma)
}

/// The three merit expressions agree with each other and with the direct formula.
pub fn merit_equivalence(cases: usize, seed: u64) -> SuiteReport {
    let mut suite = Suite::new("merit form equivalence");
    let mut rng = rng(seed, 12);
    for case in 0..cases {
        let n = rng.random_range(1..=50);
        let (u, v, x) = (
            uniform_vector(&mut rng, n, 2.0),
            uniform_vector(&mut rng, n, 2.0),
            uniform_vector(&mut rng, n, 2.0),
        );
        let gamma = rng.random_range(0.01..2.0);
        let alpha = 2.0 - rng.random_range(0.0..0.5);
        let (f_u, g_v) = (rng.random_range(0.0..10.0), rng.random_range(-1.0..1.0));
        let m = merit_forms(f_u, g_v, &u, &v, &x, gamma, alpha);
        let reference = merit_reference(f_u, g_v, &u, &v, &x, gamma, alpha);
        let forms = [m.value_primary, m.value_alt1, m.value_alt2, reference];
        let scale = forms.iter().fold(1.0f64, |s, f| s.max(f.abs()));
        let spread = forms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - forms.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        suite.check(spread <= 1e-9 * scale, || format!("case {case}: forms {forms:?} spread {spread:e}"));
    }
    suite.finish()
}

/// Left-hand side of the step-size condition, written out independently.
fn step_condition_reference(alpha: f64, gamma: f64, l_f: f64, l_w: f64) -> f64 {
    (4.0 - alpha) / 2.0 * (1.0 + gamma * l_f).powi(2) + (9.0 - 2.0 * alpha) / 2.0 * gamma * l_w - (1.0 + alpha) / 2.0
}

/// `γ₀` is a root of the step-size condition with the condition negative below it.
pub fn gamma_threshold_suite(cases: usize, seed: u64) -> SuiteReport {
    let mut suite = Suite::new("step-size threshold");
    let mut rng = rng(seed, 13);
    for case in 0..cases {
        let alpha = 2.0 - rng.random_range(0.0..0.5);
        let l_f = rng.random_range(0.1..10.0);
        let l_w = rng.random_range(0.0..l_f);
        match gamma_threshold(alpha, l_f, l_w) {
            Ok(g0) => {
                let at = step_condition_reference(alpha, g0, l_f, l_w);
                let half = step_condition_reference(alpha, 0.5 * g0, l_f, l_w);
                suite.check(g0 > 0.0 && at.abs() <= 1e-12 && half < 0.0, || {
                    format!("case {case}: alpha={alpha} L={l_f} l={l_w}: h(g0)={at:e}, h(g0/2)={half:e}")
                });
            }
            Err(e) => suite.check(false, || format!("case {case}: {e}")),
        }
        // Unit Lipschitz constant, convex f: closed form.
        let closed = ((1.0 + alpha) / (4.0 - alpha)).sqrt() - 1.0;
        match gamma_threshold(alpha, 1.0, 0.0) {
            Ok(g0) => suite.check((g0 - closed).abs() <= 1e-12, || format!("alpha={alpha}: {g0} vs closed form {closed}")),
            Err(e) => suite.check(false, || format!("alpha={alpha}: {e}")),
        }
    }
    suite.finish()
}

/// Independent sparsity projection: sort scores, ties to the smaller index.
fn reference_sparse_projection(x: &DVector<f64>, set: &SparsityBox) -> DVector<f64> {
    let clip = |z: f64| z.clamp(-set.bound, set.bound);
    let score = |z: f64| z * z - (z - clip(z)).powi(2);
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| score(x[j]).total_cmp(&score(x[i])).then(i.cmp(&j)));
    let mut out = DVector::zeros(x.len());
    for &i in &idx[..set.r] {
        out[i] = clip(x[i]);
    }
    out
}

/// Rank projection from an eigendecomposition of `XᵀX` instead of an SVD.
fn reference_rank_projection(x: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(x.tr_mul(x));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let v = eig.eigenvectors.select_columns(order[..r].iter());
    x * &v * v.transpose()
}

/// Step one scheme and an independent DR reference for `iters` steps.
fn compare_dr<S: SplittingScheme>(
    suite: &mut Suite,
    label: &str,
    scheme: &mut S,
    x0: DVector<f64>,
    gamma: f64,
    iters: usize,
    mut reference: impl FnMut(&DVector<f64>) -> (DVector<f64>, DVector<f64>),
) {
    let mut state = IterateTriple::start(&x0);
    let mut x = x0;
    let mut worst = 0.0f64;
    let mut error = None;
    for _ in 0..iters {
        state = match scheme.step(&state, gamma) {
            Ok(s) => s,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let (u, v) = reference(&x);
        x = &x + (&v - &u);
        for (a, b) in [(&state.u, &u), (&state.v, &v), (&state.x, &x)] {
            worst = worst.max((a - b).norm() / a.norm().max(b.norm()).max(1.0));
        }
    }
    suite.check(error.is_none() && worst <= 1e-12, || match &error {
        Some(e) => format!("{label}: {e}"),
        None => format!("{label}: deviation {worst:e}"),
    });
}

/// `α = 2` in every family matches an independently coded classical DR iteration.
pub fn alpha_two_reduction(instances: u64, iters: usize, seed: u64) -> SuiteReport {
    let mut suite = Suite::new("alpha = 2 reduces to DR");
    for s in seed..seed + instances {
        let scale = 1.0 + (s - seed) as f64;

        let Ok(inst) = gen_sparse_ls(10, 30, Seed(s)) else {
            suite.check(false, || format!("seed {s}: sparse LS generation failed"));
            continue;
        };
        let (a, b) = (inst.data().a().clone(), inst.data().b().clone());
        let l = SymmetricEigen::new(a.tr_mul(&a)).eigenvalues.max();
        let gamma = 0.05 * scale / l;
        let lhs = (a.tr_mul(&a) * gamma + DMatrix::identity(30, 30)).lu();
        let set = *inst.set();
        match build_sparse_ls(&inst, &SchemeVariant::dr(), gamma) {
            Ok(mut scheme) => compare_dr(&mut suite, &format!("sparse LS seed {s}"), &mut scheme, DVector::zeros(30), gamma, iters, |x| {
                let u = lhs.solve(&(a.tr_mul(&b) * gamma + x)).expect("nonsingular");
                let v = reference_sparse_projection(&(&u * 2.0 - x), &set);
                (u, v)
            }),
            Err(e) => suite.check(false, || format!("sparse LS seed {s}: {e}")),
        }

        let (inst, _) = match gen_feasibility(5, 20, Seed(s)) {
            Ok(g) => g,
            Err(e) => {
                suite.check(false, || format!("seed {s}: feasibility generation failed: {e}"));
                continue;
            }
        };
        let gamma = 0.05 * scale;
        let (a, b) = (inst.affine().a().clone(), inst.affine().b().clone());
        let gram = (&a * a.transpose()).lu();
        let set = *inst.set();
        match build_feasibility(&inst, &SchemeVariant::dr(), gamma) {
            Ok(mut scheme) => compare_dr(&mut suite, &format!("feasibility seed {s}"), &mut scheme, DVector::from_element(20, 0.1), gamma, iters, |x| {
                let proj = x + a.tr_mul(&gram.solve(&(&b - &a * x)).expect("full row rank"));
                let u = (x + proj * gamma) / (1.0 + gamma);
                let v = reference_sparse_projection(&(&u * 2.0 - x), &set);
                (u, v)
            }),
            Err(e) => suite.check(false, || format!("feasibility seed {s}: {e}")),
        }

        let Ok(inst) = gen_completion(8, 2, 0.5, Seed(s)) else {
            suite.check(false, || format!("seed {s}: completion generation failed"));
            continue;
        };
        let gamma = 0.1 * scale;
        let mask: Vec<((usize, usize), f64)> =
            inst.observed().coords().iter().copied().zip(inst.observed().values().iter().copied()).collect();
        match build_completion(&inst, &SchemeVariant::dr(), gamma) {
            Ok(mut scheme) => compare_dr(&mut suite, &format!("completion seed {s}"), &mut scheme, DVector::zeros(64), gamma, iters, |x| {
                let mut u = x.clone();
                for &((i, j), m) in &mask {
                    let k = i * 8 + j;
                    u[k] = (x[k] + gamma * m) / (1.0 + gamma);
                }
                let w = DMatrix::from_row_slice(8, 8, (&u * 2.0 - x).as_slice());
                let p = reference_rank_projection(&w, 2);
                (u, DVector::from_row_slice(p.transpose().as_slice()))
            }),
            Err(e) => suite.check(false, || format!("completion seed {s}: {e}")),
        }
    }
    suite.finish()
}

/// Sorted eigenvalues of `XᵀX`, i.e. squared singular values, descending.
fn squared_singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(x.tr_mul(x)).eigenvalues.iter().map(|e| e.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Rank projection leaves exactly the tail energy: `‖X − P_r X‖² = Σ_{i>r} σ_i²`.
pub fn eckart_young(cases: usize, seed: u64) -> SuiteReport {
    let mut suite = Suite::new("rank projection residual identity");
    let mut rng = rng(seed, 14);
    for case in 0..cases {
        let x = uniform_matrix(&mut rng, 8, 6);
        let r = rng.random_range(1..=6);
        match project_rank(&x, r) {
            Ok(p) => {
                let sq = squared_singular_values(&x);
                let tail: f64 = sq[r..].iter().sum();
                let got = (&x - &p).norm_squared();
                let rank_excess = squared_singular_values(&p).get(r).copied().unwrap_or(0.0);
                suite.check((got - tail).abs() <= 1e-8 && rank_excess <= 1e-12 * sq[0].max(1.0), || {
                    format!("case {case}: r={r} residual {got} vs tail {tail}, excess {rank_excess:e}")
                });
            }
            Err(e) => suite.check(false, || format!("case {case}: {e}")),
        }
    }
    suite.finish()
}

/// Eigenvalues of the dilation `[[0, X], [Xᵀ, 0]]` are `±σ_i`, each accurate to
/// `ε‖X‖` even for tiny `σ_i`, unlike square roots of the eigenvalues of `XᵀX`.
fn dilation_eigenvalues(x: &DMatrix<f64>) -> Vec<f64> {
    let (m, n) = x.shape();
    let mut d = DMatrix::zeros(m + n, m + n);
    d.view_mut((0, m), (m, n)).copy_from(x);
    d.view_mut((m, 0), (n, m)).copy_from(&x.transpose());
    SymmetricEigen::new(d).eigenvalues.iter().copied().collect()
}

fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    dilation_eigenvalues(x).iter().fold(0.0, |a, e| a.max(e.abs()))
}

fn nuclear_norm(x: &DMatrix<f64>) -> f64 {
    0.5 * dilation_eigenvalues(x).iter().map(|e| e.abs()).sum::<f64>()
}

/// Off-support zeros for SVT, the SVP fixed point and shrinkage optimality.
pub fn completion_structure(cases: usize, seed: u64) -> SuiteReport {
    let mut suite = Suite::new("SVP/SVT structure");
    let mut rng = rng(seed, 15);
    for case in 0..cases {
        // Shrinkage is the prox of τ‖·‖_*: G = (X − Y)/τ must be a subgradient at Y.
        let x = uniform_matrix(&mut rng, 6, 6) * 3.0;
        let tau = rng.random_range(0.1..2.0);
        match svt_shrink(&x, tau) {
            Ok(y) => {
                let g = (&x - &y) / tau;
                let (spec, inner, nuc) = (spectral_norm(&g), g.dot(&y), nuclear_norm(&y));
                suite.check(spec <= 1.0 + 1e-8 && (inner - nuc).abs() <= 1e-8 * nuc.max(1.0), || {
                    format!("shrink case {case}: ‖G‖₂={spec}, ⟨G,Y⟩={inner}, ‖Y‖_*={nuc}")
                });
            }
            Err(e) => suite.check(false, || format!("shrink case {case}: {e}")),
        }
    }
    for s in seed..seed + 5 {
        let inst = match gen_completion(12, 2, 0.4, Seed(s)) {
            Ok(i) => i,
            Err(e) => {
                suite.check(false, || format!("seed {s}: {e}"));
                continue;
            }
        };
        let truth = inst.truth.clone().expect("generated instances keep the truth");
        match svp_step(&inst, &truth, 1) {
            Ok(next) => {
                let dev = (&next - &truth).norm() / truth.norm();
                suite.check(dev <= 1e-12, || format!("seed {s}: SVP moved the exact solution by {dev:e}"));
            }
            Err(e) => suite.check(false, || format!("seed {s}: {e}")),
        }
        let observed: Vec<(usize, usize)> = inst.observed().coords().to_vec();
        let mut x = DMatrix::zeros(12, 12);
        for step in 0..30 {
            match svt_step(&inst, &x, 60.0, 1.2 / inst.sampling_ratio()) {
                Ok((_, next)) => x = next,
                Err(e) => {
                    suite.check(false, || format!("seed {s} step {step}: {e}"));
                    break;
                }
            }
            let stray = (0..12)
                .flat_map(|i| (0..12).map(move |j| (i, j)))
                .filter(|ij| observed.binary_search(ij).is_err())
                .any(|ij| x[ij] != 0.0);
            suite.check(!stray, || format!("seed {s} step {step}: SVT iterate nonzero off the sample"));
        }
    }
    suite.finish()
}

/// Every suite at its acceptance size.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        projection_enumeration(500, seed),
        merit_equivalence(1000, seed),
        gamma_threshold_suite(100, seed),
        alpha_two_reduction(10, 50, seed),
        eckart_young(100, seed),
        completion_structure(100, seed),
    ]
}
