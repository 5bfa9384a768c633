use nalgebra::{DMatrix, DVector};

use crate::error::{PdrError, Result};
use crate::problems::{finished, unsupported, Instance, RunMetrics, SchemeVariant};
use crate::prox::{masked_quadratic_prox, project_rank, project_rank_flat, sorted_svd, svt_shrink, SampledEntries};
use crate::splitting::{pdr_step, DivergenceProbe, IterateTriple, SolveTrace, SplittingScheme};

/// Default relative observed-residual tolerance of the completion stop rule.
pub const COMPLETION_STOP_TOL: f64 = 1e-4;

/// Rank-`r` matrix completion from the entries in `observed`.
///
/// Iterates are `n₁ × n₂` matrices flattened row-major. The stop rule is
/// `‖P_Ω(V − M)‖_F / ‖P_Ω(M)‖_F < stop_tol` and replaces the relative-change rule.
#[derive(Debug, Clone)]
pub struct CompletionInstance {
    observed: SampledEntries,
    r: usize,
    observed_norm: f64,
    /// Full ground truth, when known.
    pub truth: Option<DMatrix<f64>>,
    pub stop_tol: f64,
    /// Feed `V^t` instead of `X^t` into the rank projection of the α-methods.
    pub literal_v_argument: bool,
}

impl CompletionInstance {
    pub fn new(observed: SampledEntries, r: usize) -> Result<Self> {
        let (n1, n2) = (observed.rows(), observed.cols());
        if r == 0 || r > n1.min(n2) {
            return Err(PdrError::InvalidParameter(format!(
                "rank {r} outside 1..={}",
                n1.min(n2)
            )));
        }
        if observed.is_empty() {
            return Err(PdrError::InvalidParameter("no observed entries".into()));
        }
        let observed_norm = observed.observed_norm();
        Ok(CompletionInstance {
            observed,
            r,
            observed_norm,
            truth: None,
            stop_tol: COMPLETION_STOP_TOL,
            literal_v_argument: false,
        })
    }

    /// Attach the full matrix the observations were drawn from.
    pub fn with_truth(mut self, truth: DMatrix<f64>) -> Result<Self> {
        if truth.shape() != self.shape() {
            return Err(PdrError::DimensionMismatch {
                expected: self.observed.rows() * self.observed.cols(),
                got: truth.len(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn observed(&self) -> &SampledEntries {
        &self.observed
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.observed.rows(), self.observed.cols())
    }

    /// `p = |Ω| / (n₁ n₂)`.
    pub fn sampling_ratio(&self) -> f64 {
        let (n1, n2) = self.shape();
        self.observed.len() as f64 / (n1 * n2) as f64
    }

    /// Geometric mean side `√(n₁ n₂)`, equal to `n` for square instances.
    pub fn side(&self) -> f64 {
        let (n1, n2) = self.shape();
        ((n1 * n2) as f64).sqrt()
    }

    /// `½‖P_Ω(X) − P_Ω(M)‖²` for a row-major flattened `X`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.observed.residual_norm(x).powi(2)
    }

    /// `‖P_Ω(V − M)‖_F / ‖P_Ω(M)‖_F`.
    pub fn observed_residual(&self, v: &DVector<f64>) -> f64 {
        self.observed.residual_norm(v) / self.observed_norm.max(f64::MIN_POSITIVE)
    }

    /// `‖V − M‖_F / ‖M‖_F`, absent without ground truth.
    pub fn relative_error(&self, v: &DVector<f64>) -> Option<f64> {
        self.truth.as_ref().map(|m| {
            let err = (to_matrix(v, m.nrows(), m.ncols()) - m).norm();
            err / m.norm().max(f64::MIN_POSITIVE)
        })
    }

    pub fn to_matrix(&self, flat: &DVector<f64>) -> DMatrix<f64> {
        let (n1, n2) = self.shape();
        to_matrix(flat, n1, n2)
    }
}

fn to_matrix(flat: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, flat.as_slice())
}

fn to_flat(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.transpose().as_slice())
}

/// `R` with `R_ij = X_ij − M_ij` on `Ω` and zero elsewhere.
pub fn svp_residual(inst: &CompletionInstance, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(x.nrows(), x.ncols());
    for (&(i, j), &m) in inst.observed.coords().iter().zip(inst.observed.values()) {
        r[(i, j)] = x[(i, j)] - m;
    }
    r
}

/// `P_r(X − η_t R)` with `η_t = 1/(p√t)`.
pub fn svp_step(inst: &CompletionInstance, x: &DMatrix<f64>, t: usize) -> Result<DMatrix<f64>> {
    if t == 0 {
        return Err(PdrError::InvalidParameter("SVP step index starts at 1".into()));
    }
    let eta = 1.0 / (inst.sampling_ratio() * (t as f64).sqrt());
    project_rank(&(x - svp_residual(inst, x) * eta), inst.r)
}

/// One SVT iteration: returns `(Y', X')` with `Y' = shrink(X, τ)` and
/// `X' = X + δ(M − Y')` on `Ω`, zero off `Ω`.
pub fn svt_step(
    inst: &CompletionInstance,
    x: &DMatrix<f64>,
    tau: f64,
    delta: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let y = svt_shrink(x, tau)?;
    let mut next = DMatrix::zeros(x.nrows(), x.ncols());
    for (&(i, j), &m) in inst.observed.coords().iter().zip(inst.observed.values()) {
        next[(i, j)] = x[(i, j)] + delta * (m - y[(i, j)]);
    }
    Ok((y, next))
}

#[derive(Debug, Clone)]
pub struct CompletionScheme<'a> {
    inst: &'a CompletionInstance,
    variant: SchemeVariant,
    tau: f64,
    delta: f64,
}

/// Bind a completion instance to Method 1 (regularized `g`), Method 2 (plain `g`), SVP
/// or SVT.
pub fn build_completion<'a>(
    inst: &'a CompletionInstance,
    variant: &SchemeVariant,
    _gamma: f64,
) -> Result<CompletionScheme<'a>> {
    variant.validate()?;
    let (mut tau, mut delta) = (0.0, 0.0);
    match *variant {
        SchemeVariant::PdrRegularizedG { .. } | SchemeVariant::PdrPlainG { .. } | SchemeVariant::Svp => {}
        SchemeVariant::Svt { tau: t, delta: d } => {
            tau = t.unwrap_or(5.0 * inst.side());
            delta = d.unwrap_or(1.2 / inst.sampling_ratio());
        }
        ref other => return Err(unsupported(other, "matrix completion")),
    }
    Ok(CompletionScheme {
        inst,
        variant: *variant,
        tau,
        delta,
    })
}

impl CompletionScheme<'_> {
    fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (n1, n2) = self.inst.shape();
        project_rank_flat(z, n1, n2, self.inst.r)
    }

    fn alpha_step(&self, state: &IterateTriple, gamma: f64, alpha: f64, scaled: bool) -> Result<IterateTriple> {
        let observed = &self.inst.observed;
        let denom = if scaled { alpha - 1.0 } else { 1.0 };
        if !self.inst.literal_v_argument {
            return pdr_step(
                |x, g| Ok(masked_quadratic_prox(x, observed, g)),
                |w, _| if scaled { self.project(&(w / denom)) } else { self.project(w) },
                state,
                gamma,
                alpha,
            );
        }
        if !(gamma > 0.0) {
            return Err(PdrError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let u = masked_quadratic_prox(&state.x, observed, gamma);
        let w = &u * alpha - &state.v;
        let v = if scaled { self.project(&(w / denom))? } else { self.project(&w)? };
        let x = &state.x + (&v - &u);
        Ok(IterateTriple { u, v, x, t: state.t + 1 })
    }
}

impl SplittingScheme for CompletionScheme<'_> {
    fn dim(&self) -> usize {
        let (n1, n2) = self.inst.shape();
        n1 * n2
    }

    fn step(&mut self, state: &IterateTriple, gamma: f64) -> Result<IterateTriple> {
        match self.variant {
            SchemeVariant::PdrRegularizedG { alpha } => self.alpha_step(state, gamma, alpha, true),
            SchemeVariant::PdrPlainG { alpha } => self.alpha_step(state, gamma, alpha, false),
            SchemeVariant::Svp => {
                let x = self.inst.to_matrix(&state.x);
                let next = to_flat(&svp_step(self.inst, &x, state.t + 1)?);
                Ok(IterateTriple {
                    u: next.clone(),
                    v: next.clone(),
                    x: next,
                    t: state.t + 1,
                })
            }
            SchemeVariant::Svt { .. } => {
                let x = self.inst.to_matrix(&state.x);
                let (y, next) = svt_step(self.inst, &x, self.tau, self.delta)?;
                let y = to_flat(&y);
                Ok(IterateTriple {
                    u: y.clone(),
                    v: y,
                    x: to_flat(&next),
                    t: state.t + 1,
                })
            }
            other => Err(unsupported(&other, "matrix completion")),
        }
    }

    fn f_val(&self, z: &DVector<f64>) -> f64 {
        self.inst.objective(z)
    }

    /// Indicator of rank `≤ r`, with singular values below `1e-9 σ₁` treated as zero.
    fn g_val(&self, z: &DVector<f64>) -> f64 {
        let r = self.inst.r;
        match sorted_svd(&self.inst.to_matrix(z)) {
            Ok((_, s, _)) if s.len() <= r || s[r] <= 1e-9 * s[0].max(1.0) => 0.0,
            _ => f64::INFINITY,
        }
    }

    fn g_regularizer(&self, z: &DVector<f64>, gamma: f64) -> f64 {
        match self.variant {
            SchemeVariant::PdrRegularizedG { alpha } => -0.5 * (2.0 - alpha) / gamma * z.norm_squared(),
            _ => 0.0,
        }
    }

    fn grad_f(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(z.len());
        for (k, m) in self.inst.observed.iter_linear() {
            g[k] = z[k] - m;
        }
        g
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    /// Only Method 1 carries the regularized `g` the merit function is built on.
    fn merit_alpha(&self) -> Option<f64> {
        match self.variant {
            SchemeVariant::PdrRegularizedG { alpha } => Some(alpha),
            _ => None,
        }
    }

    fn divergence_probe(&self) -> Option<DivergenceProbe> {
        self.variant
            .uses_gamma()
            .then(|| DivergenceProbe::FirstBlockScaled(1.0 / self.inst.side()))
    }

    fn should_stop(&self, _prev: &IterateTriple, cur: &IterateTriple, _tol: f64) -> bool {
        self.inst.observed_residual(&cur.v) < self.inst.stop_tol
    }
}

impl Instance for CompletionInstance {
    type Scheme<'a> = CompletionScheme<'a>;

    fn dim(&self) -> usize {
        let (n1, n2) = self.shape();
        n1 * n2
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn build<'a>(&'a self, variant: &SchemeVariant, gamma: f64) -> Result<CompletionScheme<'a>> {
        build_completion(self, variant, gamma)
    }

    /// `fval = ½‖P_Ω(V − M)‖²`; success means the stop rule fired.
    fn evaluate_run(&self, trace: &SolveTrace) -> RunMetrics {
        let v = &trace.final_state.v;
        RunMetrics {
            iterations: trace.iterations,
            fval: self.objective(v),
            success: finished(trace),
            rel_err: self.relative_error(v),
            wall_time: trace.wall_time,
            termination: trace.termination,
        }
    }
}
