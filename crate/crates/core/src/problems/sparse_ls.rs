use nalgebra::{DMatrix, DVector};

use crate::error::{PdrError, Result};
use crate::problems::{finished, unsupported, Instance, RunMetrics, SchemeVariant};
use crate::prox::{project_sparsity_box, LeastSquaresData, LsProxHandle, SparsityBox};
use crate::splitting::{pdr_step, IterateTriple, SolveTrace, SplittingScheme};

/// `min ½‖Au − b‖²` over a [`SparsityBox`].
#[derive(Debug, Clone)]
pub struct SparseLsInstance {
    data: LeastSquaresData,
    set: SparsityBox,
    /// Planted signal, when generated synthetically.
    pub truth: Option<DVector<f64>>,
    /// Unscaled noise draw `ε` with `b = A x̃ + noise_level · ε`, when generated synthetically.
    pub noise: Option<DVector<f64>>,
    pub noise_level: f64,
}

impl SparseLsInstance {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, set: SparsityBox) -> Result<Self> {
        if set.r > a.ncols() {
            return Err(PdrError::InvalidParameter(format!(
                "sparsity level {} exceeds dimension {}",
                set.r,
                a.ncols()
            )));
        }
        Ok(SparseLsInstance {
            data: LeastSquaresData::new(a, b)?,
            set,
            truth: None,
            noise: None,
            noise_level: 0.0,
        })
    }

    pub fn with_truth(mut self, truth: DVector<f64>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_noise(mut self, level: f64, noise: DVector<f64>) -> Self {
        self.noise_level = level;
        self.noise = Some(noise);
        self
    }

    pub fn data(&self) -> &LeastSquaresData {
        &self.data
    }

    pub fn set(&self) -> &SparsityBox {
        &self.set
    }

    pub fn lambda_max(&self) -> f64 {
        self.data.lambda_max()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        self.data.objective(z)
    }
}

/// Splitting scheme for the sparse least-squares family.
#[derive(Debug, Clone)]
pub struct SparseLsScheme<'a> {
    inst: &'a SparseLsInstance,
    variant: SchemeVariant,
    ls: LsProxHandle<'a>,
}

/// Bind a sparse least-squares instance to PDR (regularized `g`) or shifted PR, with the
/// factorization prepared for `gamma`.
pub fn build_sparse_ls<'a>(
    inst: &'a SparseLsInstance,
    variant: &SchemeVariant,
    gamma: f64,
) -> Result<SparseLsScheme<'a>> {
    variant.validate()?;
    match variant {
        SchemeVariant::PdrRegularizedG { .. } | SchemeVariant::PrShifted { .. } => {}
        other => return Err(unsupported(other, "sparse least squares")),
    }
    let mut scheme = SparseLsScheme {
        inst,
        variant: *variant,
        ls: LsProxHandle::new(&inst.data),
    };
    scheme.set_gamma(gamma)?;
    Ok(scheme)
}

impl SparseLsScheme<'_> {
    fn pr_shift(beta: f64, lipschitz: f64, gamma: f64) -> f64 {
        beta * gamma * lipschitz + 1.0
    }
}

impl SplittingScheme for SparseLsScheme<'_> {
    fn dim(&self) -> usize {
        self.inst.data.a().ncols()
    }

    fn step(&mut self, state: &IterateTriple, gamma: f64) -> Result<IterateTriple> {
        let set = &self.inst.set;
        match self.variant {
            SchemeVariant::PdrRegularizedG { alpha } => {
                let ls = &self.ls;
                pdr_step(
                    |x, g| ls.ls_prox(x, g),
                    |w, _| project_sparsity_box(&(w / (alpha - 1.0)), set),
                    state,
                    gamma,
                    alpha,
                )
            }
            SchemeVariant::PrShifted { beta } => {
                let lipschitz = self.inst.lambda_max();
                let shift = Self::pr_shift(beta, lipschitz, gamma);
                let rhs = self.inst.data.a().tr_mul(self.inst.data.b()) * gamma + &state.x;
                let u = self.ls.solve_shifted(&rhs, gamma, shift)?;
                let denom = 1.0 - beta * lipschitz * gamma;
                if !(denom > 0.0) {
                    return Err(PdrError::ShiftScaling(denom));
                }
                let v = project_sparsity_box(&((&u * 2.0 - &state.x) / denom), set)?;
                let x = &state.x + (&v - &u) * 2.0;
                Ok(IterateTriple { u, v, x, t: state.t + 1 })
            }
            other => Err(unsupported(&other, "sparse least squares")),
        }
    }

    fn f_val(&self, z: &DVector<f64>) -> f64 {
        self.inst.objective(z)
    }

    fn g_val(&self, z: &DVector<f64>) -> f64 {
        self.inst.set.indicator(z)
    }

    fn g_regularizer(&self, z: &DVector<f64>, gamma: f64) -> f64 {
        match self.variant {
            SchemeVariant::PdrRegularizedG { alpha } => -0.5 * (2.0 - alpha) / gamma * z.norm_squared(),
            _ => 0.0,
        }
    }

    fn grad_f(&self, z: &DVector<f64>) -> DVector<f64> {
        self.inst.data.gradient(z)
    }

    fn lipschitz(&self) -> f64 {
        self.inst.lambda_max()
    }

    fn merit_alpha(&self) -> Option<f64> {
        self.variant.alpha()
    }

    fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        match self.variant {
            SchemeVariant::PrShifted { beta } => {
                let lipschitz = self.inst.lambda_max();
                let denom = 1.0 - beta * lipschitz * gamma;
                if !(denom > 0.0) {
                    return Err(PdrError::ShiftScaling(denom));
                }
                self.ls.prepare_shifted(gamma, Self::pr_shift(beta, lipschitz, gamma))
            }
            _ => self.ls.prepare(gamma),
        }
    }
}

impl Instance for SparseLsInstance {
    type Scheme<'a> = SparseLsScheme<'a>;

    fn dim(&self) -> usize {
        self.data.a().ncols()
    }

    fn lipschitz(&self) -> f64 {
        self.lambda_max()
    }

    fn build<'a>(&'a self, variant: &SchemeVariant, gamma: f64) -> Result<SparseLsScheme<'a>> {
        build_sparse_ls(self, variant, gamma)
    }

    /// `fval = ½‖Av − b‖²` at the final `v`; success means the stop rule fired.
    fn evaluate_run(&self, trace: &SolveTrace) -> RunMetrics {
        RunMetrics {
            iterations: trace.iterations,
            fval: self.objective(&trace.final_state.v),
            success: finished(trace),
            rel_err: None,
            wall_time: trace.wall_time,
            termination: trace.termination,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{solve, SolveOptions};
    use crate::splitting::gamma_threshold;

    fn tiny() -> SparseLsInstance {
        SparseLsInstance::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_element(1, 3.0),
            SparsityBox::with_default_bound(1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn one_sparse_exact_solution() {
        let inst = tiny();
        let alpha = 1.9;
        let g0 = gamma_threshold(alpha, inst.lambda_max(), 0.0).unwrap();
        let gamma = 0.9 * g0;
        let mut scheme = build_sparse_ls(&inst, &SchemeVariant::PdrRegularizedG { alpha }, gamma).unwrap();
        let cfg = crate::splitting::PdrConfig {
            alpha,
            k: 1.0,
            tol: 1e-12,
            max_iter: 200_000,
            ..Default::default()
        };
        let trace = crate::splitting::run_solver(&mut scheme, &DVector::zeros(2), &cfg, gamma, false).unwrap();
        let v = &trace.final_state.v;
        assert!(inst.objective(v) <= 1e-12, "fval {}", inst.objective(v));
        assert!((v[0] - 3.0).abs() < 1e-6 && v[1] == 0.0);
    }

    #[test]
    fn wrong_family_variants_are_rejected() {
        let inst = tiny();
        for v in [SchemeVariant::Svp, SchemeVariant::AlternatingProjection, SchemeVariant::PdrPlainG { alpha: 1.8 }] {
            assert!(matches!(build_sparse_ls(&inst, &v, 0.1), Err(PdrError::UnsupportedVariant { .. })));
        }
    }

    #[test]
    fn pr_rejects_oversized_step() {
        let inst = tiny();
        let beta = 2.2;
        let too_big = 1.0 / (beta * inst.lambda_max());
        assert!(matches!(
            build_sparse_ls(&inst, &SchemeVariant::PrShifted { beta }, too_big),
            Err(PdrError::ShiftScaling(_))
        ));
    }

    #[test]
    fn pr_solves_tiny_instance() {
        let inst = tiny();
        let trace = solve(&inst, &SchemeVariant::PrShifted { beta: 2.2 }, &SolveOptions::with_k(50.0)).unwrap();
        let m = inst.evaluate_run(&trace);
        assert!(m.success);
        assert!(m.fval < 1e-10, "fval {}", m.fval);
    }
}
