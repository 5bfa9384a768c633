use nalgebra::{DMatrix, DVector};

use crate::error::{PdrError, Result};
use crate::problems::{unsupported, Instance, RunMetrics, SchemeVariant, FEASIBILITY_SUCCESS};
use crate::prox::{dist_prox, project_affine, project_sparsity_box, AffineSetHandle, SparsityBox};
use crate::splitting::{pdr_step, DivergenceProbe, IterateTriple, SolveTrace, SplittingScheme};

/// Find a point of `C ∩ D` with `C = {x : Ax = b}` and `D` a [`SparsityBox`], posed as
/// `min ½ d_C(x)²` over `D`.
#[derive(Debug, Clone)]
pub struct FeasibilityInstance {
    affine: AffineSetHandle,
    set: SparsityBox,
}

impl FeasibilityInstance {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, set: SparsityBox) -> Result<Self> {
        if set.r > a.ncols() {
            return Err(PdrError::InvalidParameter(format!(
                "sparsity level {} exceeds dimension {}",
                set.r,
                a.ncols()
            )));
        }
        Ok(FeasibilityInstance {
            affine: AffineSetHandle::new(a, b)?,
            set,
        })
    }

    pub fn affine(&self) -> &AffineSetHandle {
        &self.affine
    }

    pub fn set(&self) -> &SparsityBox {
        &self.set
    }

    /// `½ d_C(z)²`.
    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        self.affine.half_dist_sq(z)
    }
}

/// `P_D(P_C(x))`.
pub fn alternating_projection_step(inst: &FeasibilityInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    project_sparsity_box(&project_affine(x, &inst.affine), &inst.set)
}

#[derive(Debug, Clone)]
pub struct FeasibilityScheme<'a> {
    inst: &'a FeasibilityInstance,
    variant: SchemeVariant,
}

/// Bind a feasibility instance to PDR (regularized `g`), shifted PR, or alternating
/// projections. `gamma` is checked against the PR scaling guard and ignored otherwise.
pub fn build_feasibility<'a>(
    inst: &'a FeasibilityInstance,
    variant: &SchemeVariant,
    gamma: f64,
) -> Result<FeasibilityScheme<'a>> {
    variant.validate()?;
    match variant {
        SchemeVariant::PdrRegularizedG { .. }
        | SchemeVariant::PrShifted { .. }
        | SchemeVariant::AlternatingProjection => {}
        other => return Err(unsupported(other, "feasibility")),
    }
    let mut scheme = FeasibilityScheme {
        inst,
        variant: *variant,
    };
    scheme.set_gamma(gamma)?;
    Ok(scheme)
}

fn pr_scaling(beta: f64, gamma: f64) -> Result<f64> {
    let denom = 1.0 - beta * gamma;
    if denom > 0.0 {
        Ok(denom)
    } else {
        Err(PdrError::ShiftScaling(denom))
    }
}

impl SplittingScheme for FeasibilityScheme<'_> {
    fn dim(&self) -> usize {
        self.inst.affine.dim()
    }

    fn step(&mut self, state: &IterateTriple, gamma: f64) -> Result<IterateTriple> {
        let affine = &self.inst.affine;
        let set = &self.inst.set;
        match self.variant {
            SchemeVariant::PdrRegularizedG { alpha } => pdr_step(
                |x, g| Ok(dist_prox(x, affine, g)),
                |w, _| project_sparsity_box(&(w / (alpha - 1.0)), set),
                state,
                gamma,
                alpha,
            ),
            SchemeVariant::PrShifted { beta } => {
                let denom = pr_scaling(beta, gamma)?;
                let x = &state.x;
                let pc = project_affine(&(x / (1.0 + beta * gamma)), affine);
                let u = (pc * gamma + x) / ((1.0 + beta) * gamma + 1.0);
                let v = project_sparsity_box(&((&u * 2.0 - x) / denom), set)?;
                let x = x + (&v - &u) * 2.0;
                Ok(IterateTriple { u, v, x, t: state.t + 1 })
            }
            SchemeVariant::AlternatingProjection => {
                let next = alternating_projection_step(self.inst, &state.x)?;
                Ok(IterateTriple {
                    u: next.clone(),
                    v: next.clone(),
                    x: next,
                    t: state.t + 1,
                })
            }
            other => Err(unsupported(&other, "feasibility")),
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
        z - project_affine(z, &self.inst.affine)
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn merit_alpha(&self) -> Option<f64> {
        self.variant.alpha()
    }

    fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if let SchemeVariant::PrShifted { beta } = self.variant {
            pr_scaling(beta, gamma)?;
        }
        Ok(())
    }

    fn divergence_probe(&self) -> Option<DivergenceProbe> {
        self.variant.uses_gamma().then_some(DivergenceProbe::SecondBlock)
    }
}

impl Instance for FeasibilityInstance {
    type Scheme<'a> = FeasibilityScheme<'a>;

    fn dim(&self) -> usize {
        self.affine.dim()
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn build<'a>(&'a self, variant: &SchemeVariant, gamma: f64) -> Result<FeasibilityScheme<'a>> {
        build_feasibility(self, variant, gamma)
    }

    /// `fval = ½ d_C(v)²`; success iff it is below [`FEASIBILITY_SUCCESS`].
    fn evaluate_run(&self, trace: &SolveTrace) -> RunMetrics {
        let fval = self.objective(&trace.final_state.v);
        RunMetrics {
            iterations: trace.iterations,
            fval,
            success: fval < FEASIBILITY_SUCCESS,
            rel_err: None,
            wall_time: trace.wall_time,
            termination: trace.termination,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::{gamma_threshold, run_solver, PdrConfig};

    fn line() -> FeasibilityInstance {
        FeasibilityInstance::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 2.0),
            SparsityBox::with_default_bound(1).unwrap(),
        )
        .unwrap()
    }

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_column_slice(&[a, b])
    }

    #[test]
    fn alternating_step_breaks_ties_by_index() {
        let inst = line();
        assert_eq!(alternating_projection_step(&inst, &v2(1.0, 1.0)).unwrap(), v2(1.0, 0.0));
    }

    #[test]
    fn alternating_sequence_matches_script() {
        let inst = line();
        let mut x = v2(1.0, 0.0);
        // P_C((a, 0)) = ((a+2)/2, (2-a)/2), then keep the first coordinate
        let mut a = 1.0;
        for _ in 0..5 {
            x = alternating_projection_step(&inst, &x).unwrap();
            a = (a + 2.0) / 2.0;
            assert!((x[0] - a).abs() < 1e-14 && x[1] == 0.0);
        }
    }

    #[test]
    fn pdr_finds_point_on_line() {
        let inst = line();
        let alpha = 1.7;
        let g0 = gamma_threshold(alpha, 1.0, 0.0).unwrap();
        let mut scheme = build_feasibility(&inst, &SchemeVariant::PdrRegularizedG { alpha }, 0.9 * g0).unwrap();
        let cfg = PdrConfig {
            alpha,
            max_iter: 100_000,
            ..Default::default()
        };
        let trace = run_solver(&mut scheme, &DVector::zeros(2), &cfg, 0.9 * g0, false).unwrap();
        let m = inst.evaluate_run(&trace);
        assert!(m.fval <= 1e-12, "fval {}", m.fval);
    }

    #[test]
    fn feasible_start_is_fixed_point() {
        let inst = line();
        let mut scheme = build_feasibility(&inst, &SchemeVariant::PdrRegularizedG { alpha: 1.8 }, 0.05).unwrap();
        let s = IterateTriple::start(&v2(2.0, 0.0));
        let n = scheme.step(&s, 0.05).unwrap();
        assert!((&n.x - &s.x).norm() < 1e-15 && (&n.v - &s.x).norm() < 1e-15);
    }

    #[test]
    fn success_threshold_is_strict() {
        let inst = line();
        let mut trace = run_solver(
            &mut build_feasibility(&inst, &SchemeVariant::AlternatingProjection, 1.0).unwrap(),
            &v2(2.0, 0.0),
            &PdrConfig::default(),
            1.0,
            false,
        )
        .unwrap();
        assert!(inst.evaluate_run(&trace).success);
        // (2+d, d) has ½ d_C² = d²
        for (target, ok) in [(5e-13, true), (5e-12, false)] {
            let d = f64::sqrt(target);
            trace.final_state.v = v2(2.0 + d, d);
            assert_eq!(inst.evaluate_run(&trace).success, ok);
        }
    }

    #[test]
    fn pr_guard_rejects_large_step() {
        let inst = line();
        assert!(matches!(
            build_feasibility(&inst, &SchemeVariant::PrShifted { beta: 2.2 }, 1.0 / 2.2),
            Err(PdrError::ShiftScaling(_))
        ));
    }
}
