//! Problem families bound to [`SplittingScheme`](crate::splitting::SplittingScheme), their
//! baselines, and per-run success metrics.

mod completion;
mod feasibility;
mod sparse_ls;

pub use completion::{build_completion, COMPLETION_STOP_TOL, svp_residual, svp_step, svt_step, CompletionInstance, CompletionScheme};
pub use feasibility::{alternating_projection_step, build_feasibility, FeasibilityInstance, FeasibilityScheme};
pub use sparse_ls::{build_sparse_ls, SparseLsInstance, SparseLsScheme};

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{PdrError, Result};
use crate::splitting::{
    check_alpha, gamma_threshold, run_solver, PdrConfig, Safeguard, SolveTrace, SplittingScheme,
    Termination,
};

/// Success threshold on `½ d_C²` for feasibility runs.
pub const FEASIBILITY_SUCCESS: f64 = 1e-12;

/// Step-size factor of the shifted Peaceman–Rachford start, `γ = 0.93 / (βL)`.
pub const PR_START_FACTOR: f64 = 0.93;

pub const DEFAULT_BETA: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeVariant {
    /// α-parameterized iteration with `g − ((2−α)/2γ)‖·‖²`; `α = 2` is classical DR.
    PdrRegularizedG { alpha: f64 },
    /// Peaceman–Rachford with `β`-strongly-convexified `f`.
    PrShifted { beta: f64 },
    AlternatingProjection,
    /// Projected gradient with step `1/(p√t)`.
    Svp,
    /// Singular value thresholding; `None` picks `τ = 5n`, `δ = 1.2/p`.
    Svt { tau: Option<f64>, delta: Option<f64> },
    /// α-parameterized iteration with the plain indicator `g`.
    PdrPlainG { alpha: f64 },
}

impl SchemeVariant {
    pub fn dr() -> Self {
        SchemeVariant::PdrRegularizedG { alpha: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SchemeVariant::PdrRegularizedG { alpha } | SchemeVariant::PdrPlainG { alpha } => {
                check_alpha(alpha)
            }
            SchemeVariant::PrShifted { beta } if !(beta > 2.0) => Err(PdrError::InvalidParameter(
                format!("shifted PR requires beta > 2, got {beta}"),
            )),
            SchemeVariant::Svt { tau, delta } => {
                if tau.is_some_and(|t| !(t > 0.0)) || delta.is_some_and(|d| !(d > 0.0)) {
                    Err(PdrError::InvalidParameter("SVT needs tau > 0 and delta > 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// The α the iteration runs with, if it has one.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            SchemeVariant::PdrRegularizedG { alpha } | SchemeVariant::PdrPlainG { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Whether the variant has a step size at all.
    pub fn uses_gamma(&self) -> bool {
        matches!(
            self,
            SchemeVariant::PdrRegularizedG { .. }
                | SchemeVariant::PdrPlainG { .. }
                | SchemeVariant::PrShifted { .. }
        )
    }
}

impl fmt::Display for SchemeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SchemeVariant::PdrRegularizedG { alpha: 2.0 } => write!(f, "DR"),
            SchemeVariant::PdrRegularizedG { alpha } => write!(f, "PDR({alpha})"),
            SchemeVariant::PdrPlainG { alpha } => write!(f, "PDR2({alpha})"),
            SchemeVariant::PrShifted { .. } => write!(f, "PR"),
            SchemeVariant::AlternatingProjection => write!(f, "ALT"),
            SchemeVariant::Svp => write!(f, "SVP"),
            SchemeVariant::Svt { .. } => write!(f, "SVT"),
        }
    }
}

/// Safeguard threshold for shifted PR: `γ₁ = (β−2)/((β+1)² L)`.
pub fn pr_threshold(beta: f64, lipschitz: f64) -> f64 {
    (beta - 2.0) / ((beta + 1.0) * (beta + 1.0) * lipschitz)
}

/// Threshold and initial-step factor for a variant, so that the driver starts at
/// `k · threshold`.
///
/// The α-variants use `(γ₀, k)`. Shifted PR starts at `0.93/(βL)` and guards against
/// `γ₁`. Methods without a step size get a nominal `(1, 1)`.
pub fn step_plan(variant: &SchemeVariant, lipschitz: f64, weak_convexity: f64, k: f64) -> Result<(f64, f64)> {
    match *variant {
        SchemeVariant::PdrRegularizedG { alpha } | SchemeVariant::PdrPlainG { alpha } => {
            Ok((gamma_threshold(alpha, lipschitz, weak_convexity)?, k))
        }
        SchemeVariant::PrShifted { beta } => {
            let threshold = pr_threshold(beta, lipschitz);
            let start = PR_START_FACTOR / (beta * lipschitz);
            Ok((threshold, start / threshold))
        }
        _ => Ok((1.0, 1.0)),
    }
}

/// Driver settings shared by every family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub k: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub safeguard: Safeguard,
    pub record_merit: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            k: 1.0,
            tol: 1e-8,
            max_iter: 10_000,
            safeguard: Safeguard::default(),
            record_merit: false,
        }
    }
}

impl SolveOptions {
    pub fn with_k(k: f64) -> Self {
        SolveOptions {
            k,
            ..SolveOptions::default()
        }
    }
}

/// Metrics of one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub iterations: usize,
    /// Objective at the feasible block `v`.
    pub fval: f64,
    pub success: bool,
    /// Completion only, and only when the ground truth is known.
    pub rel_err: Option<f64>,
    pub wall_time: f64,
    pub termination: Termination,
}

/// A problem family instance that can build schemes and score runs.
pub trait Instance {
    type Scheme<'a>: SplittingScheme
    where
        Self: 'a;

    fn dim(&self) -> usize;

    fn lipschitz(&self) -> f64;

    fn build<'a>(&'a self, variant: &SchemeVariant, gamma: f64) -> Result<Self::Scheme<'a>>;

    fn evaluate_run(&self, trace: &SolveTrace) -> RunMetrics;
}

/// Score a finished run against its instance.
pub fn evaluate_run<I: Instance>(inst: &I, trace: &SolveTrace) -> RunMetrics {
    inst.evaluate_run(trace)
}

/// Build the variant's scheme and run it from the origin.
pub fn solve<I: Instance>(inst: &I, variant: &SchemeVariant, opts: &SolveOptions) -> Result<SolveTrace> {
    variant.validate()?;
    let (threshold, k) = step_plan(variant, inst.lipschitz(), 0.0, opts.k)?;
    let cfg = PdrConfig {
        alpha: variant.alpha().unwrap_or(2.0),
        k,
        tol: opts.tol,
        max_iter: opts.max_iter,
        safeguard: opts.safeguard,
    };
    let mut scheme = inst.build(variant, k * threshold)?;
    let x0 = DVector::zeros(inst.dim());
    run_solver(&mut scheme, &x0, &cfg, threshold, opts.record_merit)
}

pub(crate) fn finished(trace: &SolveTrace) -> bool {
    trace.termination == Termination::Converged
}

pub(crate) fn unsupported(variant: &SchemeVariant, family: &'static str) -> PdrError {
    PdrError::UnsupportedVariant {
        variant: variant.to_string(),
        family,
    }
}
