//! Generic parameterized Douglas–Rachford iteration.
//!
//! A run keeps the triple `(u, v, x)`:
//!
//! ```text
//! u⁺ = prox_{γf}(x)
//! v⁺ = prox_{γg}(α u⁺ − x)
//! x⁺ = x + (v⁺ − u⁺)
//! ```
//!
//! with `α ∈ (3/2, 2]`; `α = 2` is classical Douglas–Rachford. Problem families plug in
//! through [`SplittingScheme`], which may also replace the step entirely (Peaceman–Rachford,
//! alternating projections, SVP, SVT) while reusing the driver, safeguard and diagnostics.

mod closure;
mod driver;
mod merit;
mod step_size;

pub use closure::ClosureScheme;
pub use driver::{pdr_step, relative_change_stop, run_solver};
pub use merit::{merit_forms, merit_value, MeritBreakdown};
pub use step_size::{
    descent_constant, gamma_safeguard, gamma_threshold, safeguard_update, step_condition,
};

pub(crate) use step_size::check_alpha;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{PdrError, Result};

/// Iterate of the splitting method. Matrices are flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTriple {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub x: DVector<f64>,
    pub t: usize,
}

impl IterateTriple {
    /// Starting triple: all three blocks equal to `x0`, iteration 0.
    pub fn start(x0: &DVector<f64>) -> Self {
        IterateTriple {
            u: x0.clone(),
            v: x0.clone(),
            x: x0.clone(),
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).chain(self.x.iter()).all(|z| z.is_finite())
    }
}

/// Which block (and scaling) the divergence safeguard inspects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceProbe {
    /// `‖v_t − v_{t−1}‖` and `‖v_t‖_∞`.
    SecondBlock,
    /// `‖u_t − u_{t−1}‖ · scale` and `‖u_t‖_∞`.
    FirstBlockScaled(f64),
}

/// One iteration of a splitting method plus the value oracles used by the diagnostics.
pub trait SplittingScheme {
    fn dim(&self) -> usize;

    /// Advance `state` by one iteration at step size `gamma`. Must be deterministic.
    fn step(&mut self, state: &IterateTriple, gamma: f64) -> Result<IterateTriple>;

    fn f_val(&self, z: &DVector<f64>) -> f64;

    /// Extended-real value of `g`; `+∞` off the feasible set for indicator-type `g`.
    fn g_val(&self, z: &DVector<f64>) -> f64;

    /// Step-size dependent quadratic added to `g` by regularized variants.
    fn g_regularizer(&self, _z: &DVector<f64>, _gamma: f64) -> f64 {
        0.0
    }

    fn grad_f(&self, z: &DVector<f64>) -> DVector<f64>;

    /// Lipschitz modulus of `∇f`.
    fn lipschitz(&self) -> f64;

    /// `l` such that `f + (l/2)‖·‖²` is convex.
    fn weak_convexity(&self) -> f64 {
        0.0
    }

    /// `Some(α)` when the step is the α-parameterized iteration and the merit applies.
    fn merit_alpha(&self) -> Option<f64> {
        None
    }

    /// Rebuild any `γ`-dependent caches. Called before the first step and after every change.
    fn set_gamma(&mut self, _gamma: f64) -> Result<()> {
        Ok(())
    }

    /// `None` disables the step-size safeguard (methods without a `γ`).
    fn divergence_probe(&self) -> Option<DivergenceProbe> {
        Some(DivergenceProbe::SecondBlock)
    }

    fn should_stop(&self, prev: &IterateTriple, cur: &IterateTriple, tol: f64) -> bool {
        relative_change_stop(prev, cur, tol)
    }
}

impl<S: SplittingScheme + ?Sized> SplittingScheme for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn step(&mut self, state: &IterateTriple, gamma: f64) -> Result<IterateTriple> {
        (**self).step(state, gamma)
    }
    fn f_val(&self, z: &DVector<f64>) -> f64 {
        (**self).f_val(z)
    }
    fn g_val(&self, z: &DVector<f64>) -> f64 {
        (**self).g_val(z)
    }
    fn g_regularizer(&self, z: &DVector<f64>, gamma: f64) -> f64 {
        (**self).g_regularizer(z, gamma)
    }
    fn grad_f(&self, z: &DVector<f64>) -> DVector<f64> {
        (**self).grad_f(z)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn weak_convexity(&self) -> f64 {
        (**self).weak_convexity()
    }
    fn merit_alpha(&self) -> Option<f64> {
        (**self).merit_alpha()
    }
    fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        (**self).set_gamma(gamma)
    }
    fn divergence_probe(&self) -> Option<DivergenceProbe> {
        (**self).divergence_probe()
    }
    fn should_stop(&self, prev: &IterateTriple, cur: &IterateTriple, tol: f64) -> bool {
        (**self).should_stop(prev, cur, tol)
    }
}

/// Step-size safeguard parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Safeguard {
    pub div_coeff: f64,
    pub inf_cap: f64,
    pub shrink: f64,
    pub floor_factor: f64,
}

impl Default for Safeguard {
    fn default() -> Self {
        Safeguard {
            div_coeff: 1000.0,
            inf_cap: 1e10,
            shrink: 0.5,
            floor_factor: 0.9999,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdrConfig {
    /// Reflection parameter; must match the scheme's own `α` when it has one.
    pub alpha: f64,
    /// Initial step size is `k · γ₀`.
    pub k: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub safeguard: Safeguard,
}

impl Default for PdrConfig {
    fn default() -> Self {
        PdrConfig {
            alpha: 2.0,
            k: 1.0,
            tol: 1e-8,
            max_iter: 10_000,
            safeguard: Safeguard::default(),
        }
    }
}

impl PdrConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        PdrConfig {
            alpha,
            ..PdrConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let bad = |what: &str| Err(PdrError::InvalidParameter(what.to_string()));
        if !(self.k >= 1.0) || !self.k.is_finite() {
            return bad("k must be a finite value >= 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        let sg = &self.safeguard;
        if !(sg.shrink > 0.0 && sg.shrink < 1.0) {
            return bad("safeguard shrink must lie in (0, 1)");
        }
        if !(sg.floor_factor > 0.0 && sg.floor_factor < 1.0) {
            return bad("safeguard floor_factor must lie in (0, 1)");
        }
        if !(sg.div_coeff > 0.0) || !(sg.inf_cap > 0.0) {
            return bad("safeguard thresholds must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIter,
    Diverged,
}

/// Norms of the block increments produced by one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNorms {
    pub du: f64,
    pub dv: f64,
    pub dx: f64,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub iterations: usize,
    pub final_state: IterateTriple,
    /// Merit after each step; empty when recording is off or the scheme has no merit.
    pub merit_history: Vec<f64>,
    /// `‖v − u‖` after each step.
    pub residual_history: Vec<f64>,
    /// `(t, γ)` pairs: the initial step size at `t = 0`, then every safeguard change.
    pub gamma_history: Vec<(usize, f64)>,
    /// Increment norms after each step; entry `i` compares iterate `i + 1` with iterate `i`.
    pub step_history: Vec<StepNorms>,
    pub termination: Termination,
    pub wall_time: f64,
}

impl SolveTrace {
    pub fn final_gamma(&self) -> f64 {
        self.gamma_history.last().map(|&(_, g)| g).unwrap_or(f64::NAN)
    }

    /// Whether `γ` stayed at its initial value for the whole run.
    pub fn constant_gamma(&self) -> bool {
        self.gamma_history.len() <= 1
    }
}
