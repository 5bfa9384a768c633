use nalgebra::DVector;

use crate::error::{PdrError, Result};
use crate::splitting::{IterateTriple, SplittingScheme};

/// Merit value evaluated through three algebraically identical expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritBreakdown {
    /// `f(u) + g(v) − ‖u−v‖²/2γ + ⟨x − (α−1)u, v−u⟩/γ + (2−α)‖u‖²/2γ`.
    pub value_primary: f64,
    /// Completed-square form through `‖αu − v − x‖²`.
    pub value_alt1: f64,
    /// Difference-of-distances form through `‖x−u‖² − ‖x−v‖²`.
    pub value_alt2: f64,
    pub max_form_discrepancy: f64,
}

impl MeritBreakdown {
    fn infinite() -> Self {
        MeritBreakdown {
            value_primary: f64::INFINITY,
            value_alt1: f64::INFINITY,
            value_alt2: f64::INFINITY,
            max_form_discrepancy: 0.0,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value_primary == f64::INFINITY
    }
}

/// Evaluate the three merit forms from precomputed `f(u)` and `g(v)`.
pub fn merit_forms(
    f_u: f64,
    g_v: f64,
    u: &DVector<f64>,
    v: &DVector<f64>,
    x: &DVector<f64>,
    gamma: f64,
    alpha: f64,
) -> MeritBreakdown {
    if g_v == f64::INFINITY {
        return MeritBreakdown::infinite();
    }
    let base = f_u + g_v;
    let inv = 1.0 / gamma;
    let reg = 0.5 * (2.0 - alpha) * inv * u.norm_squared();

    let v_minus_u = v - u;
    let shifted_x = x - u * (alpha - 1.0);
    let primary = base - 0.5 * inv * v_minus_u.norm_squared() + inv * shifted_x.dot(&v_minus_u) + reg;

    let reflected = u * alpha - v - x;
    let alt1 = base + 0.5 * inv * reflected.norm_squared()
        - 0.5 * inv * shifted_x.norm_squared()
        - inv * v_minus_u.norm_squared()
        + reg;

    let alt2 = base + 0.5 * inv * ((x - u).norm_squared() - (x - v).norm_squared())
        + inv * (2.0 - alpha) * u.dot(&v_minus_u)
        + reg;

    let discrepancy = (primary - alt1)
        .abs()
        .max((primary - alt2).abs())
        .max((alt1 - alt2).abs());
    MeritBreakdown {
        value_primary: primary,
        value_alt1: alt1,
        value_alt2: alt2,
        max_form_discrepancy: discrepancy,
    }
}

/// Merit of `state` under `scheme`, including any `γ`-dependent regularizer of `g`.
///
/// Returns an infinite breakdown when `v` is infeasible and
/// [`PdrError::FormMismatch`] when the forms disagree beyond `1e-6` relative.
pub fn merit_value<S: SplittingScheme + ?Sized>(
    scheme: &S,
    state: &IterateTriple,
    gamma: f64,
    alpha: f64,
) -> Result<MeritBreakdown> {
    if !(gamma > 0.0) {
        return Err(PdrError::InvalidParameter(format!(
            "merit requires gamma > 0, got {gamma}"
        )));
    }
    let g_v = scheme.g_val(&state.v);
    if g_v == f64::INFINITY {
        return Ok(MeritBreakdown::infinite());
    }
    let g_v = g_v + scheme.g_regularizer(&state.v, gamma);
    let f_u = scheme.f_val(&state.u);
    let m = merit_forms(f_u, g_v, &state.u, &state.v, &state.x, gamma, alpha);
    let scale = m.value_primary.abs().max(1.0);
    if m.max_form_discrepancy > 1e-6 * scale {
        return Err(PdrError::FormMismatch {
            discrepancy: m.max_form_discrepancy,
            scale,
        });
    }
    Ok(m)
}
