//! Step-size threshold, descent constant and the divergence safeguard.

use nalgebra::DVector;

use crate::error::{PdrError, Result};
use crate::splitting::Safeguard;

/// Left-hand side of the step-size condition; the descent argument needs it negative.
pub fn step_condition(alpha: f64, gamma: f64, lipschitz: f64, weak_convexity: f64) -> f64 {
    let shift = 1.0 + gamma * lipschitz;
    0.5 * (4.0 - alpha) * shift * shift + 0.5 * (9.0 - 2.0 * alpha) * gamma * weak_convexity
        - 0.5 * (1.0 + alpha)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.5 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(PdrError::InvalidAlpha(alpha))
    }
}

/// Largest step size `γ₀` such that every `γ ∈ (0, γ₀)` gives a strictly decreasing merit.
///
/// This is the positive root of the quadratic `a γ² + b γ + c` obtained by expanding
/// [`step_condition`]; `c = (3 - 2α)/2 < 0` for admissible `α`, so the root exists.
pub fn gamma_threshold(alpha: f64, lipschitz: f64, weak_convexity: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(PdrError::NonPositiveLipschitz(lipschitz));
    }
    if !weak_convexity.is_finite() {
        return Err(PdrError::InvalidParameter(format!(
            "weak-convexity modulus must be finite, got {weak_convexity}"
        )));
    }
    let a = 0.5 * (4.0 - alpha) * lipschitz * lipschitz;
    let b = (4.0 - alpha) * lipschitz + 0.5 * (9.0 - 2.0 * alpha) * weak_convexity;
    let c = 0.5 * (3.0 - 2.0 * alpha);
    let disc = (b * b - 4.0 * a * c).sqrt();
    // Pick the cancellation-free form of the same root.
    let root = if b >= 0.0 {
        -2.0 * c / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    };
    let residual = step_condition(alpha, root, lipschitz, weak_convexity);
    if residual.abs() > 1e-12 {
        return Err(PdrError::InvalidParameter(format!(
            "step-size threshold residual {residual:e} exceeds 1e-12"
        )));
    }
    Ok(root)
}

/// Per-step merit decrease constant `A`; positive exactly when `γ` is below the threshold.
pub fn descent_constant(alpha: f64, gamma: f64, lipschitz: f64, weak_convexity: f64) -> f64 {
    -step_condition(alpha, gamma, lipschitz, weak_convexity) / gamma
}

/// Core of the safeguard on precomputed block statistics.
///
/// `change` is the (possibly scaled) norm of the block difference and `sup_norm` the
/// largest absolute entry of the current block.
pub fn safeguard_update(
    gamma: f64,
    gamma0: f64,
    change: f64,
    sup_norm: f64,
    t: usize,
    cfg: &Safeguard,
) -> f64 {
    let diverging = change > cfg.div_coeff / t.max(1) as f64 || sup_norm > cfg.inf_cap;
    if gamma > gamma0 && diverging {
        (cfg.shrink * gamma).max(cfg.floor_factor * gamma0)
    } else {
        gamma
    }
}

/// Shrink `γ` toward the threshold when it is above it and the second block is blowing up.
pub fn gamma_safeguard(
    gamma: f64,
    gamma0: f64,
    v_cur: &DVector<f64>,
    v_prev: &DVector<f64>,
    t: usize,
    cfg: &Safeguard,
) -> f64 {
    let change = (v_cur - v_prev).norm();
    safeguard_update(gamma, gamma0, change, v_cur.amax(), t, cfg)
}
